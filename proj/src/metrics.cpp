#include "mimir/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mimir/error.hpp"
#include "mimir/text.hpp"

namespace mimir {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_pair(std::span<const double> a, std::span<const double> b, std::size_t min_n, const char* what) {
    if (a.size() != b.size()) throw ValidationError(std::string(what) + ": inputs differ in length");
    if (a.size() < min_n) {
        throw ValidationError(std::string(what) + ": needs at least " + std::to_string(min_n) + " values");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i]) || !std::isfinite(b[i])) {
            throw ValidationError(std::string(what) + ": non-finite value at index " + std::to_string(i));
        }
    }
}

void check_labels(std::span<const double> labels, std::size_t& pos, std::size_t& neg, const char* what) {
    pos = neg = 0;
    for (double l : labels) {
        if (l == 1.0) ++pos;
        else if (l == 0.0) ++neg;
        else throw ValidationError(std::string(what) + ": labels must be 0 or 1");
    }
    if (pos == 0 || neg == 0) throw ValidationError(std::string(what) + ": both classes must be present");
}

}  // namespace

IccResult icc_2_1(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y, 3, "icc_2_1");
    const std::size_t n = x.size();
    const double dn = static_cast<double>(n);
    const double k = 2.0;
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_x += x[i];
        mean_y += y[i];
    }
    mean_x /= dn;
    mean_y /= dn;
    const double grand = (mean_x + mean_y) / 2.0;

    double ss_rows = 0.0;
    double ss_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double row = (x[i] + y[i]) / 2.0;
        ss_rows += (row - grand) * (row - grand);
        const double ex = x[i] - row - mean_x + grand;
        const double ey = y[i] - row - mean_y + grand;
        ss_err += ex * ex + ey * ey;
    }
    ss_rows *= k;
    const double ss_cols = dn * ((mean_x - grand) * (mean_x - grand) + (mean_y - grand) * (mean_y - grand));

    const double msr = ss_rows / (dn - 1.0);
    const double msc = ss_cols / (k - 1.0);
    const double mse = ss_err / ((dn - 1.0) * (k - 1.0));
    const double denom = msr + (k - 1.0) * mse + (k / dn) * (msc - mse);
    if (denom == 0.0) return {0.0, true};
    return {(msr - mse) / denom, false};
}

double r_squared(std::span<const double> truth, std::span<const double> pred) {
    check_pair(truth, pred, 2, "r_squared");
    const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
    }
    if (ss_tot == 0.0) throw ValidationError("r_squared: truth is constant");
    return 1.0 - ss_res / ss_tot;
}

ErrorSummary mae_mape(std::span<const double> truth, std::span<const double> pred) {
    check_pair(truth, pred, 1, "mae_mape");
    ErrorSummary s;
    double abs_sum = 0.0;
    double rel_sum = 0.0;
    std::size_t rel_n = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double e = std::abs(truth[i] - pred[i]);
        abs_sum += e;
        if (truth[i] == 0.0) {
            ++s.zero_truths;
        } else {
            rel_sum += e / std::abs(truth[i]);
            ++rel_n;
        }
    }
    if (rel_n == 0) throw ValidationError("mae_mape: every truth is zero, MAPE undefined");
    s.mae = abs_sum / static_cast<double>(truth.size());
    s.mape = 100.0 * rel_sum / static_cast<double>(rel_n);
    return s;
}

double auc_roc(std::span<const double> labels, std::span<const double> scores) {
    check_pair(labels, scores, 2, "auc_roc");
    std::size_t pos = 0;
    std::size_t neg = 0;
    check_labels(labels, pos, neg, "auc_roc");

    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // sum of positive midranks (1-based)
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t m = i; m <= j; ++m) {
            if (labels[order[m]] == 1.0) rank_sum += midrank;
        }
        i = j + 1;
    }
    const double dp = static_cast<double>(pos);
    const double u = rank_sum - dp * (dp + 1.0) / 2.0;
    return u / (dp * static_cast<double>(neg));
}

Confusion confusion_at_threshold(std::span<const double> labels, std::span<const double> scores, double threshold) {
    check_pair(labels, scores, 2, "confusion_at_threshold");
    std::size_t pos = 0;
    std::size_t neg = 0;
    check_labels(labels, pos, neg, "confusion_at_threshold");
    std::size_t tp = 0;
    std::size_t tn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i] == 1.0 && predicted) ++tp;
        if (labels[i] == 0.0 && !predicted) ++tn;
    }
    return {static_cast<double>(tp) / static_cast<double>(pos), static_cast<double>(tn) / static_cast<double>(neg)};
}

std::string icc_flag(double icc) {
    if (icc > 0.90) return "excellent";
    if (icc > 0.75) return "good";
    return "poor";
}

TargetMetrics evaluate_target(const TargetSpec& target, std::span<const double> truth, std::span<const double> pred,
                              std::span<const double> low, std::span<const double> high) {
    if (truth.size() != pred.size()) throw ValidationError("evaluate_target: truth and predictions differ in length");
    const bool have_intervals = !low.empty() || !high.empty();
    if (have_intervals && (low.size() != truth.size() || high.size() != truth.size())) {
        throw ValidationError("evaluate_target: interval bounds differ in length");
    }
    TargetMetrics m;
    m.target = target.name;
    m.kind = target.kind;
    m.n = truth.size();
    m.icc = m.r2 = m.mae = m.mape = m.auc = m.coverage = m.sensitivity = m.specificity = kNaN;

    if (m.n >= 3) {
        const IccResult icc = icc_2_1(truth, pred);
        m.icc = icc.value;
        m.icc_degenerate = icc.degenerate;
    }
    const bool constant = m.n == 0 || std::all_of(truth.begin(), truth.end(), [&](double v) { return v == truth[0]; });
    if (m.n >= 2 && !constant) m.r2 = r_squared(truth, pred);
    if (m.n >= 1) {
        const bool all_zero = std::all_of(truth.begin(), truth.end(), [](double v) { return v == 0.0; });
        if (all_zero) {
            double s = 0.0;
            for (std::size_t i = 0; i < m.n; ++i) s += std::abs(truth[i] - pred[i]);
            m.mae = s / static_cast<double>(m.n);
            m.mape_skipped = m.n;
        } else {
            const ErrorSummary e = mae_mape(truth, pred);
            m.mae = e.mae;
            m.mape = e.mape;
            m.mape_skipped = e.zero_truths;
        }
    }
    if (target.kind == TargetKind::binary && m.n >= 2 && !constant) {
        m.auc = auc_roc(truth, pred);
        const Confusion c = confusion_at_threshold(truth, pred, kBinaryThreshold);
        m.sensitivity = c.sensitivity;
        m.specificity = c.specificity;
    }
    if (have_intervals && m.n > 0) {
        std::size_t inside = 0;
        for (std::size_t i = 0; i < m.n; ++i) {
            if (truth[i] >= low[i] && truth[i] <= high[i]) ++inside;
        }
        m.coverage = static_cast<double>(inside) / static_cast<double>(m.n);
    }
    m.flag = std::isnan(m.icc) ? "undefined" : icc_flag(m.icc);
    return m;
}

std::string MetricsReport::to_csv() const {
    std::ostringstream out;
    out << "target,n,icc,r2,mae,mape,auc,coverage,sensitivity,specificity,icc_flag\n";
    for (const auto& r : rows) {
        out << r.target << ',' << r.n << ',' << format_double(r.icc) << ',' << format_double(r.r2) << ','
            << format_double(r.mae) << ',' << format_double(r.mape) << ',' << format_double(r.auc) << ','
            << format_double(r.coverage) << ',' << format_double(r.sensitivity) << ','
            << format_double(r.specificity) << ',' << r.flag << '\n';
    }
    return out.str();
}

const TargetMetrics* MetricsReport::find(std::string_view target) const {
    for (const auto& r : rows) {
        if (r.target == target) return &r;
    }
    return nullptr;
}

}  // namespace mimir
