#include "mimir/uncertainty.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "mimir/error.hpp"
#include "mimir/text.hpp"

namespace mimir {

CalibrationFactors CalibrationFactors::identity(std::size_t n_targets, std::string source) {
    CalibrationFactors f;
    f.source = std::move(source);
    f.factor.assign(n_targets, 1.0);
    f.n_points.assign(n_targets, 0);
    f.calibrated.assign(n_targets, 0);
    return f;
}

CalibrationFactors fit_calibration(std::span<const double> mu, std::span<const double> sigma,
                                   std::span<const double> y, std::span<const std::uint8_t> masks,
                                   std::size_t n_targets, std::string source) {
    if (n_targets == 0) throw ValidationError("fit_calibration needs at least one target");
    const std::size_t n = mu.size();
    if (sigma.size() != n || y.size() != n || masks.size() != n || n % n_targets != 0) {
        throw ValidationError("fit_calibration inputs must share one N x T shape");
    }
    CalibrationFactors f = CalibrationFactors::identity(n_targets, std::move(source));
    const std::size_t rows = n / n_targets;
    for (std::size_t t = 0; t < n_targets; ++t) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < rows; ++i) {
            const std::size_t j = i * n_targets + t;
            if (!masks[j]) continue;
            if (!(sigma[j] > 0.0) || !std::isfinite(sigma[j]) || !std::isfinite(mu[j]) || !std::isfinite(y[j])) {
                throw ValidationError("fit_calibration: non-finite value or non-positive sigma at row " +
                                      std::to_string(i));
            }
            const double z = (y[j] - mu[j]) / sigma[j];
            sum += z * z;
            ++count;
        }
        f.n_points[t] = count;
        if (count < kMinCalibrationPoints) {
            std::cerr << "warning: target " << t << " has " << count << " calibration points; left uncalibrated\n";
            continue;
        }
        const double s = std::sqrt(sum / static_cast<double>(count));
        if (!(s > 0.0) || !std::isfinite(s)) {
            std::cerr << "warning: target " << t << " has a degenerate calibration factor; left uncalibrated\n";
            continue;
        }
        f.factor[t] = s;
        f.calibrated[t] = 1;
    }
    return f;
}

double normal_quantile(double level) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must be in (0, 1)");
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, 0.5 + level / 2.0);
}

Interval confidence_interval(double mu, double sigma_cal, double level) {
    if (!(sigma_cal >= 0.0)) throw ValidationError("sigma must be >= 0");
    const double half = normal_quantile(level) * sigma_cal;
    return {mu - half, mu + half};
}

double coverage(std::span<const Interval> intervals, std::span<const double> truths,
                std::span<const std::uint8_t> masks) {
    if (intervals.size() != truths.size() || masks.size() != truths.size()) {
        throw ValidationError("coverage inputs must have equal lengths");
    }
    std::size_t known = 0;
    std::size_t inside = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (!masks[i]) continue;
        ++known;
        if (truths[i] >= intervals[i].low && truths[i] <= intervals[i].high) ++inside;
    }
    if (known == 0) throw ValidationError("coverage needs at least one known truth");
    return static_cast<double>(inside) / static_cast<double>(known);
}

std::string calibration_csv(const CalibrationFactors& factors, std::span<const std::string> targets) {
    if (targets.size() != factors.size()) throw ValidationError("calibration_csv: target count mismatch");
    std::ostringstream out;
    out << "target,factor,n_points\n";
    for (std::size_t t = 0; t < targets.size(); ++t) {
        out << targets[t] << ',' << format_double(factors.factor[t]) << ',' << factors.n_points[t] << '\n';
    }
    return out.str();
}

}  // namespace mimir
