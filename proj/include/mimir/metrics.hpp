#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mimir/dataset.hpp"

namespace mimir {

struct IccResult {
    double value = 0.0;
    bool degenerate = false;  // zero denominator, value set to 0
};

/// ICC(2,1): two-way random effects, absolute agreement, single rater, from the k = 2
/// two-way ANOVA. Symmetric in its arguments. Requires n >= 3 finite pairs.
IccResult icc_2_1(std::span<const double> x, std::span<const double> y);

/// 1 - SS_res / SS_tot. Throws on constant truth or n < 2.
double r_squared(std::span<const double> truth, std::span<const double> pred);

struct ErrorSummary {
    double mae = 0.0;
    double mape = 0.0;             // percent, over nonzero truths
    std::size_t zero_truths = 0;   // entries skipped by MAPE
};

/// Throws when empty or when every truth is zero.
ErrorSummary mae_mape(std::span<const double> truth, std::span<const double> pred);

/// Mann-Whitney AUC via midranks; tied pairs count one half.
double auc_roc(std::span<const double> labels, std::span<const double> scores);

struct Confusion {
    double sensitivity = 0.0;
    double specificity = 0.0;
};

/// Predicted positive iff score >= threshold.
Confusion confusion_at_threshold(std::span<const double> labels, std::span<const double> scores, double threshold);

/// "excellent" above 0.90, "good" above 0.75, otherwise "poor".
std::string icc_flag(double icc);

inline constexpr double kBinaryThreshold = 0.5;

struct TargetMetrics {
    std::string target;
    TargetKind kind = TargetKind::continuous;
    std::size_t n = 0;
    double icc = 0.0;
    bool icc_degenerate = false;
    double r2 = 0.0;
    double mae = 0.0;
    double mape = 0.0;
    std::size_t mape_skipped = 0;
    double auc = 0.0;          // NaN for continuous targets
    double coverage = 0.0;     // NaN when no intervals were given
    double sensitivity = 0.0;  // NaN for continuous targets
    double specificity = 0.0;
    std::string flag;
};

struct MetricsReport {
    std::vector<TargetMetrics> rows;

    /// target,n,icc,r2,mae,mape,auc,coverage,sensitivity,specificity,icc_flag
    std::string to_csv() const;
    const TargetMetrics* find(std::string_view target) const;
};

/// Metrics for one target over the known rows. `low`/`high` may be empty (coverage is then NaN).
/// Metrics that are undefined for the data (too few rows, constant truth, one class) are NaN.
TargetMetrics evaluate_target(const TargetSpec& target, std::span<const double> truth, std::span<const double> pred,
                              std::span<const double> low, std::span<const double> high);

}  // namespace mimir
