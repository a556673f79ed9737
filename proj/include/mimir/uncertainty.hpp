#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mimir {

inline constexpr std::size_t kMinCalibrationPoints = 10;

struct CalibrationFactors {
    std::string source;  // e.g. "fold 3"
    std::vector<double> factor;
    std::vector<std::size_t> n_points;
    std::vector<std::uint8_t> calibrated;

    std::size_t size() const { return factor.size(); }
    /// Factor 1 for every target, none calibrated.
    static CalibrationFactors identity(std::size_t n_targets, std::string source = "none");

    bool operator==(const CalibrationFactors&) const = default;
};

/// Per target t: s_t = sqrt(mean over known rows of (y - mu)^2 / sigma^2).
/// All spans are N x T row-major; sigma is the uncalibrated standard deviation in target units.
/// Targets with fewer than kMinCalibrationPoints known rows keep factor 1 and are flagged.
CalibrationFactors fit_calibration(std::span<const double> mu, std::span<const double> sigma,
                                   std::span<const double> y, std::span<const std::uint8_t> masks,
                                   std::size_t n_targets, std::string source = "");

/// Two-sided standard normal quantile for `level` in (0, 1).
double normal_quantile(double level);

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

Interval confidence_interval(double mu, double sigma_cal, double level);

/// Fraction of known truths inside their interval, bounds inclusive.
double coverage(std::span<const Interval> intervals, std::span<const double> truths,
                std::span<const std::uint8_t> masks);

/// CSV: target,factor,n_points.
std::string calibration_csv(const CalibrationFactors& factors, std::span<const std::string> targets);

}  // namespace mimir
