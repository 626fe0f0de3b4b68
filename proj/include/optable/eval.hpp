#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "optable/imaging.hpp"

namespace optable {

struct RocPoint {
    double fpr{0.0};
    double tpr{0.0};
};

/// Threshold sweep from the highest score down; starts at (0,0), ends at (1,1).
struct RocCurve {
    std::vector<RocPoint> points;
};

struct AzScore {
    double value{0.0};
    std::size_t positives{0};
    std::size_t negatives{0};
};

/// Raised when the ground truth holds a single class and Az is undefined.
class UndefinedScoreError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

RocCurve roc_curve(std::span<const double> scores, std::span<const std::uint8_t> truth);

/// Trapezoidal area under the ROC curve; equals the tie-corrected
/// Mann-Whitney statistic.
AzScore roc_az(std::span<const double> scores, std::span<const std::uint8_t> truth);
AzScore roc_az(const ProbabilityMap& map, const BinaryMask& truth);

struct ScoreSummary {
    double mean{0.0};
    double stddev{0.0};  // population (n divisor)
};

ScoreSummary aggregate_scores(std::span<const AzScore> scores);
ScoreSummary aggregate_values(std::span<const double> values);

/// "0.982 / 0.015" style line.
std::string format_summary(const ScoreSummary& summary);

}  // namespace optable
