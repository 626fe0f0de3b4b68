#include "optable/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <utility>

namespace optable {

namespace {

struct Counts {
    std::size_t positives{0};
    std::size_t negatives{0};
};

// Sorted (score desc) view with per-threshold cumulative counts.
std::vector<std::pair<double, std::uint8_t>> sorted_by_score(std::span<const double> scores,
                                                              std::span<const std::uint8_t> truth, Counts& counts) {
    if (scores.size() != truth.size()) throw std::invalid_argument("roc: score and truth sizes differ");
    std::vector<std::pair<double, std::uint8_t>> items(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw std::invalid_argument("roc: non-finite score");
        const std::uint8_t label = truth[i] ? 1 : 0;
        items[i] = {scores[i], label};
        if (label) {
            ++counts.positives;
        } else {
            ++counts.negatives;
        }
    }
    if (counts.positives == 0 || counts.negatives == 0) {
        throw UndefinedScoreError("Az undefined: ground truth has " + std::to_string(counts.positives) +
                                  " positives and " + std::to_string(counts.negatives) + " negatives");
    }
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    return items;
}

}  // namespace

RocCurve roc_curve(std::span<const double> scores, std::span<const std::uint8_t> truth) {
    Counts counts;
    const auto items = sorted_by_score(scores, truth, counts);
    RocCurve curve;
    curve.points.push_back({0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < items.size();) {
        const double threshold = items[i].first;
        for (; i < items.size() && items[i].first == threshold; ++i) {
            if (items[i].second) {
                ++tp;
            } else {
                ++fp;
            }
        }
        curve.points.push_back({static_cast<double>(fp) / static_cast<double>(counts.negatives),
                                static_cast<double>(tp) / static_cast<double>(counts.positives)});
    }
    return curve;
}

AzScore roc_az(std::span<const double> scores, std::span<const std::uint8_t> truth) {
    Counts counts;
    const auto items = sorted_by_score(scores, truth, counts);
    // Integrate in counts to keep the sum exact until the final division:
    // area * P * N = sum over threshold steps of dFP * (TP_before + TP_after) / 2.
    double twice_area = 0.0;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < items.size();) {
        const double threshold = items[i].first;
        std::size_t step_tp = 0, step_fp = 0;
        for (; i < items.size() && items[i].first == threshold; ++i) {
            if (items[i].second) {
                ++step_tp;
            } else {
                ++step_fp;
            }
        }
        twice_area += static_cast<double>(step_fp) * static_cast<double>(2 * tp + step_tp);
        tp += step_tp;
    }
    AzScore score;
    score.positives = counts.positives;
    score.negatives = counts.negatives;
    score.value = std::clamp(
        twice_area / (2.0 * static_cast<double>(counts.positives) * static_cast<double>(counts.negatives)), 0.0, 1.0);
    return score;
}

AzScore roc_az(const ProbabilityMap& map, const BinaryMask& truth) {
    if (!map.same_shape(truth)) throw std::invalid_argument("roc_az: map and truth dimensions differ");
    return roc_az(map.values(), truth.values());
}

ScoreSummary aggregate_values(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("aggregate: no scores");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return ScoreSummary{mean, std::sqrt(ss / n)};
}

ScoreSummary aggregate_scores(std::span<const AzScore> scores) {
    std::vector<double> values;
    values.reserve(scores.size());
    for (const AzScore& s : scores) values.push_back(s.value);
    return aggregate_values(values);
}

std::string format_summary(const ScoreSummary& summary) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f / %.3f", summary.mean, summary.stddev);
    return buf;
}

}  // namespace optable
