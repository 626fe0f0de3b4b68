#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace optable {

/// One integer hyperparameter: the closed range [lower, upper], or the
/// explicit admissible list when one is given.
struct ParamBound {
    std::string name;
    int lower{0};
    int upper{0};
    std::vector<int> admissible;

    /// Candidate values in increasing order.
    std::vector<int> values() const;
};

struct ParamSpace {
    std::vector<ParamBound> params;
    /// Extra feasibility test on a full parameter vector; empty means all valid.
    std::function<bool(const std::vector<int>&)> valid;

    std::vector<std::string> names() const;
    bool is_valid(const std::vector<int>& point) const;
};

void validate(const ParamSpace& space);

/// Nearest valid point in index steps (breadth-first, fixed neighbor order).
/// Throws std::runtime_error when no valid point exists.
std::vector<int> repair(const ParamSpace& space, const std::vector<int>& point);

struct SwarmConfig {
    int swarm_size{20};
    int iterations{30};
    double inertia{0.7};
    double cognitive{1.5};
    double social{1.5};
    std::uint64_t seed{0};
    /// Objective evaluations of one iteration may run on up to this many threads.
    int threads{1};
};

void validate(const SwarmConfig& config);

using Objective = std::function<double(const std::vector<int>&)>;

struct TraceEntry {
    int iteration{0};
    double best_score{0.0};
    std::vector<int> best_params;
};

struct Evaluation {
    std::vector<int> params;
    double score{0.0};
};

struct OptimizeResult {
    std::vector<int> best_params;
    double best_score{0.0};
    /// Entry 0 is the initial swarm, then one per iteration.
    std::vector<TraceEntry> trace;
    /// Distinct objective calls in evaluation order.
    std::vector<Evaluation> evaluations;
};

/// Discrete PSO: continuous velocity updates over per-parameter value
/// indices, positions rounded, clamped, and repaired to validity. The
/// objective is maximized and memoized per parameter vector.
OptimizeResult dpso_optimize(const ParamSpace& space, const Objective& objective, const SwarmConfig& config);

struct GridResult {
    int best_value{0};
    double best_score{0.0};
    std::vector<std::pair<int, double>> evaluated;
};

/// Evaluates n_draws distinct candidates drawn at random (all of them when
/// n_draws >= candidates.size()) and returns the argmax, ties to the smaller value.
GridResult random_grid_search(std::span<const int> candidates, const std::function<double(int)>& objective, int n_draws,
                              std::uint64_t seed);

/// CSV: iteration,best_score,<one column per parameter>.
void write_trace_csv(const std::filesystem::path& path, std::span<const std::string> names,
                     std::span<const TraceEntry> trace);

}  // namespace optable
