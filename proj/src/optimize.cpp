#include "optable/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "optable/parallel.hpp"

namespace optable {

namespace {

// Positions live in index space: coordinate i selects values[i][index].
struct IndexSpace {
    std::vector<std::vector<int>> values;

    explicit IndexSpace(const ParamSpace& space) {
        for (const ParamBound& b : space.params) values.push_back(b.values());
    }

    std::size_t dims() const { return values.size(); }
    int extent(std::size_t d) const { return static_cast<int>(values[d].size()); }

    std::vector<int> to_params(const std::vector<int>& index) const {
        std::vector<int> out(index.size());
        for (std::size_t d = 0; d < index.size(); ++d) out[d] = values[d][static_cast<std::size_t>(index[d])];
        return out;
    }

    std::vector<int> to_index(const std::vector<int>& params) const {
        std::vector<int> out(params.size());
        for (std::size_t d = 0; d < params.size(); ++d) {
            const auto& v = values[d];
            // nearest admissible value, ties to the smaller
            auto it = std::lower_bound(v.begin(), v.end(), params[d]);
            std::size_t i = static_cast<std::size_t>(it - v.begin());
            if (i == v.size()) {
                i = v.size() - 1;
            } else if (i > 0 && params[d] - v[i - 1] <= v[i] - params[d]) {
                --i;
            }
            out[d] = static_cast<int>(i);
        }
        return out;
    }
};

std::vector<int> repair_index(const ParamSpace& space, const IndexSpace& index_space, const std::vector<int>& start) {
    if (space.is_valid(index_space.to_params(start))) return start;
    std::set<std::vector<int>> seen{start};
    std::deque<std::vector<int>> frontier{start};
    while (!frontier.empty()) {
        const std::vector<int> current = frontier.front();
        frontier.pop_front();
        for (std::size_t d = 0; d < index_space.dims(); ++d) {
            for (int step : {-1, 1}) {
                std::vector<int> next = current;
                next[d] += step;
                if (next[d] < 0 || next[d] >= index_space.extent(d)) continue;
                if (!seen.insert(next).second) continue;
                if (space.is_valid(index_space.to_params(next))) return next;
                frontier.push_back(std::move(next));
            }
        }
    }
    throw std::runtime_error("parameter space has no valid point");
}

}  // namespace

std::vector<int> ParamBound::values() const {
    if (!admissible.empty()) {
        std::vector<int> v = admissible;
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    }
    std::vector<int> v(static_cast<std::size_t>(upper - lower + 1));
    std::iota(v.begin(), v.end(), lower);
    return v;
}

std::vector<std::string> ParamSpace::names() const {
    std::vector<std::string> out;
    for (const ParamBound& b : params) out.push_back(b.name);
    return out;
}

bool ParamSpace::is_valid(const std::vector<int>& point) const { return !valid || valid(point); }

void validate(const ParamSpace& space) {
    if (space.params.empty()) throw std::invalid_argument("parameter space is empty");
    for (const ParamBound& b : space.params) {
        if (b.admissible.empty() && b.lower > b.upper) {
            throw std::invalid_argument("parameter " + b.name + " has empty bounds");
        }
    }
}

std::vector<int> repair(const ParamSpace& space, const std::vector<int>& point) {
    validate(space);
    const IndexSpace index_space(space);
    if (point.size() != index_space.dims()) throw std::invalid_argument("repair: dimension mismatch");
    return index_space.to_params(repair_index(space, index_space, index_space.to_index(point)));
}

void validate(const SwarmConfig& config) {
    if (config.swarm_size < 2) throw std::invalid_argument("swarm_size must be >= 2");
    if (config.iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (!(config.inertia > 0.0 && config.inertia <= 1.0)) throw std::invalid_argument("inertia must be in (0,1]");
    if (!(config.cognitive > 0.0) || !(config.social > 0.0)) throw std::invalid_argument("c1 and c2 must be > 0");
}

OptimizeResult dpso_optimize(const ParamSpace& space, const Objective& objective, const SwarmConfig& config) {
    validate(space);
    validate(config);
    const IndexSpace index_space(space);
    const std::size_t dims = index_space.dims();
    const auto swarm = static_cast<std::size_t>(config.swarm_size);
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<std::vector<int>> position(swarm, std::vector<int>(dims));
    std::vector<std::vector<double>> velocity(swarm, std::vector<double>(dims));
    std::vector<std::vector<int>> personal_best(swarm);
    std::vector<double> personal_score(swarm, -std::numeric_limits<double>::infinity());
    std::map<std::vector<int>, double> memo;
    OptimizeResult result;
    result.best_score = -std::numeric_limits<double>::infinity();

    for (std::size_t p = 0; p < swarm; ++p) {
        for (std::size_t d = 0; d < dims; ++d) {
            const int extent = index_space.extent(d);
            position[p][d] = std::uniform_int_distribution<int>(0, extent - 1)(rng);
            const double reach = 0.25 * (extent - 1);
            velocity[p][d] = reach > 0.0 ? (2.0 * unit(rng) - 1.0) * reach : 0.0;
        }
        position[p] = repair_index(space, index_space, position[p]);
    }

    // Evaluates all uncached positions (possibly concurrently), then folds
    // scores in particle order so the outcome never depends on scheduling.
    auto evaluate_swarm = [&](int iteration) {
        std::vector<std::vector<int>> pending;
        for (const auto& pos : position) {
            const auto params = index_space.to_params(pos);
            if (!memo.count(params) && std::find(pending.begin(), pending.end(), params) == pending.end()) {
                pending.push_back(params);
            }
        }
        std::vector<double> scores(pending.size());
        parallel_for(pending.size(), config.threads, [&](std::size_t i) { scores[i] = objective(pending[i]); });
        for (std::size_t i = 0; i < pending.size(); ++i) {
            memo.emplace(pending[i], scores[i]);
            result.evaluations.push_back(Evaluation{pending[i], scores[i]});
        }
        for (std::size_t p = 0; p < swarm; ++p) {
            const auto params = index_space.to_params(position[p]);
            const double score = memo.at(params);
            if (score > personal_score[p]) {
                personal_score[p] = score;
                personal_best[p] = position[p];
            }
            if (score > result.best_score) {
                result.best_score = score;
                result.best_params = params;
            }
        }
        result.trace.push_back(TraceEntry{iteration, result.best_score, result.best_params});
    };

    evaluate_swarm(0);
    for (int it = 1; it <= config.iterations; ++it) {
        const std::vector<int> global_best = index_space.to_index(result.best_params);
        for (std::size_t p = 0; p < swarm; ++p) {
            for (std::size_t d = 0; d < dims; ++d) {
                const double r1 = unit(rng);
                const double r2 = unit(rng);
                const double extent = index_space.extent(d);
                double v = config.inertia * velocity[p][d] +
                           config.cognitive * r1 * (personal_best[p][d] - position[p][d]) +
                           config.social * r2 * (global_best[d] - position[p][d]);
                v = std::clamp(v, -extent, extent);
                velocity[p][d] = v;
                const double moved = std::round(position[p][d] + v);
                position[p][d] = static_cast<int>(std::clamp(moved, 0.0, extent - 1.0));
            }
            position[p] = repair_index(space, index_space, position[p]);
        }
        evaluate_swarm(it);
    }
    return result;
}

GridResult random_grid_search(std::span<const int> candidates, const std::function<double(int)>& objective, int n_draws,
                              std::uint64_t seed) {
    if (candidates.empty()) throw std::invalid_argument("grid search: empty candidate list");
    if (n_draws < 1) throw std::invalid_argument("grid search: n_draws must be >= 1");
    std::vector<int> order(candidates.begin(), candidates.end());
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(std::min(order.size(), static_cast<std::size_t>(n_draws)));

    GridResult result;
    bool first = true;
    for (int value : order) {
        const double score = objective(value);
        result.evaluated.emplace_back(value, score);
        if (first || score > result.best_score || (score == result.best_score && value < result.best_value)) {
            result.best_value = value;
            result.best_score = score;
            first = false;
        }
    }
    return result;
}

void write_trace_csv(const std::filesystem::path& path, std::span<const std::string> names,
                     std::span<const TraceEntry> trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace: " + path.string());
    out << "iteration,best_score";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    char buf[32];
    for (const TraceEntry& e : trace) {
        std::snprintf(buf, sizeof(buf), "%.6f", e.best_score);
        out << e.iteration << ',' << buf;
        for (int v : e.best_params) out << ',' << v;
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing trace: " + path.string());
}

}  // namespace optable
