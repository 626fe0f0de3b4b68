#include "optable/knn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace optable {

namespace {

constexpr int kCandidateDims = 5;
constexpr int kMeanSample = 128;

using Entry = std::pair<double, std::size_t>;  // (squared distance, insertion index)

/// Keeps the k smallest entries under (distance, index) ordering.
class TopK {
public:
    explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k + 1); }

    bool full() const { return heap_.size() >= k_; }

    void offer(double d2, std::size_t index) {
        const Entry e{d2, index};
        if (heap_.size() < k_) {
            heap_.push_back(e);
            std::push_heap(heap_.begin(), heap_.end());
        } else if (e < heap_.front()) {
            std::pop_heap(heap_.begin(), heap_.end());
            heap_.back() = e;
            std::push_heap(heap_.begin(), heap_.end());
        }
    }

    std::vector<Neighbor> sorted() {
        std::sort_heap(heap_.begin(), heap_.end());
        std::vector<Neighbor> out;
        out.reserve(heap_.size());
        for (const auto& [d2, idx] : heap_) out.push_back(Neighbor{idx, std::sqrt(d2)});
        return out;
    }

private:
    std::size_t k_;
    std::vector<Entry> heap_;
};

double squared_distance_raw(const double* a, const double* b) {
    double acc = 0.0;
    for (int i = 0; i < kDescriptorSize; ++i) {
        const double t = a[i] - b[i];
        acc += t * t;
    }
    return acc;
}

struct Branch {
    double bound;
    std::uint64_t sequence;
    int tree;
    int node;

    bool operator>(const Branch& o) const {
        return bound != o.bound ? bound > o.bound : sequence > o.sequence;
    }
};

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("point file truncated");
}

constexpr char kMagic[8] = {'O', 'P', 'T', 'K', 'N', 'N', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

std::vector<Neighbor> brute_force_knn(std::span<const LabeledPoint> points, const FeatureVector& query, int k) {
    if (k < 1) throw std::invalid_argument("brute_force_knn: k must be >= 1");
    if (points.size() < static_cast<std::size_t>(k)) {
        throw std::invalid_argument("brute_force_knn: fewer points (" + std::to_string(points.size()) +
                                    ") than k (" + std::to_string(k) + ")");
    }
    std::vector<Entry> all(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) all[i] = {squared_distance(points[i].features, query), i};
    std::partial_sort(all.begin(), all.begin() + k, all.end());
    std::vector<Neighbor> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out.push_back(Neighbor{all[i].second, std::sqrt(all[i].first)});
    return out;
}

KnnIndex::KnnIndex(std::vector<LabeledPoint> points, const IndexParams& params, std::uint64_t seed)
    : points_(std::move(points)), params_(params), seed_(seed) {
    if (points_.empty()) throw std::invalid_argument("build_index: empty point set");
    if (params_.trees < 1 || params_.leaf_size < 1 || params_.checks < 1) {
        throw std::invalid_argument("build_index: trees, leaf_size and checks must be >= 1");
    }
    coords_.resize(points_.size() * kDescriptorSize);
    for (std::size_t i = 0; i < points_.size(); ++i) {
        std::copy(points_[i].features.begin(), points_[i].features.end(), coords_.begin() + i * kDescriptorSize);
    }
    if (params_.mode == SearchMode::approximate) {
        std::mt19937_64 seeder(seed);
        trees_.resize(static_cast<std::size_t>(params_.trees));
        for (auto& tree : trees_) build_tree(tree, seeder());
    }
}

void KnnIndex::build_tree(Tree& tree, std::uint64_t tree_seed) {
    std::mt19937_64 rng(tree_seed);
    tree.order.resize(points_.size());
    std::iota(tree.order.begin(), tree.order.end(), 0);
    tree.nodes.clear();

    struct Pending {
        int node;
        int begin;
        int end;
    };
    std::vector<Pending> stack;
    tree.nodes.push_back(Node{});
    stack.push_back({0, 0, static_cast<int>(points_.size())});

    while (!stack.empty()) {
        const Pending job = stack.back();
        stack.pop_back();
        Node node;
        node.begin = job.begin;
        node.end = job.end;
        const int count = job.end - job.begin;
        if (count > params_.leaf_size) {
            std::array<double, kDescriptorSize> mean{};
            std::array<double, kDescriptorSize> var{};
            const int sample = std::min(count, kMeanSample);
            for (int i = 0; i < sample; ++i) {
                const double* c = coords(static_cast<std::size_t>(tree.order[job.begin + i]));
                for (int d = 0; d < kDescriptorSize; ++d) mean[d] += c[d];
            }
            for (double& m : mean) m /= sample;
            for (int i = 0; i < sample; ++i) {
                const double* c = coords(static_cast<std::size_t>(tree.order[job.begin + i]));
                for (int d = 0; d < kDescriptorSize; ++d) var[d] += (c[d] - mean[d]) * (c[d] - mean[d]);
            }
            std::array<int, kDescriptorSize> dims{};
            std::iota(dims.begin(), dims.end(), 0);
            std::stable_sort(dims.begin(), dims.end(), [&](int a, int b) { return var[a] > var[b]; });
            const int candidates = static_cast<int>(
                std::count_if(dims.begin(), dims.begin() + kCandidateDims, [&](int d) { return var[d] > 0.0; }));

            auto first = tree.order.begin() + job.begin;
            auto last = tree.order.begin() + job.end;
            int chosen = -1;
            double split = 0.0;
            auto mid = first;
            if (candidates > 0) {
                std::uniform_int_distribution<int> pick(0, candidates - 1);
                const int preferred = pick(rng);
                // Try the random dimension at its mean, then a median split, then the remaining dims.
                for (int attempt = 0; attempt < kDescriptorSize && chosen < 0; ++attempt) {
                    const int dim = dims[(preferred + attempt) % kDescriptorSize];
                    const double value = mean[dim];
                    mid = std::partition(first, last, [&](int i) { return coords(static_cast<std::size_t>(i))[dim] < value; });
                    if (mid != first && mid != last) {
                        chosen = dim;
                        split = value;
                        break;
                    }
                    auto nth = first + count / 2;
                    std::nth_element(first, nth, last, [&](int a, int b) {
                        return coords(static_cast<std::size_t>(a))[dim] < coords(static_cast<std::size_t>(b))[dim];
                    });
                    const double median = coords(static_cast<std::size_t>(*nth))[dim];
                    mid = std::partition(first, last, [&](int i) { return coords(static_cast<std::size_t>(i))[dim] < median; });
                    if (mid != first && mid != last) {
                        chosen = dim;
                        split = median;
                    }
                }
            }
            if (chosen >= 0) {
                node.split_dim = chosen;
                node.split_value = split;
                const int split_at = static_cast<int>(mid - tree.order.begin());
                node.left = static_cast<int>(tree.nodes.size());
                tree.nodes.push_back(Node{});
                node.right = static_cast<int>(tree.nodes.size());
                tree.nodes.push_back(Node{});
                stack.push_back({node.right, split_at, job.end});
                stack.push_back({node.left, job.begin, split_at});
            }
        }
        tree.nodes[static_cast<std::size_t>(job.node)] = node;
    }
}

std::vector<Neighbor> KnnIndex::search(const FeatureVector& query, int k) const {
    return search(query, k, params_.checks);
}

std::vector<Neighbor> KnnIndex::search(const FeatureVector& query, int k, int checks) const {
    if (k < 1) throw std::invalid_argument("KnnIndex::search: k must be >= 1");
    const int effective_k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(k), points_.size()));
    if (params_.mode == SearchMode::exact) return search_exact(query, effective_k);
    return search_forest(query, effective_k, std::max(checks, effective_k));
}

std::vector<Neighbor> KnnIndex::search_exact(const FeatureVector& query, int k) const {
    TopK best(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < points_.size(); ++i) best.offer(squared_distance_raw(coords(i), query.data()), i);
    return best.sorted();
}

std::vector<Neighbor> KnnIndex::search_forest(const FeatureVector& query, int k, int checks) const {
    TopK best(static_cast<std::size_t>(k));
    std::vector<char> visited(points_.size(), 0);
    std::priority_queue<Branch, std::vector<Branch>, std::greater<>> branches;
    std::uint64_t sequence = 0;
    int checked = 0;
    bool done = false;

    // The visiting order is fixed by the query; the budget only truncates it,
    // so a larger budget always sees a superset of points.
    auto descend = [&](int tree_id, int node_id, double bound) {
        const Tree& tree = trees_[static_cast<std::size_t>(tree_id)];
        const Node* node = &tree.nodes[static_cast<std::size_t>(node_id)];
        while (node->split_dim >= 0) {
            const double diff = query[static_cast<std::size_t>(node->split_dim)] - node->split_value;
            const int near = diff < 0.0 ? node->left : node->right;
            const int far = diff < 0.0 ? node->right : node->left;
            branches.push(Branch{bound + diff * diff, sequence++, tree_id, far});
            node = &tree.nodes[static_cast<std::size_t>(near)];
        }
        for (int i = node->begin; i < node->end; ++i) {
            if (checked >= checks && best.full()) {
                done = true;
                return;
            }
            const auto idx = static_cast<std::size_t>(tree.order[static_cast<std::size_t>(i)]);
            if (visited[idx]) continue;
            visited[idx] = 1;
            ++checked;
            best.offer(squared_distance_raw(coords(idx), query.data()), idx);
        }
    };

    for (int t = 0; t < static_cast<int>(trees_.size()) && !done; ++t) descend(t, 0, 0.0);
    while (!done && !branches.empty()) {
        const Branch b = branches.top();
        branches.pop();
        descend(b.tree, b.node, b.bound);
    }
    return best.sorted();
}

KnnIndex build_index(std::vector<LabeledPoint> points, const IndexParams& params, std::uint64_t seed) {
    return KnnIndex(std::move(points), params, seed);
}

Regression query_regress(const KnnIndex& index, const FeatureVector& query, int k) {
    if (k < 1) throw std::invalid_argument("query_regress: k must be >= 1");
    const auto neighbors = index.search(query, k);
    Regression r;
    r.neighbors_used = static_cast<int>(neighbors.size());
    r.degraded = static_cast<std::size_t>(k) > index.size();
    double total = 0.0;
    for (const Neighbor& n : neighbors) total += index.points()[n.index].label;
    r.probability = std::clamp(total / static_cast<double>(neighbors.size()), 0.0, 1.0);
    return r;
}

void save_points(const std::filesystem::path& path, std::span<const LabeledPoint> points) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open point file for writing: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_raw(out, kFormatVersion);
    write_raw(out, static_cast<std::uint32_t>(kDescriptorSize));
    write_raw(out, static_cast<std::uint64_t>(points.size()));
    for (const LabeledPoint& p : points) {
        for (double v : p.features) write_raw(out, v);
        write_raw(out, p.label);
        write_raw(out, static_cast<std::int32_t>(p.source.image_id));
        write_raw(out, static_cast<std::int32_t>(p.source.rect.x));
        write_raw(out, static_cast<std::int32_t>(p.source.rect.y));
        write_raw(out, static_cast<std::int32_t>(p.source.rect.size));
    }
    if (!out) throw std::runtime_error("failed writing point file: " + path.string());
}

std::vector<LabeledPoint> load_points(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open point file: " + path.string());
    char magic[sizeof(kMagic)] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("not a point file: " + path.string());
    }
    std::uint32_t version = 0, dim = 0;
    std::uint64_t count = 0;
    read_raw(in, version);
    read_raw(in, dim);
    read_raw(in, count);
    if (version != kFormatVersion) throw std::runtime_error("unsupported point file version " + std::to_string(version));
    if (dim != kDescriptorSize) throw std::runtime_error("point file dimension mismatch");
    std::vector<LabeledPoint> points;
    points.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
    for (std::uint64_t i = 0; i < count; ++i) {
        LabeledPoint p;
        for (double& v : p.features) read_raw(in, v);
        read_raw(in, p.label);
        std::int32_t id, x, y, size;
        read_raw(in, id);
        read_raw(in, x);
        read_raw(in, y);
        read_raw(in, size);
        p.source = Provenance{id, PatchRect{x, y, size}};
        points.push_back(p);
    }
    return points;
}

}  // namespace optable
