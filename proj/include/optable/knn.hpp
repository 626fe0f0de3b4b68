#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "optable/features.hpp"

namespace optable {

/// Where a bank point came from: image (or pair) id and patch.
struct Provenance {
    int image_id{-1};
    PatchRect rect{};
};

struct LabeledPoint {
    FeatureVector features{};
    double label{0.0};
    Provenance source{};
};

struct Neighbor {
    std::size_t index{0};  // insertion index into the point list
    double distance{0.0};

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Exhaustive k-NN. Results ordered by squared distance, ties broken by the
/// lower insertion index. Throws std::invalid_argument if k < 1 or fewer
/// than k points are given.
std::vector<Neighbor> brute_force_knn(std::span<const LabeledPoint> points, const FeatureVector& query, int k);

enum class SearchMode { exact, approximate };

struct IndexParams {
    SearchMode mode{SearchMode::approximate};
    int trees{4};
    int leaf_size{16};
    /// Point-distance evaluations allowed per approximate query. The budget
    /// never drops below the requested k.
    int checks{4096};
};

struct Regression {
    double probability{0.0};
    int neighbors_used{0};
    /// True when k exceeded the index size and every point was used.
    bool degraded{false};
};

class KnnIndex {
public:
    KnnIndex(std::vector<LabeledPoint> points, const IndexParams& params, std::uint64_t seed);

    std::size_t size() const { return points_.size(); }
    const std::vector<LabeledPoint>& points() const { return points_; }
    const IndexParams& params() const { return params_; }
    std::uint64_t seed() const { return seed_; }

    /// min(k, size()) neighbors in (squared distance, index) order. In exact
    /// mode the answer equals brute_force_knn.
    std::vector<Neighbor> search(const FeatureVector& query, int k) const;

    /// Same as search() with an explicit checks budget (approximate mode only).
    std::vector<Neighbor> search(const FeatureVector& query, int k, int checks) const;

private:
    struct Node {
        int split_dim{-1};  // -1 marks a leaf
        double split_value{0.0};
        int left{-1};
        int right{-1};
        int begin{0};
        int end{0};
    };

    struct Tree {
        std::vector<Node> nodes;
        std::vector<int> order;  // leaf ranges index into this permutation
    };

    void build_tree(Tree& tree, std::uint64_t tree_seed);
    std::vector<Neighbor> search_exact(const FeatureVector& query, int k) const;
    std::vector<Neighbor> search_forest(const FeatureVector& query, int k, int checks) const;
    const double* coords(std::size_t i) const { return coords_.data() + i * kDescriptorSize; }

    std::vector<LabeledPoint> points_;
    std::vector<double> coords_;
    IndexParams params_;
    std::uint64_t seed_;
    std::vector<Tree> trees_;
};

/// Throws std::invalid_argument on an empty point set.
KnnIndex build_index(std::vector<LabeledPoint> points, const IndexParams& params, std::uint64_t seed);

/// Mean label of the k nearest neighbors.
Regression query_regress(const KnnIndex& index, const FeatureVector& query, int k);

/// Point-set file: magic "OPTKNNPT", u32 version (1), u32 dimension (14),
/// u64 count, then per point 14 f64 features, f64 label, i32 image id,
/// i32 x, i32 y, i32 size. All little-endian.
void save_points(const std::filesystem::path& path, std::span<const LabeledPoint> points);
std::vector<LabeledPoint> load_points(const std::filesystem::path& path);

}  // namespace optable
