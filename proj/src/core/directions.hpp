#pragma once

#include "design.hpp"
#include "universe.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace posi {

// Unit vector l*_{j.M}: the adjusted predictor X~_{j.M} normalized.
struct Direction {
    std::vector<double> vector;
    std::size_t predictor = 0;  // 0-based
    ModelId model;
    double raw_norm = 0.0;  // ||X~_{j.M}||
};

// Residual of column j on the other columns of M, computed by an explicit
// least-squares solve (independent of the incremental stream).
struct AdjustedPredictor {
    std::vector<double> residual;
    double norm = 0.0;
};
AdjustedPredictor adjusted_predictor(const CanonicalDesign& x, ModelId model, std::size_t j);

// Variance inflation factor ||X~_j||^2 / ||X~_{j.M}||^2. Meaningful for
// centered columns, which is the caller's responsibility.
double vif(const CanonicalDesign& x, ModelId model, std::size_t j);

// Every full-rank model of the universe, once each, in subset-walk order.
std::vector<ModelId> enumerate_models(const CanonicalDesign& x, const ModelUniverse& u);

// A chunk of emitted directions; vectors are packed row after row.
struct DirectionBlock {
    std::size_t d = 0;
    std::size_t count = 0;
    const double* vectors = nullptr;
    const std::uint32_t* predictor = nullptr;
    const std::uint64_t* model = nullptr;
    const double* raw_norm = nullptr;

    std::span<const double> vector(std::size_t i) const { return {vectors + i * d, d}; }
};
using BlockSink = std::function<void(const DirectionBlock&)>;

struct StreamStats {
    std::uint64_t emitted = 0;
    std::uint64_t degenerate = 0;  // admitted (j, M) skipped for a near-zero residual

    StreamStats& operator+=(const StreamStats& o) {
        emitted += o.emitted;
        degenerate += o.degenerate;
        return *this;
    }
};

struct StreamOptions {
    std::optional<std::size_t> predictor;  // restrict to l*_{j.M} for this j
    std::size_t block_size = 256;
};

// Streams l*_{j.M} for every j in M in the universe by a depth-first walk
// over subsets S with an incrementally orthogonalized basis of span(X~_S).
// At node S every j outside S with S+{j} admitted yields (I - P_S) X~_j
// normalized; children extend S by indices above max(S). Partition 0 holds
// the root's emissions, partition a+1 the subtree rooted at {a}; partitions
// are independent and may run concurrently.
class DirectionStream {
public:
    DirectionStream(const CanonicalDesign& x, const ModelUniverse& u, StreamOptions options = {});

    std::size_t partition_count() const { return x_.p() + 1; }
    StreamStats run_partition(std::size_t part, const BlockSink& sink) const;
    StreamStats run(const BlockSink& sink) const;

    const CanonicalDesign& design() const { return x_; }
    const ModelUniverse& universe() const { return u_; }
    const StreamOptions& options() const { return options_; }

    // Upper bound on emitted directions, from sizes alone (no rank filtering).
    double count_upper_bound() const;

private:
    const CanonicalDesign& x_;
    const ModelUniverse& u_;
    StreamOptions options_;
};

struct DedupMode {
    bool enabled = false;
    double tolerance = 1e-8;

    static DedupMode none() { return {}; }
    static DedupMode up_to_sign(double tol = 1e-8) { return {true, tol}; }
};

// Materialized direction set in stream order.
class DirectionSet {
public:
    explicit DirectionSet(std::size_t d = 0) : d_(d) {}

    std::size_t d() const { return d_; }
    std::size_t size() const { return predictor_.size(); }
    bool empty() const { return predictor_.empty(); }

    std::span<const double> vector(std::size_t i) const { return {vectors_.data() + i * d_, d_}; }
    std::size_t predictor(std::size_t i) const { return predictor_[i]; }
    ModelId model(std::size_t i) const { return ModelId{model_[i]}; }
    double raw_norm(std::size_t i) const { return raw_norm_[i]; }
    Direction at(std::size_t i) const;

    const std::vector<double>& packed() const { return vectors_; }

    void append(const DirectionBlock& block);
    void append(std::span<const double> v, std::size_t predictor, ModelId model, double raw_norm);

    // Total directions emitted by the stream before any deduplication.
    std::uint64_t emitted = 0;
    std::uint64_t degenerate = 0;
    DedupMode dedup;

private:
    std::size_t d_;
    std::vector<double> vectors_;
    std::vector<std::uint32_t> predictor_;
    std::vector<std::uint64_t> model_;
    std::vector<double> raw_norm_;

    friend DirectionSet dedup_up_to_sign(const DirectionSet& set, double tolerance);
};

DirectionSet direction_stream(const CanonicalDesign& x, const ModelUniverse& u,
                              DedupMode dedup = DedupMode::up_to_sign(), int threads = 1,
                              std::optional<std::size_t> predictor = std::nullopt);

// Keeps the first member (in stream order) of every class of vectors within
// `tolerance` of each other up to sign.
DirectionSet dedup_up_to_sign(const DirectionSet& set, double tolerance);

// min(||v - w||, ||v + w||)
double sign_distance(std::span<const double> v, std::span<const double> w);

// True when every vector of a has a partner in b within tolerance up to sign
// and vice versa.
bool same_sign_classes(const DirectionSet& a, const DirectionSet& b, double tolerance);

// |<l, z>| with the summation order shared by every max-statistic kernel.
inline double project(const double* l, const double* z, std::size_t d) {
    double acc = l[0] * z[0];
    for (std::size_t k = 1; k < d; ++k) acc += l[k] * z[k];
    return acc;
}

}  // namespace posi
