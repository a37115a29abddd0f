#pragma once

#include "design.hpp"
#include "directions.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace posi {

// X* = X~ (X~^T X~)^{-1}; requires d = p. Its columns are the full-model
// coefficient vectors, and X~^T X* = I.
CanonicalDesign dual_design(const CanonicalDesign& x);

struct DualityReport {
    std::uint64_t matched_pairs = 0;    // (j, M) pairs with a partner (j, M*)
    std::uint64_t unmatched_pairs = 0;  // degenerate on either side
    double max_mismatch = 0.0;          // max ||l*_{j.M} - l*dual_{j.M*}||
    double norm_product_check = 0.0;    // max | ||l_{j.M}|| ||l*_{j.M*}|| - 1 |
    bool sign_classes_equal = false;    // L(X*) = L(X~) as sets up to sign
};

// For every j in M, compares the normalized direction of (j, M) in X~ with
// that of (j, M*) in the dual, where M* = complement of M plus j.
DualityReport verify_duality(const CanonicalDesign& x, double tolerance = 1e-8);

struct OrthogonalityCensus {
    std::vector<std::uint64_t> partners;           // per direction, count of |<v, w>| < tol
    std::map<std::uint64_t, std::uint64_t> histogram;  // partner count -> directions
    std::uint64_t orthogonal_pairs = 0;            // unordered
};

OrthogonalityCensus orthogonality_census(const DirectionSet& directions, double tolerance = 1e-10, int threads = 1);

struct PolytopeSpec {
    DirectionSet directions;
    double K = 0.0;

    PolytopeSpec(DirectionSet l, double k);
};

// All |<l, z>| <= K; stops at the first violated slab.
bool polytope_contains(const PolytopeSpec& polytope, std::span<const double> z);

}  // namespace posi
