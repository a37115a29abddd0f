#pragma once

#include "design.hpp"
#include "directions.hpp"
#include "universe.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace testing_util {

inline Eigen::MatrixXd random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> n01;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = n01(gen);
    return m;
}

inline posi::CanonicalDesign random_canonical(std::size_t n, std::size_t p, std::uint64_t seed,
                                              posi::CanonicalForm form = posi::CanonicalForm::upper_triangular) {
    return posi::canonicalize(posi::DesignMatrix(random_matrix(n, p, seed), {}), form);
}

// Random symmetric positive definite p x p matrix, well conditioned.
inline Eigen::MatrixXd random_spd(std::size_t p, std::uint64_t seed) {
    const Eigen::MatrixXd a = random_matrix(p, p, seed);
    return a * a.transpose() + static_cast<double>(p) * 0.5 * Eigen::MatrixXd::Identity(a.rows(), a.cols());
}

inline Eigen::VectorXd column(const posi::CanonicalDesign& x, std::size_t j) {
    return Eigen::Map<const Eigen::VectorXd>(x.column(j), static_cast<Eigen::Index>(x.d()));
}

// Residual of column j through the explicit hat matrix of M \ {j}.
inline Eigen::VectorXd hat_residual(const posi::CanonicalDesign& x, posi::ModelId m, std::size_t j) {
    const Eigen::VectorXd xj = column(x, j);
    const auto others = m.without(j).members();
    if (others.empty()) return xj;
    Eigen::MatrixXd a(static_cast<Eigen::Index>(x.d()), static_cast<Eigen::Index>(others.size()));
    for (std::size_t c = 0; c < others.size(); ++c) a.col(static_cast<Eigen::Index>(c)) = column(x, others[c]);
    const Eigen::MatrixXd h = a * (a.transpose() * a).inverse() * a.transpose();
    return xj - h * xj;
}

inline bool full_rank(const posi::CanonicalDesign& x, posi::ModelId m) {
    const auto members = m.members();
    Eigen::MatrixXd a(static_cast<Eigen::Index>(x.d()), static_cast<Eigen::Index>(members.size()));
    for (std::size_t c = 0; c < members.size(); ++c) a.col(static_cast<Eigen::Index>(c)) = column(x, members[c]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-10);
    return static_cast<std::size_t>(lu.rank()) == members.size();
}

struct BruteDirection {
    Eigen::VectorXd v;
    std::size_t j;
    std::uint64_t mask;
};

// Every l*_{j.M} of the universe by scanning all masks.
inline std::vector<BruteDirection> brute_directions(const posi::CanonicalDesign& x, const posi::ModelUniverse& u,
                                                    int only_j = -1) {
    std::vector<BruteDirection> out;
    const std::uint64_t full = posi::full_mask(x.p());
    for (std::uint64_t mask = 1; mask <= full; ++mask) {
        if (!u.admits(mask) || !full_rank(x, posi::ModelId{mask})) continue;
        for (std::size_t j : posi::ModelId{mask}.members()) {
            if (only_j >= 0 && j != static_cast<std::size_t>(only_j)) continue;
            const Eigen::VectorXd r = hat_residual(x, posi::ModelId{mask}, j);
            out.push_back({r / r.norm(), j, mask});
        }
    }
    return out;
}

inline double sign_gap(const Eigen::VectorXd& a, std::span<const double> b) {
    const Eigen::Map<const Eigen::VectorXd> bv(b.data(), static_cast<Eigen::Index>(b.size()));
    return std::min((a - bv).norm(), (a + bv).norm());
}

// Standard normal cdf through erfc; independent of the library's Boost route.
inline double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double bisect(double lo, double hi, auto&& f) {
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if ((f(lo) < 0) == (f(mid) < 0)) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace testing_util
