#pragma once

#include "directions.hpp"
#include "monte_carlo.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace posi {

// X_p(a) = I_p + a E (E all ones), a in (-1/p, inf); symmetric canonical form.
CanonicalDesign exchangeable_design(std::size_t p, double a);

// Parameter of the inverse: X_p(a)^{-1} is proportional to X_p(c_p(a)).
double exchangeable_inverse_parameter(std::size_t p, double a);

// Cosine between two distinct columns of X_p(a).
double exchangeable_cosine(std::size_t p, double a);

// l*_{j.M} for X_p(a) from the closed-form entries (1 + da at j,
// -(1 - d)/(m - 1) + da on the rest of M, da elsewhere).
Direction exchangeable_direction_formula(std::size_t p, double a, ModelId model, std::size_t j);

// The scalar d of the closed form for |M| = m >= 2.
double exchangeable_shrinkage(std::size_t p, double a, std::size_t m);

struct ExchangeableCell {
    std::size_t p = 0;
    double a = 0.0;
    ConstantEstimate K;
    double ratio = 0.0;  // K / sqrt(2 log p)
};

struct ExchangeableRow {
    std::size_t p = 0;
    double best_a = 0.0;
    double best_K = 0.0;
    double best_se = 0.0;
    double ratio = 0.0;  // sup over the grid of K / sqrt(2 log p)
    std::vector<ExchangeableCell> cells;
};

// Grid of a >= 0 (0 included); negative a are covered through c_p(a).
std::vector<double> default_exchangeable_grid();

std::vector<ExchangeableRow> exchangeable_ratio_table(const std::vector<std::size_t>& p_list,
                                                      const std::vector<double>& a_grid, double alpha,
                                                      std::uint64_t samples, std::uint64_t seed, int threads = 1);

// (e_1, ..., e_{p-1}, (c, ..., c, sqrt(1 - (p-1) c^2))), c^2 < 1/(p-1).
CanonicalDesign worst_posi1_design(std::size_t p, double c);

// max over M containing p of |l*_{p.M}^T z| for the design above, by order
// statistics of z_1..z_{p-1}. best_m receives the maximizing model size.
double fast_worst_posi1_stat(std::size_t p, double c, std::span<const double> z, std::size_t* best_m = nullptr);

// c^2 = (1 - 2^{-k}) / (p - 1), k = 1..levels
std::vector<double> default_worst_posi1_grid(std::size_t p, std::size_t levels = 16);

struct WorstPosi1Cell {
    double c = 0.0;
    double K1 = 0.0;
    double standard_error = 0.0;
    double ratio = 0.0;         // K1 / sqrt(p)
    double mean_size_fraction = 0.0;  // average maximizing m / p
};

struct WorstPosi1Row {
    std::size_t p = 0;
    double best_c = 0.0;
    double best_K1 = 0.0;
    double best_se = 0.0;
    double ratio = 0.0;  // sup over the grid of K1 / sqrt(p)
    std::uint64_t samples = 0;
    std::uint64_t quantile_index = 0;
    std::vector<WorstPosi1Cell> cells;
};

// Draws share one set of Z per p across the grid (common random numbers). An
// empty c_grid means default_worst_posi1_grid(p).
std::vector<WorstPosi1Row> worst_posi1_table(const std::vector<std::size_t>& p_list,
                                             const std::vector<double>& c_grid, double alpha,
                                             std::uint64_t samples, std::uint64_t seed, int threads = 1);

// f(r) = phi(Phi^{-1}(r)) / sqrt(1 - r), 0 < r < 1.
double rate_function_f(double r);

struct RateMaximum {
    double argmax = 0.0;
    double value = 0.0;
};
// Golden-section search on (0, 1).
RateMaximum maximize_rate_function(double tolerance = 1e-10);

}  // namespace posi
