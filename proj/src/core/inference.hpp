#pragma once

#include "constants.hpp"
#include "design.hpp"
#include "universe.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace posi {

// Least-squares fit of a canonical response on X~_M.
struct FitResult {
    ModelId model;
    std::vector<std::size_t> members;    // 0-based, ascending
    std::vector<double> estimates;       // beta_hat_M, aligned with members
    std::vector<double> adjusted_norms;  // ||X~_{j.M}||, aligned with members
    double sigma_hat = 1.0;
    ErrorModel df;

    std::size_t position(std::size_t j) const;  // index of j within members
};

FitResult fit_submodel(const CanonicalDesign& x, std::span<const double> y, ModelId model, double sigma_hat,
                       ErrorModel df = ErrorModel::known_sigma());

// beta_M = argmin_b ||mu - X~_M b||^2 for a canonical mean vector mu.
std::vector<double> submodel_target(const CanonicalDesign& x, ModelId model, std::span<const double> mu);

// (beta_hat_{j.M} - target) / (sigma_hat / ||X~_{j.M}||)
double t_ratio(const FitResult& fit, std::size_t j, double target);

struct IntervalRow {
    std::size_t predictor = 0;  // 0-based
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double t_observed = 0.0;  // for beta = 0
    double K_used = 0.0;
    double adjusted_norm = 0.0;
    std::optional<double> target;
    std::optional<bool> covers_target;
};

struct IntervalReport {
    ModelId model;
    double sigma_hat = 1.0;
    std::vector<IntervalRow> rows;
};

// estimate +- K sigma_hat / ||X~_{j.M}|| for each j in M (only the designated
// predictor for a PoSI1 constant). Fails when M lies outside K's universe.
IntervalReport posi_intervals(const CanonicalDesign& x, std::span<const double> y, double sigma_hat, ModelId model,
                              const ConstantEstimate& K, std::optional<std::span<const double>> mu = std::nullopt);

struct Selection {
    ModelId model;
    std::size_t predictor = 0;
    double achieved = 0.0;  // max |t| at target 0
};

// Model attaining max over (j, M) of |t_{j.M}|; ties go to the smallest model
// bitmask, then the smallest j.
Selection spar_select(const CanonicalDesign& x, std::span<const double> y, double sigma_hat, const ModelUniverse& u);
Selection spar1_select(const CanonicalDesign& x, std::span<const double> y, double sigma_hat, const ModelUniverse& u,
                       std::size_t j);

// Selection maps are plain functions of (design, universe, y, sigma_hat) plus
// one fixed integer parameter; no captured state.
using SelectorFn = ModelId (*)(const CanonicalDesign&, const ModelUniverse&, std::span<const double>, double,
                               std::size_t);

struct Selector {
    const char* name = "";
    SelectorFn fn = nullptr;
    std::size_t param = 0;

    static Selector spar();
    static Selector spar1(std::size_t j);
    static Selector forward_stepwise(std::size_t size);  // greedy max-|t| additions
    static Selector best_subset(std::size_t size);       // largest R^2 among models of that size

    ModelId operator()(const CanonicalDesign& x, const ModelUniverse& u, std::span<const double> y,
                       double sigma_hat) const {
        return fn(x, u, y, sigma_hat, param);
    }
};

struct ReplicationRecord {
    ModelId model;
    bool covered = false;
    double max_abs_t = 0.0;  // max over j in M of |t_{j.M}| at the true target
    double sigma_hat = 1.0;
};

struct CoverageReport {
    std::uint64_t replications = 0;
    std::uint64_t covered = 0;
    double coverage = 0.0;
    double binomial_se = 0.0;
    double K = 0.0;
    std::vector<ReplicationRecord> log;
};

// Simulates y = mu + eps (canonical coordinates, sigma = 1) with a fresh
// sigma_hat per replication, selects a model and checks simultaneous coverage
// of beta_{j.M} for all j in the selected model.
CoverageReport coverage_experiment(const CanonicalDesign& x, const ModelUniverse& u, const Selector& selector,
                                   double K, ErrorModel em, std::span<const double> mu, std::uint64_t replications,
                                   std::uint64_t seed, int threads = 1);

// Same, after checking that the constant belongs to (alpha, df, universe).
CoverageReport coverage_experiment(const CanonicalDesign& x, const ModelUniverse& u, const Selector& selector,
                                   double alpha, const ConstantEstimate& K, std::span<const double> mu,
                                   std::uint64_t replications, std::uint64_t seed, int threads = 1);

}  // namespace posi
