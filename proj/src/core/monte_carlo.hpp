#pragma once

#include "constants.hpp"
#include "design.hpp"
#include "directions.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace posi {

// Draws Z_i ~ N(0, I_d) and sigma_hat_i ~ sqrt(chi^2_r / r) (1 when sigma is
// known), each from the counter stream (seed, i). Coordinates are stored row
// by row: z[k * count + i].
struct DrawMatrix {
    std::size_t d = 0;
    std::size_t count = 0;
    std::vector<double> z;
    std::vector<double> sigma_hat;

    static DrawMatrix generate(std::size_t d, std::size_t count, ErrorModel em, std::uint64_t seed, int threads);

    std::vector<double> draw(std::size_t i) const;
};

enum class EvaluationMode { automatic, materialized, streaming };

struct McOptions {
    std::uint64_t samples = 100000;
    std::uint64_t seed = 0;
    int threads = 1;
    EvaluationMode mode = EvaluationMode::automatic;
    DedupMode dedup = DedupMode::up_to_sign();
    // materialize when the estimated direction storage fits under this many bytes
    std::size_t materialize_limit_bytes = std::size_t{256} << 20;
};

// max_l |l^T Z_i| / sigma_hat_i for every draw.
std::vector<double> max_abs_t_draws(const DirectionSet& directions, const DrawMatrix& draws, int threads);
std::vector<double> max_abs_t_draws(const DirectionStream& stream, const DrawMatrix& draws, int threads,
                                    StreamStats* stats = nullptr);
std::vector<double> max_abs_t_draws(const DirectionSet& directions, ErrorModel em, std::uint64_t count,
                                     std::uint64_t seed, int threads = 1);

// 1-based order statistic index ceil((1 - alpha)(N + 1)).
std::uint64_t conservative_quantile_index(std::uint64_t count, double alpha);

struct QuantileEstimate {
    double value = 0.0;
    double standard_error = 0.0;
    std::uint64_t index = 0;
};

// Conservative empirical quantile with an order-statistic standard error
// sqrt(alpha (1 - alpha) / N) / f(K), f a Gaussian kernel density estimate
// with Silverman's bandwidth.
QuantileEstimate conservative_quantile(std::span<const double> draws, double alpha);

ConstantEstimate constant_from_directions(const DirectionSet& directions, double alpha, ErrorModel em,
                                          const McOptions& options);

// PoSI constant K(X, M, alpha, r).
ConstantEstimate posi_K(const CanonicalDesign& x, const ModelUniverse& u, double alpha, ErrorModel em,
                        const McOptions& options = {});

// PoSI1 constant for predictor j (0-based): the max runs over l*_{j.M}, j in M.
ConstantEstimate posi1_K(const CanonicalDesign& x, const ModelUniverse& u, std::size_t j, double alpha,
                         ErrorModel em, const McOptions& options = {});

}  // namespace posi
