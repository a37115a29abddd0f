#pragma once

#include "universe.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace posi {

// Degrees of freedom r of the independent variance estimate; empty = known sigma.
struct ErrorModel {
    std::optional<unsigned> df;

    static ErrorModel known_sigma() { return {}; }
    static ErrorModel with_df(unsigned r);
    // "inf" or a positive integer
    static ErrorModel parse(const std::string& text);

    bool sigma_known() const { return !df.has_value(); }
    std::string to_string() const { return df ? std::to_string(*df) : "inf"; }
};

enum class EstimateMethod { monte_carlo, closed_form, bound };

// What the constant protects: a model universe (PoSI, PoSI1), every linear
// contrast (Scheffe), or nothing in particular (orthogonal/naive references).
enum class ConstantScope { universe, all_contrasts, reference };

struct ConstantEstimate {
    double K = 0.0;
    double alpha = 0.05;
    ErrorModel df;
    std::uint64_t mc_samples = 0;
    double mc_standard_error = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t direction_count = 0;  // directions entering the max
    std::uint64_t emitted_count = 0;    // before deduplication
    std::uint64_t degenerate_count = 0;
    std::uint64_t quantile_index = 0;   // 1-based order statistic used
    std::size_t d = 0;
    EstimateMethod method = EstimateMethod::closed_form;
    ConstantScope scope = ConstantScope::reference;
    std::shared_ptr<const ModelUniverse> universe;
    std::optional<std::size_t> predictor;  // PoSI1 constants
};

const char* to_string(EstimateMethod m);

void validate_alpha(double alpha);

double normal_cdf(double x);
double normal_pdf(double x);
double normal_quantile(double p);

// sqrt(d F_{d,r;1-alpha}), or sqrt(chi^2_{d;1-alpha}) for known sigma.
ConstantEstimate scheffe_K(double alpha, std::size_t d, ErrorModel em);

// Orthogonal-design constant: (2 Phi(K) - 1)^d = 1 - alpha for known sigma,
// E[(2 Phi(K s) - 1)^d] = 1 - alpha over s = sigma_hat otherwise.
ConstantEstimate orth_K(double alpha, std::size_t d, ErrorModel em);

// Coverage E[(2 Phi(K s) - 1)^d] of the orthogonal-design hypercube.
double orth_coverage(double K, std::size_t d, ErrorModel em);

// Marginal two-sided reference z_{1-alpha/2} or t_{r;1-alpha/2}.
ConstantEstimate marginal_K(double alpha, ErrorModel em);

// Bonferroni cap bound for max |l^T Z| over `direction_count` unit vectors in
// R^d (known sigma): alpha/2 goes to the union of caps |l^T U| > K' with
// U uniform on the sphere, alpha/2 to the radius ||Z|| ~ chi_d.
struct CapBound {
    ConstantEstimate estimate;   // K = cap_quantile * radius_quantile
    double cap_quantile = 0.0;   // K' in (0, 1)
    double radius_quantile = 0.0;
    bool scheffe_fallback = false;
};
CapBound cap_bonferroni_bound(std::uint64_t direction_count, std::size_t d, double alpha);

// sqrt(1 - 1/a^2), the limiting K/sqrt(d) for |L_d|^{1/d} -> a.
double asymptotic_cap_constant(double a);

}  // namespace posi
