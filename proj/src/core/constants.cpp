#include "constants.hpp"

#include "error.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <limits>

namespace posi {
namespace {

ConstantEstimate closed_form(double K, double alpha, std::size_t d, ErrorModel em, ConstantScope scope) {
    ConstantEstimate e;
    e.K = K;
    e.alpha = alpha;
    e.df = em;
    e.d = d;
    e.method = EstimateMethod::closed_form;
    e.scope = scope;
    return e;
}

// log density of s = sqrt(chi^2_r / r)
double log_sigma_hat_density(double s, double r) {
    return std::log(2.0) + 0.5 * r * std::log(0.5 * r) - std::lgamma(0.5 * r) + (r - 1.0) * std::log(s) -
           0.5 * r * s * s;
}

}  // namespace

ErrorModel ErrorModel::with_df(unsigned r) {
    if (r < 1) fail_usage("degrees of freedom must be >= 1");
    return ErrorModel{r};
}

ErrorModel ErrorModel::parse(const std::string& text) {
    if (text == "inf" || text == "Inf" || text == "infinity") return known_sigma();
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(text, &used);
    } catch (const std::exception&) {
        fail_usage("invalid degrees of freedom '" + text + "'");
    }
    if (used != text.size() || v < 1) fail_usage("invalid degrees of freedom '" + text + "'");
    return with_df(static_cast<unsigned>(v));
}

const char* to_string(EstimateMethod m) {
    switch (m) {
        case EstimateMethod::monte_carlo: return "monte_carlo";
        case EstimateMethod::closed_form: return "closed_form";
        case EstimateMethod::bound: return "bound";
    }
    return "closed_form";
}

void validate_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) fail_usage("alpha must lie in (0, 1)");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) fail_usage("normal quantile needs p in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

ConstantEstimate scheffe_K(double alpha, std::size_t d, ErrorModel em) {
    validate_alpha(alpha);
    if (d < 1) fail_usage("d must be >= 1");
    const double dd = static_cast<double>(d);
    double K = 0.0;
    if (em.sigma_known()) {
        K = std::sqrt(boost::math::quantile(boost::math::chi_squared_distribution<double>(dd), 1.0 - alpha));
    } else {
        const boost::math::fisher_f_distribution<double> f(dd, static_cast<double>(*em.df));
        K = std::sqrt(dd * boost::math::quantile(f, 1.0 - alpha));
    }
    return closed_form(K, alpha, d, em, ConstantScope::all_contrasts);
}

double orth_coverage(double K, std::size_t d, ErrorModel em) {
    const double dd = static_cast<double>(d);
    const auto cube = [&](double s) {
        const double inner = std::erf(K * s / std::sqrt(2.0));  // 2 Phi(Ks) - 1
        return std::pow(inner, dd);
    };
    if (em.sigma_known()) return cube(1.0);
    const double r = static_cast<double>(*em.df);
    const auto integrand = [&](double s) {
        if (s <= 0.0) return 0.0;
        return cube(s) * std::exp(log_sigma_hat_density(s, r));
    };
    // split at the mode region so the 61-point rule sees a smooth bump on each piece
    double err = 0.0;
    const double lo = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, 1.0, 15, 1e-11, &err);
    const double hi = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, 1.0, std::numeric_limits<double>::infinity(), 15, 1e-11, &err);
    return lo + hi;
}

ConstantEstimate orth_K(double alpha, std::size_t d, ErrorModel em) {
    validate_alpha(alpha);
    if (d < 1) fail_usage("d must be >= 1");
    const double target = 1.0 - alpha;
    double K = 0.0;
    if (em.sigma_known()) {
        K = normal_quantile(0.5 * (1.0 + std::pow(target, 1.0 / static_cast<double>(d))));
    } else {
        const auto g = [&](double k) { return orth_coverage(k, d, em) - target; };
        double hi = 2.0;
        while (g(hi) < 0.0) hi *= 2.0;
        std::uintmax_t iterations = 200;
        const auto root = boost::math::tools::toms748_solve(
            g, 0.0, hi, -target, g(hi), boost::math::tools::eps_tolerance<double>(40), iterations);
        K = 0.5 * (root.first + root.second);
    }
    return closed_form(K, alpha, d, em, ConstantScope::reference);
}

ConstantEstimate marginal_K(double alpha, ErrorModel em) {
    validate_alpha(alpha);
    double K = 0.0;
    if (em.sigma_known()) {
        K = normal_quantile(1.0 - 0.5 * alpha);
    } else {
        K = boost::math::quantile(boost::math::students_t_distribution<double>(static_cast<double>(*em.df)),
                                  1.0 - 0.5 * alpha);
    }
    return closed_form(K, alpha, 1, em, ConstantScope::reference);
}

CapBound cap_bonferroni_bound(std::uint64_t direction_count, std::size_t d, double alpha) {
    validate_alpha(alpha);
    if (direction_count < 1) fail_usage("direction count must be >= 1");
    if (d < 2) fail_usage("cap bound needs d >= 2");
    const double dd = static_cast<double>(d);
    CapBound out;
    out.radius_quantile =
        std::sqrt(boost::math::quantile(boost::math::chi_squared_distribution<double>(dd), 1.0 - 0.5 * alpha));
    // P[|U| > K'] = P[U^2 > K'^2] with U^2 ~ Beta(1/2, (d-1)/2)
    const double tail = 0.5 * alpha / static_cast<double>(direction_count);
    double cap = std::numeric_limits<double>::quiet_NaN();
    if (tail < 1.0) {
        try {
            cap = std::sqrt(boost::math::ibetac_inv(0.5, 0.5 * (dd - 1.0), tail));
        } catch (const std::exception&) {
            cap = std::numeric_limits<double>::quiet_NaN();
        }
    }
    if (!(cap > 0.0 && cap < 1.0)) {
        out.scheffe_fallback = true;
        out.estimate = scheffe_K(alpha, d, ErrorModel::known_sigma());
        out.estimate.method = EstimateMethod::bound;
        out.estimate.direction_count = direction_count;
        return out;
    }
    out.cap_quantile = cap;
    out.estimate = closed_form(cap * out.radius_quantile, alpha, d, ErrorModel::known_sigma(),
                               ConstantScope::reference);
    out.estimate.method = EstimateMethod::bound;
    out.estimate.direction_count = direction_count;
    return out;
}

double asymptotic_cap_constant(double a) {
    if (!(a > 1.0)) fail_usage("asymptotic cap constant needs a > 1");
    return std::sqrt(1.0 - 1.0 / (a * a));
}

}  // namespace posi
