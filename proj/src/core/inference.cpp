#include "inference.hpp"

#include "directions.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>

namespace posi {
namespace {

Eigen::MatrixXd model_columns(const CanonicalDesign& x, const std::vector<std::size_t>& members) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(x.d()), static_cast<Eigen::Index>(members.size()));
    for (std::size_t c = 0; c < members.size(); ++c)
        a.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(x.column(members[c]), a.rows());
    return a;
}

void check_model(const CanonicalDesign& x, ModelId model) {
    if (model.empty()) fail_usage("model must be nonempty");
    if ((model.mask & ~full_mask(x.p())) != 0) fail_usage("model {" + model.to_string() + "} refers to columns beyond p");
}

void check_vector(std::span<const double> v, std::size_t d, const char* what) {
    if (v.size() != d)
        fail_data(std::string(what) + " has length " + std::to_string(v.size()) + ", expected " + std::to_string(d));
}

Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& a, std::span<const double> y) {
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    return a.colPivHouseholderQr().solve(yv);
}

// Tracks the SPAR maximum with its tie-break order.
struct Best {
    double value = -1.0;
    std::uint64_t mask = 0;
    std::size_t j = 0;

    void offer(double v, std::uint64_t m, std::size_t jj) {
        if (v > value || (v == value && (m < mask || (m == mask && jj < j)))) {
            value = v;
            mask = m;
            j = jj;
        }
    }
};

Selection select_max(const CanonicalDesign& x, std::span<const double> y, double sigma_hat, const ModelUniverse& u,
                     std::optional<std::size_t> j) {
    check_vector(y, x.d(), "response");
    if (!(sigma_hat > 0.0)) fail_usage("sigma_hat must be positive");
    StreamOptions options;
    options.predictor = j;
    const DirectionStream stream(x, u, options);
    Best best;
    stream.run([&](const DirectionBlock& b) {
        for (std::size_t i = 0; i < b.count; ++i)
            best.offer(std::abs(project(b.vectors + i * b.d, y.data(), b.d)), b.model[i], b.predictor[i]);
    });
    if (best.value < 0.0) {
        if (j) fail_data("predictor " + std::to_string(*j + 1) + " appears in no model of universe '" + u.to_string() + "'");
        fail_data("universe '" + u.to_string() + "' is empty after rank filtering");
    }
    return Selection{ModelId{best.mask}, best.j, best.value / sigma_hat};
}

ModelId select_spar(const CanonicalDesign& x, const ModelUniverse& u, std::span<const double> y, double s,
                    std::size_t) {
    return spar_select(x, y, s, u).model;
}

ModelId select_spar1(const CanonicalDesign& x, const ModelUniverse& u, std::span<const double> y, double s,
                     std::size_t j) {
    return spar1_select(x, y, s, u, j).model;
}

ModelId select_forward(const CanonicalDesign& x, const ModelUniverse& u, std::span<const double> y, double,
                       std::size_t size) {
    const std::size_t d = x.d();
    const std::size_t p = x.p();
    size = std::min({size, d, p});
    ModelId model;
    std::vector<double> basis;  // orthonormal basis of span(X~_model), row after row
    for (std::size_t step = 0; step < size; ++step) {
        double best = -1.0;
        std::size_t best_j = p;
        std::vector<double> best_q;
        for (std::size_t j = 0; j < p; ++j) {
            if (model.contains(j)) continue;
            std::vector<double> r(x.column(j), x.column(j) + d);
            for (std::size_t t = 0; t < step; ++t) {
                const double* q = basis.data() + t * d;
                const double c = project(q, r.data(), d);
                for (std::size_t i = 0; i < d; ++i) r[i] -= c * q[i];
            }
            double nn = 0.0;
            for (double v : r) nn += v * v;
            const double nrm = std::sqrt(nn);
            if (!(nrm > x.rank_tolerance() * x.column_norm(j))) continue;
            for (double& v : r) v /= nrm;
            const double t = std::abs(project(r.data(), y.data(), d));
            if (t > best) {
                best = t;
                best_j = j;
                best_q = std::move(r);
            }
        }
        if (best_j == p) break;
        model = model.with(best_j);
        basis.insert(basis.end(), best_q.begin(), best_q.end());
    }
    if (!u.admits(model.mask))
        fail_usage("forward stepwise selected {" + model.to_string() + "}, which is outside the universe");
    return model;
}

ModelId select_best_subset(const CanonicalDesign& x, const ModelUniverse& u, std::span<const double> y, double,
                           std::size_t size) {
    ModelUniverse sized = u;
    sized.max_size(size).min_size(size);
    double best = -1.0;
    ModelId chosen;
    for (const auto& m : enumerate_models(x, sized)) {
        const auto members = m.members();
        const Eigen::MatrixXd a = model_columns(x, members);
        const Eigen::VectorXd b = solve_least_squares(a, y);
        const double fitted = (a * b).squaredNorm();
        if (fitted > best) {
            best = fitted;
            chosen = m;
        }
    }
    return chosen;
}

}  // namespace

std::size_t FitResult::position(std::size_t j) const {
    const auto it = std::find(members.begin(), members.end(), j);
    if (it == members.end()) fail_usage("predictor " + std::to_string(j + 1) + " is not in model {" + model.to_string() + "}");
    return static_cast<std::size_t>(it - members.begin());
}

FitResult fit_submodel(const CanonicalDesign& x, std::span<const double> y, ModelId model, double sigma_hat,
                       ErrorModel df) {
    check_model(x, model);
    check_vector(y, x.d(), "response");
    if (!(sigma_hat > 0.0)) fail_usage("sigma_hat must be positive");
    FitResult fit;
    fit.model = model;
    fit.members = model.members();
    fit.sigma_hat = sigma_hat;
    fit.df = df;
    const Eigen::MatrixXd a = model_columns(x, fit.members);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    const auto m = static_cast<Eigen::Index>(fit.members.size());
    if (m > a.rows()) fail_data("model {" + model.to_string() + "} is rank deficient");
    const Eigen::MatrixXd r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    // diag((A^T A)^{-1}) = squared row norms of R^{-1}
    const Eigen::MatrixXd rinv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(m, m));
    fit.adjusted_norms.resize(fit.members.size());
    for (Eigen::Index c = 0; c < m; ++c) {
        const double an = 1.0 / rinv.row(c).norm();
        const std::size_t j = fit.members[static_cast<std::size_t>(c)];
        if (!(an > x.rank_tolerance() * x.column_norm(j)) || !std::isfinite(an))
            fail_data("model {" + model.to_string() + "} is rank deficient");
        fit.adjusted_norms[static_cast<std::size_t>(c)] = an;
    }
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    const Eigen::VectorXd b = qr.solve(yv);
    fit.estimates.assign(b.data(), b.data() + b.size());
    return fit;
}

std::vector<double> submodel_target(const CanonicalDesign& x, ModelId model, std::span<const double> mu) {
    check_model(x, model);
    check_vector(mu, x.d(), "mean vector");
    const auto members = model.members();
    const Eigen::MatrixXd a = model_columns(x, members);
    if (static_cast<std::size_t>(Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(a).rank()) < members.size())
        fail_data("model {" + model.to_string() + "} is rank deficient");
    const Eigen::VectorXd b = solve_least_squares(a, mu);
    return {b.data(), b.data() + b.size()};
}

double t_ratio(const FitResult& fit, std::size_t j, double target) {
    const std::size_t c = fit.position(j);
    return (fit.estimates[c] - target) * fit.adjusted_norms[c] / fit.sigma_hat;
}

IntervalReport posi_intervals(const CanonicalDesign& x, std::span<const double> y, double sigma_hat, ModelId model,
                              const ConstantEstimate& K, std::optional<std::span<const double>> mu) {
    check_model(x, model);
    if (!(K.K > 0.0)) fail_usage("constant K must be positive");
    if (K.scope == ConstantScope::universe) {
        if (!K.universe || !K.universe->admits(model.mask))
            fail_usage("model {" + model.to_string() + "} is outside the universe '" +
                       (K.universe ? K.universe->to_string() : std::string("?")) +
                       "' of the constant; the simultaneous guarantee would not apply");
        if (K.predictor && !model.contains(*K.predictor))
            fail_usage("PoSI1 constant for predictor " + std::to_string(*K.predictor + 1) + " does not cover model {" +
                       model.to_string() + "}");
    }
    const auto fit = fit_submodel(x, y, model, sigma_hat, K.df);
    std::optional<std::vector<double>> targets;
    if (mu) targets = submodel_target(x, model, *mu);

    IntervalReport report;
    report.model = model;
    report.sigma_hat = sigma_hat;
    for (std::size_t c = 0; c < fit.members.size(); ++c) {
        const std::size_t j = fit.members[c];
        if (K.scope == ConstantScope::universe && K.predictor && *K.predictor != j) continue;
        IntervalRow row;
        row.predictor = j;
        row.estimate = fit.estimates[c];
        row.adjusted_norm = fit.adjusted_norms[c];
        const double half = K.K * sigma_hat / row.adjusted_norm;
        row.lower = row.estimate - half;
        row.upper = row.estimate + half;
        row.t_observed = t_ratio(fit, j, 0.0);
        row.K_used = K.K;
        if (targets) {
            row.target = (*targets)[c];
            row.covers_target = row.lower <= *row.target && *row.target <= row.upper;
        }
        report.rows.push_back(row);
    }
    return report;
}

Selection spar_select(const CanonicalDesign& x, std::span<const double> y, double sigma_hat, const ModelUniverse& u) {
    return select_max(x, y, sigma_hat, u, std::nullopt);
}

Selection spar1_select(const CanonicalDesign& x, std::span<const double> y, double sigma_hat, const ModelUniverse& u,
                       std::size_t j) {
    if (j >= x.p()) fail_usage("predictor " + std::to_string(j + 1) + " outside 1.." + std::to_string(x.p()));
    return select_max(x, y, sigma_hat, u, j);
}

Selector Selector::spar() { return {"spar", &select_spar, 0}; }
Selector Selector::spar1(std::size_t j) { return {"spar1", &select_spar1, j}; }
Selector Selector::forward_stepwise(std::size_t size) { return {"forward", &select_forward, size}; }
Selector Selector::best_subset(std::size_t size) { return {"best_subset", &select_best_subset, size}; }

CoverageReport coverage_experiment(const CanonicalDesign& x, const ModelUniverse& u, const Selector& selector,
                                   double K, ErrorModel em, std::span<const double> mu, std::uint64_t replications,
                                   std::uint64_t seed, int threads) {
    if (!selector.fn) fail_usage("selector is not set");
    if (!(K > 0.0)) fail_usage("constant K must be positive");
    if (replications < 1) fail_usage("replications must be >= 1");
    check_vector(mu, x.d(), "mean vector");
    const std::size_t d = x.d();
    CoverageReport report;
    report.replications = replications;
    report.K = K;
    report.log.resize(replications);
    const auto bounds = split_range(replications, (replications + 63) / 64);
    parallel_items(bounds.size() - 1, resolve_threads(threads), [&](std::size_t part, int) {
        std::vector<double> y(d);
        for (std::size_t r = bounds[part]; r < bounds[part + 1]; ++r) {
            CounterRng rng(seed, StreamTag::coverage, r);
            for (std::size_t k = 0; k < d; ++k) y[k] = mu[k] + rng.normal();
            double s = 1.0;
            if (!em.sigma_known()) {
                const double df = static_cast<double>(*em.df);
                s = std::sqrt(rng.chi_square(df) / df);
            }
            const ModelId chosen = selector(x, u, y, s);
            if (!u.admits(chosen.mask))
                fail_usage(std::string("selector '") + selector.name + "' returned {" + chosen.to_string() +
                           "} outside the universe");
            const auto fit = fit_submodel(x, y, chosen, s, em);
            const auto target = submodel_target(x, chosen, mu);
            double worst = 0.0;
            for (std::size_t c = 0; c < fit.members.size(); ++c)
                worst = std::max(worst, std::abs(t_ratio(fit, fit.members[c], target[c])));
            report.log[r] = ReplicationRecord{chosen, worst <= K, worst, s};
        }
    });
    for (const auto& rec : report.log) report.covered += rec.covered ? 1 : 0;
    const double n = static_cast<double>(replications);
    report.coverage = static_cast<double>(report.covered) / n;
    report.binomial_se = std::sqrt(report.coverage * (1.0 - report.coverage) / n);
    return report;
}

CoverageReport coverage_experiment(const CanonicalDesign& x, const ModelUniverse& u, const Selector& selector,
                                   double alpha, const ConstantEstimate& K, std::span<const double> mu,
                                   std::uint64_t replications, std::uint64_t seed, int threads) {
    if (std::abs(K.alpha - alpha) > 1e-12)
        fail_usage("constant was computed for alpha=" + std::to_string(K.alpha) + ", not " + std::to_string(alpha));
    if (K.scope == ConstantScope::universe && K.universe && K.universe->to_string() != u.to_string())
        fail_usage("constant was computed for universe '" + K.universe->to_string() + "', not '" + u.to_string() + "'");
    return coverage_experiment(x, u, selector, K.K, K.df, mu, replications, seed, threads);
}

}  // namespace posi
