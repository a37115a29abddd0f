#include "doctest.h"
#include "error.hpp"
#include "helpers.hpp"
#include "inference.hpp"
#include "monte_carlo.hpp"

#include <random>

using namespace posi;
using testing_util::column;
using testing_util::random_canonical;
using testing_util::random_matrix;

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::MatrixXd model_matrix(const CanonicalDesign& x, ModelId m) {
    const auto members = m.members();
    Eigen::MatrixXd a(static_cast<Eigen::Index>(x.d()), static_cast<Eigen::Index>(members.size()));
    for (std::size_t c = 0; c < members.size(); ++c) a.col(static_cast<Eigen::Index>(c)) = column(x, members[c]);
    return a;
}

ConstantEstimate fixed_constant(double k) {
    ConstantEstimate e;
    e.K = k;
    e.scope = ConstantScope::reference;
    return e;
}

}  // namespace

TEST_CASE("submodel fit solves the normal equations") {
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        const auto x = random_canonical(9, 5, seed);
        const Eigen::VectorXd y = random_matrix(5, 1, seed + 100).col(0);
        const ModelId m{(seed * 7) % 31 + 1};
        const auto fit = fit_submodel(x, to_std(y), m, 1.3);
        const Eigen::MatrixXd a = model_matrix(x, m);
        const Eigen::VectorXd oracle = (a.transpose() * a).inverse() * a.transpose() * y;
        const Eigen::Map<const Eigen::VectorXd> b(fit.estimates.data(), oracle.size());
        CHECK((b - oracle).norm() < 1e-10 * (1 + oracle.norm()));
        CHECK((a.transpose() * (y - a * b)).norm() < 1e-10 * (1 + y.norm()));
        for (std::size_t c = 0; c < fit.members.size(); ++c) {
            const double an = testing_util::hat_residual(x, m, fit.members[c]).norm();
            CHECK(fit.adjusted_norms[c] == doctest::Approx(an).epsilon(1e-10));
            // estimate = <X_{j.M}, y> / ||X_{j.M}||^2
            const Eigen::VectorXd r = testing_util::hat_residual(x, m, fit.members[c]);
            CHECK(fit.estimates[c] == doctest::Approx(r.dot(y) / r.squaredNorm()).epsilon(1e-9));
        }
    }
}

TEST_CASE("canonical fit equals the raw regression") {
    const Eigen::MatrixXd raw = random_matrix(12, 4, 9);
    const Eigen::VectorXd y = random_matrix(12, 1, 10).col(0);
    const auto x = canonicalize(DesignMatrix(raw, {}));
    const auto yc = x.reduce(std::span<const double>(y.data(), 12));
    const ModelId m{0b1011};
    const auto fit = fit_submodel(x, yc, m, 1.0);
    Eigen::MatrixXd a(12, 3);
    a << raw.col(0), raw.col(1), raw.col(3);
    const Eigen::VectorXd oracle = a.colPivHouseholderQr().solve(y);
    for (int c = 0; c < 3; ++c) CHECK(fit.estimates[static_cast<std::size_t>(c)] == doctest::Approx(oracle(c)).epsilon(1e-10));
}

TEST_CASE("targets and t-ratios") {
    const auto x = random_canonical(6, 3, 11);
    const Eigen::VectorXd mu = column(x, 0) * 2.0 - column(x, 2) * 0.5;
    const auto full = submodel_target(x, ModelId{0b111}, to_std(mu));
    CHECK(full[0] == doctest::Approx(2.0));
    CHECK(full[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(full[2] == doctest::Approx(-0.5));
    // a submodel target absorbs the omitted predictor
    const auto sub = submodel_target(x, ModelId{0b001}, to_std(mu));
    const Eigen::VectorXd x1 = column(x, 0);
    CHECK(sub[0] == doctest::Approx(x1.dot(mu) / x1.squaredNorm()));

    const auto fit = fit_submodel(x, to_std(mu), ModelId{0b111}, 2.0);
    CHECK(t_ratio(fit, 0, 2.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(t_ratio(fit, 0, 0.0) == doctest::Approx(2.0 * fit.adjusted_norms[0] / 2.0));
    CHECK_THROWS_AS(t_ratio(fit, 5, 0.0), Error);
}

TEST_CASE("rank deficient model is rejected") {
    Eigen::MatrixXd m = random_matrix(5, 3, 3);
    m.col(2) = m.col(0) * 2.0;
    const auto x = canonicalize(DesignMatrix(m, {}));
    std::vector<double> y(x.d(), 1.0);
    CHECK_THROWS_AS(fit_submodel(x, y, ModelId{0b101}, 1.0), Error);
}

TEST_CASE("intervals") {
    const auto x = random_canonical(8, 4, 12);
    const Eigen::VectorXd y = random_matrix(4, 1, 13).col(0);
    McOptions o;
    o.samples = 5000;
    const auto K = posi_K(x, ModelUniverse::all().max_size(3), 0.05, ErrorModel::known_sigma(), o);
    const auto rep = posi_intervals(x, to_std(y), 0.7, ModelId{0b0110}, K, std::span<const double>(y.data(), 4));
    REQUIRE(rep.rows.size() == 2);
    for (const auto& r : rep.rows) {
        CHECK(r.upper - r.lower == doctest::Approx(2 * K.K * 0.7 / r.adjusted_norm));
        CHECK(r.lower <= r.estimate);
        CHECK(r.estimate <= r.upper);
        REQUIRE(r.target);
        CHECK(*r.target == doctest::Approx(r.estimate));  // mu = y
        CHECK(*r.covers_target);
    }
    CHECK(rep.rows[0].predictor == 1);
    // model outside the constant's universe: the guarantee does not apply
    try {
        posi_intervals(x, to_std(y), 0.7, ModelId{0b1111}, K);
        FAIL("expected usage error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::usage);
    }
    // a PoSI1 constant only yields its own predictor
    const auto K1 = posi1_K(x, ModelUniverse::all(), 2, 0.05, ErrorModel::known_sigma(), o);
    const auto one = posi_intervals(x, to_std(y), 0.7, ModelId{0b0110}, K1);
    REQUIRE(one.rows.size() == 1);
    CHECK(one.rows[0].predictor == 2);
    CHECK_THROWS_AS(posi_intervals(x, to_std(y), 0.7, ModelId{0b0011}, K1), Error);
    // reference constants apply anywhere
    CHECK(posi_intervals(x, to_std(y), 0.7, ModelId{0b1111}, fixed_constant(1.96)).rows.size() == 4);
}

TEST_CASE("SPAR attains the stream maximum exactly") {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t p = 2 + gen() % 5;
        const auto x = random_canonical(p + 2, p, 300 + trial);
        const Eigen::VectorXd y = random_matrix(p, 1, 600 + trial).col(0);
        const auto yv = to_std(y);
        ModelUniverse u;
        if (trial % 3 == 0) u.max_size(2);
        const auto s = spar_select(x, yv, 1.5, u);
        const auto set = direction_stream(x, u, DedupMode::none());
        double best = 0.0;
        for (std::size_t i = 0; i < set.size(); ++i) best = std::max(best, std::abs(project(set.vector(i).data(), yv.data(), p)));
        CHECK(s.achieved == best / 1.5);
        CHECK(u.admits(s.model.mask));
        CHECK(s.model.contains(s.predictor));
        // the selected model's own |t| reaches the maximum
        const auto fit = fit_submodel(x, yv, s.model, 1.5);
        CHECK(std::abs(t_ratio(fit, s.predictor, 0.0)) == doctest::Approx(s.achieved).epsilon(1e-10));
        // brute-force oracle through hat matrices
        double brute = 0.0;
        for (const auto& b : testing_util::brute_directions(x, u)) brute = std::max(brute, std::abs(b.v.dot(y)));
        CHECK(s.achieved == doctest::Approx(brute / 1.5).epsilon(1e-10));

        const std::size_t j = gen() % p;
        const auto s1 = spar1_select(x, yv, 1.5, u, j);
        CHECK(s1.predictor == j);
        CHECK(s1.achieved <= s.achieved);
        double brute1 = 0.0;
        for (const auto& b : testing_util::brute_directions(x, u, static_cast<int>(j)))
            brute1 = std::max(brute1, std::abs(b.v.dot(y)));
        CHECK(s1.achieved == doctest::Approx(brute1 / 1.5).epsilon(1e-10));
    }
}

TEST_CASE("SPAR ties go to the smallest model, then the smallest predictor") {
    // orthogonal design: l_{j.M} = e_j for every M containing j
    const auto eye = CanonicalDesign::from_canonical(Eigen::MatrixXd::Identity(3, 3), CanonicalForm::symmetric);
    const std::vector<double> y{0.5, -2.0, 2.0};
    const auto s = spar_select(eye, y, 1.0, ModelUniverse::all());
    CHECK(s.model.mask == 0b010);
    CHECK(s.predictor == 1);
    CHECK(s.achieved == 2.0);
}

TEST_CASE("selectors") {
    const auto x = random_canonical(7, 5, 20);
    const Eigen::VectorXd y = random_matrix(5, 1, 21).col(0);
    const auto yv = to_std(y);
    // forward stepwise: greedy oracle through hat residuals
    ModelId greedy;
    for (int step = 0; step < 3; ++step) {
        double best = -1;
        std::size_t pick = 0;
        for (std::size_t j = 0; j < 5; ++j) {
            if (greedy.contains(j)) continue;
            const Eigen::VectorXd r = testing_util::hat_residual(x, greedy.with(j), j);
            const double t = std::abs(r.dot(y)) / r.norm();
            if (t > best) {
                best = t;
                pick = j;
            }
        }
        greedy = greedy.with(pick);
    }
    CHECK(Selector::forward_stepwise(3)(x, ModelUniverse::all(), yv, 1.0) == greedy);
    // best subset of size 2 by fitted sum of squares
    double best = -1;
    std::uint64_t arg = 0;
    for (std::uint64_t m = 1; m < 32; ++m) {
        if (std::popcount(m) != 2) continue;
        const Eigen::MatrixXd a = model_matrix(x, ModelId{m});
        const double ss = (a * (a.transpose() * a).inverse() * a.transpose() * y).squaredNorm();
        if (ss > best) {
            best = ss;
            arg = m;
        }
    }
    CHECK(Selector::best_subset(2)(x, ModelUniverse::all(), yv, 1.0).mask == arg);
    CHECK(Selector::spar()(x, ModelUniverse::all(), yv, 1.0) == spar_select(x, yv, 1.0, ModelUniverse::all()).model);
    CHECK(Selector::spar1(3)(x, ModelUniverse::all(), yv, 1.0) == spar1_select(x, yv, 1.0, ModelUniverse::all(), 3).model);
}

TEST_CASE("coverage experiment") {
    const auto x = random_canonical(10, 3, 30);
    const std::vector<double> mu{0.3, -0.2, 0.1};
    McOptions o;
    o.samples = 20000;
    const auto K = posi_K(x, ModelUniverse::all(), 0.1, ErrorModel::known_sigma(), o);
    const auto rep = coverage_experiment(x, ModelUniverse::all(), Selector::spar(), 0.1, K, mu, 2000, 4, 1);
    CHECK(rep.replications == 2000);
    CHECK(rep.log.size() == 2000);
    CHECK(rep.coverage >= 0.9 - 3 * rep.binomial_se);
    CHECK(rep.binomial_se == doctest::Approx(std::sqrt(rep.coverage * (1 - rep.coverage) / 2000)));
    // deterministic across thread counts
    const auto again = coverage_experiment(x, ModelUniverse::all(), Selector::spar(), 0.1, K, mu, 2000, 4, 3);
    CHECK(again.covered == rep.covered);
    for (std::size_t i = 0; i < rep.log.size(); ++i) {
        CHECK(again.log[i].model == rep.log[i].model);
        CHECK(again.log[i].max_abs_t == rep.log[i].max_abs_t);
    }
    // covered <=> max |t| <= K
    for (const auto& r : rep.log) CHECK(r.covered == (r.max_abs_t <= K.K));
    // a constant belonging to another alpha is refused
    CHECK_THROWS_AS(coverage_experiment(x, ModelUniverse::all(), Selector::spar(), 0.05, K, mu, 10, 4, 1), Error);
}

TEST_CASE("coverage with estimated sigma") {
    const auto x = random_canonical(10, 3, 31);
    const std::vector<double> mu{0.0, 0.0, 0.0};
    const auto rep = coverage_experiment(x, ModelUniverse::all(), Selector::forward_stepwise(2), 2.5,
                                         ErrorModel::with_df(6), mu, 500, 2, 1);
    for (const auto& r : rep.log) {
        CHECK(r.sigma_hat > 0.0);
        CHECK(r.model.size() == 2);
    }
}
