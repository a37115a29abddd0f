#include "doctest.h"
#include "error.hpp"
#include "helpers.hpp"
#include "monte_carlo.hpp"
#include "structure.hpp"

#include <random>

using namespace posi;
using testing_util::random_canonical;
using testing_util::random_spd;

namespace {

CanonicalDesign symmetric_design(std::size_t p, std::uint64_t seed) {
    return CanonicalDesign::from_canonical(random_spd(p, seed), CanonicalForm::symmetric);
}

}  // namespace

TEST_CASE("dual design examples") {
    const auto eye = CanonicalDesign::from_canonical(Eigen::MatrixXd::Identity(4, 4), CanonicalForm::symmetric);
    CHECK((dual_design(eye).values() - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-15);

    const auto s = symmetric_design(4, 3);
    const auto ds = dual_design(s);
    CHECK((ds.values() - s.values().inverse()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(ds.form() == CanonicalForm::symmetric);

    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto x = random_canonical(3, 3, seed);
        const auto d = dual_design(x);
        CHECK((x.values().transpose() * d.values() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((dual_design(d).values() - x.values()).cwiseAbs().maxCoeff() < 1e-10);
    }
    CHECK_THROWS_AS(dual_design(random_canonical(2, 3, 1)), Error);
}

TEST_CASE("adjusted predictors of dual designs") {
    const auto eye = CanonicalDesign::from_canonical(Eigen::MatrixXd::Identity(3, 3), CanonicalForm::symmetric);
    const auto r0 = verify_duality(eye);
    CHECK(r0.matched_pairs == 12);
    CHECK(r0.max_mismatch < 1e-14);
    CHECK(r0.sign_classes_equal);

    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const std::size_t p = 3 + seed % 3;
        for (const auto& x : {symmetric_design(p, seed), random_canonical(p, p, seed)}) {
            const auto r = verify_duality(x);
            CHECK(r.matched_pairs == (p << (p - 1)));
            CHECK(r.unmatched_pairs == 0);
            CHECK(r.norm_product_check < 1e-8);
            CHECK(r.max_mismatch < 1e-8);
            CHECK(r.sign_classes_equal);
        }
    }
    try {
        verify_duality(random_canonical(3, 4, 2));
        FAIL("expected infeasible");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::infeasible);
    }
}

TEST_CASE("dual designs share the PoSI constant") {
    McOptions o;
    o.samples = 20000;
    o.seed = 9;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto x = symmetric_design(4, seed);
        const auto inv = CanonicalDesign::from_canonical(x.values().inverse(), CanonicalForm::symmetric);
        const auto a = posi_K(x, ModelUniverse::all(), 0.05, ErrorModel::known_sigma(), o);
        const auto b = posi_K(inv, ModelUniverse::all(), 0.05, ErrorModel::known_sigma(), o);
        CHECK(a.direction_count == b.direction_count);
        CHECK(a.quantile_index == b.quantile_index);
        CHECK(std::abs(a.K - b.K) <= 1e-12 * a.K);
        // independent seeds: within three combined standard errors
        McOptions other = o;
        other.seed = 10;
        const auto c = posi_K(inv, ModelUniverse::all(), 0.05, ErrorModel::known_sigma(), other);
        CHECK(std::abs(a.K - c.K) <= 3 * std::hypot(a.mc_standard_error, c.mc_standard_error));
    }
}

TEST_CASE("orthogonality census") {
    // generic designs: exactly the nested-model partners, (m-1) 2^{m-2} + (p-m) 2^{p-m-1};
    // singletons reach (p-1) 2^{p-2}
    auto nested = [](std::size_t p, std::size_t m) {
        const double inner = m >= 2 ? double(m - 1) * std::ldexp(1.0, int(m) - 2) : 0.0;
        const double outer = m < p ? double(p - m) * std::ldexp(1.0, int(p - m) - 1) : 0.0;
        return static_cast<std::uint64_t>(inner + outer);
    };
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        for (std::size_t p : {3u, 4u, 5u}) {
            const auto x = random_canonical(p, p, seed);
            const auto set = direction_stream(x, ModelUniverse::all(), DedupMode::none());
            const auto c = orthogonality_census(set, 1e-10);
            std::uint64_t most = 0;
            for (std::size_t i = 0; i < set.size(); ++i) {
                CHECK(c.partners[i] == nested(p, set.model(i).size()));
                most = std::max(most, c.partners[i]);
            }
            CHECK(most == ((p - 1) << (p - 2)));
            std::uint64_t total = 0;
            for (auto [count, dirs] : c.histogram) total += dirs;
            CHECK(total == set.size());
            CHECK(orthogonality_census(set, 1e-10, 3).partners == c.partners);
        }
    }
    // p = 2: exhaustive inner-product table
    const auto x = random_canonical(2, 2, 4);
    const auto set = direction_stream(x, ModelUniverse::all(), DedupMode::none());
    const auto c = orthogonality_census(set, 1e-10);
    for (std::size_t i = 0; i < set.size(); ++i) {
        std::uint64_t n = 0;
        for (std::size_t k = 0; k < set.size(); ++k) {
            const auto a = set.vector(i);
            const auto b = set.vector(k);
            if (k != i && std::abs(a[0] * b[0] + a[1] * b[1]) < 1e-10) ++n;
        }
        CHECK(c.partners[i] == n);
    }
    // orthogonal design: all distinct directions mutually orthogonal
    const auto eye = CanonicalDesign::from_canonical(Eigen::MatrixXd::Identity(4, 4), CanonicalForm::symmetric);
    const auto ce = orthogonality_census(direction_stream(eye, ModelUniverse::all()), 1e-10);
    for (auto n : ce.partners) CHECK(n == 3);
    CHECK(ce.orthogonal_pairs == 6);
}

TEST_CASE("PoSI polytope") {
    const auto x = random_canonical(6, 4, 15);
    const auto set = direction_stream(x, ModelUniverse::all());
    const PolytopeSpec poly(set, 2.5);
    std::mt19937_64 gen(1);
    std::normal_distribution<double> n01;
    for (int t = 0; t < 200; ++t) {
        std::vector<double> z(4);
        for (auto& v : z) v = n01(gen);
        const double norm = std::sqrt(z[0] * z[0] + z[1] * z[1] + z[2] * z[2] + z[3] * z[3]);
        // ball of radius K is inside
        std::vector<double> ball(4);
        for (int k = 0; k < 4; ++k) ball[k] = z[k] / norm * 2.5 * 0.999999;
        CHECK(polytope_contains(poly, ball));
        // point symmetry and scale similarity
        std::vector<double> neg(4), scaled(4);
        for (int k = 0; k < 4; ++k) {
            neg[k] = -z[k];
            scaled[k] = 3.0 * z[k];
        }
        CHECK(polytope_contains(poly, z) == polytope_contains(poly, neg));
        CHECK(polytope_contains(poly, z) == polytope_contains(PolytopeSpec(set, 7.5), scaled));
    }
    // tangency at K l*, violation just beyond
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto l = set.vector(i);
        std::vector<double> at(4), beyond(4);
        for (int k = 0; k < 4; ++k) {
            at[k] = 2.5 * l[k] * (1 - 1e-12);
            beyond[k] = (2.5 + 1e-6) * l[k];
        }
        CHECK(polytope_contains(poly, at));
        CHECK_FALSE(polytope_contains(poly, beyond));
    }
    CHECK_THROWS_AS(PolytopeSpec(DirectionSet(4), 1.0), Error);
    CHECK_THROWS_AS(PolytopeSpec(set, -1.0), Error);
}
