#include "doctest.h"
#include "posi.h"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace {

struct design_handle {
    posi_design* p = nullptr;
    ~design_handle() { posi_design_free(p); }
};

struct universe_handle {
    posi_universe* p = nullptr;
    ~universe_handle() { posi_universe_free(p); }
};

struct constant_handle {
    posi_constant* p = nullptr;
    ~constant_handle() { posi_constant_free(p); }
};

const std::vector<double> generic3{1.0, 0.2, -0.4, 0.3, 1.1, 0.5, -0.2, 0.4, 0.9, 0.7, -0.6, 0.1, 0.5, 0.3, -1.2};

}  // namespace

TEST_CASE("status codes and last error") {
    posi_design* x = nullptr;
    CHECK(posi_design_from_rows(nullptr, 3, 3, 1e-10, POSI_FORM_UPPER_TRIANGULAR, &x) == POSI_ERR_USAGE);
    CHECK(std::string(posi_last_error()) == "null argument");

    const std::vector<double> dup{1, 1, 2, 2, 3, 3};
    CHECK(posi_design_from_rows(dup.data(), 3, 2, 1e-10, POSI_FORM_UPPER_TRIANGULAR, &x) == POSI_OK);
    CHECK(posi_design_d(x) == 1);
    posi_design_free(x);

    CHECK(posi_design_from_rows(generic3.data(), 5, 3, 1e-10, POSI_FORM_UPPER_TRIANGULAR, &x) == POSI_OK);
    CHECK(std::string(posi_last_error()).empty());
    posi_design* dual = nullptr;
    CHECK(posi_design_dual(x, &dual) == POSI_OK);
    posi_design_free(dual);
    posi_design_free(x);

    const std::vector<double> wide{1, 0, 1, 0, 1, 1};
    CHECK(posi_design_from_rows(wide.data(), 2, 3, 1e-10, POSI_FORM_SYMMETRIC, &x) == POSI_ERR_INFEASIBLE);
    CHECK(!std::string(posi_last_error()).empty());

    CHECK(posi_design_load("/nonexistent/design.csv", 0, 0, 1e-10, POSI_FORM_UPPER_TRIANGULAR, &x) == POSI_ERR_DATA);

    posi_constant* k = nullptr;
    CHECK(posi_constant_scheffe(1.5, 2, 0, &k) == POSI_ERR_USAGE);
    CHECK(k == nullptr);
    CHECK(std::string(posi_version()) == "0.1.0");
}

TEST_CASE("design, universe and directions through the C interface") {
    design_handle x;
    REQUIRE(posi_design_from_rows(generic3.data(), 5, 3, 1e-10, POSI_FORM_UPPER_TRIANGULAR, &x.p) == POSI_OK);
    CHECK(posi_design_n(x.p) == 5);
    CHECK(posi_design_p(x.p) == 3);
    std::vector<double> v(9);
    REQUIRE(posi_design_values(x.p, v.data()) == POSI_OK);
    CHECK(v[3] == 0.0);  // upper triangular
    CHECK(v[0] > 0.0);

    universe_handle u;
    REQUIRE(posi_universe_parse("all", 3, &u.p) == POSI_OK);
    CHECK(posi_universe_is_all(u.p) == 1);
    uint64_t models = 0;
    REQUIRE(posi_model_count(x.p, u.p, &models) == POSI_OK);
    CHECK(models == 7);

    posi_directions* l = nullptr;
    REQUIRE(posi_directions_build(x.p, u.p, 1, 1e-8, 1, &l) == POSI_OK);
    CHECK(posi_directions_size(l) == 12);
    CHECK(posi_directions_dim(l) == 3);
    std::vector<double> dir(3);
    size_t j = 0;
    uint64_t mask = 0;
    double raw = 0.0;
    for (size_t i = 0; i < posi_directions_size(l); ++i) {
        REQUIRE(posi_directions_get(l, i, dir.data(), &j, &mask, &raw) == POSI_OK);
        CHECK(std::hypot(dir[0], dir[1], dir[2]) == doctest::Approx(1.0));
        CHECK(((mask >> j) & 1u) == 1u);
        double norm = 0.0;
        REQUIRE(posi_adjusted_predictor(x.p, mask, j, nullptr, &norm) == POSI_OK);
        CHECK(norm == doctest::Approx(raw));
    }
    CHECK(posi_directions_get(l, 12, nullptr, nullptr, nullptr, nullptr) == POSI_ERR_USAGE);

    const double zero[3] = {0, 0, 0};
    int inside = 0;
    CHECK(posi_polytope_contains(l, 2.0, zero, 3, &inside) == POSI_OK);
    CHECK(inside == 1);
    posi_directions_free(l);

    universe_handle bad;
    CHECK(posi_universe_parse("size<=x", 3, &bad.p) == POSI_ERR_USAGE);
}

TEST_CASE("constants and inference through the C interface") {
    constant_handle s;
    REQUIRE(posi_constant_scheffe(0.05, 2, 0, &s.p) == POSI_OK);
    posi_estimate e{};
    REQUIRE(posi_constant_info(s.p, &e) == POSI_OK);
    CHECK(e.K == doctest::Approx(std::sqrt(-2.0 * std::log(0.05))));
    CHECK(e.method == POSI_METHOD_CLOSED_FORM);
    CHECK(e.scope == POSI_SCOPE_ALL_CONTRASTS);
    CHECK(e.predictor == -1);

    design_handle x;
    REQUIRE(posi_design_from_rows(generic3.data(), 5, 3, 1e-10, POSI_FORM_UPPER_TRIANGULAR, &x.p) == POSI_OK);
    universe_handle u;
    REQUIRE(posi_universe_parse("all", 3, &u.p) == POSI_OK);
    posi_mc_options o;
    posi_mc_options_default(&o);
    o.samples = 5000;
    o.threads = 1;
    constant_handle k;
    REQUIRE(posi_constant_K(x.p, u.p, 0.05, 0, &o, &k.p) == POSI_OK);
    posi_estimate ke{};
    REQUIRE(posi_constant_info(k.p, &ke) == POSI_OK);
    CHECK(ke.direction_count == 12);
    CHECK(ke.K > 1.96);
    CHECK(ke.K < std::sqrt(-2.0 * std::log(0.05)) + 0.5);

    o.threads = 3;
    constant_handle k3;
    REQUIRE(posi_constant_K(x.p, u.p, 0.05, 0, &o, &k3.p) == POSI_OK);
    posi_estimate ke3{};
    REQUIRE(posi_constant_info(k3.p, &ke3) == POSI_OK);
    CHECK(ke3.K == ke.K);

    const std::vector<double> y{0.5, 1.0, -0.3, 0.2, 0.8};
    std::vector<posi_interval> rows(3);
    size_t count = 0;
    REQUIRE(posi_intervals(x.p, y.data(), 5, 1.0, 0b011, k.p, nullptr, rows.data(), &count) == POSI_OK);
    CHECK(count == 2);
    for (size_t i = 0; i < count; ++i) {
        CHECK(rows[i].upper - rows[i].lower == doctest::Approx(2 * ke.K / rows[i].adjusted_norm));
        CHECK(rows[i].has_target == 0);
    }
    CHECK(posi_intervals(x.p, y.data(), 4, 1.0, 0b011, k.p, nullptr, rows.data(), &count) != POSI_OK);

    posi_selection sel{};
    REQUIRE(posi_spar(x.p, u.p, y.data(), 5, 1.0, -1, &sel) == POSI_OK);
    CHECK(((sel.model >> sel.predictor) & 1u) == 1u);
    CHECK(sel.achieved > 0.0);

    const std::vector<double> mu(5, 0.0);
    posi_coverage_report rep{};
    std::vector<uint8_t> covered(50);
    REQUIRE(posi_coverage(x.p, u.p, POSI_SELECT_SPAR, 0, k.p, mu.data(), 5, 50, 4, 1, &rep, nullptr, covered.data(),
                          nullptr) == POSI_OK);
    CHECK(rep.replications == 50);
    uint64_t c = 0;
    for (auto b : covered) c += b;
    CHECK(c == rep.covered);

    universe_handle small;
    REQUIRE(posi_universe_parse("size<=1", 3, &small.p) == POSI_OK);
    CHECK(posi_coverage(x.p, small.p, POSI_SELECT_SPAR, 0, k.p, mu.data(), 5, 10, 4, 1, &rep, nullptr, nullptr,
                        nullptr) == POSI_ERR_USAGE);
}

TEST_CASE("special designs through the C interface") {
    double argmax = 0.0, value = 0.0;
    REQUIRE(posi_rate_maximum(&argmax, &value) == POSI_OK);
    CHECK(argmax == doctest::Approx(0.72972).epsilon(1e-4));
    double f = 0.0;
    CHECK(posi_rate_function(1.5, &f) == POSI_ERR_USAGE);

    const size_t ps[] = {3};
    size_t count = 0;
    REQUIRE(posi_family_worst_posi1(ps, 1, nullptr, 0, 0.05, 500, 1, 1, nullptr, 0, &count) == POSI_OK);
    CHECK(count == 16);
    std::vector<posi_family_row> rows(count);
    REQUIRE(posi_family_worst_posi1(ps, 1, nullptr, 0, 0.05, 500, 1, 1, rows.data(), rows.size(), &count) == POSI_OK);
    int best = 0;
    for (const auto& r : rows) best += r.is_best;
    CHECK(best >= 1);
    CHECK(posi_family_worst_posi1(ps, 1, nullptr, 0, 0.05, 500, 1, 1, rows.data(), 3, &count) == POSI_ERR_USAGE);

    std::vector<double> z{0.3, -1.0, 2.0};
    double stat = 0.0;
    REQUIRE(posi_fast_worst_posi1_stat(3, 0.0, z.data(), &stat, nullptr) == POSI_OK);
    CHECK(stat == 2.0);
}
