#include "posi.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

using json = nlohmann::ordered_json;

namespace {

struct cli_failure : std::runtime_error {
    posi_status status;
    cli_failure(posi_status s, const std::string& what) : std::runtime_error(what), status(s) {}
};

[[noreturn]] void usage(const std::string& what) { throw cli_failure(POSI_ERR_USAGE, what); }

void check(posi_status s) {
    if (s != POSI_OK) throw cli_failure(s, posi_last_error());
}

template <class T, void (*Free)(T*)>
struct handle {
    T* p = nullptr;
    handle() = default;
    handle(const handle&) = delete;
    handle& operator=(const handle&) = delete;
    ~handle() { Free(p); }
};

using design_ptr = handle<posi_design, posi_design_free>;
using universe_ptr = handle<posi_universe, posi_universe_free>;
using directions_ptr = handle<posi_directions, posi_directions_free>;
using constant_ptr = handle<posi_constant, posi_constant_free>;

struct config {
    std::string command;
    std::string kind;
    std::string design;
    bool header = false;
    bool intercept = false;
    std::string form = "upper";
    double rank_tol = 1e-10;
    double alpha = 0.05;
    std::string df = "inf";
    std::string universe = "all";
    std::string mc_samples = "1e5";
    std::uint64_t seed = 0;
    std::string threads = "auto";
    std::string output = "json";
    std::string mode = "auto";
    std::string response;
    std::string mu;
    std::optional<double> sigma_hat;
    std::string model;
    std::string selector = "spar";
    std::optional<std::size_t> size;
    std::string constant = "posi";
    std::optional<double> k_value;
    std::uint64_t replications = 1000;
    std::optional<std::size_t> predictor;
    std::optional<std::size_t> d;
    std::string p_list;
    std::string grid;
    double growth = 2.0;
};

// derived, validated settings
struct settings {
    unsigned df = 0;
    std::uint64_t samples = 100000;
    int threads = 0;
    posi_eval_mode mode = POSI_EVAL_AUTO;
};

std::uint64_t parse_count(const std::string& text, const char* what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        usage(std::string("invalid ") + what + " '" + text + "'");
    }
    if (used != text.size() || !(v >= 1.0) || v != std::floor(v) || v > 1e15)
        usage(std::string("invalid ") + what + " '" + text + "'");
    return static_cast<std::uint64_t>(v);
}

std::vector<double> parse_reals(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        try {
            out.push_back(std::stod(item, &used));
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) usage(std::string("invalid ") + what + " entry '" + item + "'");
    }
    if (out.empty()) usage(std::string("empty ") + what);
    return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text, const char* what) {
    std::vector<std::size_t> out;
    for (double v : parse_reals(text, what)) {
        if (v < 1 || v != std::floor(v)) usage(std::string("invalid ") + what + " entry");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

settings derive(const config& c) {
    settings s;
    if (c.df != "inf") {
        const auto v = parse_count(c.df, "--df");
        if (v > 1000000000) usage("--df too large");
        s.df = static_cast<unsigned>(v);
    }
    s.samples = parse_count(c.mc_samples, "--mc-samples");
    if (c.threads != "auto") {
        const auto t = parse_count(c.threads, "--threads");
        if (t > 4096) usage("--threads too large");
        s.threads = static_cast<int>(t);
    }
    if (c.mode == "materialized") s.mode = POSI_EVAL_MATERIALIZED;
    else if (c.mode == "streaming") s.mode = POSI_EVAL_STREAMING;
    else if (c.mode != "auto") usage("--mode must be auto, materialized or streaming");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) usage("--alpha must lie in (0, 1)");
    return s;
}

json df_json(unsigned df) { return df == 0 ? json("inf") : json(df); }

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// fields every JSON document carries
json envelope(const config& c, const settings& s) {
    json j;
    j["command"] = c.command;
    j["K"] = nullptr;
    j["alpha"] = c.alpha;
    j["df"] = df_json(s.df);
    j["mc_samples"] = nullptr;
    j["mc_standard_error"] = nullptr;
    j["seed"] = c.seed;
    j["d"] = nullptr;
    j["p"] = nullptr;
    j["direction_count"] = nullptr;
    j["universe"] = nullptr;
    j["tool_version"] = posi_version();
    return j;
}

const char* method_name(posi_method m) {
    switch (m) {
        case POSI_METHOD_MONTE_CARLO: return "monte_carlo";
        case POSI_METHOD_CLOSED_FORM: return "closed_form";
        case POSI_METHOD_BOUND: return "bound";
    }
    return "unknown";
}

const char* scope_name(posi_scope s) {
    switch (s) {
        case POSI_SCOPE_UNIVERSE: return "universe";
        case POSI_SCOPE_ALL_CONTRASTS: return "all_contrasts";
        case POSI_SCOPE_REFERENCE: return "reference";
    }
    return "unknown";
}

void put_estimate(json& j, const posi_estimate& e) {
    j["K"] = num(e.K);
    if (e.method == POSI_METHOD_MONTE_CARLO) {
        j["mc_samples"] = e.mc_samples;
        j["mc_standard_error"] = num(e.mc_standard_error);
        j["quantile_index"] = e.quantile_index;
        j["direction_count"] = e.direction_count;
        j["emitted_count"] = e.emitted_count;
        j["degenerate_count"] = e.degenerate_count;
    }
    j["method"] = method_name(e.method);
    j["scope"] = scope_name(e.scope);
}

posi_estimate info(const constant_ptr& k) {
    posi_estimate e{};
    check(posi_constant_info(k.p, &e));
    return e;
}

void load_design(const config& c, design_ptr& x) {
    if (c.design.empty()) usage("--design is required for '" + c.command + "'");
    posi_form form = POSI_FORM_UPPER_TRIANGULAR;
    if (c.form == "symmetric") form = POSI_FORM_SYMMETRIC;
    else if (c.form != "upper") usage("--form must be upper or symmetric");
    check(posi_design_load(c.design.c_str(), c.header, c.intercept, c.rank_tol, form, &x.p));
}

void describe_design(json& j, const design_ptr& x) {
    j["d"] = posi_design_d(x.p);
    j["p"] = posi_design_p(x.p);
}

void parse_universe(const config& c, const design_ptr& x, universe_ptr& u, json& j) {
    check(posi_universe_parse(c.universe.c_str(), posi_design_p(x.p), &u.p));
    j["universe"] = posi_universe_string(u.p);
    const std::size_t p = posi_design_p(x.p);
    if (posi_universe_is_all(u.p) && p > 16) {
        double bound = 0.0;
        check(posi_direction_count_bound(x.p, u.p, &bound));
        const double work = bound * static_cast<double>(posi_design_d(x.p)) * 1e-9;
        std::cerr << "warning: p = " << p << " with universe 'all' gives up to " << bound
                  << " directions; projected streaming time about " << work
                  << " s per Monte Carlo draw at 1 Gflop/s\n";
    }
}

std::vector<double> load_vector(const std::string& path, const char* flag) {
    if (path.empty()) usage(std::string(flag) + " is required");
    double* values = nullptr;
    std::size_t n = 0;
    check(posi_load_vector(path.c_str(), &values, &n));
    std::vector<double> out(values, values + n);
    posi_free_vector(values);
    return out;
}

std::uint64_t parse_model(const std::string& text, std::size_t p) {
    if (text.empty()) usage("--model is required");
    std::uint64_t mask = 0;
    for (auto j : parse_sizes(text, "--model")) {
        if (j > p) usage("--model index " + std::to_string(j) + " exceeds p = " + std::to_string(p));
        mask |= std::uint64_t{1} << (j - 1);
    }
    return mask;
}

std::size_t predictor_index(const config& c, std::size_t p) {
    if (!c.predictor) usage("--predictor is required");
    if (*c.predictor < 1 || *c.predictor > p) usage("--predictor must lie in 1.." + std::to_string(p));
    return *c.predictor - 1;
}

posi_mc_options mc(const config& c, const settings& s) {
    posi_mc_options o;
    posi_mc_options_default(&o);
    o.samples = s.samples;
    o.seed = c.seed;
    o.threads = s.threads;
    o.mode = s.mode;
    return o;
}

// constant used by intervals / coverage
void make_constant(const config& c, const settings& s, const design_ptr& x, const universe_ptr& u,
                   constant_ptr& k) {
    if (c.k_value) {
        check(posi_constant_fixed(*c.k_value, c.alpha, s.df, &k.p));
        return;
    }
    const auto o = mc(c, s);
    if (c.constant == "posi") check(posi_constant_K(x.p, u.p, c.alpha, s.df, &o, &k.p));
    else if (c.constant == "posi1")
        check(posi_constant_K1(x.p, u.p, predictor_index(c, posi_design_p(x.p)), c.alpha, s.df, &o, &k.p));
    else if (c.constant == "scheffe") check(posi_constant_scheffe(c.alpha, posi_design_d(x.p), s.df, &k.p));
    else if (c.constant == "orth") check(posi_constant_orth(c.alpha, posi_design_d(x.p), s.df, &k.p));
    else if (c.constant == "marginal") check(posi_constant_marginal(c.alpha, s.df, &k.p));
    else usage("--constant must be posi, posi1, scheffe, orth or marginal");
}

json run_k(const config& c, const settings& s, bool single) {
    json j = envelope(c, s);
    design_ptr x;
    load_design(c, x);
    describe_design(j, x);
    universe_ptr u;
    parse_universe(c, x, u, j);
    const auto o = mc(c, s);
    constant_ptr k;
    if (single) {
        const auto jj = predictor_index(c, posi_design_p(x.p));
        check(posi_constant_K1(x.p, u.p, jj, c.alpha, s.df, &o, &k.p));
        j["predictor"] = jj + 1;
    } else {
        check(posi_constant_K(x.p, u.p, c.alpha, s.df, &o, &k.p));
    }
    put_estimate(j, info(k));
    constant_ptr sch, orth;
    check(posi_constant_scheffe(c.alpha, posi_design_d(x.p), s.df, &sch.p));
    check(posi_constant_orth(c.alpha, posi_design_d(x.p), s.df, &orth.p));
    j["scheffe_K"] = num(info(sch).K);
    j["orth_K"] = num(info(orth).K);
    return j;
}

json run_closed(const config& c, const settings& s) {
    json j = envelope(c, s);
    std::size_t d = 0;
    if (c.d) {
        d = *c.d;
    } else {
        design_ptr x;
        load_design(c, x);
        describe_design(j, x);
        d = posi_design_d(x.p);
    }
    j["d"] = d;
    constant_ptr k;
    if (c.command == "scheffe") check(posi_constant_scheffe(c.alpha, d, s.df, &k.p));
    else check(posi_constant_orth(c.alpha, d, s.df, &k.p));
    put_estimate(j, info(k));
    return j;
}

json run_bound(const config& c, const settings& s) {
    json j = envelope(c, s);
    std::uint64_t count = 0;
    std::size_t d = 0;
    if (!c.design.empty()) {
        design_ptr x;
        load_design(c, x);
        describe_design(j, x);
        universe_ptr u;
        parse_universe(c, x, u, j);
        directions_ptr l;
        check(posi_directions_build(x.p, u.p, 1, 1e-8, s.threads, &l.p));
        count = posi_directions_size(l.p);
        d = posi_design_d(x.p);
    } else {
        if (c.p_list.empty()) usage("bound needs --design or --p");
        const auto ps = parse_sizes(c.p_list, "--p");
        if (ps.size() != 1 || ps[0] > 62) usage("bound takes a single --p of at most 62");
        d = c.d.value_or(ps[0]);
        count = static_cast<std::uint64_t>(ps[0]) << (ps[0] - 1);
        j["p"] = ps[0];
        j["universe"] = "all";
    }
    j["d"] = d;
    j["direction_count"] = count;
    posi_cap_bound b{};
    check(posi_cap_bonferroni_bound(count, d, c.alpha, &b));
    put_estimate(j, b.estimate);
    j["cap_quantile"] = num(b.cap_quantile);
    j["radius_quantile"] = num(b.radius_quantile);
    j["scheffe_fallback"] = b.scheffe_fallback != 0;
    j["ratio_sqrt_d"] = num(b.estimate.K / std::sqrt(static_cast<double>(d)));
    constant_ptr sch;
    check(posi_constant_scheffe(c.alpha, d, 0, &sch.p));
    j["scheffe_K"] = num(info(sch).K);
    double asym = 0.0;
    check(posi_asymptotic_cap_constant(c.growth, &asym));
    j["growth"] = c.growth;
    j["asymptotic_constant"] = num(asym);
    return j;
}

json interval_json(const posi_interval& r, const design_ptr& x) {
    json row;
    row["predictor"] = r.predictor + 1;
    const char* name = posi_design_column_name(x.p, r.predictor);
    row["name"] = name ? name : "";
    row["estimate"] = num(r.estimate);
    row["lower"] = num(r.lower);
    row["upper"] = num(r.upper);
    row["t"] = num(r.t_observed);
    row["K"] = num(r.K_used);
    row["adjusted_norm"] = num(r.adjusted_norm);
    if (r.has_target) {
        row["target"] = num(r.target);
        row["covers_target"] = r.covers_target != 0;
    }
    return row;
}

double sigma_of(const config& c) {
    if (!c.sigma_hat) usage("--sigma-hat is required");
    if (!(*c.sigma_hat > 0.0)) usage("--sigma-hat must be positive");
    return *c.sigma_hat;
}

json run_intervals(const config& c, const settings& s) {
    json j = envelope(c, s);
    design_ptr x;
    load_design(c, x);
    describe_design(j, x);
    universe_ptr u;
    parse_universe(c, x, u, j);
    const auto y = load_vector(c.response, "--response");
    const double sigma = sigma_of(c);
    const auto mask = parse_model(c.model, posi_design_p(x.p));
    std::vector<double> mu;
    if (!c.mu.empty()) mu = load_vector(c.mu, "--mu");
    constant_ptr k;
    make_constant(c, s, x, u, k);
    put_estimate(j, info(k));
    std::vector<posi_interval> rows(posi_design_p(x.p));
    std::size_t count = 0;
    check(posi_intervals(x.p, y.data(), y.size(), sigma, mask, k.p, mu.empty() ? nullptr : mu.data(), rows.data(),
                         &count));
    j["sigma_hat"] = sigma;
    json list = json::array();
    for (std::size_t i = 0; i < count; ++i) list.push_back(interval_json(rows[i], x));
    j["rows"] = list;
    return j;
}

std::string model_string(std::uint64_t mask) {
    std::string out;
    for (std::size_t i = 0; i < 64; ++i)
        if ((mask >> i) & 1u) out += (out.empty() ? "" : ",") + std::to_string(i + 1);
    return out;
}

json run_spar(const config& c, const settings& s) {
    json j = envelope(c, s);
    design_ptr x;
    load_design(c, x);
    describe_design(j, x);
    universe_ptr u;
    parse_universe(c, x, u, j);
    const auto y = load_vector(c.response, "--response");
    const double sigma = sigma_of(c);
    std::int64_t jj = -1;
    if (c.predictor) jj = static_cast<std::int64_t>(predictor_index(c, posi_design_p(x.p)));
    posi_selection sel{};
    check(posi_spar(x.p, u.p, y.data(), y.size(), sigma, jj, &sel));
    const auto o = mc(c, s);
    constant_ptr k;
    if (jj < 0) check(posi_constant_K(x.p, u.p, c.alpha, s.df, &o, &k.p));
    else check(posi_constant_K1(x.p, u.p, static_cast<std::size_t>(jj), c.alpha, s.df, &o, &k.p));
    put_estimate(j, info(k));
    j["selector"] = jj < 0 ? "spar" : "spar1";
    j["model"] = model_string(sel.model);
    j["predictor"] = sel.predictor + 1;
    j["achieved"] = num(sel.achieved);
    j["exceeds_K"] = sel.achieved > info(k).K;
    return j;
}

json run_coverage(const config& c, const settings& s) {
    json j = envelope(c, s);
    design_ptr x;
    load_design(c, x);
    describe_design(j, x);
    universe_ptr u;
    parse_universe(c, x, u, j);
    const auto mu = load_vector(c.mu, "--mu");
    posi_selector_kind kind = POSI_SELECT_SPAR;
    std::size_t param = 0;
    if (c.selector == "spar1") {
        kind = POSI_SELECT_SPAR1;
        param = predictor_index(c, posi_design_p(x.p));
    } else if (c.selector == "forward" || c.selector == "best-subset") {
        kind = c.selector == "forward" ? POSI_SELECT_FORWARD : POSI_SELECT_BEST_SUBSET;
        if (!c.size) usage("--size is required for selector '" + c.selector + "'");
        param = *c.size;
    } else if (c.selector != "spar") {
        usage("--selector must be spar, spar1, forward or best-subset");
    }
    constant_ptr k;
    make_constant(c, s, x, u, k);
    put_estimate(j, info(k));
    posi_coverage_report r{};
    check(posi_coverage(x.p, u.p, kind, param, k.p, mu.data(), mu.size(), c.replications, c.seed, s.threads, &r,
                        nullptr, nullptr, nullptr));
    j["selector"] = c.selector;
    j["replications"] = r.replications;
    j["covered"] = r.covered;
    j["coverage"] = num(r.coverage);
    j["binomial_se"] = num(r.binomial_se);
    j["nominal"] = 1.0 - c.alpha;
    return j;
}

json run_analyze(const config& c, const settings& s) {
    json j = envelope(c, s);
    design_ptr x;
    load_design(c, x);
    describe_design(j, x);
    universe_ptr u;
    parse_universe(c, x, u, j);
    const std::size_t d = posi_design_d(x.p), p = posi_design_p(x.p);
    std::uint64_t models = 0;
    check(posi_model_count(x.p, u.p, &models));
    j["model_count"] = models;

    directions_ptr distinct;
    check(posi_directions_build(x.p, u.p, 1, 1e-8, s.threads, &distinct.p));
    j["direction_count"] = posi_directions_size(distinct.p);
    j["emitted_count"] = posi_directions_emitted(distinct.p);
    j["degenerate_count"] = posi_directions_degenerate(distinct.p);

    directions_ptr all;
    check(posi_directions_build(x.p, u.p, 0, 1e-8, s.threads, &all.p));
    const std::size_t n = posi_directions_size(all.p);
    constexpr std::size_t census_limit = 20000;
    if (n <= census_limit) {
        std::vector<std::uint64_t> partners(n);
        std::uint64_t pairs = 0;
        check(posi_orthogonality_census(all.p, 1e-10, s.threads, partners.data(), &pairs));
        std::map<std::uint64_t, std::uint64_t> histogram;
        for (auto v : partners) ++histogram[v];
        json h = json::array();
        for (auto [partners_count, directions] : histogram)
            h.push_back(json{{"partners", partners_count}, {"directions", directions}});
        j["census"] = json{{"directions", n}, {"orthogonal_pairs", pairs}, {"histogram", h}};
    } else {
        j["census"] = json{{"skipped", "more than " + std::to_string(census_limit) + " directions"}};
    }

    if (d == p && p <= 14) {
        posi_duality_report r{};
        check(posi_verify_duality(x.p, 1e-8, &r));
        j["duality"] = json{{"matched_pairs", r.matched_pairs},
                            {"unmatched_pairs", r.unmatched_pairs},
                            {"max_mismatch", num(r.max_mismatch)},
                            {"norm_product_deviation", num(r.norm_product_check)},
                            {"sign_classes_equal", r.sign_classes_equal != 0}};
    } else {
        j["duality"] = nullptr;
    }

    const auto o = mc(c, s);
    constant_ptr k;
    check(posi_constant_K(x.p, u.p, c.alpha, s.df, &o, &k.p));
    put_estimate(j, info(k));
    j["direction_count"] = posi_directions_size(distinct.p);
    return j;
}

json run_family(const config& c, const settings& s) {
    json j = envelope(c, s);
    if (c.p_list.empty()) usage("family needs --p");
    const auto ps = parse_sizes(c.p_list, "--p");
    std::vector<double> grid;
    if (!c.grid.empty()) grid = parse_reals(c.grid, "--grid");
    const double* g = grid.empty() ? nullptr : grid.data();
    std::size_t count = 0;
    std::vector<posi_family_row> rows;
    bool exchangeable = c.kind == "exchangeable";
    if (!exchangeable && c.kind != "worst-posi1") usage("family kind must be exchangeable or worst-posi1");
    auto call = [&](posi_family_row* out, std::size_t capacity) {
        if (exchangeable)
            return posi_family_exchangeable(ps.data(), ps.size(), g, grid.size(), c.alpha, s.samples, c.seed,
                                            s.threads, out, capacity, &count);
        return posi_family_worst_posi1(ps.data(), ps.size(), g, grid.size(), c.alpha, s.samples, c.seed, s.threads,
                                       out, capacity, &count);
    };
    check(call(nullptr, 0));
    rows.resize(count);
    check(call(rows.data(), rows.size()));
    j["family"] = c.kind;
    j["mc_samples"] = s.samples;
    j["universe"] = "all";
    json list = json::array();
    json best = json::array();
    for (const auto& r : rows) {
        json row;
        row["p"] = r.p;
        row[exchangeable ? "a" : "c"] = num(r.param);
        row["K"] = num(r.K);
        row["mc_standard_error"] = num(r.standard_error);
        row["ratio"] = num(r.ratio);
        if (exchangeable) row["direction_count"] = static_cast<std::uint64_t>(r.aux);
        else row["mean_size_fraction"] = num(r.aux);
        row["is_best"] = r.is_best != 0;
        list.push_back(row);
        if (r.is_best) best.push_back(json{{"p", r.p}, {exchangeable ? "a" : "c", num(r.param)}, {"K", num(r.K)},
                                           {"mc_standard_error", num(r.standard_error)}, {"ratio", num(r.ratio)}});
    }
    j["rows"] = list;
    j["best"] = best;
    if (!exchangeable) {
        double argmax = 0.0, value = 0.0;
        check(posi_rate_maximum(&argmax, &value));
        j["rate_argmax"] = argmax;
        j["rate_maximum"] = value;
    }
    return j;
}

json dispatch(const config& c) {
    const settings s = derive(c);
    if (c.command == "k") return run_k(c, s, false);
    if (c.command == "k1") return run_k(c, s, true);
    if (c.command == "scheffe" || c.command == "orth") return run_closed(c, s);
    if (c.command == "bound") return run_bound(c, s);
    if (c.command == "intervals") return run_intervals(c, s);
    if (c.command == "spar") return run_spar(c, s);
    if (c.command == "coverage") return run_coverage(c, s);
    if (c.command == "analyze") return run_analyze(c, s);
    if (c.command == "family") return run_family(c, s);
    usage("unknown command '" + c.command + "'");
}

std::string scalar_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

void write_csv(std::ostream& out, const json& doc) {
    if (doc.contains("rows")) {
        const auto& rows = doc["rows"];
        std::vector<std::string> keys;
        for (const auto& row : rows)
            for (auto it = row.begin(); it != row.end(); ++it)
                if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) keys.push_back(it.key());
        for (std::size_t i = 0; i < keys.size(); ++i) out << (i ? "," : "") << keys[i];
        out << '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < keys.size(); ++i)
                out << (i ? "," : "") << (row.contains(keys[i]) ? scalar_text(row[keys[i]]) : "");
            out << '\n';
        }
        return;
    }
    out << "key,value\n";
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (!it.value().is_structured()) out << it.key() << ',' << scalar_text(it.value()) << '\n';
}

void write_text(std::ostream& out, const json& doc, const std::string& indent = "") {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (it.value().is_object()) {
            out << indent << it.key() << ":\n";
            write_text(out, it.value(), indent + "  ");
        } else if (it.value().is_array()) {
            out << indent << it.key() << ":\n";
            for (const auto& item : it.value()) out << indent << "  " << item.dump() << '\n';
        } else {
            out << indent << it.key() << ": " << scalar_text(it.value()) << '\n';
        }
    }
}

int exit_code(posi_status s) {
    switch (s) {
        case POSI_OK: return 0;
        case POSI_ERR_USAGE: return 1;
        case POSI_ERR_DATA: return 2;
        case POSI_ERR_INFEASIBLE: return 3;
        default: return 4;
    }
}

}  // namespace

int main(int argc, char** argv) {
    config c;
    CLI::App app{"Post-selection inference constants and intervals"};
    app.add_option("command", c.command,
                   "k | k1 | scheffe | orth | bound | intervals | spar | coverage | analyze | family")
        ->required();
    app.add_option("kind", c.kind, "family kind: exchangeable | worst-posi1");
    app.add_option("--design", c.design, "design matrix file (CSV or whitespace)");
    app.add_flag("--header", c.header, "first row holds column names");
    app.add_flag("--intercept", c.intercept, "prepend a column of ones");
    app.add_option("--form", c.form, "canonical form: upper | symmetric")->capture_default_str();
    app.add_option("--rank-tol", c.rank_tol, "relative rank tolerance")->capture_default_str();
    app.add_option("--alpha", c.alpha, "error level")->capture_default_str();
    app.add_option("--df", c.df, "error degrees of freedom or inf")->capture_default_str();
    app.add_option("--universe", c.universe, "model universe spec")->capture_default_str();
    app.add_option("--mc-samples", c.mc_samples, "Monte Carlo draws")->capture_default_str();
    app.add_option("--seed", c.seed, "random seed")->capture_default_str();
    app.add_option("--threads", c.threads, "worker threads or auto")->capture_default_str();
    app.add_option("--output", c.output, "json | csv | text")->capture_default_str();
    app.add_option("--mode", c.mode, "auto | materialized | streaming")->capture_default_str();
    app.add_option("--response", c.response, "response file, one value per line");
    app.add_option("--mu", c.mu, "mean vector file for coverage / targets");
    app.add_option("--sigma-hat", c.sigma_hat, "error standard deviation estimate");
    app.add_option("--model", c.model, "submodel as 1-based indices, e.g. 1,3,4");
    app.add_option("--selector", c.selector, "spar | spar1 | forward | best-subset")->capture_default_str();
    app.add_option("--size", c.size, "model size for forward / best-subset");
    app.add_option("--constant", c.constant, "posi | posi1 | scheffe | orth | marginal")->capture_default_str();
    app.add_option("--k-value", c.k_value, "use this K instead of computing one");
    app.add_option("--replications", c.replications, "coverage replications")->capture_default_str();
    app.add_option("--predictor", c.predictor, "1-based predictor index");
    app.add_option("--d", c.d, "dimension for closed forms");
    app.add_option("--p", c.p_list, "p or comma list of p");
    app.add_option("--grid", c.grid, "comma list of family parameters");
    app.add_option("--growth", c.growth, "growth rate a of |L|^(1/d) for the asymptotic constant")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (c.output != "json" && c.output != "csv" && c.output != "text")
            usage("--output must be json, csv or text");
        const json doc = dispatch(c);
        if (c.output == "json") std::cout << doc.dump(2) << '\n';
        else if (c.output == "csv") write_csv(std::cout, doc);
        else write_text(std::cout, doc);
        return 0;
    } catch (const cli_failure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.status);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
