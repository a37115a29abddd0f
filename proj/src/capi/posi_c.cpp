#include "posi.h"

#include "constants.hpp"
#include "design.hpp"
#include "directions.hpp"
#include "error.hpp"
#include "inference.hpp"
#include "monte_carlo.hpp"
#include "special_designs.hpp"
#include "structure.hpp"
#include "universe.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

struct posi_design {
    posi::CanonicalDesign x;
};

struct posi_universe {
    posi::ModelUniverse u;
    std::string text;
};

struct posi_directions {
    posi::DirectionSet set;
};

struct posi_constant {
    posi::ConstantEstimate est;
};

namespace {

thread_local std::string last_error;

template <class F>
posi_status guard(F&& body) {
    try {
        body();
        last_error.clear();
        return POSI_OK;
    } catch (const posi::Error& e) {
        last_error = e.what();
        return static_cast<posi_status>(e.kind());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return POSI_ERR_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return POSI_ERR_INTERNAL;
    }
}

template <class... P>
void require(const P*... ptrs) {
    if (((ptrs == nullptr) || ...)) posi::fail_usage("null argument");
}

posi::CanonicalForm to_form(posi_form f) {
    switch (f) {
        case POSI_FORM_UPPER_TRIANGULAR: return posi::CanonicalForm::upper_triangular;
        case POSI_FORM_SYMMETRIC: return posi::CanonicalForm::symmetric;
    }
    posi::fail_usage("unknown canonical form");
}

posi::ErrorModel to_error_model(unsigned df) {
    return df == 0 ? posi::ErrorModel::known_sigma() : posi::ErrorModel::with_df(df);
}

posi::McOptions to_mc(const posi_mc_options* o) {
    posi::McOptions m;
    if (!o) return m;
    m.samples = o->samples;
    m.seed = o->seed;
    m.threads = o->threads;
    switch (o->mode) {
        case POSI_EVAL_AUTO: m.mode = posi::EvaluationMode::automatic; break;
        case POSI_EVAL_MATERIALIZED: m.mode = posi::EvaluationMode::materialized; break;
        case POSI_EVAL_STREAMING: m.mode = posi::EvaluationMode::streaming; break;
        default: posi::fail_usage("unknown evaluation mode");
    }
    m.dedup = o->dedup ? posi::DedupMode::up_to_sign() : posi::DedupMode::none();
    return m;
}

posi_estimate to_c(const posi::ConstantEstimate& e) {
    posi_estimate out{};
    out.K = e.K;
    out.alpha = e.alpha;
    out.df = e.df.df.value_or(0u);
    out.mc_samples = e.mc_samples;
    out.mc_standard_error = e.mc_standard_error;
    out.seed = e.seed;
    out.direction_count = e.direction_count;
    out.emitted_count = e.emitted_count;
    out.degenerate_count = e.degenerate_count;
    out.quantile_index = e.quantile_index;
    out.d = e.d;
    out.method = static_cast<posi_method>(e.method);
    out.scope = static_cast<posi_scope>(e.scope);
    out.predictor = e.predictor ? static_cast<int64_t>(*e.predictor) : -1;
    return out;
}

std::span<const double> reduce_if(const posi_design* x, const double* v, size_t n, std::vector<double>& storage) {
    storage = x->x.reduce(std::span<const double>(v, n));
    return storage;
}

posi_design* wrap(posi::CanonicalDesign x) { return new posi_design{std::move(x)}; }

posi_constant* wrap(posi::ConstantEstimate e) { return new posi_constant{std::move(e)}; }

}  // namespace

extern "C" {

const char* posi_version(void) { return "0.1.0"; }

const char* posi_last_error(void) { return last_error.c_str(); }

posi_status posi_design_load(const char* path, int header, int intercept, double rank_tolerance, posi_form form,
                             posi_design** out) {
    return guard([&] {
        require(path, out);
        posi::LoadOptions options;
        options.header = header != 0;
        options.intercept = intercept != 0;
        options.rank_tolerance = rank_tolerance;
        const auto raw = posi::load_design_file(path, options);
        *out = wrap(posi::canonicalize(raw, to_form(form)));
    });
}

posi_status posi_design_from_rows(const double* values, size_t n, size_t p, double rank_tolerance, posi_form form,
                                  posi_design** out) {
    return guard([&] {
        require(values, out);
        if (n == 0 || p == 0) posi::fail_data("design must be nonempty");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < p; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * p + j];
        const posi::DesignMatrix raw(std::move(m), {}, rank_tolerance);
        *out = wrap(posi::canonicalize(raw, to_form(form)));
    });
}

posi_status posi_design_exchangeable(size_t p, double a, posi_design** out) {
    return guard([&] {
        require(out);
        *out = wrap(posi::exchangeable_design(p, a));
    });
}

posi_status posi_design_worst_posi1(size_t p, double c, posi_design** out) {
    return guard([&] {
        require(out);
        *out = wrap(posi::worst_posi1_design(p, c));
    });
}

posi_status posi_design_dual(const posi_design* x, posi_design** out) {
    return guard([&] {
        require(x, out);
        *out = wrap(posi::dual_design(x->x));
    });
}

void posi_design_free(posi_design* x) { delete x; }

size_t posi_design_n(const posi_design* x) { return x ? x->x.n() : 0; }
size_t posi_design_d(const posi_design* x) { return x ? x->x.d() : 0; }
size_t posi_design_p(const posi_design* x) { return x ? x->x.p() : 0; }

posi_status posi_design_values(const posi_design* x, double* out) {
    return guard([&] {
        require(x, out);
        const auto& v = x->x.values();
        for (Eigen::Index i = 0; i < v.rows(); ++i)
            for (Eigen::Index j = 0; j < v.cols(); ++j) out[i * v.cols() + j] = v(i, j);
    });
}

const char* posi_design_column_name(const posi_design* x, size_t j) {
    if (!x || j >= x->x.p()) return nullptr;
    return x->x.column_names()[j].c_str();
}

posi_status posi_design_reduce(const posi_design* x, const double* y, size_t n, double* out) {
    return guard([&] {
        require(x, y, out);
        const auto r = x->x.reduce(std::span<const double>(y, n));
        std::copy(r.begin(), r.end(), out);
    });
}

posi_status posi_adjusted_predictor(const posi_design* x, uint64_t model, size_t j, double* out, double* norm) {
    return guard([&] {
        require(x);
        const auto a = posi::adjusted_predictor(x->x, posi::ModelId{model}, j);
        if (out) std::copy(a.residual.begin(), a.residual.end(), out);
        if (norm) *norm = a.norm;
    });
}

posi_status posi_vif(const posi_design* x, uint64_t model, size_t j, double* out) {
    return guard([&] {
        require(x, out);
        *out = posi::vif(x->x, posi::ModelId{model}, j);
    });
}

posi_status posi_load_vector(const char* path, double** values, size_t* count) {
    return guard([&] {
        require(path, values, count);
        const auto v = posi::load_vector_file(path);
        auto* buffer = static_cast<double*>(std::malloc(std::max<size_t>(1, v.size()) * sizeof(double)));
        if (!buffer) throw std::bad_alloc();
        std::copy(v.begin(), v.end(), buffer);
        *values = buffer;
        *count = v.size();
    });
}

void posi_free_vector(double* values) { std::free(values); }

posi_status posi_universe_parse(const char* spec, size_t p, posi_universe** out) {
    return guard([&] {
        require(spec, out);
        auto u = posi::ModelUniverse::parse(spec, p);
        auto text = u.to_string();
        *out = new posi_universe{std::move(u), std::move(text)};
    });
}

void posi_universe_free(posi_universe* u) { delete u; }

const char* posi_universe_string(const posi_universe* u) { return u ? u->text.c_str() : nullptr; }

int posi_universe_admits(const posi_universe* u, uint64_t model) { return u && u->u.admits(model) ? 1 : 0; }

int posi_universe_is_all(const posi_universe* u) { return u && u->u.is_all() ? 1 : 0; }

posi_status posi_model_count(const posi_design* x, const posi_universe* u, uint64_t* out) {
    return guard([&] {
        require(x, u, out);
        *out = posi::enumerate_models(x->x, u->u).size();
    });
}

posi_status posi_direction_count_bound(const posi_design* x, const posi_universe* u, double* out) {
    return guard([&] {
        require(x, u, out);
        *out = posi::DirectionStream(x->x, u->u).count_upper_bound();
    });
}

posi_status posi_directions_build(const posi_design* x, const posi_universe* u, int dedup, double tolerance,
                                  int threads, posi_directions** out) {
    return guard([&] {
        require(x, u, out);
        const auto mode = dedup ? posi::DedupMode::up_to_sign(tolerance) : posi::DedupMode::none();
        auto set = posi::direction_stream(x->x, u->u, mode, threads);
        if (set.empty()) posi::fail_data("universe '" + u->text + "' is empty after rank filtering");
        *out = new posi_directions{std::move(set)};
    });
}

void posi_directions_free(posi_directions* l) { delete l; }
size_t posi_directions_size(const posi_directions* l) { return l ? l->set.size() : 0; }
size_t posi_directions_dim(const posi_directions* l) { return l ? l->set.d() : 0; }
uint64_t posi_directions_emitted(const posi_directions* l) { return l ? l->set.emitted : 0; }
uint64_t posi_directions_degenerate(const posi_directions* l) { return l ? l->set.degenerate : 0; }

posi_status posi_directions_get(const posi_directions* l, size_t i, double* vector, size_t* predictor,
                                uint64_t* model, double* raw_norm) {
    return guard([&] {
        require(l);
        if (i >= l->set.size()) posi::fail_usage("direction index out of range");
        if (vector) {
            const auto v = l->set.vector(i);
            std::copy(v.begin(), v.end(), vector);
        }
        if (predictor) *predictor = l->set.predictor(i);
        if (model) *model = l->set.model(i).mask;
        if (raw_norm) *raw_norm = l->set.raw_norm(i);
    });
}

posi_status posi_orthogonality_census(const posi_directions* l, double tolerance, int threads, uint64_t* partners,
                                      uint64_t* orthogonal_pairs) {
    return guard([&] {
        require(l);
        const auto census = posi::orthogonality_census(l->set, tolerance, threads);
        if (partners) std::copy(census.partners.begin(), census.partners.end(), partners);
        if (orthogonal_pairs) *orthogonal_pairs = census.orthogonal_pairs;
    });
}

posi_status posi_polytope_contains(const posi_directions* l, double K, const double* z, size_t d, int* inside) {
    return guard([&] {
        require(l, z, inside);
        const posi::PolytopeSpec polytope(l->set, K);
        *inside = posi::polytope_contains(polytope, std::span<const double>(z, d)) ? 1 : 0;
    });
}

posi_status posi_verify_duality(const posi_design* x, double tolerance, posi_duality_report* out) {
    return guard([&] {
        require(x, out);
        const auto r = posi::verify_duality(x->x, tolerance);
        *out = posi_duality_report{r.matched_pairs, r.unmatched_pairs, r.max_mismatch, r.norm_product_check,
                                   r.sign_classes_equal ? 1 : 0};
    });
}

void posi_mc_options_default(posi_mc_options* options) {
    if (!options) return;
    const posi::McOptions m;
    *options = posi_mc_options{m.samples, m.seed, m.threads, POSI_EVAL_AUTO, 1};
}

posi_status posi_constant_K(const posi_design* x, const posi_universe* u, double alpha, unsigned df,
                            const posi_mc_options* options, posi_constant** out) {
    return guard([&] {
        require(x, u, out);
        *out = wrap(posi::posi_K(x->x, u->u, alpha, to_error_model(df), to_mc(options)));
    });
}

posi_status posi_constant_K1(const posi_design* x, const posi_universe* u, size_t j, double alpha, unsigned df,
                             const posi_mc_options* options, posi_constant** out) {
    return guard([&] {
        require(x, u, out);
        *out = wrap(posi::posi1_K(x->x, u->u, j, alpha, to_error_model(df), to_mc(options)));
    });
}

posi_status posi_constant_scheffe(double alpha, size_t d, unsigned df, posi_constant** out) {
    return guard([&] {
        require(out);
        *out = wrap(posi::scheffe_K(alpha, d, to_error_model(df)));
    });
}

posi_status posi_constant_orth(double alpha, size_t d, unsigned df, posi_constant** out) {
    return guard([&] {
        require(out);
        *out = wrap(posi::orth_K(alpha, d, to_error_model(df)));
    });
}

posi_status posi_constant_marginal(double alpha, unsigned df, posi_constant** out) {
    return guard([&] {
        require(out);
        *out = wrap(posi::marginal_K(alpha, to_error_model(df)));
    });
}

posi_status posi_constant_fixed(double K, double alpha, unsigned df, posi_constant** out) {
    return guard([&] {
        require(out);
        posi::validate_alpha(alpha);
        if (!(K > 0.0) || !std::isfinite(K)) posi::fail_usage("K must be positive and finite");
        posi::ConstantEstimate e;
        e.K = K;
        e.alpha = alpha;
        e.df = to_error_model(df);
        e.method = posi::EstimateMethod::closed_form;
        e.scope = posi::ConstantScope::reference;
        *out = wrap(std::move(e));
    });
}

void posi_constant_free(posi_constant* k) { delete k; }

posi_status posi_constant_info(const posi_constant* k, posi_estimate* out) {
    return guard([&] {
        require(k, out);
        *out = to_c(k->est);
    });
}

posi_status posi_cap_bonferroni_bound(uint64_t direction_count, size_t d, double alpha, posi_cap_bound* out) {
    return guard([&] {
        require(out);
        const auto b = posi::cap_bonferroni_bound(direction_count, d, alpha);
        *out = posi_cap_bound{to_c(b.estimate), b.cap_quantile, b.radius_quantile, b.scheffe_fallback ? 1 : 0};
    });
}

posi_status posi_asymptotic_cap_constant(double a, double* out) {
    return guard([&] {
        require(out);
        *out = posi::asymptotic_cap_constant(a);
    });
}

posi_status posi_intervals(const posi_design* x, const double* y, size_t n, double sigma_hat, uint64_t model,
                           const posi_constant* k, const double* mu, posi_interval* rows, size_t* count) {
    return guard([&] {
        require(x, y, k, rows, count);
        std::vector<double> yc;
        std::vector<double> mc;
        const auto ys = reduce_if(x, y, n, yc);
        std::optional<std::span<const double>> ms;
        if (mu) ms = reduce_if(x, mu, n, mc);
        const auto report = posi::posi_intervals(x->x, ys, sigma_hat, posi::ModelId{model}, k->est, ms);
        for (size_t i = 0; i < report.rows.size(); ++i) {
            const auto& r = report.rows[i];
            rows[i] = posi_interval{r.predictor, r.estimate,     r.lower,
                                    r.upper,     r.t_observed,   r.K_used,
                                    r.adjusted_norm, r.target ? 1 : 0, r.target.value_or(0.0),
                                    r.covers_target.value_or(false) ? 1 : 0};
        }
        *count = report.rows.size();
    });
}

posi_status posi_spar(const posi_design* x, const posi_universe* u, const double* y, size_t n, double sigma_hat,
                      int64_t predictor, posi_selection* out) {
    return guard([&] {
        require(x, u, y, out);
        std::vector<double> yc;
        const auto ys = reduce_if(x, y, n, yc);
        const auto s = predictor < 0 ? posi::spar_select(x->x, ys, sigma_hat, u->u)
                                     : posi::spar1_select(x->x, ys, sigma_hat, u->u, static_cast<size_t>(predictor));
        *out = posi_selection{s.model.mask, s.predictor, s.achieved};
    });
}

posi_status posi_coverage(const posi_design* x, const posi_universe* u, posi_selector_kind selector, size_t param,
                          const posi_constant* k, const double* mu, size_t n, uint64_t replications, uint64_t seed,
                          int threads, posi_coverage_report* out, uint64_t* log_models, uint8_t* log_covered,
                          double* log_max_t) {
    return guard([&] {
        require(x, u, k, mu, out);
        posi::Selector sel;
        switch (selector) {
            case POSI_SELECT_SPAR: sel = posi::Selector::spar(); break;
            case POSI_SELECT_SPAR1: sel = posi::Selector::spar1(param); break;
            case POSI_SELECT_FORWARD: sel = posi::Selector::forward_stepwise(param); break;
            case POSI_SELECT_BEST_SUBSET: sel = posi::Selector::best_subset(param); break;
            default: posi::fail_usage("unknown selector");
        }
        const auto& est = k->est;
        if (est.scope == posi::ConstantScope::universe && est.universe && est.universe->to_string() != u->text)
            posi::fail_usage("constant was computed for universe '" + est.universe->to_string() + "', not '" + u->text +
                             "'");
        std::vector<double> mc;
        const auto ms = reduce_if(x, mu, n, mc);
        const auto r =
            posi::coverage_experiment(x->x, u->u, sel, est.K, est.df, ms, replications, seed, threads);
        *out = posi_coverage_report{r.replications, r.covered, r.coverage, r.binomial_se, r.K};
        for (size_t i = 0; i < r.log.size(); ++i) {
            if (log_models) log_models[i] = r.log[i].model.mask;
            if (log_covered) log_covered[i] = r.log[i].covered ? 1 : 0;
            if (log_max_t) log_max_t[i] = r.log[i].max_abs_t;
        }
    });
}

posi_status posi_exchangeable_direction(size_t p, double a, uint64_t model, size_t j, double* out, double* raw_norm) {
    return guard([&] {
        const auto dir = posi::exchangeable_direction_formula(p, a, posi::ModelId{model}, j);
        if (out) std::copy(dir.vector.begin(), dir.vector.end(), out);
        if (raw_norm) *raw_norm = dir.raw_norm;
    });
}

posi_status posi_fast_worst_posi1_stat(size_t p, double c, const double* z, double* out, size_t* best_m) {
    return guard([&] {
        require(z, out);
        *out = posi::fast_worst_posi1_stat(p, c, std::span<const double>(z, p), best_m);
    });
}

posi_status posi_rate_function(double r, double* out) {
    return guard([&] {
        require(out);
        *out = posi::rate_function_f(r);
    });
}

posi_status posi_rate_maximum(double* argmax, double* value) {
    return guard([&] {
        require(argmax, value);
        const auto m = posi::maximize_rate_function();
        *argmax = m.argmax;
        *value = m.value;
    });
}

posi_status posi_family_exchangeable(const size_t* p_list, size_t n_p, const double* grid, size_t n_grid,
                                     double alpha, uint64_t samples, uint64_t seed, int threads,
                                     posi_family_row* rows, size_t capacity, size_t* count) {
    return guard([&] {
        require(p_list, count);
        const std::vector<size_t> ps(p_list, p_list + n_p);
        const std::vector<double> g = grid ? std::vector<double>(grid, grid + n_grid) : posi::default_exchangeable_grid();
        *count = ps.size() * g.size();
        if (!rows) return;
        if (capacity < *count) posi::fail_usage("row buffer too small");
        const auto table = posi::exchangeable_ratio_table(ps, g, alpha, samples, seed, threads);
        size_t i = 0;
        for (const auto& row : table) {
            for (const auto& cell : row.cells) {
                rows[i++] = posi_family_row{row.p, cell.a, cell.K.K, cell.K.mc_standard_error, cell.ratio,
                                            static_cast<double>(cell.K.direction_count), cell.K.quantile_index,
                                            cell.a == row.best_a ? 1 : 0};
            }
        }
    });
}

posi_status posi_family_worst_posi1(const size_t* p_list, size_t n_p, const double* grid, size_t n_grid,
                                    double alpha, uint64_t samples, uint64_t seed, int threads, posi_family_row* rows,
                                    size_t capacity, size_t* count) {
    return guard([&] {
        require(p_list, count);
        const std::vector<size_t> ps(p_list, p_list + n_p);
        const std::vector<double> g = grid ? std::vector<double>(grid, grid + n_grid) : std::vector<double>{};
        *count = 0;
        for (size_t p : ps) *count += grid ? g.size() : posi::default_worst_posi1_grid(p).size();
        if (!rows) return;
        if (capacity < *count) posi::fail_usage("row buffer too small");
        const auto table = posi::worst_posi1_table(ps, g, alpha, samples, seed, threads);
        size_t i = 0;
        for (const auto& row : table) {
            for (const auto& cell : row.cells) {
                rows[i++] = posi_family_row{row.p, cell.c, cell.K1, cell.standard_error, cell.ratio,
                                            cell.mean_size_fraction, row.quantile_index,
                                            cell.c == row.best_c ? 1 : 0};
            }
        }
    });
}

}  // extern "C"
