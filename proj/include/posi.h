#pragma once

/* C interface to the PoSI library. Every fallible call returns a posi_status;
 * on failure posi_last_error() describes the problem (per thread). Handles are
 * opaque and owned by the caller, who releases them with the matching _free.
 * Indices are 0-based; model masks use bit j for predictor j. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(POSI_BUILDING_LIBRARY)
#define POSI_API __attribute__((visibility("default")))
#else
#define POSI_API
#endif

typedef enum posi_status {
    POSI_OK = 0,
    POSI_ERR_USAGE = 1,
    POSI_ERR_DATA = 2,
    POSI_ERR_INFEASIBLE = 3,
    POSI_ERR_INTERNAL = 4
} posi_status;

typedef enum posi_form { POSI_FORM_UPPER_TRIANGULAR = 0, POSI_FORM_SYMMETRIC = 1 } posi_form;

typedef enum posi_eval_mode { POSI_EVAL_AUTO = 0, POSI_EVAL_MATERIALIZED = 1, POSI_EVAL_STREAMING = 2 } posi_eval_mode;

typedef enum posi_method { POSI_METHOD_MONTE_CARLO = 0, POSI_METHOD_CLOSED_FORM = 1, POSI_METHOD_BOUND = 2 } posi_method;

typedef enum posi_scope { POSI_SCOPE_UNIVERSE = 0, POSI_SCOPE_ALL_CONTRASTS = 1, POSI_SCOPE_REFERENCE = 2 } posi_scope;

typedef enum posi_selector_kind {
    POSI_SELECT_SPAR = 0,
    POSI_SELECT_SPAR1 = 1,     /* param = predictor */
    POSI_SELECT_FORWARD = 2,   /* param = model size */
    POSI_SELECT_BEST_SUBSET = 3 /* param = model size */
} posi_selector_kind;

typedef struct posi_design posi_design;
typedef struct posi_universe posi_universe;
typedef struct posi_directions posi_directions;
typedef struct posi_constant posi_constant;

POSI_API const char* posi_version(void);
POSI_API const char* posi_last_error(void);

/* ---- designs ---- */

/* df = 0 stands for infinite degrees of freedom (sigma known) everywhere. */

POSI_API posi_status posi_design_load(const char* path, int header, int intercept, double rank_tolerance,
                                      posi_form form, posi_design** out);
/* values: n x p, row-major */
POSI_API posi_status posi_design_from_rows(const double* values, size_t n, size_t p, double rank_tolerance,
                                           posi_form form, posi_design** out);
POSI_API posi_status posi_design_exchangeable(size_t p, double a, posi_design** out);
POSI_API posi_status posi_design_worst_posi1(size_t p, double c, posi_design** out);
POSI_API posi_status posi_design_dual(const posi_design* x, posi_design** out);
POSI_API void posi_design_free(posi_design* x);

POSI_API size_t posi_design_n(const posi_design* x);
POSI_API size_t posi_design_d(const posi_design* x);
POSI_API size_t posi_design_p(const posi_design* x);
/* out: d x p, row-major */
POSI_API posi_status posi_design_values(const posi_design* x, double* out);
/* column name of predictor j, NUL-terminated, valid while x lives */
POSI_API const char* posi_design_column_name(const posi_design* x, size_t j);
/* canonical coordinates (length d) of an n-vector */
POSI_API posi_status posi_design_reduce(const posi_design* x, const double* y, size_t n, double* out);
/* residual of column j on the rest of the model (length d) and its norm */
POSI_API posi_status posi_adjusted_predictor(const posi_design* x, uint64_t model, size_t j, double* out,
                                             double* norm);
POSI_API posi_status posi_vif(const posi_design* x, uint64_t model, size_t j, double* out);

/* reads one value per line */
POSI_API posi_status posi_load_vector(const char* path, double** values, size_t* count);
POSI_API void posi_free_vector(double* values);

/* ---- universes ---- */

POSI_API posi_status posi_universe_parse(const char* spec, size_t p, posi_universe** out);
POSI_API void posi_universe_free(posi_universe* u);
/* canonical spec string, valid while u lives */
POSI_API const char* posi_universe_string(const posi_universe* u);
POSI_API int posi_universe_admits(const posi_universe* u, uint64_t model);
POSI_API int posi_universe_is_all(const posi_universe* u);
/* full-rank models of u, enumerated */
POSI_API posi_status posi_model_count(const posi_design* x, const posi_universe* u, uint64_t* out);
/* direction count from model sizes alone */
POSI_API posi_status posi_direction_count_bound(const posi_design* x, const posi_universe* u, double* out);

/* ---- directions ---- */

POSI_API posi_status posi_directions_build(const posi_design* x, const posi_universe* u, int dedup,
                                           double tolerance, int threads, posi_directions** out);
POSI_API void posi_directions_free(posi_directions* l);
POSI_API size_t posi_directions_size(const posi_directions* l);
POSI_API size_t posi_directions_dim(const posi_directions* l);
POSI_API uint64_t posi_directions_emitted(const posi_directions* l);
POSI_API uint64_t posi_directions_degenerate(const posi_directions* l);
POSI_API posi_status posi_directions_get(const posi_directions* l, size_t i, double* vector, size_t* predictor,
                                         uint64_t* model, double* raw_norm);

/* per-direction counts of |<v, w>| < tolerance partners (caller array of size()) */
POSI_API posi_status posi_orthogonality_census(const posi_directions* l, double tolerance, int threads,
                                               uint64_t* partners, uint64_t* orthogonal_pairs);
POSI_API posi_status posi_polytope_contains(const posi_directions* l, double K, const double* z, size_t d,
                                            int* inside);

typedef struct posi_duality_report {
    uint64_t matched_pairs;
    uint64_t unmatched_pairs;
    double max_mismatch;
    double norm_product_check;
    int sign_classes_equal;
} posi_duality_report;

POSI_API posi_status posi_verify_duality(const posi_design* x, double tolerance, posi_duality_report* out);

/* ---- constants ---- */

typedef struct posi_mc_options {
    uint64_t samples;
    uint64_t seed;
    int threads; /* 0 = all hardware threads */
    posi_eval_mode mode;
    int dedup; /* deduplicate directions up to sign */
} posi_mc_options;

POSI_API void posi_mc_options_default(posi_mc_options* options);

typedef struct posi_estimate {
    double K;
    double alpha;
    unsigned df; /* 0 = infinite */
    uint64_t mc_samples;
    double mc_standard_error;
    uint64_t seed;
    uint64_t direction_count;
    uint64_t emitted_count;
    uint64_t degenerate_count;
    uint64_t quantile_index;
    size_t d;
    posi_method method;
    posi_scope scope;
    int64_t predictor; /* PoSI1 predictor, -1 when none */
} posi_estimate;

POSI_API posi_status posi_constant_K(const posi_design* x, const posi_universe* u, double alpha, unsigned df,
                                     const posi_mc_options* options, posi_constant** out);
POSI_API posi_status posi_constant_K1(const posi_design* x, const posi_universe* u, size_t j, double alpha,
                                      unsigned df, const posi_mc_options* options, posi_constant** out);
POSI_API posi_status posi_constant_scheffe(double alpha, size_t d, unsigned df, posi_constant** out);
POSI_API posi_status posi_constant_orth(double alpha, size_t d, unsigned df, posi_constant** out);
POSI_API posi_status posi_constant_marginal(double alpha, unsigned df, posi_constant** out);
/* a user-supplied K without any simultaneity guarantee */
POSI_API posi_status posi_constant_fixed(double K, double alpha, unsigned df, posi_constant** out);
POSI_API void posi_constant_free(posi_constant* k);
POSI_API posi_status posi_constant_info(const posi_constant* k, posi_estimate* out);

typedef struct posi_cap_bound {
    posi_estimate estimate;
    double cap_quantile;
    double radius_quantile;
    int scheffe_fallback; /* 1 when the bound exceeds Scheffe */
} posi_cap_bound;

POSI_API posi_status posi_cap_bonferroni_bound(uint64_t direction_count, size_t d, double alpha,
                                               posi_cap_bound* out);
POSI_API posi_status posi_asymptotic_cap_constant(double a, double* out);

/* ---- inference ---- */

typedef struct posi_interval {
    size_t predictor;
    double estimate;
    double lower;
    double upper;
    double t_observed;
    double K_used;
    double adjusted_norm;
    int has_target;
    double target;
    int covers_target;
} posi_interval;

/* y and mu have length n (mu may be NULL). rows must hold popcount(model)
 * entries; *count receives the number written. */
POSI_API posi_status posi_intervals(const posi_design* x, const double* y, size_t n, double sigma_hat,
                                    uint64_t model, const posi_constant* k, const double* mu, posi_interval* rows,
                                    size_t* count);

typedef struct posi_selection {
    uint64_t model;
    size_t predictor;
    double achieved;
} posi_selection;

/* predictor < 0 gives SPAR, otherwise SPAR1 for that predictor */
POSI_API posi_status posi_spar(const posi_design* x, const posi_universe* u, const double* y, size_t n,
                               double sigma_hat, int64_t predictor, posi_selection* out);

typedef struct posi_coverage_report {
    uint64_t replications;
    uint64_t covered;
    double coverage;
    double binomial_se;
    double K;
} posi_coverage_report;

/* mu has length n. The optional log arrays hold one entry per replication. */
POSI_API posi_status posi_coverage(const posi_design* x, const posi_universe* u, posi_selector_kind selector,
                                   size_t param, const posi_constant* k, const double* mu, size_t n,
                                   uint64_t replications, uint64_t seed, int threads, posi_coverage_report* out,
                                   uint64_t* log_models, uint8_t* log_covered, double* log_max_t);

/* ---- special designs ---- */

POSI_API posi_status posi_exchangeable_direction(size_t p, double a, uint64_t model, size_t j, double* out,
                                                 double* raw_norm);
POSI_API posi_status posi_fast_worst_posi1_stat(size_t p, double c, const double* z, double* out, size_t* best_m);
POSI_API posi_status posi_rate_function(double r, double* out);
POSI_API posi_status posi_rate_maximum(double* argmax, double* value);

typedef struct posi_family_row {
    size_t p;
    double param;      /* a (exchangeable) or c (worst-case PoSI1) */
    double K;
    double standard_error;
    double ratio;      /* K / sqrt(2 log p) or K1 / sqrt(p) */
    double aux;        /* exchangeable: direction count; worst-case: mean maximizing m / p */
    uint64_t quantile_index;
    int is_best;       /* supremum over the grid for this p */
} posi_family_row;

/* Grids may be NULL for the defaults. With rows = NULL only *count is set. */
POSI_API posi_status posi_family_exchangeable(const size_t* p_list, size_t n_p, const double* grid, size_t n_grid,
                                              double alpha, uint64_t samples, uint64_t seed, int threads,
                                              posi_family_row* rows, size_t capacity, size_t* count);
POSI_API posi_status posi_family_worst_posi1(const size_t* p_list, size_t n_p, const double* grid, size_t n_grid,
                                             double alpha, uint64_t samples, uint64_t seed, int threads,
                                             posi_family_row* rows, size_t capacity, size_t* count);

#ifdef __cplusplus
}
#endif
