#include "special_designs.hpp"

#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace posi {
namespace {

void check_exchangeable(std::size_t p, double a) {
    if (p < 1 || p > 64) fail_usage("exchangeable design needs 1 <= p <= 64");
    if (!std::isfinite(a) || !(a > -1.0 / static_cast<double>(p)))
        fail_usage("exchangeable parameter a must exceed -1/p = " + std::to_string(-1.0 / static_cast<double>(p)));
}

void check_worst(std::size_t p, double c) {
    if (p < 2 || p > 100000) fail_usage("worst-case PoSI1 design needs p >= 2");
    if (!std::isfinite(c) || !(c * c * static_cast<double>(p - 1) < 1.0))
        fail_usage("worst-case PoSI1 parameter needs c^2 < 1/(p-1)");
}

}  // namespace

CanonicalDesign exchangeable_design(std::size_t p, double a) {
    check_exchangeable(p, a);
    const auto n = static_cast<Eigen::Index>(p);
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    v.array() += a;
    return CanonicalDesign::from_canonical(std::move(v), CanonicalForm::symmetric);
}

double exchangeable_inverse_parameter(std::size_t p, double a) {
    check_exchangeable(p, a);
    return -a / (1.0 + static_cast<double>(p) * a);
}

double exchangeable_cosine(std::size_t p, double a) {
    check_exchangeable(p, a);
    if (p < 2) fail_usage("cosine needs p >= 2");
    const double pd = static_cast<double>(p);
    // <x_i, x_k> = 2a + p a^2, ||x_i||^2 = 1 + 2a + p a^2
    return a * (2.0 + pd * a) / (pd * a * a + 2.0 * a + 1.0);
}

double exchangeable_shrinkage(std::size_t p, double a, std::size_t m) {
    check_exchangeable(p, a);
    if (m < 2 || m > p) fail_usage("shrinkage needs 2 <= m <= p");
    const double inv = 1.0 / static_cast<double>(m - 1);
    return inv / (static_cast<double>(p) * a * a + 2.0 * a + inv);
}

Direction exchangeable_direction_formula(std::size_t p, double a, ModelId model, std::size_t j) {
    check_exchangeable(p, a);
    if (model.empty() || (model.mask & ~full_mask(p)) != 0) fail_usage("model must be a nonempty subset of 1..p");
    if (!model.contains(j)) fail_usage("predictor " + std::to_string(j + 1) + " is not in model {" + model.to_string() + "}");
    const std::size_t m = model.size();
    std::vector<double> v(p);
    if (m == 1) {
        for (std::size_t k = 0; k < p; ++k) v[k] = (k == j ? 1.0 : 0.0) + a;
    } else {
        const double d = exchangeable_shrinkage(p, a, m);
        const double da = d * a;
        const double others = -(1.0 - d) / static_cast<double>(m - 1) + da;
        for (std::size_t k = 0; k < p; ++k) v[k] = k == j ? 1.0 + da : model.contains(k) ? others : da;
    }
    double nn = 0.0;
    for (double t : v) nn += t * t;
    const double norm = std::sqrt(nn);
    for (double& t : v) t /= norm;
    return Direction{std::move(v), j, model, norm};
}

std::vector<double> default_exchangeable_grid() {
    std::vector<double> grid{0.0};
    for (int k = -8; k <= 4; ++k) grid.push_back(std::pow(10.0, k / 4.0));
    return grid;
}

std::vector<ExchangeableRow> exchangeable_ratio_table(const std::vector<std::size_t>& p_list,
                                                      const std::vector<double>& a_grid, double alpha,
                                                      std::uint64_t samples, std::uint64_t seed, int threads) {
    validate_alpha(alpha);
    if (a_grid.empty()) fail_usage("a-grid is empty");
    std::vector<ExchangeableRow> rows;
    for (std::size_t p : p_list) {
        if (p < 2) fail_usage("exchangeable table needs p >= 2");
        ExchangeableRow row;
        row.p = p;
        const double scale = std::sqrt(2.0 * std::log(static_cast<double>(p)));
        McOptions options;
        options.samples = samples;
        options.seed = seed;
        options.threads = threads;
        for (double a : a_grid) {
            if (a < 0.0) fail_usage("a-grid must be nonnegative; negative a are covered by duality");
            const auto x = exchangeable_design(p, a);
            ExchangeableCell cell{p, a, posi_K(x, ModelUniverse::all(), alpha, ErrorModel::known_sigma(), options), 0.0};
            cell.ratio = cell.K.K / scale;
            if (row.cells.empty() || cell.K.K > row.best_K) {
                row.best_a = a;
                row.best_K = cell.K.K;
                row.best_se = cell.K.mc_standard_error;
                row.ratio = cell.ratio;
            }
            row.cells.push_back(std::move(cell));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

CanonicalDesign worst_posi1_design(std::size_t p, double c) {
    check_worst(p, c);
    if (p > 64) fail_usage("worst-case PoSI1 design matrices are limited to p <= 64; use the fast statistic");
    const auto n = static_cast<Eigen::Index>(p);
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    v.col(n - 1).setConstant(c);
    v(n - 1, n - 1) = std::sqrt(1.0 - static_cast<double>(p - 1) * c * c);
    return CanonicalDesign::from_canonical(std::move(v), CanonicalForm::upper_triangular);
}

namespace {

// Sorted z_1..z_{p-1} with prefix sums of the bottom and top order statistics.
struct OrderSums {
    std::vector<double> bottom;  // bottom[k] = sum of the k smallest
    std::vector<double> top;     // top[k] = sum of the k largest

    explicit OrderSums(std::span<const double> z) {
        std::vector<double> s(z.begin(), z.end() - 1);
        std::sort(s.begin(), s.end());
        const std::size_t q = s.size();
        bottom.assign(q + 1, 0.0);
        top.assign(q + 1, 0.0);
        for (std::size_t k = 0; k < q; ++k) {
            bottom[k + 1] = bottom[k] + s[k];
            top[k + 1] = top[k] + s[q - 1 - k];
        }
    }
};

double worst_stat(const OrderSums& sums, std::size_t p, double c, double zp, std::size_t* best_m) {
    const double pd = static_cast<double>(p);
    const double lead = 1.0 - (pd - 1.0) * c * c;
    double best = -1.0;
    std::size_t arg = 1;
    for (std::size_t m = 1; m <= p; ++m) {
        const double denom = 1.0 - static_cast<double>(m - 1) * c * c;
        const double s = std::sqrt(lead / denom);
        const double w = c / std::sqrt(denom);
        const std::size_t k = p - m;  // predictors outside M
        const double v = std::max(std::abs(s * zp + w * sums.top[k]), std::abs(s * zp + w * sums.bottom[k]));
        if (v > best) {
            best = v;
            arg = m;
        }
    }
    if (best_m) *best_m = arg;
    return best;
}

}  // namespace

double fast_worst_posi1_stat(std::size_t p, double c, std::span<const double> z, std::size_t* best_m) {
    check_worst(p, c);
    if (z.size() != p) fail_usage("draw must have length p");
    const OrderSums sums(z);
    return worst_stat(sums, p, c, z[p - 1], best_m);
}

std::vector<double> default_worst_posi1_grid(std::size_t p, std::size_t levels) {
    if (p < 2) fail_usage("worst-case PoSI1 grid needs p >= 2");
    std::vector<double> grid;
    for (std::size_t k = 1; k <= levels; ++k)
        grid.push_back(std::sqrt((1.0 - std::ldexp(1.0, -static_cast<int>(k))) / static_cast<double>(p - 1)));
    return grid;
}

std::vector<WorstPosi1Row> worst_posi1_table(const std::vector<std::size_t>& p_list,
                                             const std::vector<double>& c_grid, double alpha,
                                             std::uint64_t samples, std::uint64_t seed, int threads) {
    validate_alpha(alpha);
    if (samples < 2) fail_usage("need at least 2 Monte Carlo samples");
    std::vector<WorstPosi1Row> rows;
    for (std::size_t p : p_list) {
        const auto grid = c_grid.empty() ? default_worst_posi1_grid(p) : c_grid;
        for (double c : grid) check_worst(p, c);
        const std::size_t g = grid.size();
        std::vector<double> stats(g * samples);
        std::vector<std::uint32_t> sizes(g * samples);
        const auto bounds = split_range(samples, (samples + 127) / 128);
        parallel_items(bounds.size() - 1, resolve_threads(threads), [&](std::size_t part, int) {
            std::vector<double> z(p);
            for (std::size_t i = bounds[part]; i < bounds[part + 1]; ++i) {
                CounterRng rng(seed, StreamTag::special_design, i);
                for (auto& v : z) v = rng.normal();
                const OrderSums sums(z);
                for (std::size_t t = 0; t < g; ++t) {
                    std::size_t m = 0;
                    stats[t * samples + i] = worst_stat(sums, p, grid[t], z[p - 1], &m);
                    sizes[t * samples + i] = static_cast<std::uint32_t>(m);
                }
            }
        });
        WorstPosi1Row row;
        row.p = p;
        row.samples = samples;
        const double root = std::sqrt(static_cast<double>(p));
        for (std::size_t t = 0; t < g; ++t) {
            const std::span<const double> col(stats.data() + t * samples, samples);
            const auto q = conservative_quantile(col, alpha);
            const double msum = std::accumulate(sizes.begin() + static_cast<std::ptrdiff_t>(t * samples),
                                                sizes.begin() + static_cast<std::ptrdiff_t>((t + 1) * samples), 0.0);
            WorstPosi1Cell cell{grid[t], q.value, q.standard_error, q.value / root,
                                msum / static_cast<double>(samples) / static_cast<double>(p)};
            if (row.cells.empty() || cell.K1 > row.best_K1) {
                row.best_c = cell.c;
                row.best_K1 = cell.K1;
                row.best_se = cell.standard_error;
                row.ratio = cell.ratio;
            }
            row.quantile_index = q.index;
            row.cells.push_back(cell);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

double rate_function_f(double r) {
    if (!(r > 0.0 && r < 1.0)) fail_usage("rate function needs 0 < r < 1");
    return normal_pdf(normal_quantile(r)) / std::sqrt(1.0 - r);
}

RateMaximum maximize_rate_function(double tolerance) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 1e-6;
    double hi = 1.0 - 1e-6;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = rate_function_f(x1);
    double f2 = rate_function_f(x2);
    while (hi - lo > tolerance) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = rate_function_f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = rate_function_f(x1);
        }
    }
    const double r = 0.5 * (lo + hi);
    return RateMaximum{r, rate_function_f(r)};
}

}  // namespace posi
