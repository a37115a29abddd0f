#include "monte_carlo.hpp"

#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>

namespace posi {
namespace {

constexpr std::size_t kChunk = 256;

// running[i] = max(running[i], |l^T z_i|) for draws [begin, end) and every
// direction in the packed block. Accumulation order over coordinates matches
// project().
void update_running_max(const double* vectors, std::size_t count, const DrawMatrix& draws, std::size_t begin,
                        std::size_t end, double* running) {
    const std::size_t d = draws.d;
    const std::size_t n = draws.count;
    double acc[kChunk];
    for (std::size_t c0 = begin; c0 < end; c0 += kChunk) {
        const std::size_t len = std::min(kChunk, end - c0);
        double* run = running + c0;
        for (std::size_t l = 0; l < count; ++l) {
            const double* v = vectors + l * d;
            const double* z0 = draws.z.data() + c0;
            const double v0 = v[0];
            for (std::size_t i = 0; i < len; ++i) acc[i] = v0 * z0[i];
            for (std::size_t k = 1; k < d; ++k) {
                const double vk = v[k];
                const double* zk = draws.z.data() + k * n + c0;
                for (std::size_t i = 0; i < len; ++i) acc[i] += vk * zk[i];
            }
            for (std::size_t i = 0; i < len; ++i) run[i] = std::max(run[i], std::abs(acc[i]));
        }
    }
}

std::vector<double> scale_by_sigma(std::vector<double> running, const DrawMatrix& draws) {
    for (std::size_t i = 0; i < running.size(); ++i) running[i] /= draws.sigma_hat[i];
    return running;
}

ConstantEstimate finish(std::span<const double> draws, double alpha, ErrorModel em, const McOptions& options,
                        std::size_t d) {
    const auto q = conservative_quantile(draws, alpha);
    ConstantEstimate e;
    e.K = q.value;
    e.alpha = alpha;
    e.df = em;
    e.mc_samples = draws.size();
    e.mc_standard_error = q.standard_error;
    e.seed = options.seed;
    e.quantile_index = q.index;
    e.d = d;
    e.method = EstimateMethod::monte_carlo;
    return e;
}

void validate(double alpha, const McOptions& options) {
    validate_alpha(alpha);
    if (options.samples < 1) fail_usage("mc samples must be >= 1");
    if (conservative_quantile_index(options.samples, alpha) > options.samples)
        fail_usage("mc samples too small for alpha: need ceil((1-alpha)(N+1)) <= N");
}

[[noreturn]] void no_directions(const ModelUniverse& u, std::optional<std::size_t> j) {
    if (j) fail_data("predictor " + std::to_string(*j + 1) + " appears in no model of universe '" + u.to_string() + "'");
    fail_data("no directions: universe '" + u.to_string() + "' is empty after rank filtering");
}

ConstantEstimate estimate_over(const CanonicalDesign& x, const ModelUniverse& u, std::optional<std::size_t> j,
                               double alpha, ErrorModel em, const McOptions& options) {
    validate(alpha, options);
    StreamOptions so;
    so.predictor = j;
    const DirectionStream stream(x, u, so);
    const int threads = resolve_threads(options.threads);

    bool materialize = options.mode == EvaluationMode::materialized;
    if (options.mode == EvaluationMode::automatic) {
        const double bytes = stream.count_upper_bound() * static_cast<double>(x.d() + 3) * 8.0;
        materialize = bytes <= static_cast<double>(options.materialize_limit_bytes);
    }

    const auto draws = DrawMatrix::generate(x.d(), options.samples, em, options.seed, threads);
    ConstantEstimate e;
    if (materialize) {
        const auto set = direction_stream(x, u, options.dedup, threads, j);
        if (set.empty()) no_directions(u, j);
        const auto maxima = max_abs_t_draws(set, draws, threads);
        e = finish(maxima, alpha, em, options, x.d());
        e.direction_count = set.size();
        e.emitted_count = set.emitted;
        e.degenerate_count = set.degenerate;
    } else {
        StreamStats stats;
        const auto maxima = max_abs_t_draws(stream, draws, threads, &stats);
        if (stats.emitted == 0) no_directions(u, j);
        e = finish(maxima, alpha, em, options, x.d());
        e.direction_count = stats.emitted;
        e.emitted_count = stats.emitted;
        e.degenerate_count = stats.degenerate;
    }
    e.scope = ConstantScope::universe;
    e.universe = std::make_shared<const ModelUniverse>(u);
    e.predictor = j;
    return e;
}

}  // namespace

DrawMatrix DrawMatrix::generate(std::size_t d, std::size_t count, ErrorModel em, std::uint64_t seed, int threads) {
    if (d < 1) fail_usage("draw dimension must be >= 1");
    DrawMatrix m;
    m.d = d;
    m.count = count;
    m.z.resize(d * count);
    m.sigma_hat.assign(count, 1.0);
    const auto bounds = split_range(count, (count + 4095) / 4096);
    parallel_items(bounds.size() - 1, threads, [&](std::size_t part, int) {
        for (std::size_t i = bounds[part]; i < bounds[part + 1]; ++i) {
            CounterRng rng(seed, StreamTag::max_statistic, i);
            for (std::size_t k = 0; k < d; ++k) m.z[k * count + i] = rng.normal();
            if (!em.sigma_known()) {
                const double r = static_cast<double>(*em.df);
                m.sigma_hat[i] = std::sqrt(rng.chi_square(r) / r);
            }
        }
    });
    return m;
}

std::vector<double> DrawMatrix::draw(std::size_t i) const {
    std::vector<double> out(d);
    for (std::size_t k = 0; k < d; ++k) out[k] = z[k * count + i];
    return out;
}

std::vector<double> max_abs_t_draws(const DirectionSet& directions, const DrawMatrix& draws, int threads) {
    if (directions.empty()) fail_data("empty direction set");
    if (directions.d() != draws.d) fail_usage("direction and draw dimensions differ");
    std::vector<double> running(draws.count, 0.0);
    const std::size_t chunks = (draws.count + kChunk - 1) / kChunk;
    const auto bounds = split_range(chunks, static_cast<std::size_t>(std::max(1, threads)) * 8);
    parallel_items(bounds.size() - 1, threads, [&](std::size_t part, int) {
        const std::size_t begin = bounds[part] * kChunk;
        const std::size_t end = std::min(draws.count, bounds[part + 1] * kChunk);
        if (begin < end)
            update_running_max(directions.packed().data(), directions.size(), draws, begin, end, running.data());
    });
    return scale_by_sigma(std::move(running), draws);
}

std::vector<double> max_abs_t_draws(const DirectionStream& stream, const DrawMatrix& draws, int threads,
                                    StreamStats* stats) {
    if (stream.design().d() != draws.d) fail_usage("direction and draw dimensions differ");
    const std::size_t parts = stream.partition_count();
    const int workers = std::max(1, std::min(threads, static_cast<int>(parts)));
    std::vector<std::vector<double>> local(static_cast<std::size_t>(workers));
    std::vector<StreamStats> part_stats(parts);
    parallel_items(parts, workers, [&](std::size_t part, int w) {
        auto& running = local[static_cast<std::size_t>(w)];
        if (running.empty()) running.assign(draws.count, 0.0);
        part_stats[part] = stream.run_partition(part, [&](const DirectionBlock& b) {
            update_running_max(b.vectors, b.count, draws, 0, draws.count, running.data());
        });
    });
    std::vector<double> running(draws.count, 0.0);
    for (const auto& l : local) {
        if (l.empty()) continue;
        for (std::size_t i = 0; i < running.size(); ++i) running[i] = std::max(running[i], l[i]);
    }
    if (stats) {
        *stats = {};
        for (const auto& s : part_stats) *stats += s;
    }
    return scale_by_sigma(std::move(running), draws);
}

std::vector<double> max_abs_t_draws(const DirectionSet& directions, ErrorModel em, std::uint64_t count,
                                     std::uint64_t seed, int threads) {
    if (count < 1) fail_usage("draw count must be >= 1");
    const int t = resolve_threads(threads);
    return max_abs_t_draws(directions, DrawMatrix::generate(directions.d(), count, em, seed, t), t);
}

std::uint64_t conservative_quantile_index(std::uint64_t count, double alpha) {
    const double q = (1.0 - alpha) * (static_cast<double>(count) + 1.0);
    // guard against (1 - alpha)(N + 1) landing a rounding error above an integer
    const auto idx = static_cast<std::uint64_t>(std::ceil(q - 1e-9 * std::max(1.0, q)));
    return std::max<std::uint64_t>(idx, 1);
}

QuantileEstimate conservative_quantile(std::span<const double> draws, double alpha) {
    validate_alpha(alpha);
    const std::uint64_t n = draws.size();
    if (n == 0) fail_usage("no draws");
    const std::uint64_t idx = conservative_quantile_index(n, alpha);
    if (idx > n) fail_usage("too few draws for the requested alpha");
    std::vector<double> sorted(draws.begin(), draws.end());
    std::sort(sorted.begin(), sorted.end());
    QuantileEstimate q;
    q.index = idx;
    q.value = sorted[idx - 1];

    const double nn = static_cast<double>(n);
    double mean = 0.0;
    for (double v : sorted) mean += v;
    mean /= nn;
    double ss = 0.0;
    for (double v : sorted) ss += (v - mean) * (v - mean);
    const double sd = n > 1 ? std::sqrt(ss / (nn - 1.0)) : 0.0;
    const auto at = [&](double frac) { return sorted[static_cast<std::size_t>(frac * (nn - 1.0))]; };
    const double iqr = at(0.75) - at(0.25);
    double spread = sd;
    if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
    const double h = 0.9 * spread * std::pow(nn, -0.2);
    if (!(h > 0.0)) {
        q.standard_error = 0.0;
        return q;
    }
    // kernel mass beyond 8 bandwidths is negligible; sum over that window only
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), q.value - 8.0 * h);
    const auto hi = std::upper_bound(sorted.begin(), sorted.end(), q.value + 8.0 * h);
    double density = 0.0;
    for (auto it = lo; it != hi; ++it) density += normal_pdf((q.value - *it) / h);
    density /= nn * h;
    q.standard_error = density > 0.0 ? std::sqrt(alpha * (1.0 - alpha) / nn) / density : 0.0;
    return q;
}

ConstantEstimate constant_from_directions(const DirectionSet& directions, double alpha, ErrorModel em,
                                          const McOptions& options) {
    validate(alpha, options);
    const auto maxima = max_abs_t_draws(directions, em, options.samples, options.seed, options.threads);
    auto e = finish(maxima, alpha, em, options, directions.d());
    e.direction_count = directions.size();
    e.emitted_count = directions.emitted ? directions.emitted : directions.size();
    e.degenerate_count = directions.degenerate;
    return e;
}

ConstantEstimate posi_K(const CanonicalDesign& x, const ModelUniverse& u, double alpha, ErrorModel em,
                        const McOptions& options) {
    return estimate_over(x, u, std::nullopt, alpha, em, options);
}

ConstantEstimate posi1_K(const CanonicalDesign& x, const ModelUniverse& u, std::size_t j, double alpha,
                         ErrorModel em, const McOptions& options) {
    if (j >= x.p()) fail_usage("predictor " + std::to_string(j + 1) + " outside 1.." + std::to_string(x.p()));
    return estimate_over(x, u, j, alpha, em, options);
}

}  // namespace posi
