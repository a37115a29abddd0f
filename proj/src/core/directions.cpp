#include "directions.hpp"

#include "error.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace posi {
namespace {

// Depth-first walk over full-rank subsets with one Gram-Schmidt step per
// node. Level t holds, for every column k, the residual of X~_k against the
// first t basis vectors and its norm.
class SubsetWalker {
public:
    SubsetWalker(const CanonicalDesign& x, const ModelUniverse& u, std::optional<std::size_t> excluded)
        : x_(x), u_(u), excluded_(excluded), d_(x.d()), p_(x.p()) {
        const std::size_t levels = std::min(d_, p_) + 1;
        residuals_.assign(levels, std::vector<double>(p_ * d_));
        norms_.assign(levels, std::vector<double>(p_));
        basis_.assign(levels * d_, 0.0);
        for (std::size_t k = 0; k < p_; ++k) {
            std::copy_n(x_.column(k), d_, residuals_[0].data() + k * d_);
            norms_[0][k] = x_.column_norm(k);
        }
    }

    bool degenerate(std::size_t level, std::size_t k) const {
        return !(norms_[level][k] > x_.rank_tolerance() * x_.column_norm(k));
    }
    const double* residual(std::size_t level, std::size_t k) const { return residuals_[level].data() + k * d_; }
    double norm(std::size_t level, std::size_t k) const { return norms_[level][k]; }

    // visit(S, level) at the root (part 0) or at every node of subtree {part-1}.
    template <class Visit>
    void walk_partition(std::size_t part, Visit&& visit) {
        if (part == 0) {
            visit(std::uint64_t{0}, std::size_t{0});
            return;
        }
        const std::size_t a = part - 1;
        if (excluded_ && *excluded_ == a) return;
        if (degenerate(0, a)) return;
        const std::uint64_t s = std::uint64_t{1} << a;
        if (!u_.may_reach(s)) return;
        push(0, a);
        descend(s, 1, visit);
    }

private:
    template <class Visit>
    void descend(std::uint64_t s, std::size_t level, Visit& visit) {
        visit(s, level);
        if (level + 1 >= residuals_.size()) return;
        const std::size_t first = 64 - static_cast<std::size_t>(std::countl_zero(s));
        for (std::size_t b = first; b < p_; ++b) {
            if (excluded_ && *excluded_ == b) continue;
            if (degenerate(level, b)) continue;
            const std::uint64_t child = s | (std::uint64_t{1} << b);
            if (!u_.may_reach(child)) continue;
            push(level, b);
            descend(child, level + 1, visit);
        }
    }

    // Adds column b's residual at `level` as basis vector `level`, filling level+1.
    void push(std::size_t level, std::size_t b) {
        double* q = basis_.data() + level * d_;
        const double* rb = residual(level, b);
        const double inv = 1.0 / norms_[level][b];
        for (std::size_t i = 0; i < d_; ++i) q[i] = rb[i] * inv;
        // one reorthogonalization pass against earlier basis vectors
        for (std::size_t t = 0; t < level; ++t) {
            const double* qt = basis_.data() + t * d_;
            double c = 0.0;
            for (std::size_t i = 0; i < d_; ++i) c += qt[i] * q[i];
            for (std::size_t i = 0; i < d_; ++i) q[i] -= c * qt[i];
        }
        double qn = 0.0;
        for (std::size_t i = 0; i < d_; ++i) qn += q[i] * q[i];
        qn = std::sqrt(qn);
        for (std::size_t i = 0; i < d_; ++i) q[i] /= qn;

        const auto& src = residuals_[level];
        auto& dst = residuals_[level + 1];
        auto& dst_norm = norms_[level + 1];
        for (std::size_t k = 0; k < p_; ++k) {
            const double* r = src.data() + k * d_;
            double* out = dst.data() + k * d_;
            double c = 0.0;
            for (std::size_t i = 0; i < d_; ++i) c += q[i] * r[i];
            double nn = 0.0;
            for (std::size_t i = 0; i < d_; ++i) {
                out[i] = r[i] - c * q[i];
                nn += out[i] * out[i];
            }
            dst_norm[k] = std::sqrt(nn);
        }
    }

    const CanonicalDesign& x_;
    const ModelUniverse& u_;
    std::optional<std::size_t> excluded_;
    std::size_t d_;
    std::size_t p_;
    std::vector<std::vector<double>> residuals_;
    std::vector<std::vector<double>> norms_;
    std::vector<double> basis_;
};

// Generic reference vector for the sort key of the sign-class sweeps.
std::vector<double> sweep_axis(std::size_t d) {
    std::vector<double> u(d);
    double nn = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        u[k] = 1.0 / std::sqrt(static_cast<double>(k) + 1.618033988749895);
        nn += u[k] * u[k];
    }
    for (auto& v : u) v /= std::sqrt(nn);
    return u;
}

std::vector<double> sweep_keys(const DirectionSet& set, const std::vector<double>& axis) {
    std::vector<double> keys(set.size());
    for (std::size_t i = 0; i < set.size(); ++i)
        keys[i] = std::abs(project(axis.data(), set.vector(i).data(), set.d()));
    return keys;
}

}  // namespace

AdjustedPredictor adjusted_predictor(const CanonicalDesign& x, ModelId model, std::size_t j) {
    if (!model.contains(j)) fail_usage("predictor " + std::to_string(j + 1) + " is not in model {" + model.to_string() + "}");
    if ((model.mask & ~full_mask(x.p())) != 0) fail_usage("model refers to columns beyond p");
    const Eigen::Map<const Eigen::VectorXd> xj(x.column(j), static_cast<Eigen::Index>(x.d()));
    Eigen::VectorXd r = xj;
    const auto others = model.without(j).members();
    if (!others.empty()) {
        Eigen::MatrixXd a(static_cast<Eigen::Index>(x.d()), static_cast<Eigen::Index>(others.size()));
        for (std::size_t c = 0; c < others.size(); ++c)
            a.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(x.column(others[c]), a.rows());
        const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
        r = xj - a * qr.solve(xj);
    }
    AdjustedPredictor out;
    out.norm = r.norm();
    if (!(out.norm > x.rank_tolerance() * x.column_norm(j))) {
        fail_data("adjusted predictor " + std::to_string(j + 1) + " in model {" + model.to_string() +
                  "} is degenerate (near-collinear columns)");
    }
    out.residual.assign(r.data(), r.data() + r.size());
    return out;
}

double vif(const CanonicalDesign& x, ModelId model, std::size_t j) {
    const auto adj = adjusted_predictor(x, model, j);
    const double cn = x.column_norm(j);
    return (cn * cn) / (adj.norm * adj.norm);
}

std::vector<ModelId> enumerate_models(const CanonicalDesign& x, const ModelUniverse& u) {
    std::vector<ModelId> out;
    SubsetWalker walker(x, u, std::nullopt);
    for (std::size_t part = 0; part <= x.p(); ++part) {
        walker.walk_partition(part, [&](std::uint64_t s, std::size_t level) {
            const std::size_t first = s == 0 ? 0 : 64 - static_cast<std::size_t>(std::countl_zero(s));
            for (std::size_t b = first; b < x.p(); ++b) {
                const std::uint64_t m = s | (std::uint64_t{1} << b);
                if (walker.degenerate(level, b) || !u.admits(m)) continue;
                out.push_back(ModelId{m});
            }
        });
    }
    if (out.empty()) fail_data("model universe '" + u.to_string() + "' is empty after rank filtering");
    return out;
}

DirectionStream::DirectionStream(const CanonicalDesign& x, const ModelUniverse& u, StreamOptions options)
    : x_(x), u_(u), options_(options) {
    if (options_.block_size == 0) options_.block_size = 256;
    if (options_.predictor && *options_.predictor >= x_.p())
        fail_usage("predictor " + std::to_string(*options_.predictor + 1) + " outside 1.." + std::to_string(x_.p()));
}

StreamStats DirectionStream::run_partition(std::size_t part, const BlockSink& sink) const {
    const std::size_t d = x_.d();
    const std::size_t p = x_.p();
    const std::size_t cap = options_.block_size;
    std::vector<double> vectors(cap * d);
    std::vector<std::uint32_t> predictor(cap);
    std::vector<std::uint64_t> model(cap);
    std::vector<double> raw(cap);
    std::size_t filled = 0;
    StreamStats stats;

    const auto flush = [&] {
        if (filled == 0) return;
        sink(DirectionBlock{d, filled, vectors.data(), predictor.data(), model.data(), raw.data()});
        filled = 0;
    };

    SubsetWalker walker(x_, u_, options_.predictor);
    const auto emit_one = [&](std::uint64_t s, std::size_t level, std::size_t j) {
        const std::uint64_t m = s | (std::uint64_t{1} << j);
        if (!u_.admits(m)) return;
        if (walker.degenerate(level, j)) {
            ++stats.degenerate;
            return;
        }
        const double nrm = walker.norm(level, j);
        const double* r = walker.residual(level, j);
        double* out = vectors.data() + filled * d;
        for (std::size_t i = 0; i < d; ++i) out[i] = r[i] / nrm;
        predictor[filled] = static_cast<std::uint32_t>(j);
        model[filled] = m;
        raw[filled] = nrm;
        ++stats.emitted;
        if (++filled == cap) flush();
    };

    walker.walk_partition(part, [&](std::uint64_t s, std::size_t level) {
        if (options_.predictor) {
            emit_one(s, level, *options_.predictor);
            return;
        }
        for (std::size_t j = 0; j < p; ++j)
            if (((s >> j) & 1u) == 0) emit_one(s, level, j);
    });
    flush();
    return stats;
}

StreamStats DirectionStream::run(const BlockSink& sink) const {
    StreamStats total;
    for (std::size_t part = 0; part < partition_count(); ++part) total += run_partition(part, sink);
    return total;
}

double DirectionStream::count_upper_bound() const {
    const std::size_t p = x_.p();
    const std::size_t dmax = std::min(x_.d(), u_.max_size_bound().value_or(p));
    // sum over m <= dmax of m * C(p, m) (or C(p-1, m-1) when restricted to one predictor)
    double total = 0.0;
    double binom = 1.0;  // C(p, m) or C(p-1, m-1)
    const std::size_t n = options_.predictor ? p - 1 : p;
    for (std::size_t m = 1; m <= dmax; ++m) {
        if (options_.predictor) {
            binom = m == 1 ? 1.0 : binom * static_cast<double>(n - (m - 2)) / static_cast<double>(m - 1);
            total += binom;
        } else {
            binom = binom * static_cast<double>(n - (m - 1)) / static_cast<double>(m);
            total += static_cast<double>(m) * binom;
        }
    }
    return total;
}

Direction DirectionSet::at(std::size_t i) const {
    const auto v = vector(i);
    return Direction{{v.begin(), v.end()}, predictor_[i], ModelId{model_[i]}, raw_norm_[i]};
}

void DirectionSet::append(const DirectionBlock& block) {
    vectors_.insert(vectors_.end(), block.vectors, block.vectors + block.count * block.d);
    predictor_.insert(predictor_.end(), block.predictor, block.predictor + block.count);
    model_.insert(model_.end(), block.model, block.model + block.count);
    raw_norm_.insert(raw_norm_.end(), block.raw_norm, block.raw_norm + block.count);
}

void DirectionSet::append(std::span<const double> v, std::size_t predictor, ModelId model, double raw_norm) {
    if (v.size() != d_) fail_usage("direction dimension mismatch");
    vectors_.insert(vectors_.end(), v.begin(), v.end());
    predictor_.push_back(static_cast<std::uint32_t>(predictor));
    model_.push_back(model.mask);
    raw_norm_.push_back(raw_norm);
}

DirectionSet direction_stream(const CanonicalDesign& x, const ModelUniverse& u, DedupMode dedup, int threads,
                              std::optional<std::size_t> predictor) {
    StreamOptions options;
    options.predictor = predictor;
    const DirectionStream stream(x, u, options);
    std::vector<DirectionSet> parts(stream.partition_count(), DirectionSet(x.d()));
    std::vector<StreamStats> stats(stream.partition_count());
    parallel_items(stream.partition_count(), resolve_threads(threads), [&](std::size_t part, int) {
        stats[part] = stream.run_partition(part, [&](const DirectionBlock& b) { parts[part].append(b); });
    });
    DirectionSet all(x.d());
    StreamStats total;
    for (std::size_t part = 0; part < parts.size(); ++part) {
        const auto& src = parts[part];
        for (std::size_t i = 0; i < src.size(); ++i)
            all.append(src.vector(i), src.predictor(i), src.model(i), src.raw_norm(i));
        total += stats[part];
    }
    all.emitted = total.emitted;
    all.degenerate = total.degenerate;
    if (dedup.enabled) {
        auto out = dedup_up_to_sign(all, dedup.tolerance);
        out.dedup = dedup;
        return out;
    }
    return all;
}

double sign_distance(std::span<const double> v, std::span<const double> w) {
    double minus = 0.0;
    double plus = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double a = v[i] - w[i];
        const double b = v[i] + w[i];
        minus += a * a;
        plus += b * b;
    }
    return std::sqrt(std::min(minus, plus));
}

DirectionSet dedup_up_to_sign(const DirectionSet& set, double tolerance) {
    // |<axis, v>| differs by at most the sign distance, so candidates for a
    // match lie within `tolerance` in key order.
    const auto axis = sweep_axis(set.d());
    const auto keys = sweep_keys(set, axis);
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });

    // Process in stream order so the earliest member of each class survives:
    // for each vector, scan its key window among already retained vectors.
    std::vector<std::size_t> rank(set.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
    std::vector<char> retained(set.size(), 0);
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < set.size(); ++i) {
        bool duplicate = false;
        const double key = keys[i];
        // walk left and right in key order
        for (std::size_t r = rank[i]; r-- > 0 && keys[order[r]] >= key - tolerance && !duplicate;) {
            const std::size_t c = order[r];
            if (retained[c] && sign_distance(set.vector(i), set.vector(c)) < tolerance) duplicate = true;
        }
        for (std::size_t r = rank[i] + 1; r < order.size() && keys[order[r]] <= key + tolerance && !duplicate; ++r) {
            const std::size_t c = order[r];
            if (retained[c] && sign_distance(set.vector(i), set.vector(c)) < tolerance) duplicate = true;
        }
        if (!duplicate) {
            retained[i] = 1;
            kept.push_back(i);
        }
    }
    DirectionSet out(set.d());
    for (auto i : kept) out.append(set.vector(i), set.predictor(i), set.model(i), set.raw_norm(i));
    out.emitted = set.emitted;
    out.degenerate = set.degenerate;
    out.dedup = DedupMode::up_to_sign(tolerance);
    return out;
}

bool same_sign_classes(const DirectionSet& a, const DirectionSet& b, double tolerance) {
    if (a.d() != b.d()) return false;
    const auto axis = sweep_axis(a.d());
    const auto covered = [&](const DirectionSet& from, const DirectionSet& into) {
        auto keys = sweep_keys(into, axis);
        std::vector<std::size_t> order(into.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return keys[x] < keys[y]; });
        std::vector<double> sorted(order.size());
        for (std::size_t r = 0; r < order.size(); ++r) sorted[r] = keys[order[r]];
        for (std::size_t i = 0; i < from.size(); ++i) {
            const double key = std::abs(project(axis.data(), from.vector(i).data(), from.d()));
            auto r = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), key - tolerance) - sorted.begin());
            bool found = false;
            for (; r < sorted.size() && sorted[r] <= key + tolerance; ++r) {
                if (sign_distance(from.vector(i), into.vector(order[r])) < tolerance) {
                    found = true;
                    break;
                }
            }
            if (!found) return false;
        }
        return true;
    };
    return covered(a, b) && covered(b, a);
}

}  // namespace posi
