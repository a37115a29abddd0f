#include "structure.hpp"

#include "error.hpp"
#include "parallel.hpp"

#include <cmath>

namespace posi {

CanonicalDesign dual_design(const CanonicalDesign& x) {
    if (x.d() != x.p())
        fail_infeasible("dual design needs d = p (got d=" + std::to_string(x.d()) + ", p=" + std::to_string(x.p()) + ")");
    const Eigen::MatrixXd& v = x.values();
    const Eigen::MatrixXd gram = v.transpose() * v;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) fail_data("design is singular; no dual exists");
    // X* = X G^{-1}  <=>  X*^T = G^{-1} X^T
    Eigen::MatrixXd dual = ldlt.solve(v.transpose()).transpose();
    const auto form = x.form() == CanonicalForm::symmetric ? CanonicalForm::symmetric : CanonicalForm::unspecified;
    if (form == CanonicalForm::symmetric) dual = (0.5 * (dual + dual.transpose())).eval();
    return CanonicalDesign(std::move(dual), x.basis(), form, x.rank_tolerance(), x.column_names());
}

DualityReport verify_duality(const CanonicalDesign& x, double tolerance) {
    if (x.d() != x.p())
        fail_infeasible("duality check needs d = p (got d=" + std::to_string(x.d()) + ", p=" + std::to_string(x.p()) + ")");
    const CanonicalDesign dual = dual_design(x);
    const std::size_t p = x.p();
    const std::uint64_t full = full_mask(p);
    DualityReport report;
    for (std::uint64_t mask = 1; mask <= full; ++mask) {
        const ModelId m{mask};
        for (std::size_t j : m.members()) {
            const ModelId star{(full & ~mask) | (std::uint64_t{1} << j)};
            AdjustedPredictor a;
            AdjustedPredictor b;
            try {
                a = adjusted_predictor(x, m, j);
                b = adjusted_predictor(dual, star, j);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::data) throw;
                ++report.unmatched_pairs;
                continue;
            }
            ++report.matched_pairs;
            double diff = 0.0;
            for (std::size_t k = 0; k < p; ++k) {
                const double t = a.residual[k] / a.norm - b.residual[k] / b.norm;
                diff += t * t;
            }
            report.max_mismatch = std::max(report.max_mismatch, std::sqrt(diff));
            // ||l_{j.M}|| = 1 / ||X_{j.M}||
            report.norm_product_check =
                std::max(report.norm_product_check, std::abs(1.0 / (a.norm * b.norm) - 1.0));
        }
    }
    const DirectionSet lx = direction_stream(x, ModelUniverse::all(), DedupMode::up_to_sign(tolerance));
    const DirectionSet ld = direction_stream(dual, ModelUniverse::all(), DedupMode::up_to_sign(tolerance));
    // two independent factorizations: allow extra rounding slack
    report.sign_classes_equal = same_sign_classes(lx, ld, 10.0 * tolerance);
    return report;
}

OrthogonalityCensus orthogonality_census(const DirectionSet& directions, double tolerance, int threads) {
    OrthogonalityCensus census;
    const std::size_t n = directions.size();
    const std::size_t d = directions.d();
    census.partners.assign(n, 0);
    const double* base = directions.packed().data();
    const auto bounds = split_range(n, (n + 255) / 256);
    parallel_items(bounds.size() - 1, resolve_threads(threads), [&](std::size_t part, int) {
        for (std::size_t i = bounds[part]; i < bounds[part + 1]; ++i) {
            std::uint64_t count = 0;
            for (std::size_t k = 0; k < n; ++k)
                if (k != i && std::abs(project(base + i * d, base + k * d, d)) < tolerance) ++count;
            census.partners[i] = count;
        }
    });
    std::uint64_t total = 0;
    for (const auto c : census.partners) {
        ++census.histogram[c];
        total += c;
    }
    census.orthogonal_pairs = total / 2;
    return census;
}

PolytopeSpec::PolytopeSpec(DirectionSet l, double k) : directions(std::move(l)), K(k) {
    if (directions.empty()) fail_usage("polytope needs at least one direction");
    if (!(K > 0.0)) fail_usage("polytope constant must be positive");
}

bool polytope_contains(const PolytopeSpec& polytope, std::span<const double> z) {
    const std::size_t d = polytope.directions.d();
    if (z.size() != d) fail_data("point has length " + std::to_string(z.size()) + ", expected " + std::to_string(d));
    const double* base = polytope.directions.packed().data();
    for (std::size_t i = 0; i < polytope.directions.size(); ++i)
        if (std::abs(project(base + i * d, z.data(), d)) > polytope.K) return false;
    return true;
}

}  // namespace posi
