#include "design.hpp"

#include "error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

namespace posi {
namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Comma-separated if the line has a comma, whitespace-separated otherwise.
std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    if (line.find(',') != std::string_view::npos) {
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            fields.push_back(trim(line.substr(start, comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        return fields;
    }
    std::size_t i = 0;
    while (i < line.size()) {
        i = line.find_first_not_of(" \t\r", i);
        if (i == std::string_view::npos) break;
        auto j = line.find_first_of(" \t\r", i);
        if (j == std::string_view::npos) j = line.size();
        fields.push_back(line.substr(i, j - i));
        i = j;
    }
    return fields;
}

bool is_blank(std::string_view line) {
    return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

bool parse_double(std::string_view token, double& out) {
    if (token.empty()) return false;
    if (token.front() == '+') token.remove_prefix(1);
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

}  // namespace

std::size_t numerical_rank(const Eigen::MatrixXd& m, double tolerance) {
    if (m.size() == 0) return 0;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) <= 0.0) return 0;
    const double cutoff = tolerance * s(0);
    std::size_t r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cutoff) ++r;
    return r;
}

DesignMatrix::DesignMatrix(Eigen::MatrixXd values, std::vector<std::string> column_names,
                           double rank_tolerance)
    : values_(std::move(values)), names_(std::move(column_names)), rank_tolerance_(rank_tolerance) {
    if (values_.rows() < 1 || values_.cols() < 1) fail_data("design matrix must have n >= 1 and p >= 1");
    if (!values_.allFinite()) fail_data("design matrix contains non-finite entries");
    if (!(rank_tolerance_ >= 0.0)) fail_usage("rank tolerance must be nonnegative");
    if (names_.empty()) {
        for (Eigen::Index j = 0; j < values_.cols(); ++j) names_.push_back("x" + std::to_string(j + 1));
    }
    if (names_.size() != cols()) fail_data("column name count does not match column count");
    rank_ = numerical_rank(values_, rank_tolerance_);
    if (rank_ == 0) fail_data("design matrix has rank 0");
}

DesignMatrix load_design(std::istream& source, const LoadOptions& options) {
    std::vector<std::string> names;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header_pending = options.header;
    while (std::getline(source, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        const auto fields = split_fields(line);
        if (header_pending) {
            for (auto f : fields) names.emplace_back(f);
            header_pending = false;
            continue;
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double v = 0.0;
            if (!parse_double(fields[c], v) || !std::isfinite(v)) {
                fail_data("non-numeric cell at row " + std::to_string(rows.size() + 1) + ", column " +
                          std::to_string(c + 1) + " (line " + std::to_string(line_no) + "): '" +
                          std::string(fields[c]) + "'");
            }
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            fail_data("ragged table: row " + std::to_string(rows.size() + 1) + " has " +
                      std::to_string(row.size()) + " cells, expected " +
                      std::to_string(rows.front().size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().empty()) fail_data("empty table");
    const std::size_t n = rows.size();
    const std::size_t p_data = rows.front().size();
    if (!names.empty() && names.size() != p_data) {
        fail_data("header has " + std::to_string(names.size()) + " names but rows have " +
                  std::to_string(p_data) + " cells");
    }
    if (names.empty()) {
        for (std::size_t j = 0; j < p_data; ++j) names.push_back("x" + std::to_string(j + 1));
    }
    const std::size_t offset = options.intercept ? 1 : 0;
    Eigen::MatrixXd values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p_data + offset));
    for (std::size_t i = 0; i < n; ++i) {
        if (options.intercept) values(static_cast<Eigen::Index>(i), 0) = 1.0;
        for (std::size_t j = 0; j < p_data; ++j)
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + offset)) = rows[i][j];
    }
    if (options.intercept) names.insert(names.begin(), "intercept");
    return DesignMatrix(std::move(values), std::move(names), options.rank_tolerance);
}

DesignMatrix load_design_file(const std::string& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) fail_data("cannot open design file '" + path + "'");
    return load_design(in, options);
}

std::vector<double> load_vector(std::istream& source) {
    std::vector<double> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        const auto fields = split_fields(line);
        double v = 0.0;
        if (fields.size() != 1 || !parse_double(fields.front(), v) || !std::isfinite(v))
            fail_data("expected one numeric value on line " + std::to_string(line_no));
        out.push_back(v);
    }
    if (out.empty()) fail_data("empty vector file");
    return out;
}

std::vector<double> load_vector_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_data("cannot open file '" + path + "'");
    return load_vector(in);
}

CanonicalDesign::CanonicalDesign(Eigen::MatrixXd values, Eigen::MatrixXd basis, CanonicalForm form,
                                 double rank_tolerance, std::vector<std::string> column_names)
    : values_(std::move(values)),
      basis_(std::move(basis)),
      form_(form),
      rank_tolerance_(rank_tolerance),
      names_(std::move(column_names)) {
    if (values_.rows() < 1 || values_.cols() < 1) fail_data("canonical design must be nonempty");
    if (basis_.cols() != values_.rows()) fail_data("basis width must equal canonical row count");
    if (values_.cols() > 64) fail_usage("at most 64 predictors are supported");
    if (names_.empty()) {
        for (Eigen::Index j = 0; j < values_.cols(); ++j) names_.push_back("x" + std::to_string(j + 1));
    }
    packed_.assign(values_.data(), values_.data() + values_.size());
    column_norms_.resize(p());
    for (std::size_t j = 0; j < p(); ++j) column_norms_[j] = values_.col(static_cast<Eigen::Index>(j)).norm();
}

CanonicalDesign CanonicalDesign::from_canonical(Eigen::MatrixXd values, CanonicalForm form,
                                                double rank_tolerance) {
    const auto d = values.rows();
    return CanonicalDesign(std::move(values), Eigen::MatrixXd::Identity(d, d), form, rank_tolerance);
}

std::vector<double> CanonicalDesign::reduce(std::span<const double> y) const {
    if (y.size() != n()) {
        fail_data("response length " + std::to_string(y.size()) + " does not match design rows " +
                  std::to_string(n()));
    }
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    const Eigen::VectorXd r = basis_.transpose() * yv;
    return {r.data(), r.data() + r.size()};
}

CanonicalDesign canonicalize(const DesignMatrix& x, CanonicalForm form) {
    const Eigen::MatrixXd& a = x.values();
    const auto n = a.rows();
    const auto p = a.cols();
    const auto d = static_cast<Eigen::Index>(x.rank());

    if (form == CanonicalForm::symmetric) {
        if (d < p) {
            fail_infeasible("symmetric canonical form requires full column rank (d = " +
                            std::to_string(d) + " < p = " + std::to_string(p) + ")");
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::MatrixXd& v = svd.matrixV();
        Eigen::MatrixXd sym = v * svd.singularValues().asDiagonal() * v.transpose();
        sym = 0.5 * (sym + sym.transpose()).eval();
        Eigen::MatrixXd basis = svd.matrixU() * v.transpose();
        return CanonicalDesign(std::move(sym), std::move(basis), form, x.rank_tolerance(),
                               x.column_names());
    }
    if (form != CanonicalForm::upper_triangular) fail_usage("unsupported canonical form");

    Eigen::MatrixXd r;
    Eigen::MatrixXd q;
    if (d == p) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
        r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
        q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    } else {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
        const Eigen::MatrixXd rp = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
        q = qr.householderQ() * Eigen::MatrixXd::Identity(n, d);
        r.resize(d, p);
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index k = 0; k < p; ++k) r.col(perm(k)) = rp.col(k);
        // sign normalization below refers to pivoted diagonal entries
        for (Eigen::Index i = 0; i < d; ++i) {
            if (rp(i, i) < 0.0) {
                r.row(i) *= -1.0;
                q.col(i) *= -1.0;
            }
        }
        return CanonicalDesign(std::move(r), std::move(q), form, x.rank_tolerance(), x.column_names());
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        if (r(i, i) < 0.0) {
            r.row(i) *= -1.0;
            q.col(i) *= -1.0;
        }
    }
    return CanonicalDesign(std::move(r), std::move(q), form, x.rank_tolerance(), x.column_names());
}

const char* to_string(CanonicalForm form) {
    switch (form) {
        case CanonicalForm::upper_triangular: return "upper_triangular";
        case CanonicalForm::symmetric: return "symmetric";
        case CanonicalForm::unspecified: return "unspecified";
    }
    return "unspecified";
}

}  // namespace posi
