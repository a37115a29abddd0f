#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <istream>
#include <span>
#include <string>
#include <vector>

namespace posi {

inline constexpr double kDefaultRankTolerance = 1e-10;

// Raw n x p predictor matrix together with its numerical rank.
class DesignMatrix {
public:
    DesignMatrix(Eigen::MatrixXd values, std::vector<std::string> column_names,
                 double rank_tolerance = kDefaultRankTolerance);

    const Eigen::MatrixXd& values() const { return values_; }
    const std::vector<std::string>& column_names() const { return names_; }
    double rank_tolerance() const { return rank_tolerance_; }
    std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }
    std::size_t rank() const { return rank_; }

private:
    Eigen::MatrixXd values_;
    std::vector<std::string> names_;
    double rank_tolerance_;
    std::size_t rank_;
};

struct LoadOptions {
    bool header = false;
    bool intercept = false;
    double rank_tolerance = kDefaultRankTolerance;
};

// Comma- or whitespace-separated numeric table, optionally with one header line.
DesignMatrix load_design(std::istream& source, const LoadOptions& options = {});
DesignMatrix load_design_file(const std::string& path, const LoadOptions& options = {});

// One number per line (blank lines ignored).
std::vector<double> load_vector(std::istream& source);
std::vector<double> load_vector_file(const std::string& path);

// Numerical rank by relative singular-value cutoff tolerance * sigma_max.
std::size_t numerical_rank(const Eigen::MatrixXd& m, double tolerance);

enum class CanonicalForm { upper_triangular, symmetric, unspecified };

// d x p reduced design with X~^T X~ = X^T X and X = basis * X~.
class CanonicalDesign {
public:
    CanonicalDesign(Eigen::MatrixXd values, Eigen::MatrixXd basis, CanonicalForm form,
                    double rank_tolerance, std::vector<std::string> column_names = {});

    // Wraps a matrix that is already in canonical coordinates (basis = I).
    static CanonicalDesign from_canonical(Eigen::MatrixXd values, CanonicalForm form,
                                          double rank_tolerance = kDefaultRankTolerance);

    const Eigen::MatrixXd& values() const { return values_; }
    const Eigen::MatrixXd& basis() const { return basis_; }
    CanonicalForm form() const { return form_; }
    double rank_tolerance() const { return rank_tolerance_; }
    const std::vector<std::string>& column_names() const { return names_; }

    std::size_t d() const { return static_cast<std::size_t>(values_.rows()); }
    std::size_t p() const { return static_cast<std::size_t>(values_.cols()); }
    std::size_t n() const { return static_cast<std::size_t>(basis_.rows()); }

    // Contiguous column-major copy of values(), column j at data + j*d.
    const double* column(std::size_t j) const { return packed_.data() + j * d(); }
    double column_norm(std::size_t j) const { return column_norms_[j]; }

    // Canonical coordinates basis^T y of an n-vector.
    std::vector<double> reduce(std::span<const double> y) const;

private:
    Eigen::MatrixXd values_;
    Eigen::MatrixXd basis_;
    CanonicalForm form_;
    double rank_tolerance_;
    std::vector<std::string> names_;
    std::vector<double> packed_;
    std::vector<double> column_norms_;
};

// upper_triangular: Householder QR (column pivoting when d < p, undone so the
// columns keep their original order). symmetric: X~ = V S V^T from the SVD,
// requires d = p.
CanonicalDesign canonicalize(const DesignMatrix& x,
                             CanonicalForm form = CanonicalForm::upper_triangular);

const char* to_string(CanonicalForm form);

}  // namespace posi
