#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>

namespace ntklab {

/// Symmetric n x n kernel matrix. The input is symmetrized, (A + A^T) / 2, on construction.
class GramMatrix {
 public:
  GramMatrix() = default;
  explicit GramMatrix(Eigen::MatrixXd entries);

  static GramMatrix identity(std::size_t n);
  static GramMatrix constant(std::size_t n, double value);

  std::size_t size() const { return static_cast<std::size_t>(entries_.rows()); }
  const Eigen::MatrixXd& matrix() const { return entries_; }
  double operator()(std::size_t i, std::size_t j) const {
    return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  double frobenius_norm() const { return entries_.norm(); }

  GramMatrix scaled(double factor) const { return GramMatrix(entries_ * factor); }

 private:
  Eigen::MatrixXd entries_;
};

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
struct Spectrum {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
};

/// Full symmetric eigendecomposition with PSD repair: eigenvalues in (-1e-8 * lambda_max, 0)
/// are clamped to zero, anything more negative raises NumericalError.
Spectrum eigendecompose(const GramMatrix& k);

/// Largest eigenvalue, i.e. the spectral norm of a PSD kernel.
double max_eigenvalue(const GramMatrix& k);

/// Normalized Frobenius alignment <A, B>_F / (|A|_F |B|_F). With `centered`, both matrices
/// are first double-centered by H = I - 11^T / n. Throws UndefinedSimilarityError when either
/// (centered) matrix has zero norm.
double cka(const GramMatrix& a, const GramMatrix& b, bool centered = false);

/// 1 - cka(a, b).
double kernel_distance(const GramMatrix& a, const GramMatrix& b, bool centered = false);

/// kernel_distance(k_t, k_{t+dt}) / dt, with dt counted in probe steps.
double kernel_velocity(const GramMatrix& k_t, const GramMatrix& k_later, std::size_t dt, bool centered = false);

/// n x C one-hot label matrix Y.
Eigen::MatrixXd one_hot_labels(std::span<const std::size_t> labels, std::size_t num_classes);
/// n x 1 matrix holding signed scalar labels, for binary tasks.
Eigen::MatrixXd signed_labels(std::span<const double> labels);

/// cka(k, Y Y^T).
double kernel_alignment(const GramMatrix& k, const Eigen::MatrixXd& labels, bool centered = false);

}  // namespace ntklab
