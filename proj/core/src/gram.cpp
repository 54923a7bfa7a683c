#include "ntklab/gram.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

#include "ntklab/error.hpp"

namespace ntklab {

namespace {

constexpr double kNegativeEigenTolerance = 1e-8;

Eigen::MatrixXd double_center(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd col_mean = m.colwise().mean().transpose();
  const Eigen::VectorXd row_mean = m.rowwise().mean();
  const double mean = m.mean();
  Eigen::MatrixXd c = m;
  c.colwise() -= row_mean;
  c.rowwise() -= col_mean.transpose();
  c.array() += mean;
  return c;
}

}  // namespace

GramMatrix::GramMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols()) {
    throw ConfigError("Gram matrix must be square, got " + std::to_string(entries_.rows()) + "x" +
                      std::to_string(entries_.cols()));
  }
  if (!entries_.allFinite()) throw NumericalError("Gram matrix has non-finite entries");
  Eigen::MatrixXd sym = 0.5 * (entries_ + entries_.transpose());
  entries_ = std::move(sym);
}

GramMatrix GramMatrix::identity(std::size_t n) {
  return GramMatrix(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
}

GramMatrix GramMatrix::constant(std::size_t n, double value) {
  return GramMatrix(Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), value));
}

Spectrum eigendecompose(const GramMatrix& k) {
  if (k.size() == 0) throw ConfigError("cannot decompose an empty Gram matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(k.matrix());
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver did not converge");

  // Eigen returns ascending order.
  const Eigen::Index n = k.matrix().rows();
  Spectrum spec;
  spec.eigenvalues = solver.eigenvalues().reverse();
  spec.eigenvectors = solver.eigenvectors().rowwise().reverse();

  const double top = std::max(spec.eigenvalues(0), 0.0);
  const double floor = -kNegativeEigenTolerance * top;
  for (Eigen::Index i = 0; i < n; ++i) {
    double& lambda = spec.eigenvalues(i);
    if (lambda >= 0.0) continue;
    if (lambda < floor) {
      throw NumericalError("kernel is not positive semidefinite: eigenvalue " + std::to_string(lambda) +
                           " below tolerance " + std::to_string(floor));
    }
    lambda = 0.0;
  }
  return spec;
}

double max_eigenvalue(const GramMatrix& k) { return eigendecompose(k).eigenvalues(0); }

double cka(const GramMatrix& a, const GramMatrix& b, bool centered) {
  if (a.size() != b.size()) {
    throw ConfigError("cka of kernels with different sizes " + std::to_string(a.size()) + " and " +
                      std::to_string(b.size()));
  }
  if (a.size() == 0) throw UndefinedSimilarityError("cka of empty kernels");
  const Eigen::MatrixXd ma = centered ? double_center(a.matrix()) : a.matrix();
  const Eigen::MatrixXd mb = centered ? double_center(b.matrix()) : b.matrix();
  const double na = ma.norm();
  const double nb = mb.norm();
  if (na == 0.0 || nb == 0.0) throw UndefinedSimilarityError("cka undefined for a zero-norm kernel");
  const double value = (ma.array() * mb.array()).sum() / (na * nb);
  return std::clamp(value, -1.0, 1.0);
}

double kernel_distance(const GramMatrix& a, const GramMatrix& b, bool centered) {
  return 1.0 - cka(a, b, centered);
}

double kernel_velocity(const GramMatrix& k_t, const GramMatrix& k_later, std::size_t dt, bool centered) {
  if (dt == 0) throw ConfigError("velocity step dt must be at least 1");
  return kernel_distance(k_t, k_later, centered) / static_cast<double>(dt);
}

Eigen::MatrixXd one_hot_labels(std::span<const std::size_t> labels, std::size_t num_classes) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()),
                                            static_cast<Eigen::Index>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw DataError("label " + std::to_string(labels[i]) + " out of range for " + std::to_string(num_classes) +
                      " classes");
    }
    y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) = 1.0;
  }
  return y;
}

Eigen::MatrixXd signed_labels(std::span<const double> labels) {
  Eigen::MatrixXd y(static_cast<Eigen::Index>(labels.size()), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i), 0) = labels[i];
  return y;
}

double kernel_alignment(const GramMatrix& k, const Eigen::MatrixXd& labels, bool centered) {
  if (labels.rows() == 0) throw ConfigError("alignment needs a non-empty probe set");
  if (static_cast<std::size_t>(labels.rows()) != k.size()) {
    throw ConfigError("label matrix has " + std::to_string(labels.rows()) + " rows, kernel is " +
                      std::to_string(k.size()) + "x" + std::to_string(k.size()));
  }
  return cka(k, GramMatrix(labels * labels.transpose()), centered);
}

}  // namespace ntklab
