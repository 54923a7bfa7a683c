#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ntklab/gram.hpp"
#include "ntklab/network.hpp"

namespace ntklab {

/// How a multi-output network is reduced to the scalar whose gradient enters the kernel.
enum class Scalarization { true_class_logit, sum_logits, mean_logits };

std::string to_string(Scalarization s);

/// Output cotangent c such that c . f(x) is the scalarized output.
std::vector<double> scalarization_weights(Scalarization s, std::size_t label, std::size_t num_outputs);

struct ProbeSample {
  Tensor x;
  std::size_t label = 0;
};

/// Fixed batch of first-task samples on which every kernel of a run is measured.
class ProbeSet {
 public:
  ProbeSet() = default;
  ProbeSet(std::vector<ProbeSample> samples, Scalarization scalarization);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const std::vector<ProbeSample>& samples() const { return samples_; }
  Scalarization scalarization() const { return scalarization_; }
  std::vector<std::size_t> labels() const;

  /// First `n` samples, same scalarization.
  ProbeSet prefix(std::size_t n) const;

  /// FNV-1a digest of shapes, pixel bytes, labels and scalarization.
  std::uint64_t hash() const;

 private:
  std::vector<ProbeSample> samples_;
  Scalarization scalarization_ = Scalarization::true_class_logit;
};

/// n x P matrix whose row i is the gradient of the scalarized output at sample i.
Eigen::MatrixXd probe_gradients(const Architecture& arch, const ParamVector& params, const ProbeSet& probe);

/// Theta[i][j] = g_i . g_j over the probe set.
GramMatrix empirical_ntk(const Architecture& arch, const ParamVector& params, const ProbeSet& probe);

}  // namespace ntklab
