#include "ntklab/probe.hpp"

#include <cstring>

#include "ntklab/error.hpp"
#include "ntklab/hash.hpp"

namespace ntklab {

std::string to_string(Scalarization s) {
  switch (s) {
    case Scalarization::true_class_logit: return "true_class_logit";
    case Scalarization::sum_logits: return "sum_logits";
    case Scalarization::mean_logits: return "mean_logits";
  }
  return "unknown";
}

std::vector<double> scalarization_weights(Scalarization s, std::size_t label, std::size_t num_outputs) {
  std::vector<double> w(num_outputs, 0.0);
  switch (s) {
    case Scalarization::true_class_logit:
      if (label >= num_outputs) {
        throw DataError("probe label " + std::to_string(label) + " out of range for " +
                        std::to_string(num_outputs) + " outputs");
      }
      w[label] = 1.0;
      break;
    case Scalarization::sum_logits:
      std::fill(w.begin(), w.end(), 1.0);
      break;
    case Scalarization::mean_logits:
      std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(num_outputs));
      break;
  }
  return w;
}

ProbeSet::ProbeSet(std::vector<ProbeSample> samples, Scalarization scalarization)
    : samples_(std::move(samples)), scalarization_(scalarization) {}

std::vector<std::size_t> ProbeSet::labels() const {
  std::vector<std::size_t> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.label);
  return out;
}

ProbeSet ProbeSet::prefix(std::size_t n) const {
  if (n > samples_.size()) {
    throw ConfigError("probe prefix of " + std::to_string(n) + " exceeds probe size " + std::to_string(size()));
  }
  return ProbeSet(std::vector<ProbeSample>(samples_.begin(), samples_.begin() + static_cast<std::ptrdiff_t>(n)),
                  scalarization_);
}

std::uint64_t ProbeSet::hash() const {
  Fnv1a h;
  h.add_string(to_string(scalarization_));
  h.add_u64(samples_.size());
  for (const auto& s : samples_) {
    for (std::size_t d : s.x.shape()) h.add_u64(d);
    h.add_doubles(s.x.data());
    h.add_u64(s.label);
  }
  return h.value();
}

Eigen::MatrixXd probe_gradients(const Architecture& arch, const ParamVector& params, const ProbeSet& probe) {
  if (probe.empty()) throw ConfigError("probe set is empty");
  const auto n = static_cast<Eigen::Index>(probe.size());
  const auto p = static_cast<Eigen::Index>(params.dim());
  Eigen::MatrixXd jac(n, p);
  ParamVector grad = arch.zero_params();
  for (Eigen::Index i = 0; i < n; ++i) {
    const ProbeSample& sample = probe.samples()[static_cast<std::size_t>(i)];
    const auto fwd = forward(arch, params, sample.x);
    const auto weights = scalarization_weights(probe.scalarization(), sample.label, arch.num_outputs());
    grad.fill(0.0);
    accumulate_vjp(fwd.tape, weights, 1.0, grad);
    if (!grad.all_finite()) throw NumericalError("non-finite gradient for probe sample " + std::to_string(i));
    jac.row(i) = Eigen::Map<const Eigen::RowVectorXd>(grad.values().data(), p);
  }
  return jac;
}

GramMatrix empirical_ntk(const Architecture& arch, const ParamVector& params, const ProbeSet& probe) {
  const Eigen::MatrixXd jac = probe_gradients(arch, params, probe);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(jac.rows(), jac.rows());
  k.selfadjointView<Eigen::Lower>().rankUpdate(jac);
  return GramMatrix(k.selfadjointView<Eigen::Lower>());
}

}  // namespace ntklab
