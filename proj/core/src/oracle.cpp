#include "ntklab/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "ntklab/error.hpp"

namespace ntklab {

std::vector<ResidualState> evolve_residuals(const ResidualState& e0, const GramMatrix& kernel, double eta,
                                            std::size_t steps) {
  if (static_cast<std::size_t>(e0.e.size()) != kernel.size()) {
    throw ConfigError("residual length " + std::to_string(e0.e.size()) + " does not match kernel size " +
                      std::to_string(kernel.size()));
  }
  std::vector<ResidualState> trajectory;
  trajectory.reserve(steps + 1);
  trajectory.push_back(e0);
  for (std::size_t s = 0; s < steps; ++s) {
    const auto& prev = trajectory.back();
    ResidualState next;
    next.e = prev.e - eta * (kernel.matrix() * prev.e);
    next.t = prev.t + 1;
    trajectory.push_back(std::move(next));
  }
  return trajectory;
}

Eigen::VectorXd eigenmode_decay(const ResidualState& e0, const Spectrum& spectrum, double eta, std::size_t t) {
  if (e0.e.size() != spectrum.eigenvalues.size()) throw ConfigError("residual length does not match spectrum");
  Eigen::VectorXd modes = spectrum.eigenvectors.transpose() * e0.e;
  for (Eigen::Index i = 0; i < modes.size(); ++i) {
    modes(i) *= std::pow(1.0 - eta * spectrum.eigenvalues(i), static_cast<double>(t));
  }
  return modes;
}

namespace {

// Straight-line forward/backward for one sample. Activations are kept as plain vectors and
// every layer is evaluated with explicit index arithmetic.
struct NaiveNet {
  const Architecture& arch;
  std::vector<std::vector<double>> weights;  // per layer (empty if parameterless)
  std::vector<std::vector<double>> biases;
  std::vector<std::size_t> weight_offset;
  std::vector<std::size_t> bias_offset;

  NaiveNet(const Architecture& a, const ParamVector& params) : arch(a) {
    const auto layers = arch.layers();
    weights.resize(layers.size());
    biases.resize(layers.size());
    weight_offset.assign(layers.size(), 0);
    bias_offset.assign(layers.size(), 0);
    const auto values = params.values();
    for (const auto& seg : params.segments()) {
      std::vector<double> copy(values.begin() + static_cast<std::ptrdiff_t>(seg.offset),
                               values.begin() + static_cast<std::ptrdiff_t>(seg.offset + seg.size()));
      if (seg.role == ParamRole::weight) {
        weights[seg.layer] = std::move(copy);
        weight_offset[seg.layer] = seg.offset;
      } else {
        biases[seg.layer] = std::move(copy);
        bias_offset[seg.layer] = seg.offset;
      }
    }
  }

  std::vector<std::vector<double>> forward(std::span<const double> x) const {
    const auto layers = arch.layers();
    const auto shapes = arch.shapes();
    std::vector<std::vector<double>> acts;
    acts.emplace_back(x.begin(), x.end());
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const LayerSpec& L = layers[k];
      const std::vector<double>& in = acts.back();
      const Shape& is = shapes[k];
      const Shape& os = shapes[k + 1];
      std::vector<double> out(shape_size(os), 0.0);
      switch (L.kind) {
        case LayerKind::dense:
          for (std::size_t o = 0; o < L.out; ++o) {
            double acc = 0.0;
            for (std::size_t i = 0; i < L.in; ++i) acc += weights[k][o * L.in + i] * in[i];
            out[o] = L.weight_scale * acc + (L.bias ? biases[k][o] : 0.0);
          }
          break;
        case LayerKind::conv2d: {
          const long H = static_cast<long>(is[1]), W = static_cast<long>(is[2]), K = static_cast<long>(L.kernel);
          const long pad = K / 2;
          for (std::size_t o = 0; o < L.out; ++o) {
            for (long y = 0; y < H; ++y) {
              for (long xx = 0; xx < W; ++xx) {
                double acc = 0.0;
                for (std::size_t c = 0; c < L.in; ++c) {
                  for (long ky = 0; ky < K; ++ky) {
                    for (long kx = 0; kx < K; ++kx) {
                      const long sy = y + ky - pad, sx = xx + kx - pad;
                      if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                      acc += weights[k][((o * L.in + c) * K + ky) * K + kx] * in[(c * H + sy) * W + sx];
                    }
                  }
                }
                out[(o * H + y) * W + xx] = L.weight_scale * acc + (L.bias ? biases[k][o] : 0.0);
              }
            }
          }
          break;
        }
        case LayerKind::max_pool2d: {
          const std::size_t H = is[1], W = is[2], OH = os[1], OW = os[2];
          for (std::size_t c = 0; c < is[0]; ++c)
            for (std::size_t oy = 0; oy < OH; ++oy)
              for (std::size_t ox = 0; ox < OW; ++ox) {
                double best = in[(c * H + 2 * oy) * W + 2 * ox];
                for (std::size_t d = 1; d < 4; ++d) best = std::max(best, in[(c * H + 2 * oy + d / 2) * W + 2 * ox + d % 2]);
                out[(c * OH + oy) * OW + ox] = best;
              }
          break;
        }
        case LayerKind::relu:
          for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::max(in[i], 0.0);
          break;
        case LayerKind::square:
          for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * in[i];
          break;
        case LayerKind::flatten:
          out = in;
          break;
      }
      acts.push_back(std::move(out));
    }
    return acts;
  }

  // Writes d(c . f)/d(theta) into `row` (length P).
  void gradient(std::span<const double> x, std::span<const double> c, std::span<double> row) const {
    const auto acts = forward(x);
    const auto layers = arch.layers();
    const auto shapes = arch.shapes();
    std::fill(row.begin(), row.end(), 0.0);
    std::vector<double> g(c.begin(), c.end());
    for (std::size_t k = layers.size(); k-- > 0;) {
      const LayerSpec& L = layers[k];
      const std::vector<double>& in = acts[k];
      const Shape& is = shapes[k];
      const Shape& os = shapes[k + 1];
      std::vector<double> gin(in.size(), 0.0);
      switch (L.kind) {
        case LayerKind::dense:
          for (std::size_t o = 0; o < L.out; ++o) {
            for (std::size_t i = 0; i < L.in; ++i) {
              row[weight_offset[k] + o * L.in + i] += L.weight_scale * g[o] * in[i];
              gin[i] += L.weight_scale * weights[k][o * L.in + i] * g[o];
            }
            if (L.bias) row[bias_offset[k] + o] += g[o];
          }
          break;
        case LayerKind::conv2d: {
          const long H = static_cast<long>(is[1]), W = static_cast<long>(is[2]), K = static_cast<long>(L.kernel);
          const long pad = K / 2;
          for (std::size_t o = 0; o < L.out; ++o) {
            for (long y = 0; y < H; ++y) {
              for (long xx = 0; xx < W; ++xx) {
                const double go = g[(o * H + y) * W + xx];
                if (L.bias) row[bias_offset[k] + o] += go;
                for (std::size_t ci = 0; ci < L.in; ++ci) {
                  for (long ky = 0; ky < K; ++ky) {
                    for (long kx = 0; kx < K; ++kx) {
                      const long sy = y + ky - pad, sx = xx + kx - pad;
                      if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                      const std::size_t widx = ((o * L.in + ci) * K + ky) * K + kx;
                      const std::size_t iidx = (ci * H + sy) * W + sx;
                      row[weight_offset[k] + widx] += L.weight_scale * go * in[iidx];
                      gin[iidx] += L.weight_scale * weights[k][widx] * go;
                    }
                  }
                }
              }
            }
          }
          break;
        }
        case LayerKind::max_pool2d: {
          const std::size_t H = is[1], W = is[2], OH = os[1], OW = os[2];
          for (std::size_t ch = 0; ch < is[0]; ++ch)
            for (std::size_t oy = 0; oy < OH; ++oy)
              for (std::size_t ox = 0; ox < OW; ++ox) {
                std::size_t arg = (ch * H + 2 * oy) * W + 2 * ox;
                for (std::size_t d = 1; d < 4; ++d) {
                  const std::size_t idx = (ch * H + 2 * oy + d / 2) * W + 2 * ox + d % 2;
                  if (in[idx] > in[arg]) arg = idx;
                }
                gin[arg] += g[(ch * OH + oy) * OW + ox];
              }
          break;
        }
        case LayerKind::relu:
          for (std::size_t i = 0; i < in.size(); ++i) gin[i] = in[i] > 0.0 ? g[i] : 0.0;
          break;
        case LayerKind::square:
          for (std::size_t i = 0; i < in.size(); ++i) gin[i] = 2.0 * in[i] * g[i];
          break;
        case LayerKind::flatten:
          gin = g;
          break;
      }
      g = std::move(gin);
    }
  }
};

}  // namespace

Eigen::MatrixXd brute_force_jacobian(const Architecture& arch, const ParamVector& params, const ProbeSet& probe) {
  if (probe.empty()) throw ConfigError("probe set is empty");
  const std::size_t n = probe.size();
  const std::size_t p = params.dim();
  if (n * p > kBruteForceMaxEntries) {
    throw UsageError("brute-force NTK refuses to materialize " + std::to_string(n) + " x " + std::to_string(p) +
                     " gradient entries (limit " + std::to_string(kBruteForceMaxEntries) + ")");
  }
  if (p != arch.param_count()) throw ConfigError("parameter vector does not match the architecture");
  const NaiveNet net(arch, params);
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  std::vector<double> row(p);
  for (std::size_t i = 0; i < n; ++i) {
    const ProbeSample& s = probe.samples()[i];
    if (s.x.shape() != arch.input_shape()) throw ConfigError("probe sample shape does not match the model input");
    const auto c = scalarization_weights(probe.scalarization(), s.label, arch.num_outputs());
    net.gradient(s.x.data(), c, row);
    for (std::size_t j = 0; j < p; ++j) {
      if (!std::isfinite(row[j])) throw NumericalError("non-finite gradient for probe sample " + std::to_string(i));
      jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  }
  return jac;
}

GramMatrix brute_force_ntk(const Architecture& arch, const ParamVector& params, const ProbeSet& probe) {
  const Eigen::MatrixXd jac = brute_force_jacobian(arch, params, probe);
  const Eigen::Index n = jac.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      long double acc = 0.0L;
      for (Eigen::Index q = 0; q < jac.cols(); ++q) acc += static_cast<long double>(jac(i, q)) * jac(j, q);
      k(i, j) = k(j, i) = static_cast<double>(acc);
    }
  }
  return GramMatrix(std::move(k));
}

double max_relative_deviation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ConfigError("matrices differ in shape");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double diff = std::abs(a(i, j) - b(i, j));
      if (diff == 0.0) continue;
      worst = std::max(worst, diff / std::abs(b(i, j)));
    }
  }
  return worst;
}

LazyCheckReport lazy_training_check(const Architecture& arch, const ParamVector& params, const ProbeSet& probe,
                                    std::span<const double> targets, double eta, std::size_t steps) {
  if (targets.size() != probe.size()) throw ConfigError("one target per probe sample is required");
  if (!(eta >= 0.0)) throw ConfigError("eta must be non-negative");
  const auto n = static_cast<Eigen::Index>(probe.size());
  const double step = eta / static_cast<double>(n);
  const Eigen::Map<const Eigen::VectorXd> y(targets.data(), n);

  ParamVector theta = params;
  auto residuals_and_jacobian = [&](Eigen::MatrixXd& jac) {
    Eigen::VectorXd e(n);
    jac = brute_force_jacobian(arch, theta, probe);
    const NaiveNet net(arch, theta);
    for (Eigen::Index i = 0; i < n; ++i) {
      const ProbeSample& s = probe.samples()[static_cast<std::size_t>(i)];
      const auto out = net.forward(s.x.data()).back();
      const auto c = scalarization_weights(probe.scalarization(), s.label, arch.num_outputs());
      double f = 0.0;
      for (std::size_t o = 0; o < out.size(); ++o) f += c[o] * out[o];
      e(i) = f - y(i);
    }
    return e;
  };

  Eigen::MatrixXd jac;
  LazyCheckReport report;
  report.actual.push_back({residuals_and_jacobian(jac), 0});
  const GramMatrix k0(jac * jac.transpose());
  report.predicted = evolve_residuals(report.actual.front(), k0.scaled(step), 1.0, steps);

  for (std::size_t t = 1; t <= steps; ++t) {
    // theta <- theta - (eta / n) * J^T e
    const Eigen::VectorXd update = jac.transpose() * report.actual.back().e;
    auto values = theta.mutable_values();
    for (std::size_t q = 0; q < values.size(); ++q) values[q] -= step * update(static_cast<Eigen::Index>(q));
    report.actual.push_back({residuals_and_jacobian(jac), t});
  }

  const double scale = report.actual.front().e.lpNorm<Eigen::Infinity>();
  for (std::size_t t = 0; t <= steps; ++t) {
    const double diff = (report.actual[t].e - report.predicted[t].e).lpNorm<Eigen::Infinity>();
    report.deviation.push_back(scale > 0.0 ? diff / scale : diff);
  }
  report.max_deviation = *std::max_element(report.deviation.begin(), report.deviation.end());
  report.final_deviation = report.deviation.back();
  return report;
}

}  // namespace ntklab
