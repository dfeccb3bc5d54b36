#include "spinn/network.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace spinn::net {

void Architecture::validate() const {
  if (input_dim != 2) throw std::invalid_argument("Architecture: input_dim must be 2 (t,x)");
  if (hidden_layers < 1) throw std::invalid_argument("Architecture: hidden_layers must be >= 1");
  if (neurons < 1) throw std::invalid_argument("Architecture: neurons must be >= 1");
  if (output_dim != 1 && output_dim != 2)
    throw std::invalid_argument("Architecture: output_dim must be 1 or 2");
}

std::vector<int> Architecture::layer_sizes() const {
  std::vector<int> sizes;
  sizes.push_back(input_dim);
  for (int i = 0; i < hidden_layers; ++i) sizes.push_back(neurons);
  sizes.push_back(output_dim);
  return sizes;
}

std::size_t Architecture::weight_count() const {
  const auto sizes = layer_sizes();
  std::size_t n = 0;
  for (std::size_t l = 1; l < sizes.size(); ++l)
    n += std::size_t(sizes[l]) * std::size_t(sizes[l - 1]) + std::size_t(sizes[l]);
  return n;
}

std::size_t MlpParams::weight_offset(int layer) const {
  const auto sizes = arch.layer_sizes();
  std::size_t off = 0;
  for (int l = 1; l < layer; ++l)
    off += std::size_t(sizes[l]) * std::size_t(sizes[l - 1]) + std::size_t(sizes[l]);
  return off;
}

std::size_t MlpParams::bias_offset(int layer) const {
  const auto sizes = arch.layer_sizes();
  return weight_offset(layer) + std::size_t(sizes[layer]) * std::size_t(sizes[layer - 1]);
}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
MlpParams::weights(int layer) const {
  const auto sizes = arch.layer_sizes();
  return {flat.data() + weight_offset(layer), sizes[layer], sizes[layer - 1]};
}

Eigen::Map<const Eigen::VectorXd> MlpParams::biases(int layer) const {
  const auto sizes = arch.layer_sizes();
  return {flat.data() + bias_offset(layer), sizes[layer]};
}

MlpParams init_xavier(const Architecture& arch, std::uint64_t seed,
                      std::vector<std::string> extra_names) {
  arch.validate();
  MlpParams p;
  p.arch = arch;
  p.extra_names = std::move(extra_names);
  p.flat = Eigen::VectorXd::Zero(
      static_cast<Eigen::Index>(arch.weight_count() + p.extra_names.size()));

  Rng rng(seed);
  const auto sizes = arch.layer_sizes();
  std::size_t off = 0;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    const int fan_in = sizes[l - 1], fan_out = sizes[l];
    const double stddev = std::sqrt(2.0 / double(fan_in + fan_out));
    for (int i = 0; i < fan_out * fan_in; ++i) p.flat[Eigen::Index(off++)] = stddev * rng.normal();
    off += std::size_t(fan_out);  // biases stay zero
  }
  return p;
}

std::vector<ad::NodeId> tape_forward(ad::Tape& tape, const MlpParams& params,
                                     ad::NodeId t, ad::NodeId x) {
  const auto sizes = params.arch.layer_sizes();
  std::vector<ad::NodeId> prev = {t, x};
  std::vector<ad::NodeId> cur;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    const bool hidden = l + 1 < sizes.size();
    const std::size_t w_off = params.weight_offset(int(l));
    const std::size_t b_off = params.bias_offset(int(l));
    const std::size_t fan_in = prev.size();
    cur.clear();
    for (int i = 0; i < sizes[l]; ++i) {
      ad::NodeId z = tape.affine(prev, w_off + std::size_t(i) * fan_in, b_off + std::size_t(i));
      cur.push_back(hidden ? tape.tanh(z) : z);
    }
    prev = cur;
  }
  return prev;
}

void predict(const MlpParams& params, double t, double x, std::span<double> out) {
  const auto sizes = params.arch.layer_sizes();
  thread_local std::vector<double> buf_a, buf_b;
  buf_a.assign({t, x});
  const double* w = params.flat.data();
  std::size_t next_off = 0;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    const bool hidden = l + 1 < sizes.size();
    const std::size_t fan_in = buf_a.size();
    const std::size_t w_off = next_off;
    const std::size_t b_off = w_off + std::size_t(sizes[l]) * fan_in;
    next_off = b_off + std::size_t(sizes[l]);
    buf_b.resize(std::size_t(sizes[l]));
    for (int i = 0; i < sizes[l]; ++i) {
      double acc = w[b_off + std::size_t(i)];
      const double* row = w + w_off + std::size_t(i) * fan_in;
      for (std::size_t j = 0; j < fan_in; ++j) acc += row[j] * buf_a[j];
      buf_b[std::size_t(i)] = hidden ? std::tanh(acc) : acc;
    }
    std::swap(buf_a, buf_b);
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf_a[i];
}

Layout::Layout(const Architecture& arch) : sizes(arch.layer_sizes()) {
  w_off.assign(sizes.size(), 0);
  b_off.assign(sizes.size(), 0);
  std::size_t off = 0;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    w_off[l] = off;
    b_off[l] = off + std::size_t(sizes[l]) * std::size_t(sizes[l - 1]);
    off = b_off[l] + std::size_t(sizes[l]);
  }
}

void KernelWorkspace::resize(const Architecture& arch, int nc_) {
  nc = nc_;
  layout = Layout(arch);
  const auto& sizes = layout.sizes;
  const std::size_t L = sizes.size();
  z.resize(L);
  a.resize(L);
  z_adj.resize(L);
  a_adj.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    z[l].assign(std::size_t(sizes[l]) * std::size_t(nc), 0.0);
    a[l].assign(std::size_t(sizes[l]) * std::size_t(nc), 0.0);
    z_adj[l].assign(std::size_t(sizes[l]) * std::size_t(nc), 0.0);
    a_adj[l].assign(std::size_t(sizes[l]) * std::size_t(nc), 0.0);
  }
}

namespace {

// z_i = b_i + sum_j W_ij a_j, per coefficient.
template <int NC>
void affine_fwd(int nout, int nin, const double* W, const double* b, const double* a,
                double* z) {
  for (int i = 0; i < nout; ++i) {
    double acc[NC];
    acc[0] = b[i];
    for (int c = 1; c < NC; ++c) acc[c] = 0.0;
    const double* row = W + std::size_t(i) * std::size_t(nin);
    for (int j = 0; j < nin; ++j) {
      const double w = row[j];
      const double* aj = a + std::size_t(j) * NC;
      for (int c = 0; c < NC; ++c) acc[c] += w * aj[c];
    }
    double* zi = z + std::size_t(i) * NC;
    for (int c = 0; c < NC; ++c) zi[c] = acc[c];
  }
}

// Coefficient prefix [v, t, x, xx, xxx]: composition through sigma using the
// derivative ladder at z's value channel.
template <int NC>
void tanh_fwd(int n, const double* z, double* a) {
  for (int i = 0; i < n; ++i) {
    const double* zi = z + std::size_t(i) * NC;
    double* ai = a + std::size_t(i) * NC;
    const double s = std::tanh(zi[0]);
    ai[0] = s;
    if constexpr (NC > 1) {
      const double d1 = 1.0 - s * s;
      ai[1] = d1 * zi[1];
      if constexpr (NC > 2) {
        ai[2] = d1 * zi[2];
        if constexpr (NC > 3) {
          const double d2 = -2.0 * s * d1;
          ai[3] = d1 * zi[3] + d2 * zi[2] * zi[2];
          if constexpr (NC > 4) {
            const double d3 = -2.0 * d1 * (1.0 - 3.0 * s * s);
            ai[4] = d1 * zi[4] + 3.0 * d2 * zi[2] * zi[3] + d3 * zi[2] * zi[2] * zi[2];
          }
        }
      }
    }
  }
}

// Jacobian-transpose of tanh_fwd. a holds tanh(z) from the forward pass.
template <int NC>
void tanh_bwd(int n, const double* z, const double* a, const double* a_adj, double* z_adj) {
  for (int i = 0; i < n; ++i) {
    const double* zi = z + std::size_t(i) * NC;
    const double* ab = a_adj + std::size_t(i) * NC;
    double* zb = z_adj + std::size_t(i) * NC;
    const double s = a[std::size_t(i) * NC];
    const double d1 = 1.0 - s * s;
    double acc0 = ab[0] * d1;
    if constexpr (NC > 1) {
      const double d2 = -2.0 * s * d1;
      acc0 += ab[1] * d2 * zi[1];
      zb[1] = ab[1] * d1;
      if constexpr (NC > 2) {
        const double d3 = -2.0 * d1 * (1.0 - 3.0 * s * s);
        acc0 += ab[2] * d2 * zi[2];
        zb[2] = ab[2] * d1;
        if constexpr (NC > 3) {
          const double d4 = 8.0 * s * d1 * (2.0 - 3.0 * s * s);
          acc0 += ab[3] * (d2 * zi[3] + d3 * zi[2] * zi[2]);
          zb[3] = ab[3] * d1;
          zb[2] += ab[3] * 2.0 * d2 * zi[2];
          if constexpr (NC > 4) {
            acc0 += ab[4] * (d2 * zi[4] + 3.0 * d3 * zi[2] * zi[3] +
                             d4 * zi[2] * zi[2] * zi[2]);
            zb[4] = ab[4] * d1;
            zb[3] += ab[4] * 3.0 * d2 * zi[2];
            zb[2] += ab[4] * (3.0 * d2 * zi[3] + 3.0 * d3 * zi[2] * zi[2]);
          }
        }
      }
    }
    zb[0] = acc0;
  }
}

template <int NC>
void affine_bwd(int nout, int nin, const double* W, const double* a, const double* z_adj,
                double* a_adj, double* gW, double* gb) {
  for (int j = 0; j < nin * NC; ++j) a_adj[j] = 0.0;
  for (int i = 0; i < nout; ++i) {
    const double* zb = z_adj + std::size_t(i) * NC;
    const double* row = W + std::size_t(i) * std::size_t(nin);
    double* grow = gW + std::size_t(i) * std::size_t(nin);
    for (int j = 0; j < nin; ++j) {
      const double* aj = a + std::size_t(j) * NC;
      double* ab = a_adj + std::size_t(j) * NC;
      const double w = row[j];
      double gw = 0.0;
      for (int c = 0; c < NC; ++c) {
        gw += zb[c] * aj[c];
        ab[c] += w * zb[c];
      }
      grow[j] += gw;
    }
    gb[i] += zb[0];
  }
}

template <int NC>
void forward_impl(const MlpParams& params, double t, double x, KernelWorkspace& ws,
                  std::span<double> out) {
  const auto& sizes = ws.layout.sizes;
  const std::size_t L = sizes.size();
  double* a0 = ws.a[0].data();
  std::memset(a0, 0, sizeof(double) * 2 * NC);
  a0[0] = t;
  a0[NC] = x;
  if constexpr (NC > 1) a0[1] = 1.0;       // dt/dt
  if constexpr (NC > 2) a0[NC + 2] = 1.0;  // dx/dx
  const double* w = params.flat.data();
  for (std::size_t l = 1; l < L; ++l) {
    affine_fwd<NC>(sizes[l], sizes[l - 1], w + ws.layout.w_off[l],
                   w + ws.layout.b_off[l], ws.a[l - 1].data(), ws.z[l].data());
    if (l + 1 < L)
      tanh_fwd<NC>(sizes[l], ws.z[l].data(), ws.a[l].data());
    else
      std::memcpy(ws.a[l].data(), ws.z[l].data(), sizeof(double) * std::size_t(sizes[l]) * NC);
  }
  const double* y = ws.a[L - 1].data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = y[i];
}

template <int NC>
void backward_impl(const MlpParams& params, KernelWorkspace& ws,
                   std::span<const double> out_adj, std::span<double> grad) {
  const auto& sizes = ws.layout.sizes;
  const std::size_t L = sizes.size();
  std::memcpy(ws.z_adj[L - 1].data(), out_adj.data(), sizeof(double) * out_adj.size());
  const double* w = params.flat.data();
  for (std::size_t l = L - 1; l >= 1; --l) {
    affine_bwd<NC>(sizes[l], sizes[l - 1], w + ws.layout.w_off[l],
                   ws.a[l - 1].data(), ws.z_adj[l].data(), ws.a_adj[l - 1].data(),
                   grad.data() + ws.layout.w_off[l], grad.data() + ws.layout.b_off[l]);
    if (l > 1)
      tanh_bwd<NC>(sizes[l - 1], ws.z[l - 1].data(), ws.a[l - 1].data(),
                   ws.a_adj[l - 1].data(), ws.z_adj[l - 1].data());
  }
}

}  // namespace

void kernel_forward(const MlpParams& params, double t, double x, int nc,
                    KernelWorkspace& ws, std::span<double> out) {
  if (ws.nc != nc || ws.layout.sizes.empty()) ws.resize(params.arch, nc);
  switch (nc) {
    case 1: forward_impl<1>(params, t, x, ws, out); break;
    case 2: forward_impl<2>(params, t, x, ws, out); break;
    case 3: forward_impl<3>(params, t, x, ws, out); break;
    case 4: forward_impl<4>(params, t, x, ws, out); break;
    case 5: forward_impl<5>(params, t, x, ws, out); break;
    default: throw std::invalid_argument("kernel_forward: unsupported coefficient count");
  }
}

void kernel_backward(const MlpParams& params, KernelWorkspace& ws,
                     std::span<const double> out_adj, std::span<double> grad) {
  switch (ws.nc) {
    case 1: backward_impl<1>(params, ws, out_adj, grad); break;
    case 2: backward_impl<2>(params, ws, out_adj, grad); break;
    case 3: backward_impl<3>(params, ws, out_adj, grad); break;
    case 4: backward_impl<4>(params, ws, out_adj, grad); break;
    case 5: backward_impl<5>(params, ws, out_adj, grad); break;
    default: throw std::invalid_argument("kernel_backward: unsupported coefficient count");
  }
}

}  // namespace spinn::net
