#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "spinn/rng.hpp"
#include "spinn/tape.hpp"

namespace spinn::net {

// Fully connected feed-forward net: input (t,x), tanh hidden layers, linear
// output layer with one or two outputs.
struct Architecture {
  int input_dim = 2;
  int hidden_layers = 1;
  int neurons = 1;
  int output_dim = 1;

  void validate() const;

  // Neuron counts per layer, input first: [2, n, ..., n, output_dim].
  std::vector<int> layer_sizes() const;
  std::size_t weight_count() const;  // without extra trainable scalars

  bool operator==(const Architecture&) const = default;
};

// Flattened parameter vector. Layout, layer by layer: weight matrix rows
// (each row is one neuron's fan-in weights, contiguous), then biases. Named
// extra scalars (inverse-problem unknowns) sit at the tail.
struct MlpParams {
  Architecture arch;
  std::vector<std::string> extra_names;
  Eigen::VectorXd flat;

  std::size_t size() const { return static_cast<std::size_t>(flat.size()); }
  std::size_t extra_offset() const { return arch.weight_count(); }
  double extra(std::size_t i) const { return flat[static_cast<Eigen::Index>(extra_offset() + i)]; }

  // Offsets of layer l's weight block and bias block in the flat vector.
  std::size_t weight_offset(int layer) const;
  std::size_t bias_offset(int layer) const;

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  weights(int layer) const;
  Eigen::Map<const Eigen::VectorXd> biases(int layer) const;
};

// Glorot-normal initialization: weights ~ N(0, 2/(fan_in+fan_out)), biases 0,
// extras 0. Deterministic for a given seed.
MlpParams init_xavier(const Architecture& arch, std::uint64_t seed,
                      std::vector<std::string> extra_names = {});

// Dual forward pass recorded on the tape (params must already be bound to it).
// Returns one node per network output carrying all partials in the seeds' set.
std::vector<ad::NodeId> tape_forward(ad::Tape& tape, const MlpParams& params,
                                     ad::NodeId t, ad::NodeId x);

// Plain forward pass, no derivatives. Accumulation order matches the dual
// pass, so the value channel of tape_forward is bit-identical to this.
void predict(const MlpParams& params, double t, double x, std::span<double> out);

// ---------------------------------------------------------------------------
// Flat kernels used by the loss evaluator. Activations are stored
// neuron-major: a[i * nc + c] where c indexes the coefficient prefix
// [value, d/dt, d/dx, d2/dx2, d3/dx3][:nc].
// ---------------------------------------------------------------------------

// Flat-vector offsets of every layer, computed once and reused per point.
struct Layout {
  std::vector<int> sizes;
  std::vector<std::size_t> w_off, b_off;  // indexed by layer, [1..L-1]

  Layout() = default;
  explicit Layout(const Architecture& arch);
};

// Per-point forward/backward workspace for one network evaluation.
struct KernelWorkspace {
  int nc = 0;
  Layout layout;
  std::vector<std::vector<double>> z;      // pre-activations per layer
  std::vector<std::vector<double>> a;      // activations per layer (a[0] = inputs)
  std::vector<std::vector<double>> z_adj;  // adjoints, same shapes
  std::vector<std::vector<double>> a_adj;

  void resize(const Architecture& arch, int nc);
};

// Forward through all layers; inputs are the seeded (t,x) coefficient rows.
// Leaves activations in ws for a later backward pass. Output coefficients are
// written to out (output_dim rows of nc).
void kernel_forward(const MlpParams& params, double t, double x, int nc,
                    KernelWorkspace& ws, std::span<double> out);

// Backward from output-coefficient adjoints (out_adj, output_dim rows of nc),
// accumulating into grad (size >= weight_count). Call right after
// kernel_forward on the same workspace.
void kernel_backward(const MlpParams& params, KernelWorkspace& ws,
                     std::span<const double> out_adj, std::span<double> grad);

}  // namespace spinn::net
