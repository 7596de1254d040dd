#pragma once

#include <cstdint>
#include <vector>

#include "qmvit/pqc.hpp"
#include "qmvit/tape.hpp"
#include "qmvit/tensor.hpp"

namespace qmvit {

// Sliding k x k window over one image plane; each window is encoded into
// k*k qubits, run through the circuit, and read out into k*k channels.
struct QuanvSpec {
  int k = 2;
  int stride = 2;
  AnsatzSpec circuit;  // circuit.n_qubits == k*k
  ParamVector theta;
  bool trainable = false;  // fixed-random filters unless opted in
};

// k=2, s=2, depth-1 circuit with seeded parameters.
QuanvSpec make_quanv_spec(int k, int stride, int n_layers, std::uint64_t seed);

// (H, W, C) -> (H, W) by averaging channels; rank-2 input passes through.
Tensor channel_mean_plane(const Tensor& image);

// Row-major patch list, one flattened k*k row per window position; count is
// (floor((H-k)/s)+1) * (floor((W-k)/s)+1). Multi-channel input is mean-reduced.
Tensor extract_patches(const Tensor& image, int k, int stride);

// Linear pixel-to-angle map; [0, 1] lands in [0, pi] so the encoding stays
// injective over the pixel range.
inline double pixel_to_angle(double v) { return v * 3.14159265358979323846; }

// (H, W[, C]) -> (H', W', k*k) feature maps; channel j at a cell is <Z_j>
// after encoding that window's angles and running the circuit.
Tensor quanv_layer(const Tensor& image, const QuanvSpec& spec);

struct QnnHead {
  Tensor w;  // (channels, n_classes)
  Tensor b;  // (n_classes)
};

// Per image: quanv features -> global average pool -> linear head.
Tensor qnn_baseline_forward(const std::vector<Tensor>& batch, const QuanvSpec& spec,
                            const QnnHead& head);

// Tape op over one plane node (H, W). Pullbacks reach theta via the shift
// rule and the plane (chain through the pixel-to-angle scale) when needed.
Tape::NodeId quanv_layer_op(Tape& t, Tape::NodeId plane, Tape::NodeId theta,
                            const QuanvSpec& spec);

}  // namespace qmvit
