#include "qmvit/quanvolution.hpp"

#include <stdexcept>
#include <string>

#include "qmvit/encoding.hpp"
#include "qmvit/nn.hpp"

namespace qmvit {

namespace {

void check_spec(const QuanvSpec& spec) {
  if (spec.k < 1 || spec.stride < 1) {
    throw std::invalid_argument("quanv: window and stride must be >= 1");
  }
  if (spec.k * spec.k > kMaxQubits) {
    throw std::invalid_argument("quanv: window needs " + std::to_string(spec.k * spec.k) +
                                " qubits, capacity is " + std::to_string(kMaxQubits));
  }
  if (spec.circuit.n_qubits != spec.k * spec.k) {
    throw std::invalid_argument("quanv: circuit qubit count must equal k*k");
  }
  if (static_cast<int>(spec.theta.size()) != param_count(spec.circuit)) {
    throw std::invalid_argument("quanv: parameter vector size mismatch");
  }
}

}  // namespace

QuanvSpec make_quanv_spec(int k, int stride, int n_layers, std::uint64_t seed) {
  QuanvSpec spec;
  spec.k = k;
  spec.stride = stride;
  spec.circuit.n_qubits = k * k;
  spec.circuit.n_layers = n_layers;
  spec.theta = init_params(spec.circuit, seed);
  return spec;
}

Tensor channel_mean_plane(const Tensor& image) {
  if (image.rank() == 2) return image;
  if (image.rank() != 3) {
    throw std::invalid_argument("channel_mean_plane: expected (H, W) or (H, W, C)");
  }
  const int h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor plane({h, w});
  const double inv = 1.0 / static_cast<double>(c);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double s = 0.0;
      for (int ch = 0; ch < c; ++ch) s += image.at(i, j, ch);
      plane.at(i, j) = s * inv;
    }
  }
  return plane;
}

Tensor extract_patches(const Tensor& image, int k, int stride) {
  if (k < 1 || stride < 1) {
    throw std::invalid_argument("extract_patches: window and stride must be >= 1");
  }
  const Tensor plane = channel_mean_plane(image);
  const int h = plane.dim(0), w = plane.dim(1);
  if (h < k || w < k) {
    throw std::invalid_argument("extract_patches: window exceeds image extent");
  }
  const int oh = (h - k) / stride + 1;
  const int ow = (w - k) / stride + 1;
  Tensor patches({oh * ow, k * k});
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          patches.at(r * ow + c, i * k + j) = plane.at(r * stride + i, c * stride + j);
        }
      }
    }
  }
  return patches;
}

Tensor quanv_layer(const Tensor& image, const QuanvSpec& spec) {
  check_spec(spec);
  const Tensor plane = channel_mean_plane(image);
  const int h = plane.dim(0), w = plane.dim(1);
  if (h < spec.k || w < spec.k) {
    throw std::invalid_argument("quanv_layer: window exceeds image extent");
  }
  const int oh = (h - spec.k) / spec.stride + 1;
  const int ow = (w - spec.k) / spec.stride + 1;
  const int n = spec.k * spec.k;
  const AngleEncodingSpec enc = quanv_encoding_spec(n);
  const ObservableSpec obs = ObservableSpec::all(n);
  const Tensor patches = extract_patches(plane, spec.k, spec.stride);
  Tensor out({oh, ow, n});
  for (int cell = 0; cell < oh * ow; ++cell) {
    std::vector<double> angles(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) angles[static_cast<std::size_t>(j)] = pixel_to_angle(patches.at(cell, j));
    const std::vector<double> e = encoded_expectations(angles, enc, spec.circuit, spec.theta, obs);
    for (int j = 0; j < n; ++j) out.data[static_cast<std::size_t>(cell * n + j)] = e[static_cast<std::size_t>(j)];
  }
  return out;
}

Tensor qnn_baseline_forward(const std::vector<Tensor>& batch, const QuanvSpec& spec,
                            const QnnHead& head) {
  check_spec(spec);
  const int channels = spec.k * spec.k;
  if (head.w.rank() != 2 || head.w.dim(0) != channels || head.b.numel() != head.w.dim(1)) {
    throw std::invalid_argument("qnn_baseline_forward: head shape mismatch");
  }
  const int n_classes = head.w.dim(1);
  Tensor logits({static_cast<int>(batch.size()), n_classes});
  for (int b = 0; b < static_cast<int>(batch.size()); ++b) {
    const Tensor features = quanv_layer(batch[static_cast<std::size_t>(b)], spec);
    PoolSpec gap;
    gap.kind = PoolKind::GlobalAverage;
    const Tensor pooled = pool(features, gap);  // (channels)
    for (int c = 0; c < n_classes; ++c) {
      double acc = head.b[c];
      for (int j = 0; j < channels; ++j) acc += pooled[j] * head.w.at(j, c);
      logits.at(b, c) = acc;
    }
  }
  return logits;
}

Tape::NodeId quanv_layer_op(Tape& t, Tape::NodeId plane, Tape::NodeId theta,
                            const QuanvSpec& spec) {
  check_spec(spec);
  const Tensor& pv = t.value(plane);
  if (pv.rank() != 2) {
    throw std::invalid_argument("quanv_layer_op: expected a (H, W) plane node");
  }
  const Tensor& tv = t.value(theta);
  if (tv.numel() != param_count(spec.circuit)) {
    throw std::invalid_argument("quanv_layer_op: parameter vector size mismatch");
  }
  QuanvSpec run = spec;
  run.theta = tv.data;
  Tensor out = quanv_layer(pv, run);
  const int k = spec.k, stride = spec.stride, n = spec.k * spec.k;
  return t.custom(
      {plane, theta}, std::move(out),
      [k, stride, n, circuit = spec.circuit](Tape& tp, const Tensor& up,
                                             const std::vector<Tape::NodeId>& p) {
        const Tensor& pv = tp.value(p[0]);
        const Tensor& tv = tp.value(p[1]);
        const bool want_plane = tp.needs_grad(p[0]);
        const bool want_theta = tp.needs_grad(p[1]);
        if (!want_plane && !want_theta) return;
        const int oh = up.dim(0), ow = up.dim(1);
        const AngleEncodingSpec enc = quanv_encoding_spec(n);
        const ObservableSpec obs = ObservableSpec::all(n);
        Tensor dplane = Tensor::zeros_like(pv);
        Tensor dtheta = Tensor::zeros_like(tv);
        for (int r = 0; r < oh; ++r) {
          for (int c = 0; c < ow; ++c) {
            std::vector<double> angles(static_cast<std::size_t>(n));
            std::vector<double> w(static_cast<std::size_t>(n));
            for (int i = 0; i < k; ++i) {
              for (int j = 0; j < k; ++j) {
                angles[static_cast<std::size_t>(i * k + j)] =
                    pixel_to_angle(pv.at(r * stride + i, c * stride + j));
              }
            }
            for (int j = 0; j < n; ++j) w[static_cast<std::size_t>(j)] = up.at(r, c, j);
            if (want_plane) {
              const std::vector<double> g =
                  input_shift_vjp(angles, enc, circuit, tv.data, obs, w);
              for (int i = 0; i < k; ++i) {
                for (int j = 0; j < k; ++j) {
                  // d angle / d pixel = pi (overlapping windows accumulate)
                  dplane.at(r * stride + i, c * stride + j) +=
                      g[static_cast<std::size_t>(i * k + j)] * 3.14159265358979323846;
                }
              }
            }
            if (want_theta) {
              const ParamVector g =
                  param_shift_vjp(quanv_encode(angles, enc), circuit, tv.data, obs, w);
              for (std::size_t i = 0; i < g.size(); ++i) dtheta.data[i] += g[i];
            }
          }
        }
        if (want_plane) tp.accumulate(p[0], dplane);
        if (want_theta) tp.accumulate(p[1], dtheta);
      });
}

}  // namespace qmvit
