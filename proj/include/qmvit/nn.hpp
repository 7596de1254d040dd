#pragma once

#include <cstdint>
#include <vector>

#include "qmvit/tensor.hpp"

namespace qmvit {

// Plain forward kernels and their reverse-mode pullbacks. Every *_vjp takes
// the upstream cotangent and accumulates nothing: it returns fresh gradients
// so callers control accumulation order (bit-deterministic reductions).

// ---- convolution ----
// x: (H, W, Cin), w: (Fh, Fw, Cin, Cout), b: (Cout), output (Ho, Wo, Cout)
// with Ho = (H - Fh)/stride + 1 (valid padding).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride);
void conv2d_vjp(const Tensor& x, const Tensor& w, int stride, const Tensor& up, Tensor* dx,
                Tensor* dw, Tensor* db);

// ---- pooling ----
enum class PoolKind { Max, Average, GlobalAverage, L2 };
struct PoolSpec {
  PoolKind kind = PoolKind::Max;
  int window = 2;
  int stride = 2;  // ignored for GlobalAverage
};
// x: (H, W, C); output (Ho, Wo, C), or (C) for GlobalAverage.
Tensor pool(const Tensor& x, const PoolSpec& spec);
Tensor pool_vjp(const Tensor& x, const PoolSpec& spec, const Tensor& up);

// ---- elementwise ----
Tensor relu(const Tensor& x);
Tensor relu_vjp(const Tensor& x, const Tensor& up);  // subgradient at 0 is 0
// exact GELU: x * Phi(x) with Phi from erf, not the tanh approximation
Tensor gelu(const Tensor& x);
Tensor gelu_vjp(const Tensor& x, const Tensor& up);
double gelu_scalar(double x);
Tensor tanh_pi(const Tensor& x);  // pi * tanh(x), keeps encoder angles in (-pi, pi)
Tensor tanh_pi_vjp(const Tensor& x, const Tensor& up);

// ---- attention / mlp ----
// rows of x are softmaxed independently; max-subtracted for stability
Tensor row_softmax(const Tensor& x);
Tensor row_softmax_vjp(const Tensor& y, const Tensor& up);  // takes the forward output

// softmax(Q K^T / sqrt(d_k)) V with Q:(S,d) K:(S,d) V:(S,dv)
Tensor classical_attention(const Tensor& q, const Tensor& k, const Tensor& v);
void classical_attention_vjp(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& up,
                             Tensor* dq, Tensor* dk, Tensor* dv);

struct FFNParams {
  Tensor w1, b1, w2, b2;  // (E,Hid) (Hid) (Hid,E2) (E2)
};
// rows of x through GELU(x W1 + b1) W2 + b2
Tensor ffn(const Tensor& x, const FFNParams& p);
void ffn_vjp(const Tensor& x, const FFNParams& p, const Tensor& up, Tensor* dx, FFNParams* dp);

// ---- normalization ----
// per-row: (x - mean)/sqrt(var + eps) * gamma + beta, population variance
inline constexpr double kLayerNormEps = 1e-5;
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       double eps = kLayerNormEps);
void layer_norm_rows_vjp(const Tensor& x, const Tensor& gamma, const Tensor& up, Tensor* dx,
                         Tensor* dgamma, Tensor* dbeta, double eps = kLayerNormEps);

// ---- loss ----
// -log softmax(logits)[label], max-stabilized
double cross_entropy(const std::vector<double>& logits, int label);
std::vector<double> cross_entropy_vjp(const std::vector<double>& logits, int label, double up);
std::vector<double> softmax(const std::vector<double>& logits);

// ---- matrix helpers ----
Tensor matmul(const Tensor& a, const Tensor& b);     // (n,k) x (k,m)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T, b: (m,k)
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T * b, a: (k,n)
Tensor transpose(const Tensor& a);

// ---- optimizer ----
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};
struct AdamState {
  Tensor m, v;
  long long t = 0;
};
// one update in place; state tensors are lazily shaped to match param
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg);

}  // namespace qmvit
