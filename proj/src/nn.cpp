#include "qmvit/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qmvit {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// standard normal pdf
double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

// ---- convolution ----

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
  require(x.rank() == 3, "conv2d input must be (H, W, Cin)");
  require(w.rank() == 4, "conv2d filter must be (Fh, Fw, Cin, Cout)");
  require(b.rank() == 1, "conv2d bias must be (Cout)");
  require(stride >= 1, "conv2d stride must be >= 1");
  const int h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
  const int fh = w.dim(0), fw = w.dim(1), cout = w.dim(3);
  require(w.dim(2) == cin, "conv2d filter channel mismatch");
  require(b.dim(0) == cout, "conv2d bias length mismatch");
  require(fh >= 1 && fw >= 1 && fh <= h && fw <= wd, "conv2d filter larger than input");

  const int ho = (h - fh) / stride + 1;
  const int wo = (wd - fw) / stride + 1;
  Tensor y({ho, wo, cout});
  for (int i = 0; i < ho; ++i)
    for (int j = 0; j < wo; ++j)
      for (int co = 0; co < cout; ++co) {
        double acc = b[co];
        for (int m = 0; m < fh; ++m)
          for (int n = 0; n < fw; ++n)
            for (int ci = 0; ci < cin; ++ci)
              acc += x.at(i * stride + m, j * stride + n, ci) * w.at(m, n, ci, co);
        y.at(i, j, co) = acc;
      }
  return y;
}

void conv2d_vjp(const Tensor& x, const Tensor& w, int stride, const Tensor& up, Tensor* dx,
                Tensor* dw, Tensor* db) {
  const int fh = w.dim(0), fw = w.dim(1), cin = w.dim(2), cout = w.dim(3);
  const int ho = up.dim(0), wo = up.dim(1);
  require(up.rank() == 3 && up.dim(2) == cout, "conv2d upstream shape mismatch");

  if (dx) *dx = Tensor(x.shape);
  if (dw) *dw = Tensor(w.shape);
  if (db) *db = Tensor({cout});
  for (int i = 0; i < ho; ++i)
    for (int j = 0; j < wo; ++j)
      for (int co = 0; co < cout; ++co) {
        const double u = up.at(i, j, co);
        if (db) (*db)[co] += u;
        for (int m = 0; m < fh; ++m)
          for (int n = 0; n < fw; ++n)
            for (int ci = 0; ci < cin; ++ci) {
              if (dx) dx->at(i * stride + m, j * stride + n, ci) += u * w.at(m, n, ci, co);
              if (dw) dw->at(m, n, ci, co) += u * x.at(i * stride + m, j * stride + n, ci);
            }
      }
}

// ---- pooling ----

Tensor pool(const Tensor& x, const PoolSpec& spec) {
  require(x.rank() == 3, "pool input must be (H, W, C)");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);

  if (spec.kind == PoolKind::GlobalAverage) {
    Tensor y({c});
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int ch = 0; ch < c; ++ch) y[ch] += x.at(i, j, ch) * inv;
    return y;
  }

  require(spec.window >= 1 && spec.stride >= 1, "pool window/stride must be >= 1");
  require(spec.window <= h && spec.window <= w, "pool window larger than input");
  const int ho = (h - spec.window) / spec.stride + 1;
  const int wo = (w - spec.window) / spec.stride + 1;
  Tensor y({ho, wo, c});
  for (int i = 0; i < ho; ++i)
    for (int j = 0; j < wo; ++j)
      for (int ch = 0; ch < c; ++ch) {
        double acc = spec.kind == PoolKind::Max ? -std::numeric_limits<double>::infinity() : 0.0;
        for (int m = 0; m < spec.window; ++m)
          for (int n = 0; n < spec.window; ++n) {
            const double v = x.at(i * spec.stride + m, j * spec.stride + n, ch);
            switch (spec.kind) {
              case PoolKind::Max: acc = std::max(acc, v); break;
              case PoolKind::Average: acc += v; break;
              case PoolKind::L2: acc += v * v; break;
              case PoolKind::GlobalAverage: break;
            }
          }
        if (spec.kind == PoolKind::Average) acc /= spec.window * spec.window;
        if (spec.kind == PoolKind::L2) acc = std::sqrt(acc);
        y.at(i, j, ch) = acc;
      }
  return y;
}

Tensor pool_vjp(const Tensor& x, const PoolSpec& spec, const Tensor& up) {
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor dx(x.shape);

  if (spec.kind == PoolKind::GlobalAverage) {
    require(up.rank() == 1 && up.dim(0) == c, "pool upstream shape mismatch");
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int ch = 0; ch < c; ++ch) dx.at(i, j, ch) = up[ch] * inv;
    return dx;
  }

  const int ho = (h - spec.window) / spec.stride + 1;
  const int wo = (w - spec.window) / spec.stride + 1;
  require(up.rank() == 3 && up.dim(0) == ho && up.dim(1) == wo && up.dim(2) == c,
          "pool upstream shape mismatch");
  const Tensor y = spec.kind == PoolKind::L2 ? pool(x, spec) : Tensor();

  for (int i = 0; i < ho; ++i)
    for (int j = 0; j < wo; ++j)
      for (int ch = 0; ch < c; ++ch) {
        const double u = up.at(i, j, ch);
        switch (spec.kind) {
          case PoolKind::Max: {
            // ties go to the first element in row-major window order
            double best = -std::numeric_limits<double>::infinity();
            int bm = 0, bn = 0;
            for (int m = 0; m < spec.window; ++m)
              for (int n = 0; n < spec.window; ++n) {
                const double v = x.at(i * spec.stride + m, j * spec.stride + n, ch);
                if (v > best) {
                  best = v;
                  bm = m;
                  bn = n;
                }
              }
            dx.at(i * spec.stride + bm, j * spec.stride + bn, ch) += u;
            break;
          }
          case PoolKind::Average: {
            const double share = u / (spec.window * spec.window);
            for (int m = 0; m < spec.window; ++m)
              for (int n = 0; n < spec.window; ++n)
                dx.at(i * spec.stride + m, j * spec.stride + n, ch) += share;
            break;
          }
          case PoolKind::L2: {
            const double denom = y.at(i, j, ch);
            if (denom == 0.0) break;  // all-zero window, flat point
            for (int m = 0; m < spec.window; ++m)
              for (int n = 0; n < spec.window; ++n) {
                const double v = x.at(i * spec.stride + m, j * spec.stride + n, ch);
                dx.at(i * spec.stride + m, j * spec.stride + n, ch) += u * v / denom;
              }
            break;
          }
          case PoolKind::GlobalAverage: break;
        }
      }
  return dx;
}

// ---- elementwise ----

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_vjp(const Tensor& x, const Tensor& up) {
  require(x.same_shape(up), "relu upstream shape mismatch");
  Tensor dx(x.shape);
  for (int i = 0; i < x.numel(); ++i) dx[i] = x[i] > 0.0 ? up[i] : 0.0;
  return dx;
}

double gelu_scalar(double x) { return x * 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); }

Tensor gelu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = gelu_scalar(v);
  return y;
}

Tensor gelu_vjp(const Tensor& x, const Tensor& up) {
  require(x.same_shape(up), "gelu upstream shape mismatch");
  Tensor dx(x.shape);
  for (int i = 0; i < x.numel(); ++i) {
    const double v = x[i];
    const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
    dx[i] = up[i] * (cdf + v * normal_pdf(v));
  }
  return dx;
}

Tensor tanh_pi(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = std::numbers::pi * std::tanh(v);
  return y;
}

Tensor tanh_pi_vjp(const Tensor& x, const Tensor& up) {
  require(x.same_shape(up), "tanh_pi upstream shape mismatch");
  Tensor dx(x.shape);
  for (int i = 0; i < x.numel(); ++i) {
    const double t = std::tanh(x[i]);
    dx[i] = up[i] * std::numbers::pi * (1.0 - t * t);
  }
  return dx;
}

// ---- softmax / attention ----

Tensor row_softmax(const Tensor& x) {
  require(x.rank() == 2, "row_softmax input must be (S, D)");
  const int s = x.dim(0), d = x.dim(1);
  Tensor y(x.shape);
  for (int i = 0; i < s; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < d; ++j) mx = std::max(mx, x.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < d; ++j) {
      const double e = std::exp(x.at(i, j) - mx);
      y.at(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < d; ++j) y.at(i, j) /= sum;
  }
  return y;
}

Tensor row_softmax_vjp(const Tensor& y, const Tensor& up) {
  require(y.same_shape(up), "row_softmax upstream shape mismatch");
  const int s = y.dim(0), d = y.dim(1);
  Tensor dx(y.shape);
  for (int i = 0; i < s; ++i) {
    double dot = 0.0;
    for (int j = 0; j < d; ++j) dot += up.at(i, j) * y.at(i, j);
    for (int j = 0; j < d; ++j) dx.at(i, j) = y.at(i, j) * (up.at(i, j) - dot);
  }
  return dx;
}

Tensor classical_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  require(q.rank() == 2 && k.rank() == 2 && v.rank() == 2, "attention inputs must be matrices");
  require(q.dim(1) == k.dim(1), "query/key width mismatch");
  require(k.dim(0) == v.dim(0), "key/value row mismatch");
  Tensor scores = matmul_nt(q, k);
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  for (double& x : scores.data) x *= inv;
  return matmul(row_softmax(scores), v);
}

void classical_attention_vjp(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& up,
                             Tensor* dq, Tensor* dk, Tensor* dv) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  Tensor scores = matmul_nt(q, k);
  for (double& x : scores.data) x *= inv;
  const Tensor p = row_softmax(scores);

  if (dv) *dv = matmul_tn(p, up);
  const Tensor dp = matmul_nt(up, v);
  Tensor da = row_softmax_vjp(p, dp);
  for (double& x : da.data) x *= inv;
  if (dq) *dq = matmul(da, k);
  if (dk) *dk = matmul_tn(da, q);
}

// ---- ffn ----

Tensor ffn(const Tensor& x, const FFNParams& p) {
  require(x.rank() == 2, "ffn input must be (S, E)");
  Tensor h = matmul(x, p.w1);
  const int s = h.dim(0), hid = h.dim(1);
  require(p.b1.numel() == hid, "ffn b1 length mismatch");
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < hid; ++j) h.at(i, j) += p.b1[j];
  h = gelu(h);
  Tensor y = matmul(h, p.w2);
  require(p.b2.numel() == y.dim(1), "ffn b2 length mismatch");
  for (int i = 0; i < y.dim(0); ++i)
    for (int j = 0; j < y.dim(1); ++j) y.at(i, j) += p.b2[j];
  return y;
}

void ffn_vjp(const Tensor& x, const FFNParams& p, const Tensor& up, Tensor* dx, FFNParams* dp) {
  Tensor pre = matmul(x, p.w1);
  const int s = pre.dim(0), hid = pre.dim(1);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < hid; ++j) pre.at(i, j) += p.b1[j];
  const Tensor h = gelu(pre);

  if (dp) {
    dp->w2 = matmul_tn(h, up);
    dp->b2 = Tensor({up.dim(1)});
    for (int i = 0; i < up.dim(0); ++i)
      for (int j = 0; j < up.dim(1); ++j) dp->b2[j] += up.at(i, j);
  }
  const Tensor dh = matmul_nt(up, p.w2);
  const Tensor dpre = gelu_vjp(pre, dh);
  if (dp) {
    dp->w1 = matmul_tn(x, dpre);
    dp->b1 = Tensor({hid});
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < hid; ++j) dp->b1[j] += dpre.at(i, j);
  }
  if (dx) *dx = matmul_nt(dpre, p.w1);
}

// ---- layer norm ----

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require(x.rank() == 2, "layer_norm input must be (S, D)");
  const int s = x.dim(0), d = x.dim(1);
  require(gamma.numel() == d && beta.numel() == d, "layer_norm affine length mismatch");
  Tensor y(x.shape);
  for (int i = 0; i < s; ++i) {
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += x.at(i, j);
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = x.at(i, j) - mean;
      var += c * c;
    }
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < d; ++j)
      y.at(i, j) = (x.at(i, j) - mean) * inv * gamma[j] + beta[j];
  }
  return y;
}

void layer_norm_rows_vjp(const Tensor& x, const Tensor& gamma, const Tensor& up, Tensor* dx,
                         Tensor* dgamma, Tensor* dbeta, double eps) {
  require(x.same_shape(up), "layer_norm upstream shape mismatch");
  const int s = x.dim(0), d = x.dim(1);
  if (dx) *dx = Tensor(x.shape);
  if (dgamma) *dgamma = Tensor({d});
  if (dbeta) *dbeta = Tensor({d});

  std::vector<double> xhat(static_cast<std::size_t>(d));
  for (int i = 0; i < s; ++i) {
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += x.at(i, j);
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = x.at(i, j) - mean;
      var += c * c;
    }
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);

    double gmean = 0.0, gxmean = 0.0;
    for (int j = 0; j < d; ++j) {
      xhat[static_cast<std::size_t>(j)] = (x.at(i, j) - mean) * inv;
      const double g = up.at(i, j) * gamma[j];
      gmean += g;
      gxmean += g * xhat[static_cast<std::size_t>(j)];
    }
    gmean /= d;
    gxmean /= d;
    for (int j = 0; j < d; ++j) {
      const double g = up.at(i, j) * gamma[j];
      if (dx) dx->at(i, j) = inv * (g - gmean - xhat[static_cast<std::size_t>(j)] * gxmean);
      if (dgamma) (*dgamma)[j] += up.at(i, j) * xhat[static_cast<std::size_t>(j)];
      if (dbeta) (*dbeta)[j] += up.at(i, j);
    }
  }
}

// ---- loss ----

std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double cross_entropy(const std::vector<double>& logits, int label) {
  require(!logits.empty(), "cross_entropy on empty logits");
  require(label >= 0 && label < static_cast<int>(logits.size()), "cross_entropy label out of range");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  return std::log(sum) - (logits[static_cast<std::size_t>(label)] - mx);
}

std::vector<double> cross_entropy_vjp(const std::vector<double>& logits, int label, double up) {
  std::vector<double> g = softmax(logits);
  g[static_cast<std::size_t>(label)] -= 1.0;
  for (double& v : g) v *= up;
  return g;
}

// ---- matrix helpers ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul needs matrices");
  require(a.dim(1) == b.dim(0), "matmul inner dimension mismatch");
  const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor y({n, m});
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < k; ++l) {
      const double av = a.at(i, l);
      if (av == 0.0) continue;
      for (int j = 0; j < m; ++j) y.at(i, j) += av * b.at(l, j);
    }
  return y;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul needs matrices");
  require(a.dim(1) == b.dim(1), "matmul_nt inner dimension mismatch");
  const int n = a.dim(0), k = a.dim(1), m = b.dim(0);
  Tensor y({n, m});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a.at(i, l) * b.at(j, l);
      y.at(i, j) = acc;
    }
  return y;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul needs matrices");
  require(a.dim(0) == b.dim(0), "matmul_tn inner dimension mismatch");
  const int n = a.dim(1), k = a.dim(0), m = b.dim(1);
  Tensor y({n, m});
  for (int l = 0; l < k; ++l)
    for (int i = 0; i < n; ++i) {
      const double av = a.at(l, i);
      if (av == 0.0) continue;
      for (int j = 0; j < m; ++j) y.at(i, j) += av * b.at(l, j);
    }
  return y;
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, "transpose needs a matrix");
  Tensor y({a.dim(1), a.dim(0)});
  for (int i = 0; i < a.dim(0); ++i)
    for (int j = 0; j < a.dim(1); ++j) y.at(j, i) = a.at(i, j);
  return y;
}

// ---- optimizer ----

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg) {
  require(param.same_shape(grad), "adam param/grad shape mismatch");
  if (state.m.numel() == 0) {
    state.m = Tensor(param.shape);
    state.v = Tensor(param.shape);
    state.t = 0;
  }
  require(state.m.same_shape(param), "adam state shape mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (int i = 0; i < param.numel(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    param[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

}  // namespace qmvit
