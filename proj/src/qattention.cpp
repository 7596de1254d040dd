#include "qmvit/qattention.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "qmvit/nn.hpp"

namespace qmvit {

namespace {

std::vector<double> row_of(const Tensor& x, int i) {
  const int w = x.dim(1);
  std::vector<double> out(static_cast<std::size_t>(w));
  for (int j = 0; j < w; ++j) out[static_cast<std::size_t>(j)] = x.at(i, j);
  return out;
}

void check_width(const std::vector<double>& x, const AnsatzSpec& spec, const char* who) {
  if (static_cast<int>(x.size()) != spec.n_qubits) {
    throw std::invalid_argument(std::string(who) + ": input length " +
                                std::to_string(x.size()) + " != n_qubits " +
                                std::to_string(spec.n_qubits));
  }
}

double scalar_readout(const std::vector<double>& x, const ParamVector& theta,
                      const AnsatzSpec& spec, const char* who) {
  check_width(x, spec, who);
  return encoded_expectations(x, angle_encoding_spec(spec.n_qubits), spec, theta,
                              ObservableSpec::single(0))[0];
}

}  // namespace

double quantum_query(const std::vector<double>& x, const ParamVector& theta,
                     const AnsatzSpec& ansatz) {
  return scalar_readout(x, theta, ansatz, "quantum_query");
}

double quantum_key(const std::vector<double>& x, const ParamVector& theta,
                   const AnsatzSpec& ansatz) {
  return scalar_readout(x, theta, ansatz, "quantum_key");
}

std::vector<double> quantum_values(const std::vector<double>& x, const ParamVector& theta,
                                   const AnsatzSpec& ansatz) {
  check_width(x, ansatz, "quantum_values");
  return encoded_expectations(x, angle_encoding_spec(ansatz.n_qubits), ansatz, theta,
                              ObservableSpec::all(ansatz.n_qubits));
}

Tensor attention_scores(const std::vector<double>& q, const std::vector<double>& k) {
  if (q.size() != k.size()) {
    throw std::invalid_argument("attention_scores: query/key length mismatch");
  }
  const int s = static_cast<int>(q.size());
  Tensor a({s, s});
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      const double d = q[static_cast<std::size_t>(i)] - k[static_cast<std::size_t>(j)];
      a.at(i, j) = -d * d;
    }
  }
  return a;
}

Tensor hybrid_head(const Tensor& x, const QuantumHeadParams& p) {
  if (x.rank() != 2 || x.dim(1) != p.ansatz.n_qubits) {
    throw std::invalid_argument("hybrid_head: expected (seq, n_qubits) input");
  }
  const int s = x.dim(0);
  const int dh = p.ansatz.n_qubits;
  std::vector<double> q(static_cast<std::size_t>(s));
  std::vector<double> k(static_cast<std::size_t>(s));
  Tensor v({s, dh});
  for (int i = 0; i < s; ++i) {
    const std::vector<double> xi = row_of(x, i);
    q[static_cast<std::size_t>(i)] = quantum_query(xi, p.theta_q, p.ansatz);
    k[static_cast<std::size_t>(i)] = quantum_key(xi, p.theta_k, p.ansatz);
    const std::vector<double> vi = quantum_values(xi, p.theta_v, p.ansatz);
    for (int j = 0; j < dh; ++j) v.at(i, j) = vi[static_cast<std::size_t>(j)];
  }
  Tensor a = attention_scores(q, k);
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  for (double& e : a.data) e *= inv;
  return matmul(row_softmax(a), v);
}

Tensor multi_head(const Tensor& x, const std::vector<QuantumHeadParams>& heads,
                  const Tensor& w_o) {
  if (x.rank() != 2 || heads.empty()) {
    throw std::invalid_argument("multi_head: expected (seq, embed) input and >= 1 head");
  }
  const int dh = heads.front().ansatz.n_qubits;
  const int embed = x.dim(1);
  if (embed != static_cast<int>(heads.size()) * dh) {
    throw std::invalid_argument("multi_head: embed width != heads * n_qubits");
  }
  for (const QuantumHeadParams& h : heads) {
    if (h.ansatz.n_qubits != dh) {
      throw std::invalid_argument("multi_head: heads must share one qubit count");
    }
  }
  if (w_o.rank() != 2 || w_o.dim(0) != embed || w_o.dim(1) != embed) {
    throw std::invalid_argument("multi_head: projection must be (embed, embed)");
  }
  const int s = x.dim(0);
  Tensor concat({s, embed});
  for (int h = 0; h < static_cast<int>(heads.size()); ++h) {
    Tensor part({s, dh});
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < dh; ++j) part.at(i, j) = x.at(i, h * dh + j);
    }
    const Tensor out = hybrid_head(part, heads[static_cast<std::size_t>(h)]);
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < dh; ++j) concat.at(i, h * dh + j) = out.at(i, j);
    }
  }
  return matmul(concat, w_o);
}

std::vector<double> quantum_mlp(const std::vector<double>& x, const QMLPParams& p) {
  const int embed = static_cast<int>(x.size());
  const int n = p.ansatz.n_qubits;
  if (p.w_in.rank() != 2 || p.w_in.dim(0) != embed || p.w_in.dim(1) != n ||
      p.b_in.numel() != n || p.w_out.rank() != 2 || p.w_out.dim(0) != n ||
      p.w_out.dim(1) != embed || p.b_out.numel() != embed) {
    throw std::invalid_argument("quantum_mlp: dimension chain mismatch");
  }
  std::vector<double> pre(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    double acc = p.b_in.data[static_cast<std::size_t>(j)];
    for (int i = 0; i < embed; ++i) acc += x[static_cast<std::size_t>(i)] * p.w_in.at(i, j);
    pre[static_cast<std::size_t>(j)] = std::numbers::pi * std::tanh(acc);
  }
  const std::vector<double> z = encoded_expectations(
      pre, angle_encoding_spec(n), p.ansatz, p.theta, ObservableSpec::all(n));
  std::vector<double> out(static_cast<std::size_t>(embed));
  for (int e = 0; e < embed; ++e) {
    double acc = p.b_out.data[static_cast<std::size_t>(e)];
    for (int j = 0; j < n; ++j) acc += z[static_cast<std::size_t>(j)] * p.w_out.at(j, e);
    out[static_cast<std::size_t>(e)] = acc;
  }
  return out;
}

// ---- tape ops --------------------------------------------------------------

namespace {

// Shared pullback for the row-wise quantum readout ops. obs decides whether a
// row yields one scalar (<Z_0>) or one readout per qubit.
Tape::NodeId quantum_rows_op(Tape& t, Tape::NodeId x, Tape::NodeId theta, const AnsatzSpec& spec,
                             const ObservableSpec& obs, bool scalar) {
  const Tensor& xv = t.value(x);
  const Tensor& tv = t.value(theta);
  if (xv.rank() != 2 || xv.dim(1) != spec.n_qubits) {
    throw std::invalid_argument("quantum rows op: expected (seq, n_qubits) input");
  }
  if (tv.rank() != 1 || tv.numel() != param_count(spec)) {
    throw std::invalid_argument("quantum rows op: parameter vector size mismatch");
  }
  const int s = xv.dim(0);
  const int n = spec.n_qubits;
  const int width = scalar ? 1 : n;
  Tensor out(scalar ? std::vector<int>{s} : std::vector<int>{s, n});
  const AngleEncodingSpec enc = angle_encoding_spec(n);
  for (int i = 0; i < s; ++i) {
    const std::vector<double> e =
        encoded_expectations(row_of(xv, i), enc, spec, tv.data, obs);
    for (int j = 0; j < width; ++j) {
      out.data[static_cast<std::size_t>(i * width + j)] = e[static_cast<std::size_t>(j)];
    }
  }
  return t.custom({x, theta}, std::move(out),
                  [spec, obs, enc, s, n, width](Tape& tp, const Tensor& up,
                                                const std::vector<Tape::NodeId>& p) {
                    const Tensor& xv = tp.value(p[0]);
                    const Tensor& tv = tp.value(p[1]);
                    const bool want_x = tp.needs_grad(p[0]);
                    const bool want_theta = tp.needs_grad(p[1]);
                    Tensor dx = Tensor::zeros_like(xv);
                    Tensor dtheta = Tensor::zeros_like(tv);
                    for (int i = 0; i < s; ++i) {
                      std::vector<double> w(static_cast<std::size_t>(width));
                      for (int j = 0; j < width; ++j) {
                        w[static_cast<std::size_t>(j)] =
                            up.data[static_cast<std::size_t>(i * width + j)];
                      }
                      const std::vector<double> xi = row_of(xv, i);
                      if (want_x) {
                        const std::vector<double> g =
                            input_shift_vjp(xi, enc, spec, tv.data, obs, w);
                        for (int j = 0; j < n; ++j) dx.at(i, j) = g[static_cast<std::size_t>(j)];
                      }
                      if (want_theta) {
                        const ParamVector g = param_shift_vjp(angle_encode(xi), spec,
                                                              tv.data, obs, w);
                        for (std::size_t k = 0; k < g.size(); ++k) dtheta.data[k] += g[k];
                      }
                    }
                    if (want_x) tp.accumulate(p[0], dx);
                    if (want_theta) tp.accumulate(p[1], dtheta);
                  });
}

}  // namespace

Tape::NodeId quantum_scalar_rows_op(Tape& t, Tape::NodeId x, Tape::NodeId theta,
                                    const AnsatzSpec& spec) {
  return quantum_rows_op(t, x, theta, spec, ObservableSpec::single(0), true);
}

Tape::NodeId quantum_value_rows_op(Tape& t, Tape::NodeId x, Tape::NodeId theta,
                                   const AnsatzSpec& spec) {
  return quantum_rows_op(t, x, theta, spec, ObservableSpec::all(spec.n_qubits), false);
}

Tape::NodeId pairwise_neg_sqdiff_op(Tape& t, Tape::NodeId q, Tape::NodeId k) {
  const Tensor& qv = t.value(q);
  const Tensor& kv = t.value(k);
  if (qv.rank() != 1 || kv.rank() != 1 || qv.numel() != kv.numel()) {
    throw std::invalid_argument("pairwise_neg_sqdiff_op: expected equal-length vectors");
  }
  const int s = qv.numel();
  Tensor out = attention_scores(qv.data, kv.data);
  return t.custom({q, k}, std::move(out),
                  [s](Tape& tp, const Tensor& up, const std::vector<Tape::NodeId>& p) {
                    const Tensor& qv = tp.value(p[0]);
                    const Tensor& kv = tp.value(p[1]);
                    Tensor dq = Tensor::zeros_like(qv);
                    Tensor dk = Tensor::zeros_like(kv);
                    for (int i = 0; i < s; ++i) {
                      for (int j = 0; j < s; ++j) {
                        const double d = qv.data[static_cast<std::size_t>(i)] -
                                         kv.data[static_cast<std::size_t>(j)];
                        const double g = up.at(i, j) * 2.0 * d;
                        dq.data[static_cast<std::size_t>(i)] -= g;
                        dk.data[static_cast<std::size_t>(j)] += g;
                      }
                    }
                    tp.accumulate(p[0], dq);
                    tp.accumulate(p[1], dk);
                  });
}

Tape::NodeId hybrid_head_op(Tape& t, Tape::NodeId x, const HeadNodes& h, const AnsatzSpec& spec) {
  const Tape::NodeId q = quantum_scalar_rows_op(t, x, h.theta_q, spec);
  const Tape::NodeId k = quantum_scalar_rows_op(t, x, h.theta_k, spec);
  const Tape::NodeId v = quantum_value_rows_op(t, x, h.theta_v, spec);
  const Tape::NodeId a = pairwise_neg_sqdiff_op(t, q, k);
  const double inv = 1.0 / std::sqrt(static_cast<double>(spec.n_qubits));
  const Tape::NodeId probs = t.row_softmax_op(t.scale(a, inv));
  return t.matmul_op(probs, v);
}

Tape::NodeId multi_head_op(Tape& t, Tape::NodeId x, const std::vector<HeadNodes>& heads,
                           const AnsatzSpec& spec, Tape::NodeId w_o) {
  const Tensor& xv = t.value(x);
  if (xv.rank() != 2 || heads.empty() ||
      xv.dim(1) != static_cast<int>(heads.size()) * spec.n_qubits) {
    throw std::invalid_argument("multi_head_op: embed width != heads * n_qubits");
  }
  const int dh = spec.n_qubits;
  std::vector<Tape::NodeId> outs;
  outs.reserve(heads.size());
  for (int h = 0; h < static_cast<int>(heads.size()); ++h) {
    const Tape::NodeId part = t.slice_cols(x, h * dh, dh);
    outs.push_back(hybrid_head_op(t, part, heads[static_cast<std::size_t>(h)], spec));
  }
  return t.matmul_op(t.concat_cols(outs), w_o);
}

Tape::NodeId quantum_mlp_rows_op(Tape& t, Tape::NodeId x, Tape::NodeId w_in, Tape::NodeId b_in,
                                 Tape::NodeId theta, const AnsatzSpec& spec, Tape::NodeId w_out,
                                 Tape::NodeId b_out) {
  const Tape::NodeId pre = t.tanh_pi_op(t.linear(x, w_in, b_in));
  const Tape::NodeId z = quantum_value_rows_op(t, pre, theta, spec);
  return t.linear(z, w_out, b_out);
}

}  // namespace qmvit
