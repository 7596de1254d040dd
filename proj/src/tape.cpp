#include "qmvit/tape.hpp"

#include <stdexcept>

namespace qmvit {

bool Tape::any_requires(const std::vector<NodeId>& ids) const {
  for (NodeId id : ids)
    if (needs_grad(id)) return true;
  return false;
}

Tape::NodeId Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

const Tensor& Tape::grad(NodeId id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.seen) {
    static thread_local Tensor zeros;
    zeros = Tensor(n.value.shape);
    return zeros;
  }
  return n.grad;
}

Tape::NodeId Tape::custom(std::vector<NodeId> parents, Tensor value, BackwardFn back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = any_requires(parents);
  n.parents = std::move(parents);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

void Tape::accumulate(NodeId id, const Tensor& g) {
  Node& n = node(id);
  if (!n.requires_grad) return;
  if (!n.value.same_shape(g))
    throw std::invalid_argument("gradient shape " + Tensor(g).shape_str() +
                                " does not match value shape " + n.value.shape_str());
  if (!n.seen) {
    n.grad = g;
    n.seen = true;
    return;
  }
  for (int i = 0; i < g.numel(); ++i) n.grad[i] += g[i];
}

void Tape::backward(NodeId root) {
  Node& r = node(root);
  if (r.value.numel() != 1) throw std::invalid_argument("backward root must be scalar");
  if (!r.requires_grad) return;
  accumulate(root, Tensor(r.value.shape, std::vector<double>{1.0}));
  for (NodeId id = root; id >= 0; --id) {
    Node& n = node(id);
    if (!n.seen || !n.back) continue;
    n.back(*this, n.grad, n.parents);
  }
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (!va.same_shape(vb)) throw std::invalid_argument("add shape mismatch");
  Tensor out = va;
  for (int i = 0; i < out.numel(); ++i) out[i] += vb[i];
  return custom({a, b}, std::move(out),
                [](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  t.accumulate(p[0], up);
                  t.accumulate(p[1], up);
                });
}

Tape::NodeId Tape::scale(NodeId a, double c) {
  Tensor out = value(a);
  for (double& v : out.data) v *= c;
  return custom({a}, std::move(out),
                [c](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  Tensor g = up;
                  for (double& v : g.data) v *= c;
                  t.accumulate(p[0], g);
                });
}

Tape::NodeId Tape::matmul_op(NodeId a, NodeId b) {
  return custom({a, b}, matmul(value(a), value(b)),
                [](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  if (t.needs_grad(p[0])) t.accumulate(p[0], matmul_nt(up, t.value(p[1])));
                  if (t.needs_grad(p[1])) t.accumulate(p[1], matmul_tn(t.value(p[0]), up));
                });
}

Tape::NodeId Tape::linear(NodeId x, NodeId w, NodeId b) {
  Tensor out = matmul(value(x), value(w));
  const Tensor& bias = value(b);
  if (bias.numel() != out.dim(1)) throw std::invalid_argument("linear bias length mismatch");
  for (int i = 0; i < out.dim(0); ++i)
    for (int j = 0; j < out.dim(1); ++j) out.at(i, j) += bias[j];
  return custom({x, w, b}, std::move(out),
                [](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  if (t.needs_grad(p[0])) t.accumulate(p[0], matmul_nt(up, t.value(p[1])));
                  if (t.needs_grad(p[1])) t.accumulate(p[1], matmul_tn(t.value(p[0]), up));
                  if (t.needs_grad(p[2])) {
                    Tensor db({up.dim(1)});
                    for (int i = 0; i < up.dim(0); ++i)
                      for (int j = 0; j < up.dim(1); ++j) db[j] += up.at(i, j);
                    t.accumulate(p[2], db);
                  }
                });
}

Tape::NodeId Tape::row_softmax_op(NodeId x) {
  Tensor y = row_softmax(value(x));
  NodeId out = custom({x}, y, nullptr);
  node(out).back = [out](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
    t.accumulate(p[0], row_softmax_vjp(t.value(out), up));
  };
  return out;
}

Tape::NodeId Tape::layer_norm_op(NodeId x, NodeId gamma, NodeId beta) {
  return custom({x, gamma, beta}, layer_norm_rows(value(x), value(gamma), value(beta)),
                [](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  Tensor dx, dg, db;
                  layer_norm_rows_vjp(t.value(p[0]), t.value(p[1]), up, &dx, &dg, &db);
                  t.accumulate(p[0], dx);
                  t.accumulate(p[1], dg);
                  t.accumulate(p[2], db);
                });
}

Tape::NodeId Tape::gelu_op(NodeId x) {
  return custom({x}, gelu(value(x)),
                [](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  t.accumulate(p[0], gelu_vjp(t.value(p[0]), up));
                });
}

Tape::NodeId Tape::relu_op(NodeId x) {
  return custom({x}, relu(value(x)),
                [](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  t.accumulate(p[0], relu_vjp(t.value(p[0]), up));
                });
}

Tape::NodeId Tape::tanh_pi_op(NodeId x) {
  return custom({x}, tanh_pi(value(x)),
                [](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  t.accumulate(p[0], tanh_pi_vjp(t.value(p[0]), up));
                });
}

Tape::NodeId Tape::classical_attention_op(NodeId q, NodeId k, NodeId v) {
  return custom({q, k, v}, classical_attention(value(q), value(k), value(v)),
                [](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  Tensor dq, dk, dv;
                  classical_attention_vjp(t.value(p[0]), t.value(p[1]), t.value(p[2]), up, &dq, &dk,
                                          &dv);
                  t.accumulate(p[0], dq);
                  t.accumulate(p[1], dk);
                  t.accumulate(p[2], dv);
                });
}

Tape::NodeId Tape::conv2d_op(NodeId x, NodeId w, NodeId b, int stride) {
  return custom({x, w, b}, conv2d(value(x), value(w), value(b), stride),
                [stride](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  Tensor dx, dw, db;
                  conv2d_vjp(t.value(p[0]), t.value(p[1]), stride, up,
                             t.needs_grad(p[0]) ? &dx : nullptr, t.needs_grad(p[1]) ? &dw : nullptr,
                             t.needs_grad(p[2]) ? &db : nullptr);
                  if (t.needs_grad(p[0])) t.accumulate(p[0], dx);
                  if (t.needs_grad(p[1])) t.accumulate(p[1], dw);
                  if (t.needs_grad(p[2])) t.accumulate(p[2], db);
                });
}

Tape::NodeId Tape::reshape(NodeId x, std::vector<int> shape) {
  const Tensor& v = value(x);
  if (numel_of(shape) != v.numel()) throw std::invalid_argument("reshape numel mismatch");
  Tensor out(shape, v.data);
  return custom({x}, std::move(out),
                [](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  t.accumulate(p[0], Tensor(t.value(p[0]).shape, up.data));
                });
}

Tape::NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat of nothing");
  const int s = value(parts[0]).dim(0);
  int total = 0;
  for (NodeId id : parts) {
    if (value(id).rank() != 2 || value(id).dim(0) != s)
      throw std::invalid_argument("concat_cols row mismatch");
    total += value(id).dim(1);
  }
  Tensor out({s, total});
  int off = 0;
  std::vector<int> widths;
  for (NodeId id : parts) {
    const Tensor& v = value(id);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < v.dim(1); ++j) out.at(i, off + j) = v.at(i, j);
    widths.push_back(v.dim(1));
    off += v.dim(1);
  }
  return custom(parts, std::move(out),
                [widths](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  int start = 0;
                  for (std::size_t k = 0; k < p.size(); ++k) {
                    Tensor g({up.dim(0), widths[k]});
                    for (int i = 0; i < up.dim(0); ++i)
                      for (int j = 0; j < widths[k]; ++j) g.at(i, j) = up.at(i, start + j);
                    t.accumulate(p[k], g);
                    start += widths[k];
                  }
                });
}

Tape::NodeId Tape::slice_cols(NodeId x, int start, int len) {
  const Tensor& v = value(x);
  if (v.rank() != 2 || start < 0 || len < 1 || start + len > v.dim(1))
    throw std::invalid_argument("slice_cols out of range");
  Tensor out({v.dim(0), len});
  for (int i = 0; i < v.dim(0); ++i)
    for (int j = 0; j < len; ++j) out.at(i, j) = v.at(i, start + j);
  return custom({x}, std::move(out),
                [start, len](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  Tensor g(t.value(p[0]).shape);
                  for (int i = 0; i < up.dim(0); ++i)
                    for (int j = 0; j < len; ++j) g.at(i, start + j) = up.at(i, j);
                  t.accumulate(p[0], g);
                });
}

Tape::NodeId Tape::prepend_row(NodeId row, NodeId rest) {
  const Tensor& r = value(row);
  const Tensor& m = value(rest);
  if (r.rank() != 1 || m.rank() != 2 || r.dim(0) != m.dim(1))
    throw std::invalid_argument("prepend_row width mismatch");
  Tensor out({m.dim(0) + 1, m.dim(1)});
  for (int j = 0; j < m.dim(1); ++j) out.at(0, j) = r[j];
  for (int i = 0; i < m.dim(0); ++i)
    for (int j = 0; j < m.dim(1); ++j) out.at(i + 1, j) = m.at(i, j);
  return custom({row, rest}, std::move(out),
                [](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  const int d = up.dim(1);
                  Tensor dr({d});
                  for (int j = 0; j < d; ++j) dr[j] = up.at(0, j);
                  t.accumulate(p[0], dr);
                  Tensor dm({up.dim(0) - 1, d});
                  for (int i = 1; i < up.dim(0); ++i)
                    for (int j = 0; j < d; ++j) dm.at(i - 1, j) = up.at(i, j);
                  t.accumulate(p[1], dm);
                });
}

Tape::NodeId Tape::take_row(NodeId x, int row) {
  const Tensor& v = value(x);
  if (v.rank() != 2 || row < 0 || row >= v.dim(0))
    throw std::invalid_argument("take_row out of range");
  Tensor out({v.dim(1)});
  for (int j = 0; j < v.dim(1); ++j) out[j] = v.at(row, j);
  return custom({x}, std::move(out),
                [row](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  Tensor g(t.value(p[0]).shape);
                  for (int j = 0; j < up.numel(); ++j) g.at(row, j) = up[j];
                  t.accumulate(p[0], g);
                });
}

Tape::NodeId Tape::global_average_pool_op(NodeId x) {
  PoolSpec spec;
  spec.kind = PoolKind::GlobalAverage;
  return custom({x}, pool(value(x), spec),
                [spec](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  t.accumulate(p[0], pool_vjp(t.value(p[0]), spec, up));
                });
}

Tape::NodeId Tape::cross_entropy_op(NodeId logits, int label) {
  const Tensor& v = value(logits);
  if (v.rank() != 1) throw std::invalid_argument("cross_entropy expects a logit vector");
  const double loss = cross_entropy(v.data, label);
  return custom({logits}, Tensor::scalar(loss),
                [label](Tape& t, const Tensor& up, const std::vector<NodeId>& p) {
                  const auto g = cross_entropy_vjp(t.value(p[0]).data, label, up[0]);
                  t.accumulate(p[0], Tensor(t.value(p[0]).shape, g));
                });
}

}  // namespace qmvit
