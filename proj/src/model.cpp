#include "qmvit/model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "qmvit/qattention.hpp"

namespace qmvit {

// ---- parameter store ----

int ParamStore::add(const std::string& name, Tensor value, bool trainable) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  const int idx = static_cast<int>(params_.size());
  index_.emplace(name, idx);
  params_.push_back(NamedParam{name, std::move(value), AdamState{}, trainable});
  return idx;
}

int ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return it->second;
}

long long ParamStore::scalar_count() const {
  long long n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

// ---- configuration ----

std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::QMViT: return "qmvit";
    case ModelKind::ViT: return "vit";
    case ModelKind::QNN: return "qnn";
  }
  throw std::invalid_argument("bad model kind");
}

ModelKind model_kind_from_name(const std::string& s) {
  if (s == "qmvit") return ModelKind::QMViT;
  if (s == "vit") return ModelKind::ViT;
  if (s == "qnn") return ModelKind::QNN;
  throw std::invalid_argument("unknown model '" + s + "' (expected qmvit, vit or qnn)");
}

int ModelConfig::num_patches() const {
  if (patch_size <= 0 || image_size % patch_size != 0) return 0;
  const int g = image_size / patch_size;
  return g * g;
}

int ModelConfig::head_dim() const {
  return n_heads > 0 ? embed_dim / n_heads : 0;
}

void ModelConfig::validate() const {
  if (image_size <= 0) throw std::invalid_argument("image_size must be positive");
  if (channels <= 0) throw std::invalid_argument("channels must be positive");
  if (n_classes < 2) throw std::invalid_argument("n_classes must be at least 2");
  if (kind == ModelKind::QNN) {
    if (quanv_k < 1 || quanv_stride < 1) throw std::invalid_argument("quanv window/stride must be >= 1");
    if (quanv_k * quanv_k > kMaxQubits)
      throw std::invalid_argument("quanv window needs more qubits than the simulator supports");
    if (quanv_layers < 0) throw std::invalid_argument("quanv_layers must be >= 0");
    if (quanv_k > image_size) throw std::invalid_argument("quanv window larger than image");
    return;
  }
  if (patch_size <= 0 || image_size % patch_size != 0)
    throw std::invalid_argument("image_size must be a positive multiple of patch_size");
  if (embed_dim <= 0 || n_heads <= 0 || n_blocks < 1)
    throw std::invalid_argument("embed_dim, n_heads and n_blocks must be positive");
  if (kind == ModelKind::QMViT) {
    if (n_qubits < 1 || n_qubits > kMaxQubits)
      throw std::invalid_argument("n_qubits out of simulator range");
    if (n_layers < 0) throw std::invalid_argument("n_layers must be >= 0");
    if (embed_dim != n_heads * n_qubits)
      throw std::invalid_argument("embed_dim must equal n_heads * n_qubits");
  } else {
    if (embed_dim % n_heads != 0)
      throw std::invalid_argument("embed_dim must be divisible by n_heads");
  }
}

ModelConfig preset_config(ModelKind kind, int n_qubits, int n_layers) {
  ModelConfig c;
  c.kind = kind;
  c.image_size = 32;
  c.patch_size = 8;
  c.n_heads = 4;
  c.n_qubits = n_qubits;
  c.n_layers = n_layers;
  c.embed_dim = c.n_heads * n_qubits;
  c.n_blocks = 1;
  c.quanv_layers = n_layers;
  return c;
}

ModelConfig desk_config(ModelKind kind, int n_classes) {
  ModelConfig c;
  c.kind = kind;
  c.image_size = 16;
  c.patch_size = 4;
  c.n_heads = 2;
  c.n_qubits = 4;
  c.n_layers = 1;
  c.embed_dim = 8;
  c.n_blocks = 1;
  c.n_classes = n_classes;
  return c;
}

// ---- initialization ----

namespace {

Tensor draw_normal(std::mt19937_64& eng, std::vector<int> shape, double sigma) {
  Tensor t{std::move(shape)};
  std::normal_distribution<double> d(0.0, sigma);
  for (double& v : t.data) v = d(eng);
  return t;
}

Tensor draw_fan_in(std::mt19937_64& eng, int fan_in, std::vector<int> shape) {
  Tensor t{std::move(shape)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> d(-bound, bound);
  for (double& v : t.data) v = d(eng);
  return t;
}

Tensor draw_theta(std::mt19937_64& eng, int count) {
  Tensor t{{count}};
  std::uniform_real_distribution<double> d(-std::numbers::pi / 8.0, std::numbers::pi / 8.0);
  for (double& v : t.data) v = d(eng);
  return t;
}

Tensor ones(std::vector<int> shape) {
  Tensor t{std::move(shape)};
  for (double& v : t.data) v = 1.0;
  return t;
}

std::string block_name(int i, const std::string& rest) {
  return "block" + std::to_string(i) + "." + rest;
}

}  // namespace

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  head_spec_.n_qubits = cfg_.n_qubits;
  head_spec_.n_layers = cfg_.n_layers;
  head_spec_.entangler = AnsatzSpec::Entangler::CnotRing;
  head_spec_.initial_hadamard = false;
  mlp_spec_ = head_spec_;
  switch (cfg_.kind) {
    case ModelKind::QMViT: init_qmvit(seed); break;
    case ModelKind::ViT: init_vit(seed); break;
    case ModelKind::QNN: init_qnn(seed); break;
  }
}

void Model::init_qmvit(std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  const int e = cfg_.embed_dim, ps = cfg_.patch_size, ch = cfg_.channels;
  store_.add("embed.w", draw_normal(eng, {ps, ps, ch, e}, 0.02));
  store_.add("embed.b", Tensor{{e}});
  store_.add("cls", draw_normal(eng, {e}, 0.02));
  store_.add("pos", draw_normal(eng, {cfg_.seq_len(), e}, 0.02));
  const int p = param_count(head_spec_);
  for (int i = 0; i < cfg_.n_blocks; ++i) {
    store_.add(block_name(i, "ln1.g"), ones({e}));
    store_.add(block_name(i, "ln1.b"), Tensor{{e}});
    for (int h = 0; h < cfg_.n_heads; ++h) {
      const std::string hn = "head" + std::to_string(h);
      store_.add(block_name(i, hn + ".theta_q"), draw_theta(eng, p));
      store_.add(block_name(i, hn + ".theta_k"), draw_theta(eng, p));
      store_.add(block_name(i, hn + ".theta_v"), draw_theta(eng, p));
    }
    store_.add(block_name(i, "attn.w_o"), draw_fan_in(eng, e, {e, e}));
    store_.add(block_name(i, "ln2.g"), ones({e}));
    store_.add(block_name(i, "ln2.b"), Tensor{{e}});
    store_.add(block_name(i, "mlp.w_in"), draw_fan_in(eng, e, {e, cfg_.n_qubits}));
    store_.add(block_name(i, "mlp.b_in"), Tensor{{cfg_.n_qubits}});
    store_.add(block_name(i, "mlp.theta"), draw_theta(eng, p));
    store_.add(block_name(i, "mlp.w_out"), draw_fan_in(eng, cfg_.n_qubits, {cfg_.n_qubits, e}));
    store_.add(block_name(i, "mlp.b_out"), Tensor{{e}});
  }
  store_.add("final_ln.g", ones({e}));
  store_.add("final_ln.b", Tensor{{e}});
  store_.add("head.w", draw_fan_in(eng, e, {e, cfg_.n_classes}));
  store_.add("head.b", Tensor{{cfg_.n_classes}});
}

void Model::init_vit(std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  const int e = cfg_.embed_dim, ps = cfg_.patch_size, ch = cfg_.channels;
  const int dh = cfg_.head_dim(), hid = cfg_.ffn_width();
  store_.add("embed.w", draw_normal(eng, {ps, ps, ch, e}, 0.02));
  store_.add("embed.b", Tensor{{e}});
  store_.add("cls", draw_normal(eng, {e}, 0.02));
  store_.add("pos", draw_normal(eng, {cfg_.seq_len(), e}, 0.02));
  for (int i = 0; i < cfg_.n_blocks; ++i) {
    store_.add(block_name(i, "ln1.g"), ones({e}));
    store_.add(block_name(i, "ln1.b"), Tensor{{e}});
    for (int h = 0; h < cfg_.n_heads; ++h) {
      const std::string hn = "head" + std::to_string(h);
      store_.add(block_name(i, hn + ".w_q"), draw_fan_in(eng, dh, {dh, dh}));
      store_.add(block_name(i, hn + ".b_q"), Tensor{{dh}});
      store_.add(block_name(i, hn + ".w_k"), draw_fan_in(eng, dh, {dh, dh}));
      store_.add(block_name(i, hn + ".b_k"), Tensor{{dh}});
      store_.add(block_name(i, hn + ".w_v"), draw_fan_in(eng, dh, {dh, dh}));
      store_.add(block_name(i, hn + ".b_v"), Tensor{{dh}});
    }
    store_.add(block_name(i, "attn.w_o"), draw_fan_in(eng, e, {e, e}));
    store_.add(block_name(i, "attn.b_o"), Tensor{{e}});
    store_.add(block_name(i, "ln2.g"), ones({e}));
    store_.add(block_name(i, "ln2.b"), Tensor{{e}});
    store_.add(block_name(i, "ffn.w1"), draw_fan_in(eng, e, {e, hid}));
    store_.add(block_name(i, "ffn.b1"), Tensor{{hid}});
    store_.add(block_name(i, "ffn.w2"), draw_fan_in(eng, hid, {hid, e}));
    store_.add(block_name(i, "ffn.b2"), Tensor{{e}});
  }
  store_.add("final_ln.g", ones({e}));
  store_.add("final_ln.b", Tensor{{e}});
  store_.add("head.w", draw_fan_in(eng, e, {e, cfg_.n_classes}));
  store_.add("head.b", Tensor{{cfg_.n_classes}});
}

void Model::init_qnn(std::uint64_t seed) {
  quanv_spec_ = make_quanv_spec(cfg_.quanv_k, cfg_.quanv_stride, cfg_.quanv_layers, seed);
  quanv_spec_.trainable = cfg_.quanv_trainable;
  std::mt19937_64 eng(seed);
  const int fc = cfg_.quanv_k * cfg_.quanv_k;  // one readout channel per window qubit
  Tensor theta{{param_count(quanv_spec_.circuit)}};
  theta.data = quanv_spec_.theta;
  store_.add("quanv.theta", std::move(theta), cfg_.quanv_trainable);
  store_.add("head.w", draw_fan_in(eng, fc, {fc, cfg_.n_classes}));
  store_.add("head.b", Tensor{{cfg_.n_classes}});
}

// ---- forward graphs ----

std::vector<Tape::NodeId> Model::bind(Tape& t, bool requires_grad) const {
  std::vector<Tape::NodeId> ids;
  ids.reserve(static_cast<std::size_t>(store_.size()));
  for (int i = 0; i < store_.size(); ++i) {
    const NamedParam& p = store_.at(i);
    ids.push_back(t.leaf(p.value, requires_grad && p.trainable));
  }
  return ids;
}

Tape::NodeId Model::node_of(const std::vector<Tape::NodeId>& p, const std::string& name) const {
  return p.at(static_cast<std::size_t>(store_.index_of(name)));
}

Tape::NodeId Model::embed_tokens(Tape& t, const std::vector<Tape::NodeId>& p,
                                 const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != cfg_.image_size || image.dim(1) != cfg_.image_size ||
      image.dim(2) != cfg_.channels)
    throw std::invalid_argument("image shape does not match model configuration");
  Tape::NodeId x = t.leaf(image, false);
  Tape::NodeId grid = t.conv2d_op(x, node_of(p, "embed.w"), node_of(p, "embed.b"), cfg_.patch_size);
  Tape::NodeId patches = t.reshape(grid, {cfg_.num_patches(), cfg_.embed_dim});
  Tape::NodeId tokens = t.prepend_row(node_of(p, "cls"), patches);
  return t.add(tokens, node_of(p, "pos"));
}

Tape::NodeId Model::logits(Tape& t, const std::vector<Tape::NodeId>& p, const Tensor& image) const {
  switch (cfg_.kind) {
    case ModelKind::QMViT: return logits_qmvit(t, p, image);
    case ModelKind::ViT: return logits_vit(t, p, image);
    case ModelKind::QNN: return logits_qnn(t, p, image);
  }
  throw std::invalid_argument("bad model kind");
}

Tape::NodeId Model::logits_qmvit(Tape& t, const std::vector<Tape::NodeId>& p,
                                 const Tensor& image) const {
  Tape::NodeId x = embed_tokens(t, p, image);
  for (int i = 0; i < cfg_.n_blocks; ++i) {
    // bounded pre-attention activations double as rotation angles downstream
    Tape::NodeId a_in =
        t.tanh_pi_op(t.layer_norm_op(x, node_of(p, block_name(i, "ln1.g")),
                                     node_of(p, block_name(i, "ln1.b"))));
    std::vector<HeadNodes> heads;
    heads.reserve(static_cast<std::size_t>(cfg_.n_heads));
    for (int h = 0; h < cfg_.n_heads; ++h) {
      const std::string hn = "head" + std::to_string(h);
      heads.push_back(HeadNodes{node_of(p, block_name(i, hn + ".theta_q")),
                                node_of(p, block_name(i, hn + ".theta_k")),
                                node_of(p, block_name(i, hn + ".theta_v"))});
    }
    Tape::NodeId attn = multi_head_op(t, a_in, heads, head_spec_,
                                      node_of(p, block_name(i, "attn.w_o")));
    x = t.add(x, attn);
    Tape::NodeId m_in = t.layer_norm_op(x, node_of(p, block_name(i, "ln2.g")),
                                        node_of(p, block_name(i, "ln2.b")));
    Tape::NodeId mlp = quantum_mlp_rows_op(
        t, m_in, node_of(p, block_name(i, "mlp.w_in")), node_of(p, block_name(i, "mlp.b_in")),
        node_of(p, block_name(i, "mlp.theta")), mlp_spec_, node_of(p, block_name(i, "mlp.w_out")),
        node_of(p, block_name(i, "mlp.b_out")));
    x = t.add(x, mlp);
  }
  Tape::NodeId xf = t.layer_norm_op(x, node_of(p, "final_ln.g"), node_of(p, "final_ln.b"));
  Tape::NodeId cls = t.reshape(t.take_row(xf, 0), {1, cfg_.embed_dim});
  Tape::NodeId lg = t.linear(cls, node_of(p, "head.w"), node_of(p, "head.b"));
  return t.reshape(lg, {cfg_.n_classes});
}

Tape::NodeId Model::logits_vit(Tape& t, const std::vector<Tape::NodeId>& p,
                               const Tensor& image) const {
  const int dh = cfg_.head_dim();
  Tape::NodeId x = embed_tokens(t, p, image);
  for (int i = 0; i < cfg_.n_blocks; ++i) {
    Tape::NodeId a = t.layer_norm_op(x, node_of(p, block_name(i, "ln1.g")),
                                     node_of(p, block_name(i, "ln1.b")));
    std::vector<Tape::NodeId> outs;
    outs.reserve(static_cast<std::size_t>(cfg_.n_heads));
    for (int h = 0; h < cfg_.n_heads; ++h) {
      const std::string hn = "head" + std::to_string(h);
      Tape::NodeId xh = t.slice_cols(a, h * dh, dh);
      Tape::NodeId q = t.linear(xh, node_of(p, block_name(i, hn + ".w_q")),
                                node_of(p, block_name(i, hn + ".b_q")));
      Tape::NodeId k = t.linear(xh, node_of(p, block_name(i, hn + ".w_k")),
                                node_of(p, block_name(i, hn + ".b_k")));
      Tape::NodeId v = t.linear(xh, node_of(p, block_name(i, hn + ".w_v")),
                                node_of(p, block_name(i, hn + ".b_v")));
      outs.push_back(t.classical_attention_op(q, k, v));
    }
    Tape::NodeId attn = t.linear(t.concat_cols(outs), node_of(p, block_name(i, "attn.w_o")),
                                 node_of(p, block_name(i, "attn.b_o")));
    x = t.add(x, attn);
    Tape::NodeId m = t.layer_norm_op(x, node_of(p, block_name(i, "ln2.g")),
                                     node_of(p, block_name(i, "ln2.b")));
    Tape::NodeId f = t.linear(t.gelu_op(t.linear(m, node_of(p, block_name(i, "ffn.w1")),
                                                 node_of(p, block_name(i, "ffn.b1")))),
                              node_of(p, block_name(i, "ffn.w2")),
                              node_of(p, block_name(i, "ffn.b2")));
    x = t.add(x, f);
  }
  Tape::NodeId xf = t.layer_norm_op(x, node_of(p, "final_ln.g"), node_of(p, "final_ln.b"));
  Tape::NodeId cls = t.reshape(t.take_row(xf, 0), {1, cfg_.embed_dim});
  Tape::NodeId lg = t.linear(cls, node_of(p, "head.w"), node_of(p, "head.b"));
  return t.reshape(lg, {cfg_.n_classes});
}

Tape::NodeId Model::logits_qnn(Tape& t, const std::vector<Tape::NodeId>& p,
                               const Tensor& image) const {
  if (image.rank() != 3) throw std::invalid_argument("qnn expects an (H,W,C) image");
  Tensor plane = channel_mean_plane(image);
  Tape::NodeId pl = t.leaf(plane, false);
  // the op reads the parameter vector from the tape node, so the spec's own
  // seed-time theta only fixes the circuit layout
  Tape::NodeId fm = quanv_layer_op(t, pl, node_of(p, "quanv.theta"), quanv_spec_);
  Tape::NodeId pooled = t.global_average_pool_op(fm);
  Tape::NodeId row = t.reshape(pooled, {1, cfg_.quanv_k * cfg_.quanv_k});
  Tape::NodeId lg = t.linear(row, node_of(p, "head.w"), node_of(p, "head.b"));
  return t.reshape(lg, {cfg_.n_classes});
}

std::vector<double> Model::predict_logits(const Tensor& image) const {
  Tape t;
  std::vector<Tape::NodeId> p = bind(t, false);
  Tape::NodeId lg = logits(t, p, image);
  return t.value(lg).data;
}

}  // namespace qmvit
