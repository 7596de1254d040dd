#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "qmvit/nn.hpp"
#include "qmvit/pqc.hpp"
#include "qmvit/quanvolution.hpp"
#include "qmvit/tape.hpp"
#include "qmvit/tensor.hpp"

namespace qmvit {

// ---- parameter store ----
// Named tensors in a fixed insertion order. Iteration, optimizer updates and
// checkpoint serialization all walk the same order, so two runs that create
// parameters identically stay bit-for-bit in lockstep.
struct NamedParam {
  std::string name;
  Tensor value;
  AdamState adam;
  bool trainable = true;
};

class ParamStore {
 public:
  int add(const std::string& name, Tensor value, bool trainable = true);
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  int index_of(const std::string& name) const;  // throws if missing
  NamedParam& at(int i) { return params_.at(static_cast<std::size_t>(i)); }
  const NamedParam& at(int i) const { return params_.at(static_cast<std::size_t>(i)); }
  NamedParam& named(const std::string& name) { return at(index_of(name)); }
  const NamedParam& named(const std::string& name) const { return at(index_of(name)); }
  int size() const { return static_cast<int>(params_.size()); }
  long long scalar_count() const;

 private:
  std::vector<NamedParam> params_;
  std::unordered_map<std::string, int> index_;
};

// ---- model configuration ----
enum class ModelKind { QMViT, ViT, QNN };

std::string model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& s);  // throws on unknown

struct ModelConfig {
  ModelKind kind = ModelKind::QMViT;
  int image_size = 32;
  int patch_size = 8;
  int channels = 3;
  int n_classes = 4;
  // transformer shape (qmvit + vit); for qmvit embed_dim must equal
  // n_heads * n_qubits, for vit embed_dim must be divisible by n_heads
  int embed_dim = 16;
  int n_heads = 4;
  int n_blocks = 1;
  // quantum circuit shape (qmvit heads + mlp)
  int n_qubits = 4;
  int n_layers = 1;
  // classical feed-forward width (vit); 0 means 4 * embed_dim
  int ffn_hidden = 0;
  // quanvolutional baseline
  int quanv_k = 2;
  int quanv_stride = 2;
  int quanv_layers = 1;
  bool quanv_trainable = true;

  int num_patches() const;
  int seq_len() const { return num_patches() + 1; }  // + class token
  int head_dim() const;
  int ffn_width() const { return ffn_hidden > 0 ? ffn_hidden : 4 * embed_dim; }
  void validate() const;  // throws std::invalid_argument
};

// Named presets covering the benchmarked grid: qubits x circuit layers in
// {4,8} x {1,2} at image 32 / patch 8, plus a small "desk" variant for quick
// local runs (image 16 / patch 4, two 4-qubit heads).
ModelConfig preset_config(ModelKind kind, int n_qubits, int n_layers);
ModelConfig desk_config(ModelKind kind, int n_classes);

// ---- model ----
// Owns the parameters; forward() rebuilds the graph on a caller-provided tape
// each call so per-sample tapes stay independent (and trivially parallel).
class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const AnsatzSpec& head_ansatz() const { return head_spec_; }

  // Registers every parameter as a leaf on `t` (in store order) and returns
  // the node ids, index-aligned with the store.
  std::vector<Tape::NodeId> bind(Tape& t, bool requires_grad) const;

  // Builds the forward graph for one preprocessed image (H,W,C) and returns
  // the logits node of shape (n_classes).
  Tape::NodeId logits(Tape& t, const std::vector<Tape::NodeId>& p, const Tensor& image) const;

  // Convenience: forward pass without gradients.
  std::vector<double> predict_logits(const Tensor& image) const;

 private:
  void init_qmvit(std::uint64_t seed);
  void init_vit(std::uint64_t seed);
  void init_qnn(std::uint64_t seed);
  Tape::NodeId logits_qmvit(Tape& t, const std::vector<Tape::NodeId>& p, const Tensor& image) const;
  Tape::NodeId logits_vit(Tape& t, const std::vector<Tape::NodeId>& p, const Tensor& image) const;
  Tape::NodeId logits_qnn(Tape& t, const std::vector<Tape::NodeId>& p, const Tensor& image) const;
  Tape::NodeId embed_tokens(Tape& t, const std::vector<Tape::NodeId>& p,
                            const Tensor& image) const;  // patches + cls + pos
  Tape::NodeId node_of(const std::vector<Tape::NodeId>& p, const std::string& name) const;

  ModelConfig cfg_;
  ParamStore store_;
  AnsatzSpec head_spec_;   // per-head circuit (qmvit)
  AnsatzSpec mlp_spec_;    // token-mixing circuit of the quantum feed-forward
  QuanvSpec quanv_spec_;   // qnn baseline
};

}  // namespace qmvit
