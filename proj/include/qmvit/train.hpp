#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qmvit/data.hpp"
#include "qmvit/metrics.hpp"
#include "qmvit/model.hpp"

namespace qmvit {

// Driver failure with a process exit code attached:
//   2 = I/O (datasets, images, checkpoints, output files)
//   3 = invalid configuration
//   4 = numeric divergence (non-finite loss)
class RunError : public std::runtime_error {
 public:
  RunError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

// Flat run configuration. Everything here round-trips through the
// `key = value` echo stored in run directories and checkpoints.
struct RunConfig {
  std::string model = "qmvit";
  // geometry / architecture (ModelConfig fields)
  int image_size = 32;
  int patch_size = 8;
  int channels = 3;
  int n_classes = 0;  // 0 = infer from the training manifest
  int embed_dim = 0;  // 0 = n_heads * n_qubits
  int n_heads = 4;
  int n_blocks = 1;
  int n_qubits = 4;
  int n_layers = 1;
  int ffn_hidden = 0;
  int quanv_k = 2;
  int quanv_stride = 2;
  int quanv_layers = 1;
  bool quanv_trainable = true;
  // optimization
  int epochs = 10;
  int batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 42;
  double val_fraction = 0.2;
  int threads = 1;
  // augmentation (train split only)
  bool augment = false;
  double max_rotation_deg = 20.0;
  double sharpness_prob = 0.5;
  double sharpness_factor = 2.0;
  // paths
  std::string manifest;
  std::string out_dir = "run";

  void validate() const;            // throws RunError(3)
  ModelConfig model_config() const;  // resolves derived fields; throws RunError(3)
};

// One `key = value` per line, fixed key order; parse accepts blank lines and
// `#` comments. Unknown keys or malformed values throw RunError(3).
std::string config_echo(const RunConfig& cfg);
void apply_config_line(RunConfig& cfg, const std::string& line, const std::string& where);
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);
RunConfig parse_config_text(const std::string& text, const std::string& where);
RunConfig load_config_file(const std::string& path);  // RunError(2) if unreadable

// ---- checkpoints ----
struct Checkpoint {
  RunConfig config;                                   // echo of the training config
  std::uint64_t seed = 0;                             // config.seed, kept for the header
  std::vector<std::pair<std::string, Tensor>> arrays;  // params + stats, fixed order
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);  // RunError(2)
Checkpoint load_checkpoint(const std::string& path);                  // RunError(2)

// Rebuilds the model (and its preprocessing stats / edibility map) from a
// loaded checkpoint. Throws RunError(2) on shape or name mismatches.
struct RestoredModel {
  Model model;
  NormStats stats;
  std::vector<bool> edible_map;
};
RestoredModel restore_model(const Checkpoint& ck);

// ---- drivers ----
struct TrainOutcome {
  double final_train_loss = 0.0;
  double final_val_loss = 0.0;
  double final_val_accuracy = 0.0;
  std::string checkpoint_path;
  std::string loss_curve_path;
  std::string metrics_path;
  std::string confusion_path;
  std::string config_path;
};
TrainOutcome train_run(const RunConfig& cfg);

struct EvalOutcome {
  double loss = 0.0;
  MetricReport report;
  EdibilityReport edibility;
  long long n_samples = 0;
  std::string metrics_path;
  std::string confusion_path;
};
EvalOutcome eval_run(const std::string& checkpoint_path, const std::string& manifest_path,
                     const std::string& out_dir, int threads);

struct PredictOutcome {
  int class_id = 0;
  std::vector<double> probs;
  bool edible = false;
};
PredictOutcome predict_run(const std::string& checkpoint_path, const std::string& image_path);

// Gate listing for the configured loader + ansatz: the loader's fixed
// Hadamard column (rotation angles are data, not structure), then the seeded
// variational layers. Round-trips through circuit_from_text.
std::string export_circuit_text(const RunConfig& cfg);

}  // namespace qmvit
