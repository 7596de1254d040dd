// Command-line front end: train / eval / predict / make-toyset /
// export-circuit. Exit codes: 0 success, 2 I/O failure, 3 invalid
// configuration or usage, 4 numeric divergence.
#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qmvit/data.hpp"
#include "qmvit/train.hpp"

namespace {

using qmvit::RunConfig;
using qmvit::RunError;

// every RunConfig key doubles as a --key override; applied in this order
// after the config file so the outcome does not depend on argv ordering
const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "model",         "image_size",      "patch_size",     "channels",
      "n_classes",     "embed_dim",       "n_heads",        "n_blocks",
      "n_qubits",      "n_layers",        "ffn_hidden",     "quanv_k",
      "quanv_stride",  "quanv_layers",    "quanv_trainable", "epochs",
      "batch_size",    "lr",              "seed",           "val_fraction",
      "threads",       "augment",         "max_rotation_deg", "sharpness_prob",
      "sharpness_factor", "manifest",     "out_dir"};
  return keys;
}

struct ConfigArgs {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void attach_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config_file, "flat key = value configuration file");
  for (const std::string& key : config_keys()) {
    args.options[key] =
        cmd->add_option("--" + key, args.values[key], "override config key '" + key + "'");
  }
}

RunConfig resolve_config(const ConfigArgs& args) {
  RunConfig cfg;
  if (!args.config_file.empty()) cfg = qmvit::load_config_file(args.config_file);
  for (const std::string& key : config_keys()) {
    const CLI::Option* opt = args.options.at(key);
    if (opt->count() > 0) qmvit::apply_config_kv(cfg, key, args.values.at(key));
  }
  return cfg;
}

int run_train(const ConfigArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const qmvit::TrainOutcome out = qmvit::train_run(cfg);
  std::printf("checkpoint: %s\n", out.checkpoint_path.c_str());
  std::printf("loss_curve: %s\n", out.loss_curve_path.c_str());
  std::printf("metrics: %s\n", out.metrics_path.c_str());
  std::printf("final_train_loss: %.17g\n", out.final_train_loss);
  std::printf("final_val_loss: %.17g\n", out.final_val_loss);
  std::printf("final_val_accuracy: %.17g\n", out.final_val_accuracy);
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& manifest, const std::string& out_dir,
             int threads) {
  const qmvit::EvalOutcome out = qmvit::eval_run(checkpoint, manifest, out_dir, threads);
  std::printf("n_samples: %lld\n", out.n_samples);
  std::printf("loss: %.17g\n", out.loss);
  std::printf("accuracy: %.17g\n", out.report.accuracy);
  std::printf("edibility_accuracy: %.17g\n", out.edibility.edibility_accuracy);
  if (!out.metrics_path.empty()) std::printf("metrics: %s\n", out.metrics_path.c_str());
  if (!out.confusion_path.empty()) std::printf("confusion: %s\n", out.confusion_path.c_str());
  return 0;
}

int run_predict(const std::string& checkpoint, const std::string& image) {
  const qmvit::PredictOutcome out = qmvit::predict_run(checkpoint, image);
  nlohmann::ordered_json j;
  j["class_id"] = out.class_id;
  j["probabilities"] = out.probs;
  j["edible"] = out.edible;
  std::cout << j.dump() << "\n";
  return 0;
}

int run_make_toyset(std::uint64_t seed, int classes, int per_class, int size,
                    const std::string& out_dir) {
  try {
    qmvit::Toyset ts = qmvit::synthetic_toyset(seed, classes, per_class, size);
    const std::string manifest = qmvit::write_toyset(out_dir, ts);
    std::printf("manifest: %s\n", manifest.c_str());
    std::printf("images: %d\n", static_cast<int>(ts.records.size()));
    return 0;
  } catch (const std::invalid_argument& e) {
    throw RunError(3, e.what());
  } catch (const std::runtime_error& e) {
    throw RunError(2, e.what());
  }
}

int run_export_circuit(const ConfigArgs& args) {
  const RunConfig cfg = resolve_config(args);
  std::cout << qmvit::export_circuit_text(cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid quantum-classical image classifier"};
  app.require_subcommand(1);

  ConfigArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write a run directory");
  attach_config_options(train_cmd, train_args);

  std::string eval_checkpoint, eval_manifest, eval_out;
  int eval_threads = 1;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint against a manifest");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "trained checkpoint")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "dataset manifest CSV")->required();
  eval_cmd->add_option("--out", eval_out, "directory for metrics.json / confusion.csv");
  eval_cmd->add_option("--threads", eval_threads, "worker threads");

  std::string pred_checkpoint, pred_image;
  CLI::App* pred_cmd = app.add_subcommand("predict", "classify one PPM image, JSON on stdout");
  pred_cmd->add_option("--checkpoint", pred_checkpoint, "trained checkpoint")->required();
  pred_cmd->add_option("--image", pred_image, "PPM image path")->required();

  std::uint64_t toy_seed = 7;
  int toy_classes = 4, toy_per_class = 64, toy_size = 16;
  std::string toy_out;
  CLI::App* toy_cmd = app.add_subcommand("make-toyset", "write a synthetic labeled dataset");
  toy_cmd->add_option("--out", toy_out, "output directory")->required();
  toy_cmd->add_option("--seed", toy_seed, "generator seed");
  toy_cmd->add_option("--classes", toy_classes, "number of classes (2-8)");
  toy_cmd->add_option("--per-class", toy_per_class, "images per class");
  toy_cmd->add_option("--size", toy_size, "square image size in pixels");

  ConfigArgs export_args;
  CLI::App* export_cmd =
      app.add_subcommand("export-circuit", "print the configured loader + ansatz gate listing");
  attach_config_options(export_cmd, export_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;  // usage problems are configuration errors
  }

  try {
    if (train_cmd->parsed()) return run_train(train_args);
    if (eval_cmd->parsed()) return run_eval(eval_checkpoint, eval_manifest, eval_out, eval_threads);
    if (pred_cmd->parsed()) return run_predict(pred_checkpoint, pred_image);
    if (toy_cmd->parsed())
      return run_make_toyset(toy_seed, toy_classes, toy_per_class, toy_size, toy_out);
    if (export_cmd->parsed()) return run_export_circuit(export_args);
  } catch (const RunError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 3;
}
