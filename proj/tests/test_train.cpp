#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "qmvit/data.hpp"
#include "qmvit/qsim.hpp"
#include "qmvit/train.hpp"

using namespace qmvit;

namespace {

std::filesystem::path fresh_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("qmvit_train_" + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// tiny dataset on disk: 2 classes x 8 images, 8x8 pixels
std::string tiny_manifest(const std::string& tag, int classes = 2, int per_class = 8,
                          int size = 8) {
  auto dir = fresh_dir(tag);
  Toyset ts = synthetic_toyset(123, classes, per_class, size);
  return write_toyset(dir.string(), ts);
}

RunConfig tiny_vit_config(const std::string& manifest, const std::string& out_dir) {
  RunConfig cfg;
  cfg.model = "vit";
  cfg.image_size = 8;
  cfg.patch_size = 4;
  cfg.embed_dim = 4;
  cfg.n_heads = 2;
  cfg.n_blocks = 1;
  cfg.ffn_hidden = 8;
  cfg.epochs = 2;
  cfg.batch_size = 5;
  cfg.lr = 1e-2;
  cfg.seed = 9;
  cfg.val_fraction = 0.25;
  cfg.manifest = manifest;
  cfg.out_dir = out_dir;
  return cfg;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("config echo round-trips through the parser") {
  RunConfig cfg;
  cfg.model = "qnn";
  cfg.image_size = 24;
  cfg.lr = 0.00012345678901234567;
  cfg.seed = 18446744073709551615ULL;  // max u64 survives
  cfg.augment = true;
  cfg.manifest = "data/some manifest.csv";
  const std::string echo = config_echo(cfg);
  const RunConfig back = parse_config_text(echo, "mem");
  CHECK(config_echo(back) == echo);
  CHECK(back.lr == cfg.lr);
  CHECK(back.seed == cfg.seed);
  CHECK(back.manifest == cfg.manifest);
}

TEST_CASE("config parser accepts comments and rejects junk") {
  RunConfig cfg = parse_config_text("# comment\n\n  epochs = 3 \nmodel=vit\n", "mem");
  CHECK(cfg.epochs == 3);
  CHECK(cfg.model == "vit");

  CHECK_THROWS_AS(parse_config_text("nonsense-line\n", "mem"), RunError);
  CHECK_THROWS_AS(parse_config_text("bogus_key = 1\n", "mem"), RunError);
  CHECK_THROWS_AS(parse_config_text("epochs = soon\n", "mem"), RunError);
  try {
    parse_config_text("bogus_key = 1\n", "mem");
  } catch (const RunError& e) {
    CHECK(e.code() == 3);
  }
}

TEST_CASE("run configuration validation codes") {
  RunConfig cfg;
  cfg.model = "cnn";
  CHECK_THROWS_AS(cfg.validate(), RunError);
  cfg.model = "qmvit";
  cfg.val_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), RunError);
  cfg.val_fraction = 0.2;
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), RunError);
  cfg.lr = 1e-3;
  CHECK_NOTHROW(cfg.validate());

  // embed/head/qubit mismatch surfaces as a config error (exit 3)
  cfg.embed_dim = 10;
  cfg.n_classes = 4;
  try {
    (void)cfg.model_config();
    CHECK(false);
  } catch (const RunError& e) {
    CHECK(e.code() == 3);
  }
}

TEST_CASE("checkpoint round trip is bit-identical") {
  auto dir = fresh_dir("ckpt");
  Checkpoint ck;
  ck.config.model = "vit";
  ck.config.n_classes = 3;
  ck.seed = 77;
  Tensor a{{2, 3}};
  for (int i = 0; i < a.numel(); ++i) a[i] = 0.1 * i - 0.3;
  Tensor b{{4}};
  for (int i = 0; i < b.numel(); ++i) b[i] = -1.5 + i;
  ck.arrays.emplace_back("first", a);
  ck.arrays.emplace_back("second", b);

  const std::string p1 = (dir / "a.bin").string();
  const std::string p2 = (dir / "b.bin").string();
  save_checkpoint(p1, ck);
  const Checkpoint back = load_checkpoint(p1);
  CHECK(back.seed == 77);
  CHECK(back.config.model == "vit");
  REQUIRE(back.arrays.size() == 2);
  CHECK(back.arrays[0].first == "first");
  CHECK(back.arrays[0].second.shape == std::vector<int>{2, 3});
  for (int i = 0; i < a.numel(); ++i) CHECK(back.arrays[0].second[i] == a[i]);
  save_checkpoint(p2, back);
  CHECK(slurp(p1) == slurp(p2));

  // corruption is an I/O error (exit 2)
  std::ofstream bad((dir / "bad.bin").string(), std::ios::binary);
  bad << "NOTAMAGIC and then some";
  bad.close();
  try {
    (void)load_checkpoint((dir / "bad.bin").string());
    CHECK(false);
  } catch (const RunError& e) {
    CHECK(e.code() == 2);
  }
  try {
    (void)load_checkpoint((dir / "missing.bin").string());
    CHECK(false);
  } catch (const RunError& e) {
    CHECK(e.code() == 2);
  }
}

TEST_CASE("zero-epoch training writes the initial parameters and a bare curve") {
  const std::string manifest = tiny_manifest("zero_data");
  auto out = fresh_dir("zero_run");
  RunConfig cfg = tiny_vit_config(manifest, out.string());
  cfg.epochs = 0;
  const TrainOutcome res = train_run(cfg);

  CHECK(slurp(res.loss_curve_path) == "epoch,train_loss,val_loss,val_accuracy\n");

  const Checkpoint ck = load_checkpoint(res.checkpoint_path);
  RestoredModel rm = restore_model(ck);
  // a freshly-built model with the stored config + seed matches exactly
  Model fresh(rm.model.config(), mix_seed(cfg.seed, 0x0DE1, 0));
  REQUIRE(fresh.params().size() == rm.model.params().size());
  for (int i = 0; i < fresh.params().size(); ++i) {
    const Tensor& fa = fresh.params().at(i).value;
    const Tensor& fb = rm.model.params().at(i).value;
    REQUIRE(fa.numel() == fb.numel());
    for (int j = 0; j < fa.numel(); ++j) CHECK(fa[j] == fb[j]);
  }
  // run directory is complete
  CHECK(std::filesystem::exists(res.config_path));
  CHECK(std::filesystem::exists(res.metrics_path));
  CHECK(std::filesystem::exists(res.confusion_path));
}

TEST_CASE("training is deterministic across repeats and thread counts") {
  const std::string manifest = tiny_manifest("det_data");
  auto o1 = fresh_dir("det_run1");
  auto o2 = fresh_dir("det_run2");
  auto o3 = fresh_dir("det_run3");

  RunConfig c1 = tiny_vit_config(manifest, o1.string());
  RunConfig c2 = tiny_vit_config(manifest, o2.string());
  RunConfig c3 = tiny_vit_config(manifest, o3.string());
  c3.threads = 4;  // uneven split over batches of 5

  const TrainOutcome r1 = train_run(c1);
  const TrainOutcome r2 = train_run(c2);
  const TrainOutcome r3 = train_run(c3);

  CHECK(slurp(r1.checkpoint_path) == slurp(r2.checkpoint_path));
  CHECK(slurp(r1.metrics_path) == slurp(r2.metrics_path));
  CHECK(slurp(r1.loss_curve_path) == slurp(r2.loss_curve_path));
  // thread count must not change a single byte (out_dir differs only)
  CHECK(slurp(r1.checkpoint_path) == slurp(r3.checkpoint_path));
  CHECK(slurp(r1.metrics_path) == slurp(r3.metrics_path));
  CHECK(slurp(r1.loss_curve_path) == slurp(r3.loss_curve_path));

  CHECK(count_lines(slurp(r1.loss_curve_path)) == 3);  // header + 2 epochs
}

TEST_CASE("evaluating the training manifest reproduces the final report") {
  const std::string manifest = tiny_manifest("eval_data");
  auto o1 = fresh_dir("eval_run");
  RunConfig cfg = tiny_vit_config(manifest, o1.string());
  cfg.val_fraction = 0.0;  // final metrics cover the whole manifest
  const TrainOutcome tr = train_run(cfg);

  auto o2 = fresh_dir("eval_out");
  const EvalOutcome ev = eval_run(tr.checkpoint_path, manifest, o2.string(), 2);
  CHECK(std::abs(ev.loss - tr.final_val_loss) <= 1e-12);
  CHECK(std::abs(ev.report.accuracy - tr.final_val_accuracy) <= 1e-12);
  CHECK(ev.edibility.edibility_accuracy >= ev.edibility.species_accuracy);
  CHECK(slurp(tr.metrics_path) == slurp(ev.metrics_path));
  CHECK(slurp(tr.confusion_path) == slurp(ev.confusion_path));

  // confusion row sums equal per-class sample counts (8 per class here)
  std::istringstream csv(slurp(ev.confusion_path));
  std::string line;
  std::getline(csv, line);  // header
  while (std::getline(csv, line)) {
    long long sum = 0;
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');  // class name
    while (std::getline(row, cell, ',')) sum += std::stoll(cell);
    CHECK(sum == 8);
  }
}

TEST_CASE("prediction emits a distribution and breaks ties toward low ids") {
  const std::string manifest = tiny_manifest("pred_data");
  auto o1 = fresh_dir("pred_run");
  RunConfig cfg = tiny_vit_config(manifest, o1.string());
  cfg.epochs = 1;
  const TrainOutcome tr = train_run(cfg);

  // predict one of the manifest's own images
  const Manifest man = read_manifest(manifest);
  const PredictOutcome pr = predict_run(tr.checkpoint_path, man.records[0].image_path);
  REQUIRE(pr.probs.size() == 2);
  double sum = 0;
  for (double v : pr.probs) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(std::abs(sum - 1.0) <= 1e-6);
  CHECK(pr.class_id >= 0);
  CHECK(pr.class_id < 2);

  // zero the readout head: all logits tie, the argmax must return class 0
  Checkpoint ck = load_checkpoint(tr.checkpoint_path);
  for (auto& [name, tensor] : ck.arrays)
    if (name == "head.w" || name == "head.b")
      for (double& v : tensor.data) v = 0.0;
  const std::string tied = (o1 / "tied.bin").string();
  save_checkpoint(tied, ck);
  const PredictOutcome tie = predict_run(tied, man.records[5].image_path);
  CHECK(tie.class_id == 0);
  CHECK(tie.probs[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("divergent training reports a numeric error") {
  const std::string manifest = tiny_manifest("nan_data");
  auto o1 = fresh_dir("nan_run");
  RunConfig cfg = tiny_vit_config(manifest, o1.string());
  cfg.lr = 1e308;  // first step hurls the parameters to +-inf
  cfg.epochs = 2;
  try {
    (void)train_run(cfg);
    CHECK(false);
  } catch (const RunError& e) {
    CHECK(e.code() == 4);
  }
}

TEST_CASE("missing manifest and class undercount map to the right codes") {
  auto o1 = fresh_dir("err_run");
  RunConfig cfg = tiny_vit_config("/nonexistent/manifest.csv", o1.string());
  try {
    (void)train_run(cfg);
    CHECK(false);
  } catch (const RunError& e) {
    CHECK(e.code() == 2);
  }

  const std::string manifest = tiny_manifest("err_data");
  RunConfig cfg2 = tiny_vit_config(manifest, o1.string());
  cfg2.n_classes = 1;  // fewer than the manifest's two species
  try {
    (void)train_run(cfg2);
    CHECK(false);
  } catch (const RunError& e) {
    CHECK(e.code() == 3);
  }
}

TEST_CASE("hybrid and quanvolutional models run the same driver") {
  const std::string manifest = tiny_manifest("small_mix", 2, 4, 8);

  auto oq = fresh_dir("mix_qmvit");
  RunConfig qc;
  qc.model = "qmvit";
  qc.image_size = 8;
  qc.patch_size = 4;
  qc.n_heads = 1;
  qc.n_qubits = 4;
  qc.n_layers = 1;
  qc.embed_dim = 4;
  qc.epochs = 1;
  qc.batch_size = 8;
  qc.seed = 3;
  qc.val_fraction = 0.25;
  qc.manifest = manifest;
  qc.out_dir = oq.string();
  const TrainOutcome rq = train_run(qc);
  CHECK(std::filesystem::exists(rq.checkpoint_path));
  CHECK(count_lines(slurp(rq.loss_curve_path)) == 2);

  auto on = fresh_dir("mix_qnn");
  RunConfig nc;
  nc.model = "qnn";
  nc.image_size = 8;
  nc.epochs = 1;
  nc.batch_size = 8;
  nc.seed = 3;
  nc.val_fraction = 0.25;
  nc.manifest = manifest;
  nc.out_dir = on.string();
  const TrainOutcome rn = train_run(nc);
  const Checkpoint ck = load_checkpoint(rn.checkpoint_path);
  RestoredModel rm = restore_model(ck);
  CHECK(rm.model.config().kind == ModelKind::QNN);
  CHECK(rm.edible_map.size() == 2);
}

TEST_CASE("circuit export lists the loader column then the variational gates") {
  RunConfig cfg;
  cfg.model = "qmvit";
  cfg.n_qubits = 4;
  cfg.n_layers = 1;
  const std::string text = export_circuit_text(cfg);

  int h = 0, rx = 0, cnot = 0, lines = 0;
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> kinds;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++lines;
    const std::string kind = line.substr(0, line.find(' '));
    kinds.push_back(kind);
    if (kind == "H") ++h;
    else if (kind == "RX") ++rx;
    else if (kind == "CNOT") ++cnot;
  }
  CHECK(h == 4);
  CHECK(rx == 4);
  CHECK(cnot == 4);
  CHECK(lines == 12);
  // loader first, then the layer's rotations, then the entangler ring
  for (int i = 0; i < 4; ++i) CHECK(kinds[static_cast<std::size_t>(i)] == "H");

  // the listing re-parses into an identical circuit
  const Circuit parsed = circuit_from_text(text, 4);
  CHECK(circuit_to_text(parsed) == text);

  // an empty ansatz leaves only the loader
  cfg.n_layers = 0;
  const std::string bare = export_circuit_text(cfg);
  const Circuit bare_parsed = circuit_from_text(bare, 4);
  CHECK(bare_parsed.gates.size() == 4);
  for (const Gate& g : bare_parsed.gates) CHECK(g.kind == GateKind::H);
}
