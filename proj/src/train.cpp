#include "qmvit/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "qmvit/encoding.hpp"
#include "qmvit/pqc.hpp"
#include "qmvit/qsim.hpp"

namespace qmvit {

namespace {

// fixed tags deriving independent RNG streams from the run seed
constexpr std::uint64_t kModelSeedTag = 0x0DE1;
constexpr std::uint64_t kShuffleTag = 0x50FF1E;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return r;
  } catch (const std::exception&) {
    throw RunError(3, "config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return r;
  } catch (const std::exception&) {
    throw RunError(3, "config key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw RunError(3, "config key '" + key + "': expected true/false, got '" + v + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    std::uint64_t r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return r;
  } catch (const std::exception&) {
    throw RunError(3, "config key '" + key + "': expected an unsigned integer, got '" + v + "'");
  }
}

// Runs fn(0..n-1), each index exactly once. Indices may execute on any
// thread; fn must only write state owned by its index so that reductions can
// happen afterwards in index order.
void parallel_over(int n, int threads, const std::function<void(int)>& fn) {
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex mu;
  std::exception_ptr err;
  auto body = [&] {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (int t = 0; t < workers - 1; ++t) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
  return best;
}

}  // namespace

// ---- configuration ----

void RunConfig::validate() const {
  if (epochs < 0) throw RunError(3, "epochs must be >= 0");
  if (batch_size < 1) throw RunError(3, "batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw RunError(3, "lr must be a positive number");
  if (!(val_fraction >= 0.0) || !(val_fraction < 1.0))
    throw RunError(3, "val_fraction must lie in [0, 1)");
  if (threads < 1) throw RunError(3, "threads must be >= 1");
  if (max_rotation_deg < 0.0) throw RunError(3, "max_rotation_deg must be >= 0");
  if (!(sharpness_prob >= 0.0) || !(sharpness_prob <= 1.0))
    throw RunError(3, "sharpness_prob must lie in [0, 1]");
  if (sharpness_factor < 0.0) throw RunError(3, "sharpness_factor must be >= 0");
  if (n_classes < 0) throw RunError(3, "n_classes must be >= 0 (0 = infer)");
  try {
    (void)model_kind_from_name(model);
  } catch (const std::invalid_argument& e) {
    throw RunError(3, e.what());
  }
}

ModelConfig RunConfig::model_config() const {
  ModelConfig mc;
  try {
    mc.kind = model_kind_from_name(model);
  } catch (const std::invalid_argument& e) {
    throw RunError(3, e.what());
  }
  mc.image_size = image_size;
  mc.patch_size = patch_size;
  mc.channels = channels;
  mc.n_classes = n_classes;
  mc.embed_dim = embed_dim > 0 ? embed_dim : n_heads * n_qubits;
  mc.n_heads = n_heads;
  mc.n_blocks = n_blocks;
  mc.n_qubits = n_qubits;
  mc.n_layers = n_layers;
  mc.ffn_hidden = ffn_hidden;
  mc.quanv_k = quanv_k;
  mc.quanv_stride = quanv_stride;
  mc.quanv_layers = quanv_layers;
  mc.quanv_trainable = quanv_trainable;
  try {
    mc.validate();
  } catch (const std::invalid_argument& e) {
    throw RunError(3, e.what());
  }
  return mc;
}

std::string config_echo(const RunConfig& c) {
  std::ostringstream o;
  o << "model = " << c.model << "\n";
  o << "image_size = " << c.image_size << "\n";
  o << "patch_size = " << c.patch_size << "\n";
  o << "channels = " << c.channels << "\n";
  o << "n_classes = " << c.n_classes << "\n";
  o << "embed_dim = " << c.embed_dim << "\n";
  o << "n_heads = " << c.n_heads << "\n";
  o << "n_blocks = " << c.n_blocks << "\n";
  o << "n_qubits = " << c.n_qubits << "\n";
  o << "n_layers = " << c.n_layers << "\n";
  o << "ffn_hidden = " << c.ffn_hidden << "\n";
  o << "quanv_k = " << c.quanv_k << "\n";
  o << "quanv_stride = " << c.quanv_stride << "\n";
  o << "quanv_layers = " << c.quanv_layers << "\n";
  o << "quanv_trainable = " << (c.quanv_trainable ? "true" : "false") << "\n";
  o << "epochs = " << c.epochs << "\n";
  o << "batch_size = " << c.batch_size << "\n";
  o << "lr = " << fmt_double(c.lr) << "\n";
  o << "seed = " << c.seed << "\n";
  o << "val_fraction = " << fmt_double(c.val_fraction) << "\n";
  o << "threads = " << c.threads << "\n";
  o << "augment = " << (c.augment ? "true" : "false") << "\n";
  o << "max_rotation_deg = " << fmt_double(c.max_rotation_deg) << "\n";
  o << "sharpness_prob = " << fmt_double(c.sharpness_prob) << "\n";
  o << "sharpness_factor = " << fmt_double(c.sharpness_factor) << "\n";
  o << "manifest = " << c.manifest << "\n";
  o << "out_dir = " << c.out_dir << "\n";
  return o.str();
}

void apply_config_kv(RunConfig& c, const std::string& key, const std::string& value) {
  auto as_int = [&](int lo) {
    const long long v = parse_int(key, value);
    if (v < lo || v > 1'000'000'000LL)
      throw RunError(3, "config key '" + key + "': value out of range");
    return static_cast<int>(v);
  };
  if (key == "model") c.model = value;
  else if (key == "image_size") c.image_size = as_int(0);
  else if (key == "patch_size") c.patch_size = as_int(0);
  else if (key == "channels") c.channels = as_int(0);
  else if (key == "n_classes") c.n_classes = as_int(0);
  else if (key == "embed_dim") c.embed_dim = as_int(0);
  else if (key == "n_heads") c.n_heads = as_int(0);
  else if (key == "n_blocks") c.n_blocks = as_int(0);
  else if (key == "n_qubits") c.n_qubits = as_int(0);
  else if (key == "n_layers") c.n_layers = as_int(0);
  else if (key == "ffn_hidden") c.ffn_hidden = as_int(0);
  else if (key == "quanv_k") c.quanv_k = as_int(0);
  else if (key == "quanv_stride") c.quanv_stride = as_int(0);
  else if (key == "quanv_layers") c.quanv_layers = as_int(0);
  else if (key == "quanv_trainable") c.quanv_trainable = parse_bool(key, value);
  else if (key == "epochs") c.epochs = as_int(0);
  else if (key == "batch_size") c.batch_size = as_int(0);
  else if (key == "lr") c.lr = parse_double(key, value);
  else if (key == "seed") c.seed = parse_u64(key, value);
  else if (key == "val_fraction") c.val_fraction = parse_double(key, value);
  else if (key == "threads") c.threads = as_int(0);
  else if (key == "augment") c.augment = parse_bool(key, value);
  else if (key == "max_rotation_deg") c.max_rotation_deg = parse_double(key, value);
  else if (key == "sharpness_prob") c.sharpness_prob = parse_double(key, value);
  else if (key == "sharpness_factor") c.sharpness_factor = parse_double(key, value);
  else if (key == "manifest") c.manifest = value;
  else if (key == "out_dir") c.out_dir = value;
  else throw RunError(3, "unknown config key '" + key + "'");
}

void apply_config_line(RunConfig& c, const std::string& line, const std::string& where) {
  const std::string t = trim(line);
  if (t.empty() || t[0] == '#') return;
  const std::size_t eq = t.find('=');
  if (eq == std::string::npos)
    throw RunError(3, where + ": expected 'key = value', got '" + t + "'");
  const std::string key = trim(t.substr(0, eq));
  const std::string value = trim(t.substr(eq + 1));
  if (key.empty()) throw RunError(3, where + ": empty key");
  apply_config_kv(c, key, value);
}

RunConfig parse_config_text(const std::string& text, const std::string& where) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    apply_config_line(c, line, where + ":" + std::to_string(lineno));
  }
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RunError(2, "cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

// ---- checkpoint binary format ----
// "QMVIT1" | u32 config length + bytes | u64 seed | u32 array count |
// per array: u32 name length + bytes | u32 rank | u32 dims... | f64 payload.
// All integers and doubles little-endian.

namespace {

constexpr char kMagic[6] = {'Q', 'M', 'V', 'I', 'T', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64(out, bits);
}

struct Cursor {
  const std::string& buf;
  std::size_t pos = 0;
  explicit Cursor(const std::string& b) : buf(b) {}
  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw RunError(2, "corrupt checkpoint: unexpected end of file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  const std::string echo = config_echo(ck.config);
  put_u32(out, static_cast<std::uint32_t>(echo.size()));
  out += echo;
  put_u64(out, ck.seed);
  put_u32(out, static_cast<std::uint32_t>(ck.arrays.size()));
  for (const auto& [name, tensor] : ck.arrays) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (int d = 0; d < tensor.rank(); ++d)
      put_u32(out, static_cast<std::uint32_t>(tensor.dim(d)));
    for (double v : tensor.data) put_f64(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw RunError(2, "cannot open checkpoint for writing: '" + path + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw RunError(2, "failed writing checkpoint: '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw RunError(2, "cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  const std::string data = buf.str();
  Cursor cur(data);
  if (cur.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw RunError(2, "'" + path + "' is not a checkpoint (bad magic)");
  Checkpoint ck;
  const std::uint32_t echo_len = cur.u32();
  ck.config = parse_config_text(cur.bytes(echo_len), path + " (embedded config)");
  ck.seed = cur.u64();
  const std::uint32_t n_arrays = cur.u32();
  ck.arrays.reserve(n_arrays);
  for (std::uint32_t a = 0; a < n_arrays; ++a) {
    const std::uint32_t name_len = cur.u32();
    std::string name = cur.bytes(name_len);
    const std::uint32_t rank = cur.u32();
    if (rank > 8) throw RunError(2, "corrupt checkpoint: implausible tensor rank");
    std::vector<int> shape;
    long long numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = cur.u32();
      if (dim == 0 || dim > (1u << 28)) throw RunError(2, "corrupt checkpoint: bad dimension");
      shape.push_back(static_cast<int>(dim));
      numel *= dim;
      if (numel > (1LL << 32)) throw RunError(2, "corrupt checkpoint: tensor too large");
    }
    Tensor t{shape};
    for (long long i = 0; i < numel; ++i) t.data[static_cast<std::size_t>(i)] = cur.f64();
    ck.arrays.emplace_back(std::move(name), std::move(t));
  }
  if (cur.pos != data.size()) throw RunError(2, "corrupt checkpoint: trailing bytes");
  return ck;
}

RestoredModel restore_model(const Checkpoint& ck) {
  const ModelConfig mc = ck.config.model_config();
  RestoredModel rm{Model(mc, mix_seed(ck.config.seed, kModelSeedTag, 0)), NormStats{}, {}};
  ParamStore& store = rm.model.params();
  if (static_cast<int>(ck.arrays.size()) < store.size())
    throw RunError(2, "checkpoint is missing parameter arrays");
  for (int i = 0; i < store.size(); ++i) {
    const auto& [name, tensor] = ck.arrays[static_cast<std::size_t>(i)];
    NamedParam& p = store.at(i);
    if (name != p.name)
      throw RunError(2, "checkpoint parameter order mismatch: expected '" + p.name + "', found '" +
                            name + "'");
    if (tensor.shape != p.value.shape)
      throw RunError(2, "checkpoint parameter '" + name + "' has the wrong shape");
    p.value = tensor;
  }
  bool have_mu = false, have_sigma = false, have_map = false;
  for (std::size_t i = static_cast<std::size_t>(store.size()); i < ck.arrays.size(); ++i) {
    const auto& [name, tensor] = ck.arrays[i];
    if (name == "norm.mu") {
      rm.stats.mu = tensor.data;
      have_mu = true;
    } else if (name == "norm.sigma") {
      rm.stats.sigma = tensor.data;
      have_sigma = true;
    } else if (name == "data.edible_map") {
      for (double v : tensor.data) rm.edible_map.push_back(v != 0.0);
      have_map = true;
    } else {
      throw RunError(2, "checkpoint contains an unexpected array '" + name + "'");
    }
  }
  if (!have_mu || !have_sigma || !have_map)
    throw RunError(2, "checkpoint is missing preprocessing arrays");
  if (static_cast<int>(rm.edible_map.size()) != mc.n_classes)
    throw RunError(2, "checkpoint edibility map does not cover every class");
  return rm;
}

// ---- data plumbing ----

namespace {

struct LoadedData {
  std::vector<SampleRecord> records;
  std::vector<Tensor> images;  // native resolution, raw [0,1]
  int n_classes = 0;
};

LoadedData load_images(const std::string& manifest_path) {
  LoadedData d;
  try {
    Manifest m = read_manifest(manifest_path);
    d.records = std::move(m.records);
    d.n_classes = m.n_classes;
    d.images.reserve(d.records.size());
    for (const SampleRecord& r : d.records) d.images.push_back(read_ppm(r.image_path));
  } catch (const std::exception& e) {
    throw RunError(2, e.what());
  }
  return d;
}

// species -> edible lookup; conflicting rows are a data error
std::vector<bool> edible_map_of(const std::vector<SampleRecord>& records, int n_classes) {
  std::vector<bool> map(static_cast<std::size_t>(n_classes), false);
  std::vector<bool> seen(static_cast<std::size_t>(n_classes), false);
  for (const SampleRecord& r : records) {
    const auto i = static_cast<std::size_t>(r.species_id);
    if (seen[i] && map[i] != r.edible)
      throw RunError(2, "manifest marks species " + std::to_string(r.species_id) +
                            " both edible and toxic");
    map[i] = r.edible;
    seen[i] = true;
  }
  return map;
}

Tensor prep_image(const Tensor& raw, const ModelConfig& mc, const NormStats& stats,
                  bool normalize_pixels) {
  Tensor img = resize_bilinear(raw, mc.image_size, mc.image_size);
  // the quanvolutional path consumes raw [0,1] pixels: its encoding maps
  // pixel -> angle directly, so standardized values would leave [0,1]
  if (normalize_pixels) img = normalize(img, stats);
  return img;
}

Tensor prep_train_image(const Tensor& raw, const ModelConfig& mc, const RunConfig& cfg,
                        const NormStats& stats, bool normalize_pixels, int epoch,
                        int sample_index) {
  if (!cfg.augment) return prep_image(raw, mc, stats, normalize_pixels);
  AugmentSpec spec;
  spec.resize_h = mc.image_size;
  spec.resize_w = mc.image_size;
  spec.max_rotation_deg = cfg.max_rotation_deg;
  spec.sharpness_prob = cfg.sharpness_prob;
  spec.sharpness_factor = cfg.sharpness_factor;
  spec.seed = cfg.seed;
  Tensor img = augment(raw, spec, epoch, sample_index);
  if (normalize_pixels) img = normalize(img, stats);
  return img;
}

struct EvalAccum {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> preds;
  std::vector<ScoredPrediction> scored;
};

EvalAccum evaluate_images(const Model& m, const std::vector<Tensor>& images,
                          const std::vector<int>& labels, int threads) {
  const int n = static_cast<int>(images.size());
  std::vector<double> losses(static_cast<std::size_t>(n), 0.0);
  std::vector<int> preds(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<double>> probs(static_cast<std::size_t>(n));
  parallel_over(n, threads, [&](int i) {
    const auto iu = static_cast<std::size_t>(i);
    const std::vector<double> logits = m.predict_logits(images[iu]);
    losses[iu] = cross_entropy(logits, labels[iu]);
    preds[iu] = argmax_lowest(logits);
    probs[iu] = softmax(logits);
  });
  EvalAccum out;
  out.preds = std::move(preds);
  out.scored.reserve(static_cast<std::size_t>(n));
  long long correct = 0;
  for (int i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    out.loss += losses[iu];
    if (out.preds[iu] == labels[iu]) ++correct;
    out.scored.push_back(ScoredPrediction{std::move(probs[iu]), labels[iu]});
  }
  if (n > 0) {
    out.loss /= n;
    out.accuracy = static_cast<double>(correct) / n;
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw RunError(2, "cannot open '" + path + "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw RunError(2, "failed writing '" + path + "'");
}

std::vector<std::string> class_names(int n) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) names.push_back("class" + std::to_string(i));
  return names;
}

nlohmann::ordered_json edibility_json(const EdibilityReport& ed) {
  nlohmann::ordered_json j;
  j["confusion"] = {{ed.cm.at(0, 0), ed.cm.at(0, 1)}, {ed.cm.at(1, 0), ed.cm.at(1, 1)}};
  j["toxic_predicted_edible"] = ed.toxic_predicted_edible;
  j["edibility_accuracy"] = ed.edibility_accuracy;
  j["species_accuracy"] = ed.species_accuracy;
  j["binary"] = nlohmann::ordered_json::parse(metric_report_to_json(ed.binary));
  return j;
}

std::string run_report_json(double loss, long long n_samples, const MetricReport& report,
                            const EdibilityReport& edibility) {
  nlohmann::ordered_json j;
  j["n_samples"] = n_samples;
  j["loss"] = loss;
  j["metrics"] = nlohmann::ordered_json::parse(metric_report_to_json(report));
  j["edibility"] = edibility_json(edibility);
  return j.dump(2) + "\n";
}

Checkpoint make_checkpoint(const Model& model, const RunConfig& cfg, const NormStats& stats,
                           const std::vector<bool>& edible_map) {
  Checkpoint ck;
  ck.config = cfg;
  // execution-environment knobs carry no run semantics; normalizing them
  // keeps checkpoints bit-identical across thread counts and output paths
  ck.config.threads = 1;
  ck.config.out_dir = "";
  ck.seed = cfg.seed;
  const ParamStore& store = model.params();
  for (int i = 0; i < store.size(); ++i)
    ck.arrays.emplace_back(store.at(i).name, store.at(i).value);
  ck.arrays.emplace_back("norm.mu", Tensor{{static_cast<int>(stats.mu.size())}, stats.mu});
  ck.arrays.emplace_back("norm.sigma",
                         Tensor{{static_cast<int>(stats.sigma.size())}, stats.sigma});
  std::vector<double> map_doubles;
  map_doubles.reserve(edible_map.size());
  for (bool e : edible_map) map_doubles.push_back(e ? 1.0 : 0.0);
  ck.arrays.emplace_back("data.edible_map",
                         Tensor{{static_cast<int>(map_doubles.size())}, map_doubles});
  return ck;
}

}  // namespace

// ---- training ----

TrainOutcome train_run(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  cfg.validate();
  if (cfg.manifest.empty()) throw RunError(3, "train requires a manifest path");

  LoadedData data = load_images(cfg.manifest);
  if (cfg.n_classes == 0) cfg.n_classes = data.n_classes;
  if (cfg.n_classes < data.n_classes)
    throw RunError(3, "n_classes (" + std::to_string(cfg.n_classes) +
                          ") is smaller than the manifest's class count (" +
                          std::to_string(data.n_classes) + ")");
  const ModelConfig mc = cfg.model_config();
  const std::vector<bool> edible_map = edible_map_of(data.records, cfg.n_classes);

  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw RunError(2, "cannot create output directory '" + cfg.out_dir + "'");
  auto out_path = [&](const char* name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
  };

  // deterministic stratified split; the records carry their loaded index
  std::vector<SampleRecord> tagged = data.records;
  for (std::size_t i = 0; i < tagged.size(); ++i)
    tagged[i].image_path = std::to_string(i);  // path no longer needed; reuse as index tag
  SplitResult split =
      stratified_split(tagged, 1.0 - cfg.val_fraction, cfg.val_fraction, 0.0, cfg.seed);
  auto collect = [&](const std::vector<SampleRecord>& part, std::vector<Tensor>& images,
                     std::vector<int>& labels, std::vector<int>& origin) {
    for (const SampleRecord& r : part) {
      const int idx = std::stoi(r.image_path);
      images.push_back(data.images[static_cast<std::size_t>(idx)]);
      labels.push_back(r.species_id);
      origin.push_back(idx);
    }
  };
  std::vector<Tensor> train_raw, val_raw;
  std::vector<int> train_labels, val_labels, train_origin, val_origin;
  collect(split.train, train_raw, train_labels, train_origin);
  collect(split.val, val_raw, val_labels, val_origin);
  if (train_raw.empty()) throw RunError(3, "training split is empty");

  const bool normalize_pixels = mc.kind != ModelKind::QNN;
  NormStats stats;
  {
    std::vector<Tensor> resized;
    resized.reserve(train_raw.size());
    for (const Tensor& img : train_raw)
      resized.push_back(resize_bilinear(img, mc.image_size, mc.image_size));
    stats = compute_norm_stats(resized);
  }

  Model model(mc, mix_seed(cfg.seed, kModelSeedTag, 0));
  ParamStore& store = model.params();
  const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};

  // fixed eval-time tensors
  std::vector<Tensor> val_images;
  val_images.reserve(val_raw.size());
  for (const Tensor& img : val_raw)
    val_images.push_back(prep_image(img, mc, stats, normalize_pixels));
  // un-augmented view of the train split in manifest order, so a later
  // `eval` of the same samples reproduces these numbers bit for bit
  std::vector<int> train_by_origin(train_raw.size());
  std::iota(train_by_origin.begin(), train_by_origin.end(), 0);
  std::sort(train_by_origin.begin(), train_by_origin.end(),
            [&](int a, int b) { return train_origin[static_cast<std::size_t>(a)] <
                                       train_origin[static_cast<std::size_t>(b)]; });
  std::vector<int> train_eval_labels;
  train_eval_labels.reserve(train_raw.size());
  for (int i : train_by_origin) train_eval_labels.push_back(train_labels[static_cast<std::size_t>(i)]);
  auto train_eval_images = [&] {
    std::vector<Tensor> imgs;
    imgs.reserve(train_raw.size());
    for (int i : train_by_origin)
      imgs.push_back(prep_image(train_raw[static_cast<std::size_t>(i)], mc, stats, normalize_pixels));
    return imgs;
  };

  std::ostringstream curve;
  curve << "epoch,train_loss,val_loss,val_accuracy\n";

  const int n_train = static_cast<int>(train_raw.size());
  const int n_params = store.size();
  double last_train_loss = 0.0, last_val_loss = 0.0, last_val_acc = 0.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_eng(mix_seed(cfg.seed, kShuffleTag, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_eng);

    double epoch_loss = 0.0;
    for (int start = 0; start < n_train; start += cfg.batch_size) {
      const int bn = std::min(cfg.batch_size, n_train - start);
      std::vector<double> losses(static_cast<std::size_t>(bn), 0.0);
      std::vector<std::vector<Tensor>> grads(static_cast<std::size_t>(bn));
      parallel_over(bn, cfg.threads, [&](int j) {
        const int local = order[static_cast<std::size_t>(start + j)];
        const auto lu = static_cast<std::size_t>(local);
        const Tensor img = prep_train_image(train_raw[lu], mc, cfg, stats, normalize_pixels, epoch,
                                            train_origin[lu]);
        Tape t;
        const std::vector<Tape::NodeId> p = model.bind(t, true);
        const Tape::NodeId loss = t.cross_entropy_op(model.logits(t, p, img), train_labels[lu]);
        t.backward(loss);
        const auto ju = static_cast<std::size_t>(j);
        losses[ju] = t.value(loss)[0];
        grads[ju].reserve(static_cast<std::size_t>(n_params));
        for (int i = 0; i < n_params; ++i)
          grads[ju].push_back(store.at(i).trainable ? t.grad(p[static_cast<std::size_t>(i)])
                                                    : Tensor{});
      });
      double batch_loss = 0.0;
      for (double l : losses) batch_loss += l;
      batch_loss /= bn;
      if (!std::isfinite(batch_loss))
        throw RunError(4, "non-finite training loss in epoch " + std::to_string(epoch + 1));
      const double inv = 1.0 / static_cast<double>(bn);
      for (int i = 0; i < n_params; ++i) {
        NamedParam& prm = store.at(i);
        if (!prm.trainable) continue;
        Tensor g = Tensor::zeros_like(prm.value);
        for (int j = 0; j < bn; ++j) {
          const Tensor& gj = grads[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
          for (int k = 0; k < g.numel(); ++k) g[k] += gj[k] * inv;
        }
        adam_step(prm.value, g, prm.adam, adam);
      }
      epoch_loss += batch_loss * bn;
    }
    epoch_loss /= n_train;
    if (!std::isfinite(epoch_loss))
      throw RunError(4, "non-finite training loss in epoch " + std::to_string(epoch + 1));

    // validation metrics fall back to the training split when no rows are
    // held out, so the curve always has a meaningful second column
    EvalAccum va;
    if (!val_images.empty())
      va = evaluate_images(model, val_images, val_labels, cfg.threads);
    else
      va = evaluate_images(model, train_eval_images(), train_eval_labels, cfg.threads);

    last_train_loss = epoch_loss;
    last_val_loss = va.loss;
    last_val_acc = va.accuracy;
    curve << (epoch + 1) << ',' << fmt_double(epoch_loss) << ',' << fmt_double(va.loss) << ','
          << fmt_double(va.accuracy) << "\n";
  }

  TrainOutcome out;
  out.final_train_loss = last_train_loss;
  out.final_val_loss = last_val_loss;
  out.final_val_accuracy = last_val_acc;
  out.config_path = out_path("config.txt");
  out.loss_curve_path = out_path("loss_curve.csv");
  out.checkpoint_path = out_path("checkpoint.bin");
  out.metrics_path = out_path("metrics.json");
  out.confusion_path = out_path("confusion.csv");

  write_text_file(out.config_path, config_echo(cfg));
  write_text_file(out.loss_curve_path, curve.str());
  save_checkpoint(out.checkpoint_path, make_checkpoint(model, cfg, stats, edible_map));

  // final metric report, same code path as `eval`
  std::vector<Tensor> fallback_images;
  const std::vector<Tensor>* metric_images = &val_images;
  const std::vector<int>* metric_labels = &val_labels;
  if (val_images.empty()) {
    fallback_images = train_eval_images();
    metric_images = &fallback_images;
    metric_labels = &train_eval_labels;
  }
  EvalAccum fin = evaluate_images(model, *metric_images, *metric_labels, cfg.threads);
  const ConfusionMatrix cm = confusion(fin.preds, *metric_labels, cfg.n_classes);
  const MetricReport report = full_metrics(cm, fin.scored);
  const EdibilityReport ed = edibility_collapse(fin.preds, *metric_labels, edible_map);
  write_text_file(out.metrics_path, run_report_json(fin.loss, cm.total(), report, ed));
  write_text_file(out.confusion_path, confusion_to_csv(cm, class_names(cfg.n_classes)));
  out.final_val_loss = fin.loss;
  out.final_val_accuracy = fin.accuracy;
  if (cfg.epochs == 0) out.final_train_loss = fin.loss;
  return out;
}

// ---- evaluation ----

EvalOutcome eval_run(const std::string& checkpoint_path, const std::string& manifest_path,
                     const std::string& out_dir, int threads) {
  if (threads < 1) throw RunError(3, "threads must be >= 1");
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  RestoredModel rm = restore_model(ck);
  const ModelConfig& mc = rm.model.config();

  LoadedData data = load_images(manifest_path);
  if (data.n_classes > mc.n_classes)
    throw RunError(2, "manifest contains species ids outside the model's class range");
  for (const SampleRecord& r : data.records)
    if (r.edible != rm.edible_map[static_cast<std::size_t>(r.species_id)])
      throw RunError(2, "manifest edibility for species " + std::to_string(r.species_id) +
                            " contradicts the checkpoint");

  const bool normalize_pixels = mc.kind != ModelKind::QNN;
  std::vector<Tensor> images;
  images.reserve(data.images.size());
  for (const Tensor& img : data.images)
    images.push_back(prep_image(img, mc, rm.stats, normalize_pixels));
  std::vector<int> labels;
  labels.reserve(data.records.size());
  for (const SampleRecord& r : data.records) labels.push_back(r.species_id);

  EvalAccum acc = evaluate_images(rm.model, images, labels, threads);
  const ConfusionMatrix cm = confusion(acc.preds, labels, mc.n_classes);
  EvalOutcome out;
  out.loss = acc.loss;
  out.n_samples = cm.total();
  out.report = full_metrics(cm, acc.scored);
  out.edibility = edibility_collapse(acc.preds, labels, rm.edible_map);

  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw RunError(2, "cannot create output directory '" + out_dir + "'");
    out.metrics_path = (std::filesystem::path(out_dir) / "metrics.json").string();
    out.confusion_path = (std::filesystem::path(out_dir) / "confusion.csv").string();
    write_text_file(out.metrics_path,
                    run_report_json(out.loss, out.n_samples, out.report, out.edibility));
    write_text_file(out.confusion_path, confusion_to_csv(cm, class_names(mc.n_classes)));
  }
  return out;
}

// ---- prediction ----

PredictOutcome predict_run(const std::string& checkpoint_path, const std::string& image_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  RestoredModel rm = restore_model(ck);
  const ModelConfig& mc = rm.model.config();
  Tensor raw;
  try {
    raw = read_ppm(image_path);
  } catch (const std::exception& e) {
    throw RunError(2, e.what());
  }
  const Tensor img = prep_image(raw, mc, rm.stats, mc.kind != ModelKind::QNN);
  const std::vector<double> logits = rm.model.predict_logits(img);
  PredictOutcome out;
  out.probs = softmax(logits);
  out.class_id = argmax_lowest(logits);
  out.edible = rm.edible_map[static_cast<std::size_t>(out.class_id)];
  return out;
}

// ---- circuit export ----

std::string export_circuit_text(const RunConfig& cfg) {
  cfg.validate();
  const ModelKind kind = model_kind_from_name(cfg.model);
  AnsatzSpec spec;
  if (kind == ModelKind::QNN) {
    spec.n_qubits = cfg.quanv_k * cfg.quanv_k;
    spec.n_layers = cfg.quanv_layers;
  } else {
    spec.n_qubits = cfg.n_qubits;
    spec.n_layers = cfg.n_layers;
  }
  spec.entangler = AnsatzSpec::Entangler::CnotRing;
  if (spec.n_qubits < 1 || spec.n_qubits > kMaxQubits)
    throw RunError(3, "circuit export: qubit count out of simulator range");
  Circuit c;
  // the loader's structure: one Hadamard per wire (its rotation angles are
  // the data being loaded, so they are not part of the fixed circuit)
  for (int q = 0; q < spec.n_qubits; ++q) c.gates.push_back(Gate::h(q));
  c.n_qubits = spec.n_qubits;
  const ParamVector theta = init_params(spec, mix_seed(cfg.seed, kModelSeedTag, 0));
  const Circuit ansatz = build_ansatz(spec, theta);
  for (const Gate& g : ansatz.gates) c.gates.push_back(g);
  return circuit_to_text(c);
}

}  // namespace qmvit
