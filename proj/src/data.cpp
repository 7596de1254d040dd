#include "qmvit/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace qmvit {

namespace {

constexpr double kSigmaFloor = 1e-6;

int channels_of(const Tensor& image) {
  if (image.rank() != 3) throw std::invalid_argument("expected an (H, W, C) image tensor");
  return image.dim(2);
}

// skips whitespace and `#` comment lines inside a PPM header
std::string next_ppm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;
}

}  // namespace

Tensor read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path);
  if (next_ppm_token(in) != "P6") throw std::runtime_error("not a binary PPM (P6): " + path);
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_ppm_token(in));
    h = std::stoi(next_ppm_token(in));
    maxval = std::stoi(next_ppm_token(in));
  } catch (const std::exception&) {
    throw std::runtime_error("malformed PPM header: " + path);
  }
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw std::runtime_error("unsupported PPM dimensions or depth: " + path);
  }
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw std::runtime_error("truncated PPM payload: " + path);
  }
  Tensor img({h, w, 3});
  for (std::size_t i = 0; i < raw.size(); ++i) {
    img.data[i] = static_cast<double>(raw[i]) / 255.0;
  }
  return img;
}

void write_ppm(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw std::invalid_argument("write_ppm: expected an (H, W, 3) tensor");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P6\n" << image.dim(1) << " " << image.dim(0) << "\n255\n";
  std::vector<unsigned char> raw(static_cast<std::size_t>(image.numel()));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = std::clamp(image.data[i], 0.0, 1.0);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw std::runtime_error("failed writing image payload: " + path);
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty manifest: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "path,species,edible") {
    throw std::runtime_error("manifest header must be `path,species,edible`: " + path);
  }
  Manifest m;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.rfind(',');
    if (c1 == std::string::npos || c2 == c1) {
      throw std::runtime_error("manifest line " + std::to_string(line_no) +
                               ": expected `path,species,edible`");
    }
    SampleRecord r;
    r.image_path = (base / line.substr(0, c1)).string();
    const std::string species = line.substr(c1 + 1, c2 - c1 - 1);
    const std::string edible = line.substr(c2 + 1);
    try {
      r.species_id = std::stoi(species);
    } catch (const std::exception&) {
      throw std::runtime_error("manifest line " + std::to_string(line_no) +
                               ": bad species id `" + species + "`");
    }
    if (r.species_id < 0) {
      throw std::runtime_error("manifest line " + std::to_string(line_no) +
                               ": species id must be >= 0");
    }
    if (edible != "0" && edible != "1") {
      throw std::runtime_error("manifest line " + std::to_string(line_no) +
                               ": edible must be 0 or 1");
    }
    r.edible = edible == "1";
    m.n_classes = std::max(m.n_classes, r.species_id + 1);
    m.records.push_back(std::move(r));
  }
  if (m.records.empty()) throw std::runtime_error("manifest has no records: " + path);
  return m;
}

void write_manifest(const std::string& path, const std::vector<SampleRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << "path,species,edible\n";
  for (const SampleRecord& r : records) {
    out << r.image_path << "," << r.species_id << "," << (r.edible ? 1 : 0) << "\n";
  }
}

NormStats compute_norm_stats(const std::vector<Tensor>& images) {
  if (images.empty()) throw std::invalid_argument("compute_norm_stats: empty dataset");
  const int c = channels_of(images.front());
  std::vector<double> sum(static_cast<std::size_t>(c), 0.0);
  std::vector<long long> count(static_cast<std::size_t>(c), 0);
  for (const Tensor& img : images) {
    if (channels_of(img) != c) {
      throw std::invalid_argument("compute_norm_stats: mixed channel counts");
    }
    const int pixels = img.dim(0) * img.dim(1);
    for (int p = 0; p < pixels; ++p) {
      for (int ch = 0; ch < c; ++ch) {
        sum[static_cast<std::size_t>(ch)] += img.data[static_cast<std::size_t>(p * c + ch)];
      }
    }
    for (int ch = 0; ch < c; ++ch) count[static_cast<std::size_t>(ch)] += pixels;
  }
  NormStats stats;
  stats.mu.resize(static_cast<std::size_t>(c));
  stats.sigma.assign(static_cast<std::size_t>(c), 0.0);
  for (int ch = 0; ch < c; ++ch) {
    stats.mu[static_cast<std::size_t>(ch)] =
        sum[static_cast<std::size_t>(ch)] / static_cast<double>(count[static_cast<std::size_t>(ch)]);
  }
  // second pass keeps the variance free of single-pass cancellation
  std::vector<double> sq(static_cast<std::size_t>(c), 0.0);
  for (const Tensor& img : images) {
    const int pixels = img.dim(0) * img.dim(1);
    for (int p = 0; p < pixels; ++p) {
      for (int ch = 0; ch < c; ++ch) {
        const double d =
            img.data[static_cast<std::size_t>(p * c + ch)] - stats.mu[static_cast<std::size_t>(ch)];
        sq[static_cast<std::size_t>(ch)] += d * d;
      }
    }
  }
  for (int ch = 0; ch < c; ++ch) {
    stats.sigma[static_cast<std::size_t>(ch)] = std::sqrt(
        sq[static_cast<std::size_t>(ch)] / static_cast<double>(count[static_cast<std::size_t>(ch)]));
  }
  return stats;
}

Tensor normalize(const Tensor& image, const NormStats& stats) {
  const int c = channels_of(image);
  if (static_cast<int>(stats.mu.size()) != c || static_cast<int>(stats.sigma.size()) != c) {
    throw std::invalid_argument("normalize: stats channel mismatch");
  }
  Tensor out = image;
  const int pixels = image.dim(0) * image.dim(1);
  for (int p = 0; p < pixels; ++p) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t i = static_cast<std::size_t>(p * c + ch);
      out.data[i] = (image.data[i] - stats.mu[static_cast<std::size_t>(ch)]) /
                    std::max(stats.sigma[static_cast<std::size_t>(ch)], kSigmaFloor);
    }
  }
  return out;
}

Tensor denormalize(const Tensor& image, const NormStats& stats) {
  const int c = channels_of(image);
  if (static_cast<int>(stats.mu.size()) != c || static_cast<int>(stats.sigma.size()) != c) {
    throw std::invalid_argument("denormalize: stats channel mismatch");
  }
  Tensor out = image;
  const int pixels = image.dim(0) * image.dim(1);
  for (int p = 0; p < pixels; ++p) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t i = static_cast<std::size_t>(p * c + ch);
      out.data[i] = image.data[i] * std::max(stats.sigma[static_cast<std::size_t>(ch)], kSigmaFloor) +
                    stats.mu[static_cast<std::size_t>(ch)];
    }
  }
  return out;
}

Tensor resize_bilinear(const Tensor& image, int out_h, int out_w) {
  const int c = channels_of(image);
  const int h = image.dim(0), w = image.dim(1);
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize: target must be positive");
  if (out_h == h && out_w == w) return image;
  Tensor out({out_h, out_w, c});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int r = 0; r < out_h; ++r) {
    // half-pixel centers keep the sampling grid symmetric under up/downscale
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int col = 0; col < out_w; ++col) {
      const double fx = std::clamp((col + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < c; ++ch) {
        const double top = image.at(y0, x0, ch) * (1.0 - wx) + image.at(y0, x1, ch) * wx;
        const double bot = image.at(y1, x0, ch) * (1.0 - wx) + image.at(y1, x1, ch) * wx;
        out.at(r, col, ch) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

Tensor rotate(const Tensor& image, double degrees) {
  const int c = channels_of(image);
  if (degrees == 0.0) return image;
  const int h = image.dim(0), w = image.dim(1);
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cy = (h - 1) * 0.5, cx = (w - 1) * 0.5;
  Tensor out({h, w, c});
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      // inverse map: the output pixel samples the source rotated the other way
      const double dy = r - cy, dx = col - cx;
      const double sy = cy + dy * cs - dx * sn;
      const double sx = cx + dy * sn + dx * cs;
      if (sy < 0.0 || sy > h - 1 || sx < 0.0 || sx > w - 1) continue;  // zero fill
      const int y0 = static_cast<int>(sy);
      const int y1 = std::min(y0 + 1, h - 1);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wy = sy - y0, wx = sx - x0;
      for (int ch = 0; ch < c; ++ch) {
        const double top = image.at(y0, x0, ch) * (1.0 - wx) + image.at(y0, x1, ch) * wx;
        const double bot = image.at(y1, x0, ch) * (1.0 - wx) + image.at(y1, x1, ch) * wx;
        out.at(r, col, ch) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

Tensor adjust_sharpness(const Tensor& image, double factor) {
  const int c = channels_of(image);
  if (factor == 1.0) return image;
  const int h = image.dim(0), w = image.dim(1);
  Tensor blur({h, w, c});
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      for (int ch = 0; ch < c; ++ch) {
        double s = 0.0;
        int n = 0;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = r + dr, cc = col + dc;
            if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
            s += image.at(rr, cc, ch);
            ++n;
          }
        }
        blur.at(r, col, ch) = s / n;
      }
    }
  }
  Tensor out({h, w, c});
  for (int i = 0; i < out.numel(); ++i) {
    const double v = blur.data[static_cast<std::size_t>(i)] +
                     factor * (image.data[static_cast<std::size_t>(i)] -
                               blur.data[static_cast<std::size_t>(i)]);
    out.data[static_cast<std::size_t>(i)] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(splitmix(seed) ^ a) ^ b);
}

Tensor augment(const Tensor& image, const AugmentSpec& spec, int epoch, int sample_index) {
  std::mt19937_64 eng(mix_seed(spec.seed, static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(sample_index)));
  Tensor out = resize_bilinear(image, spec.resize_h, spec.resize_w);
  std::uniform_real_distribution<double> angle(-spec.max_rotation_deg, spec.max_rotation_deg);
  out = rotate(out, angle(eng));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(eng) < spec.sharpness_prob) out = adjust_sharpness(out, spec.sharpness_factor);
  return out;
}

SplitResult stratified_split(const std::vector<SampleRecord>& records, double train_frac,
                             double val_frac, double test_frac, std::uint64_t seed) {
  if (train_frac < 0 || val_frac < 0 || test_frac < 0 ||
      std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw std::invalid_argument("stratified_split: fractions must be >= 0 and sum to 1");
  }
  int max_class = -1;
  for (const SampleRecord& r : records) max_class = std::max(max_class, r.species_id);
  SplitResult out;
  for (int cls = 0; cls <= max_class; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].species_id == cls) idx.push_back(i);
    }
    if (idx.empty()) continue;
    std::mt19937_64 eng(mix_seed(seed, 0x51117ULL, static_cast<std::uint64_t>(cls)));
    std::shuffle(idx.begin(), idx.end(), eng);
    const auto n = static_cast<double>(idx.size());
    // cumulative rounding keeps each class within one sample of its targets
    const long long c1 = std::llround(n * train_frac);
    const long long c2 = std::llround(n * (train_frac + val_frac));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const long long pos = static_cast<long long>(i);
      if (pos < c1) {
        out.train.push_back(records[idx[i]]);
      } else if (pos < c2) {
        out.val.push_back(records[idx[i]]);
      } else {
        out.test.push_back(records[idx[i]]);
      }
    }
  }
  return out;
}

namespace {

// per-class palette plus a per-class background level; the background ladder
// keeps class-conditional pixel means pairwise distinct even after a
// channel-mean reduction, independent of how much area each shape fills
struct ClassStyle {
  double r, g, b;
  double bg;
};

ClassStyle class_style(int cls) {
  static const ClassStyle styles[] = {
      {0.55, 0.10, 0.10, 0.0},  // dark red
      {0.15, 0.95, 0.25, 0.0},  // mid green
      {0.45, 0.50, 1.00, 0.0},  // bright blue
      {0.95, 0.95, 0.65, 0.0},  // pale yellow
      {0.10, 0.45, 0.40, 0.0},  // dark teal
      {0.80, 0.35, 0.75, 0.0},  // orchid
      {0.98, 0.60, 0.10, 0.0},  // orange
      {0.30, 0.25, 0.85, 0.0},  // indigo
  };
  ClassStyle s = styles[cls % 8];
  s.bg = 0.08 + 0.72 * (cls % 8) / 7.0;
  return s;
}

bool inside_shape(int shape, double dy, double dx, double radius) {
  const double ady = std::abs(dy), adx = std::abs(dx);
  switch (shape % 4) {
    case 0:  // disk
      return dy * dy + dx * dx <= radius * radius;
    case 1:  // square
      return ady <= radius && adx <= radius;
    case 2:  // cross
      return (ady <= radius * 0.4 && adx <= radius) || (adx <= radius * 0.4 && ady <= radius);
    default:  // ring
      return dy * dy + dx * dx <= radius * radius &&
             dy * dy + dx * dx >= radius * radius * 0.3;
  }
}

}  // namespace

Toyset synthetic_toyset(std::uint64_t seed, int n_classes, int n_per_class, int size) {
  if (n_classes < 2 || n_classes > 8 || n_per_class < 1 || size < 8) {
    throw std::invalid_argument(
        "synthetic_toyset: need 2..8 classes, >= 1 per class, size >= 8");
  }
  Toyset out;
  out.n_classes = n_classes;
  for (int cls = 0; cls < n_classes; ++cls) {
    const ClassStyle style = class_style(cls);
    for (int i = 0; i < n_per_class; ++i) {
      std::mt19937_64 eng(mix_seed(seed, static_cast<std::uint64_t>(cls),
                                   static_cast<std::uint64_t>(i)));
      std::uniform_real_distribution<double> jitter(-size / 8.0, size / 8.0);
      std::uniform_real_distribution<double> radius_jitter(0.85, 1.15);
      std::uniform_real_distribution<double> noise(-0.03, 0.03);
      const double cy = (size - 1) * 0.5 + jitter(eng);
      const double cx = (size - 1) * 0.5 + jitter(eng);
      const double radius = size * 0.28 * radius_jitter(eng);
      Tensor img({size, size, 3});
      for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
          const bool hit = inside_shape(cls, r - cy, c - cx, radius);
          const double base_r = hit ? style.r : style.bg;
          const double base_g = hit ? style.g : style.bg;
          const double base_b = hit ? style.b : style.bg;
          img.at(r, c, 0) = std::clamp(base_r + noise(eng), 0.0, 1.0);
          img.at(r, c, 1) = std::clamp(base_g + noise(eng), 0.0, 1.0);
          img.at(r, c, 2) = std::clamp(base_b + noise(eng), 0.0, 1.0);
        }
      }
      SampleRecord rec;
      rec.species_id = cls;
      rec.edible = cls % 2 == 1;
      out.records.push_back(rec);
      out.images.push_back(std::move(img));
    }
  }
  return out;
}

std::string write_toyset(const std::string& dir, Toyset& toyset) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  for (std::size_t i = 0; i < toyset.images.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "images/c%d_%04d.ppm",
                  toyset.records[i].species_id, static_cast<int>(i));
    toyset.records[i].image_path = name;
    write_ppm((fs::path(dir) / name).string(), toyset.images[i]);
  }
  const std::string manifest = (fs::path(dir) / "manifest.csv").string();
  write_manifest(manifest, toyset.records);
  return manifest;
}

}  // namespace qmvit
