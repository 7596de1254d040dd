#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qmvit/tensor.hpp"

namespace qmvit {

struct SampleRecord {
  std::string image_path;
  int species_id = 0;
  bool edible = false;
};

struct Manifest {
  std::vector<SampleRecord> records;
  int n_classes = 0;  // max species id + 1
};

// Per-channel population statistics over every pixel of a dataset.
struct NormStats {
  std::vector<double> mu;
  std::vector<double> sigma;
};

struct AugmentSpec {
  int resize_h = 32;
  int resize_w = 32;
  double max_rotation_deg = 20.0;
  double sharpness_prob = 0.5;
  double sharpness_factor = 2.0;  // blur-to-original blend; 1 = identity, 2 = sharpen
  std::uint64_t seed = 0;
};

// Binary PPM (P6, 8-bit). Pixels map to doubles in [0, 1]; writing quantizes
// with round(v * 255) after clamping, so byte -> double -> byte round-trips
// exactly.
Tensor read_ppm(const std::string& path);                       // (H, W, 3)
void write_ppm(const std::string& path, const Tensor& image);

// CSV with header `path,species,edible`; image paths are resolved relative to
// the manifest's directory on read.
Manifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<SampleRecord>& records);

NormStats compute_norm_stats(const std::vector<Tensor>& images);

// (x - mu_c) / max(sigma_c, 1e-6); flat channels normalize to zero instead of
// failing.
Tensor normalize(const Tensor& image, const NormStats& stats);
Tensor denormalize(const Tensor& image, const NormStats& stats);

// Bilinear with half-pixel-aligned sample centers; same-size resize is an
// exact copy.
Tensor resize_bilinear(const Tensor& image, int out_h, int out_w);

// Rotation about the image center, bilinear sampling, zero fill outside the
// source; degrees = 0 is an exact identity.
Tensor rotate(const Tensor& image, double degrees);

// Blend between a 3x3 box blur (edge windows average their in-bounds
// neighbors) and the original: factor 0 = blurred, 1 = original, 2 = sharpen.
// Output is clamped back to [0, 1].
Tensor adjust_sharpness(const Tensor& image, double factor);

// Training-time augmentation: resize, random rotation in
// [-max_rotation_deg, +max_rotation_deg], then sharpness adjustment with
// probability sharpness_prob. Randomness is a pure function of
// (seed, epoch, sample_index) so execution order cannot change results.
Tensor augment(const Tensor& image, const AugmentSpec& spec, int epoch, int sample_index);

struct SplitResult {
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> val;
  std::vector<SampleRecord> test;
};

// Deterministic stratified split: per-species shuffle, then cumulative-rounded
// cut points keep every per-class count within one sample of its target.
SplitResult stratified_split(const std::vector<SampleRecord>& records, double train_frac,
                             double val_frac, double test_frac, std::uint64_t seed);

struct Toyset {
  std::vector<SampleRecord> records;  // image_path filled by write_toyset
  std::vector<Tensor> images;
  int n_classes = 0;
};

// Colored geometric shapes, one shape/color pairing per class with pairwise
// distinct channel means; edibility alternates with the class id. Fully
// reproducible from the seed.
Toyset synthetic_toyset(std::uint64_t seed, int n_classes, int n_per_class, int size);

// Writes images/<name>.ppm plus manifest.csv under dir; returns manifest path.
std::string write_toyset(const std::string& dir, Toyset& toyset);

// splitmix64-based mixing for (seed, stream, index) -> engine seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace qmvit
