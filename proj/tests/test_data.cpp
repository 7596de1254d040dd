#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "qmvit/data.hpp"
#include "test_support.hpp"

using namespace qmvit;
namespace fs = std::filesystem;

namespace {

Tensor random_image(std::mt19937_64& eng, int h, int w, int c = 3) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  Tensor t({h, w, c});
  for (double& v : t.data) v = d(eng);
  return t;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("ppm write/read round trip is byte exact") {
  std::mt19937_64 eng(501);
  const fs::path dir = fresh_dir("qmvit_test_ppm");
  const Tensor img = random_image(eng, 7, 5);

  const std::string a = (dir / "a.ppm").string();
  const std::string b = (dir / "b.ppm").string();
  write_ppm(a, img);
  const Tensor back = read_ppm(a);
  REQUIRE(back.shape == img.shape);
  // doubles agree with the 8-bit quantization of the source
  for (int i = 0; i < img.numel(); ++i) {
    const double q = std::lround(img[i] * 255.0) / 255.0;
    CHECK(back[i] == doctest::Approx(q).epsilon(1e-12));
  }
  write_ppm(b, back);
  CHECK(slurp(a) == slurp(b));

  // header comments are part of the format
  {
    std::ofstream out(dir / "c.ppm", std::ios::binary);
    out << "P6\n# comment line\n2 1\n255\n";
    const unsigned char px[6] = {255, 0, 0, 0, 255, 0};
    out.write(reinterpret_cast<const char*>(px), 6);
  }
  const Tensor commented = read_ppm((dir / "c.ppm").string());
  CHECK(commented.dim(0) == 1);
  CHECK(commented.dim(1) == 2);
  CHECK(commented.at(0, 0, 0) == 1.0);
  CHECK(commented.at(0, 1, 1) == 1.0);

  {
    std::ofstream out(dir / "bad.ppm", std::ios::binary);
    out << "P6\n4 4\n255\n";
    out << "xx";  // payload cut short
  }
  CHECK_THROWS(read_ppm((dir / "bad.ppm").string()));
  {
    std::ofstream out(dir / "p3.ppm", std::ios::binary);
    out << "P3\n1 1\n255\n0 0 0\n";
  }
  CHECK_THROWS(read_ppm((dir / "p3.ppm").string()));
  CHECK_THROWS(read_ppm((dir / "missing.ppm").string()));
}

TEST_CASE("manifest round trip and validation") {
  const fs::path dir = fresh_dir("qmvit_test_manifest");
  std::vector<SampleRecord> recs;
  recs.push_back({"images/a.ppm", 0, false});
  recs.push_back({"images/b.ppm", 2, true});
  recs.push_back({"images/c.ppm", 1, true});
  const std::string path = (dir / "manifest.csv").string();
  write_manifest(path, recs);

  const Manifest m = read_manifest(path);
  REQUIRE(m.records.size() == 3);
  CHECK(m.n_classes == 3);
  CHECK(m.records[0].species_id == 0);
  CHECK(m.records[1].edible);
  CHECK_FALSE(m.records[0].edible);
  // relative paths are resolved against the manifest directory
  CHECK(m.records[1].image_path == (dir / "images/b.ppm").string());

  auto write_text = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name);
    out << text;
    return (dir / name).string();
  };
  CHECK_THROWS(read_manifest(write_text("h.csv", "path,species\nx,0\n")));
  CHECK_THROWS(read_manifest(write_text("e.csv", "path,species,edible\nx,0,2\n")));
  CHECK_THROWS(read_manifest(write_text("s.csv", "path,species,edible\nx,-1,0\n")));
  CHECK_THROWS(read_manifest(write_text("n.csv", "path,species,edible\nx,zero,0\n")));
  CHECK_THROWS(read_manifest(write_text("empty.csv", "path,species,edible\n")));
  CHECK_THROWS(read_manifest((dir / "missing.csv").string()));
}

TEST_CASE("normalization statistics") {
  // pixels {0, 2} in one channel: mean 1, population std 1
  Tensor two({1, 2, 1});
  two.data = {0.0, 2.0};
  const NormStats s = compute_norm_stats({two});
  REQUIRE(s.mu.size() == 1);
  CHECK(s.mu[0] == 1.0);
  CHECK(s.sigma[0] == 1.0);
  const Tensor normed = normalize(two, s);
  CHECK(normed.data[0] == -1.0);
  CHECK(normed.data[1] == 1.0);

  // constant image: sigma 0, guard maps everything to zero
  Tensor flat({2, 2, 1});
  for (double& v : flat.data) v = 0.7;
  const NormStats fs2 = compute_norm_stats({flat});
  CHECK(fs2.sigma[0] == 0.0);
  for (double v : normalize(flat, fs2).data) CHECK(v == 0.0);

  // random dataset vs a long-double accumulation oracle
  std::mt19937_64 eng(503);
  std::vector<Tensor> imgs;
  for (int i = 0; i < 4; ++i) imgs.push_back(random_image(eng, 5, 6));
  const NormStats got = compute_norm_stats(imgs);
  for (int ch = 0; ch < 3; ++ch) {
    long double sum = 0.0L;
    long double count = 0.0L;
    for (const Tensor& im : imgs) {
      for (int p = 0; p < im.dim(0) * im.dim(1); ++p) {
        sum += im.data[static_cast<std::size_t>(p * 3 + ch)];
        count += 1.0L;
      }
    }
    const long double mu = sum / count;
    long double sq = 0.0L;
    for (const Tensor& im : imgs) {
      for (int p = 0; p < im.dim(0) * im.dim(1); ++p) {
        const long double d = im.data[static_cast<std::size_t>(p * 3 + ch)] - mu;
        sq += d * d;
      }
    }
    CHECK(std::abs(got.mu[static_cast<std::size_t>(ch)] - static_cast<double>(mu)) < 1e-12);
    CHECK(std::abs(got.sigma[static_cast<std::size_t>(ch)] -
                   static_cast<double>(std::sqrt(sq / count))) < 1e-12);
  }

  // normalizing with the dataset's own stats recenters it
  std::vector<Tensor> normed_all;
  for (const Tensor& im : imgs) normed_all.push_back(normalize(im, got));
  const NormStats post = compute_norm_stats(normed_all);
  for (int ch = 0; ch < 3; ++ch) {
    CHECK(std::abs(post.mu[static_cast<std::size_t>(ch)]) < 1e-6);
    CHECK(std::abs(post.sigma[static_cast<std::size_t>(ch)] - 1.0) < 1e-6);
  }

  // denormalize inverts when sigma clears the guard
  const Tensor round = denormalize(normalize(imgs[0], got), got);
  for (int i = 0; i < round.numel(); ++i) {
    CHECK(round[i] == doctest::Approx(imgs[0][i]).epsilon(1e-9));
  }

  CHECK_THROWS_AS(compute_norm_stats({}), std::invalid_argument);
  NormStats wrong = got;
  wrong.mu.pop_back();
  CHECK_THROWS_AS(normalize(imgs[0], wrong), std::invalid_argument);
}

TEST_CASE("bilinear resize") {
  std::mt19937_64 eng(507);
  const Tensor img = random_image(eng, 6, 4);
  const Tensor same = resize_bilinear(img, 6, 4);
  CHECK(same.data == img.data);

  Tensor flat({3, 3, 2});
  for (double& v : flat.data) v = 0.42;
  for (double v : resize_bilinear(flat, 7, 5).data) {
    CHECK(v == doctest::Approx(0.42).epsilon(1e-12));
  }

  // 2x upscale of a 2x2 checkerboard against the hand-worked bilinear grid
  Tensor board({2, 2, 1});
  board.data = {1.0, 0.0, 0.0, 1.0};
  const Tensor up = resize_bilinear(board, 4, 4);
  const double want[4][4] = {{1.0, 0.75, 0.25, 0.0},
                             {0.75, 0.625, 0.375, 0.25},
                             {0.25, 0.375, 0.625, 0.75},
                             {0.0, 0.25, 0.75, 1.0}};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      CHECK(up.at(r, c, 0) == doctest::Approx(want[r][c]).epsilon(1e-12));
    }
  }

  CHECK_THROWS_AS(resize_bilinear(img, 0, 4), std::invalid_argument);
}

TEST_CASE("rotation about the center") {
  std::mt19937_64 eng(509);
  const Tensor img = random_image(eng, 9, 9);
  const Tensor zero = rotate(img, 0.0);
  CHECK(zero.data == img.data);

  Tensor ones({16, 16, 1});
  for (double& v : ones.data) v = 1.0;
  const Tensor turned = rotate(ones, 20.0);
  REQUIRE(turned.shape == ones.shape);
  // the exact center maps to itself
  const double mid = turned.at(7, 7, 0) + turned.at(8, 8, 0);
  CHECK(mid == doctest::Approx(2.0).epsilon(1e-9));
  // corners fall outside the source and zero-fill
  CHECK(turned.at(0, 0, 0) == 0.0);
  CHECK(turned.at(15, 15, 0) == 0.0);
  double mean = 0.0;
  for (double v : turned.data) mean += v;
  CHECK(mean / turned.numel() < 1.0);
}

TEST_CASE("sharpness adjustment blends against a 3x3 box blur") {
  std::mt19937_64 eng(511);
  const Tensor img = random_image(eng, 5, 5);
  CHECK(adjust_sharpness(img, 1.0).data == img.data);

  // delta image: blur values follow the in-bounds window sizes
  Tensor delta({3, 3, 1});
  delta.at(1, 1, 0) = 1.0;
  const Tensor blurred = adjust_sharpness(delta, 0.0);
  CHECK(blurred.at(0, 0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(blurred.at(0, 1, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(blurred.at(1, 1, 0) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
  CHECK(blurred.at(2, 1, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));

  // sharpening keeps values clamped to the pixel range
  for (double v : adjust_sharpness(img, 3.0).data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  REQUIRE(adjust_sharpness(img, 2.0).shape == img.shape);
}

TEST_CASE("augmentation is a pure function of seed, epoch and index") {
  std::mt19937_64 eng(513);
  const Tensor img = random_image(eng, 10, 8);
  AugmentSpec spec;
  spec.resize_h = 8;
  spec.resize_w = 8;
  spec.seed = 99;

  const Tensor a = augment(img, spec, 3, 17);
  const Tensor b = augment(img, spec, 3, 17);
  CHECK(a.data == b.data);
  REQUIRE(a.shape == std::vector<int>{8, 8, 3});

  const Tensor c = augment(img, spec, 3, 18);
  CHECK(a.data != c.data);
  const Tensor d = augment(img, spec, 4, 17);
  CHECK(a.data != d.data);
}

TEST_CASE("stratified split is deterministic, disjoint and proportional") {
  std::vector<SampleRecord> recs;
  int uid = 0;
  auto add = [&](int cls, int n) {
    for (int i = 0; i < n; ++i) {
      recs.push_back({"img" + std::to_string(uid++), cls, cls % 2 == 1});
    }
  };
  add(0, 10);
  add(1, 11);
  add(2, 13);

  const SplitResult all = stratified_split(recs, 1.0, 0.0, 0.0, 5);
  CHECK(all.train.size() == recs.size());
  CHECK(all.val.empty());
  CHECK(all.test.empty());

  const SplitResult s1 = stratified_split(recs, 0.6, 0.2, 0.2, 5);
  const SplitResult s2 = stratified_split(recs, 0.6, 0.2, 0.2, 5);
  auto paths = [](const std::vector<SampleRecord>& v) {
    std::vector<std::string> p;
    for (const SampleRecord& r : v) p.push_back(r.image_path);
    return p;
  };
  CHECK(paths(s1.train) == paths(s2.train));
  CHECK(paths(s1.val) == paths(s2.val));
  CHECK(paths(s1.test) == paths(s2.test));

  // disjoint cover
  std::vector<std::string> seen;
  for (const auto* part : {&s1.train, &s1.val, &s1.test}) {
    for (const SampleRecord& r : *part) seen.push_back(r.image_path);
  }
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
  CHECK(seen.size() == recs.size());

  // per-class counts stay within one sample of the target
  auto count_class = [](const std::vector<SampleRecord>& v, int cls) {
    int n = 0;
    for (const SampleRecord& r : v) n += r.species_id == cls ? 1 : 0;
    return n;
  };
  const int totals[3] = {10, 11, 13};
  for (int cls = 0; cls < 3; ++cls) {
    CHECK(std::abs(count_class(s1.train, cls) - 0.6 * totals[cls]) <= 1.0);
    CHECK(std::abs(count_class(s1.val, cls) - 0.2 * totals[cls]) <= 1.0);
    CHECK(std::abs(count_class(s1.test, cls) - 0.2 * totals[cls]) <= 1.0);
  }

  CHECK_THROWS_AS(stratified_split(recs, 0.5, 0.2, 0.2, 5), std::invalid_argument);
  CHECK_THROWS_AS(stratified_split(recs, -0.2, 0.6, 0.6, 5), std::invalid_argument);
}

TEST_CASE("synthetic toyset is reproducible and class-separable") {
  const Toyset a = synthetic_toyset(42, 4, 8, 16);
  const Toyset b = synthetic_toyset(42, 4, 8, 16);
  REQUIRE(a.records.size() == 32);
  REQUIRE(a.images.size() == 32);
  CHECK(a.n_classes == 4);
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    CHECK(a.images[i].data == b.images[i].data);
    CHECK(a.records[i].species_id == b.records[i].species_id);
    CHECK(a.records[i].edible == (a.records[i].species_id % 2 == 1));
  }

  // class-conditional pixel means separate pairwise
  std::vector<double> class_mean(4, 0.0);
  std::vector<int> class_n(4, 0);
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    double m = 0.0;
    for (double v : a.images[i].data) m += v;
    class_mean[static_cast<std::size_t>(a.records[i].species_id)] += m / a.images[i].numel();
    class_n[static_cast<std::size_t>(a.records[i].species_id)] += 1;
  }
  for (int c = 0; c < 4; ++c) class_mean[static_cast<std::size_t>(c)] /= class_n[static_cast<std::size_t>(c)];
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      CHECK(std::abs(class_mean[static_cast<std::size_t>(i)] -
                     class_mean[static_cast<std::size_t>(j)]) > 0.02);
    }
  }

  CHECK_THROWS_AS(synthetic_toyset(42, 1, 8, 16), std::invalid_argument);
  CHECK_THROWS_AS(synthetic_toyset(42, 4, 8, 4), std::invalid_argument);
}

TEST_CASE("toyset writes a loadable, byte-stable corpus") {
  const fs::path d1 = fresh_dir("qmvit_toyset_a");
  const fs::path d2 = fresh_dir("qmvit_toyset_b");
  Toyset t1 = synthetic_toyset(7, 4, 3, 16);
  Toyset t2 = synthetic_toyset(7, 4, 3, 16);
  const std::string m1 = write_toyset(d1.string(), t1);
  const std::string m2 = write_toyset(d2.string(), t2);

  const Manifest m = read_manifest(m1);
  REQUIRE(m.records.size() == 12);
  CHECK(m.n_classes == 4);
  for (const SampleRecord& r : m.records) {
    const Tensor img = read_ppm(r.image_path);
    CHECK(img.shape == std::vector<int>{16, 16, 3});
  }
  // identical seeds produce byte-identical image files
  for (std::size_t i = 0; i < t1.records.size(); ++i) {
    CHECK(slurp(d1 / t1.records[i].image_path) == slurp(d2 / t2.records[i].image_path));
  }
}

TEST_CASE("seed mixing separates streams") {
  const std::uint64_t a = mix_seed(1, 2, 3);
  CHECK(a == mix_seed(1, 2, 3));
  CHECK(a != mix_seed(1, 2, 4));
  CHECK(a != mix_seed(1, 3, 2));
  CHECK(a != mix_seed(2, 2, 3));
}
