#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <type_traits>

#include "oracles.hpp"
#include "spcl/error.hpp"
#include "spcl/losses.hpp"
#include "spcl/pipeline.hpp"
#include "spcl/synthdata.hpp"

using namespace spcl;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "spcl_test_synthdata";
  fs::create_directories(dir);
  return dir / name;
}

Matrix column_means_for_class(const Matrix& x, const Labels& y, int k) {
  Matrix m(1, x.cols());
  double n = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (y[r] != k) continue;
    for (std::size_t c = 0; c < x.cols(); ++c) m(0, c) += x(r, c);
    ++n;
  }
  m *= 1.0 / n;
  return m;
}

}  // namespace

TEST_CASE("generate_pair: counts per class") {
  ShiftSpec spec;
  spec.num_classes = 3;
  spec.per_class_count = 100;
  spec.dim = 2;
  spec.noise_sigma = 0.4;
  spec.seed = 7;
  const auto [source, target] = generate_pair(spec);
  CHECK(source.features.rows() == 300);
  CHECK(target.features.rows() == 300);
  for (int k = 0; k < 3; ++k) {
    CHECK(std::count(source.labels.begin(), source.labels.end(), k) == 100);
    CHECK(std::count(target.hidden_labels->begin(), target.hidden_labels->end(), k) == 100);
  }
}

TEST_CASE("generate_pair: pure function of the spec") {
  ShiftSpec spec;
  spec.dim = 4;
  spec.translation = {1.0, -2.0, 0.5, 0.0};
  spec.seed = 99;
  const auto a = generate_pair(spec);
  const auto b = generate_pair(spec);
  CHECK(a.first.features == b.first.features);
  CHECK(a.first.labels == b.first.labels);
  CHECK(a.second.features == b.second.features);
  spec.seed = 100;
  CHECK_FALSE(generate_pair(spec).first.features == a.first.features);
}

TEST_CASE("generate_pair: class means sit on the radius-4 circle") {
  ShiftSpec spec;
  spec.num_classes = 4;
  spec.per_class_count = 2000;
  spec.rotation_deg = 0.0;
  spec.noise_sigma = 0.3;
  const auto [source, target] = generate_pair(spec);
  const Matrix means = class_means(spec);
  for (int k = 0; k < 4; ++k) {
    CHECK(std::hypot(means(k, 0), means(k, 1)) == doctest::Approx(4.0));
    const Matrix m = column_means_for_class(source.features, source.labels, k);
    CHECK(std::abs(m(0, 0) - means(k, 0)) < 0.05);
    CHECK(std::abs(m(0, 1) - means(k, 1)) < 0.05);
  }
}

TEST_CASE("apply_shift: 180 degree rotation swaps antipodal class means") {
  ShiftSpec spec;
  spec.num_classes = 2;
  spec.rotation_deg = 180.0;
  Matrix means = class_means(spec);
  const Matrix original = means;
  apply_shift(spec, means);
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(std::abs(means(0, c) - original(1, c)) < 1e-12);
    CHECK(std::abs(means(1, c) - original(0, c)) < 1e-12);
  }
}

TEST_CASE("generate_pair: rotation and translation move the target clusters") {
  ShiftSpec spec;
  spec.num_classes = 3;
  spec.per_class_count = 3000;
  spec.rotation_deg = 30.0;
  spec.translation = {1.0, -1.0};
  spec.noise_sigma = 0.2;
  const auto [source, target] = generate_pair(spec);
  Matrix expected = class_means(spec);
  apply_shift(spec, expected);
  for (int k = 0; k < 3; ++k) {
    const Matrix m = column_means_for_class(target.features, *target.hidden_labels, k);
    CHECK(std::abs(m(0, 0) - expected(k, 0)) < 0.03);
    CHECK(std::abs(m(0, 1) - expected(k, 1)) < 0.03);
  }
}

TEST_CASE("generate_pair: invalid specs are rejected") {
  ShiftSpec spec;
  spec.noise_sigma = 0.0;
  CHECK_THROWS_AS(generate_pair(spec), ValidationError);
  spec = ShiftSpec{};
  spec.num_classes = 17;
  CHECK_THROWS_AS(generate_pair(spec), ValidationError);
  spec = ShiftSpec{};
  spec.dim = 1;
  CHECK_THROWS_AS(generate_pair(spec), ValidationError);
  spec = ShiftSpec{};
  spec.translation = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(generate_pair(spec), ValidationError);
}

TEST_CASE("zero shift: MMD stays inside the permutation null in most seeds") {
  const MmdConfig cfg;
  int below = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ShiftSpec spec;
    spec.per_class_count = 30;
    spec.rotation_deg = 0.0;
    spec.seed = seed;
    const auto [source, target] = generate_pair(spec);
    const double observed = mmd_value(source.features, target.features, cfg);

    const Matrix pooled = vstack(source.features, target.features);
    std::vector<std::size_t> idx(pooled.rows());
    Rng rng(1000 + seed);
    std::vector<double> null;
    for (int p = 0; p < 99; ++p) {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
      const std::span<const std::size_t> all(idx);
      const std::size_t half = source.features.rows();
      null.push_back(mmd_value(pooled.gather_rows(all.first(half)),
                               pooled.gather_rows(all.subspan(half)), cfg));
    }
    std::sort(null.begin(), null.end());
    below += observed < null[94];
  }
  CHECK(below >= 18);
}

TEST_CASE("training entry points cannot receive hidden labels") {
  static_assert(!std::is_convertible_v<UnlabeledDomain, TargetSamples>);
  static_assert(!std::is_invocable_v<decltype(&train_stage1), const LabeledDomain&,
                                     const UnlabeledDomain&, const Stage1Config&,
                                     const TargetEvaluator&>);
  static_assert(std::is_invocable_v<decltype(&train_stage1), const LabeledDomain&, TargetSamples,
                                    const Stage1Config&, const TargetEvaluator&>);
  ShiftSpec spec;
  spec.per_class_count = 5;
  const auto [source, target] = generate_pair(spec);
  const TargetSamples view = target.samples();
  CHECK(&view.features == &target.features);
}

TEST_CASE("save/load: bit-exact round trip") {
  ShiftSpec spec;
  spec.per_class_count = 10;
  spec.dim = 3;
  spec.seed = 5;
  const auto [source, target] = generate_pair(spec);
  save_domain(source, temp_path("source.txt"));
  save_domain(target, temp_path("target.txt"));
  const auto s2 = load_labeled_domain(temp_path("source.txt"));
  const auto t2 = load_unlabeled_domain(temp_path("target.txt"));
  CHECK(s2.features == source.features);
  CHECK(s2.labels == source.labels);
  CHECK(s2.num_classes == 3);
  CHECK(t2.features == target.features);
  CHECK(t2.hidden_labels == target.hidden_labels);

  UnlabeledDomain bare{target.features, 3, "bare", std::nullopt};
  save_domain(bare, temp_path("bare.txt"));
  CHECK_FALSE(load_unlabeled_domain(temp_path("bare.txt")).hidden_labels.has_value());
  CHECK_THROWS_AS(load_labeled_domain(temp_path("bare.txt")), ParseError);
}

TEST_CASE("load: non-numeric cell names the line") {
  const auto p = temp_path("bad_cell.txt");
  std::ofstream(p) << "2 2 2 1\n0.5 1.5 0\n0.25 abc 1\n";
  try {
    (void)load_labeled_domain(p);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":3:") != std::string::npos);
    CHECK(msg.find("abc") != std::string::npos);
  }
}

TEST_CASE("load: label outside the class range is a validation error") {
  const auto p = temp_path("bad_label.txt");
  std::ofstream(p) << "3 1 3 1\n0.1 0\n0.2 1\n0.3 5\n";
  CHECK_THROWS_AS(load_labeled_domain(p), ValidationError);
}

TEST_CASE("load: truncated file and bad header") {
  const auto p = temp_path("short.txt");
  std::ofstream(p) << "3 1 2 1\n0.1 0\n";
  CHECK_THROWS_AS(load_labeled_domain(p), ParseError);
  const auto q = temp_path("header.txt");
  std::ofstream(q) << "3 1 2\n";
  CHECK_THROWS_AS(load_labeled_domain(q), ParseError);
  CHECK_THROWS_AS(load_labeled_domain(temp_path("does_not_exist.txt")), IoError);
}
