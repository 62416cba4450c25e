#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "gam/detector.hpp"
#include "gam/fixtures.hpp"
#include "gam/rng.hpp"
#include "helpers.hpp"

using namespace gam;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct FixtureSets {
  std::vector<std::vector<double>> benign;
  std::vector<std::vector<double>> malicious;
};

FixtureSets fixture_features(int per_class, std::uint64_t seed) {
  FixtureSets sets;
  const auto benign = FixtureProfile::benign_like(seed);
  const auto malware = FixtureProfile::malware_like(seed + 1);
  for (int i = 0; i < per_class; ++i) {
    sets.benign.push_back(
        extract_features(pe::serialize(make_fixture(benign, i))).to_dense());
    sets.malicious.push_back(
        extract_features(pe::serialize(make_fixture(malware, i))).to_dense());
  }
  return sets;
}

}  // namespace

TEST_CASE("surrogate separates the fixture classes") {
  const auto sets = fixture_features(50, 42);
  TrainingReport report;
  const SurrogateModel model = train_surrogate(sets.benign, sets.malicious, TrainingConfig{}, &report);
  CHECK(report.train_accuracy >= 0.95);
  CHECK(model.weights.size() == FeatureVector::kWidth);

  // scores order the classes the right way around
  double benign_mean = 0, malicious_mean = 0;
  for (const auto& row : sets.benign) benign_mean += model.score_dense(row) / sets.benign.size();
  for (const auto& row : sets.malicious)
    malicious_mean += model.score_dense(row) / sets.malicious.size();
  CHECK(malicious_mean > benign_mean);
}

TEST_CASE("training is deterministic and rejects empty classes") {
  const auto sets = fixture_features(10, 3);
  const SurrogateModel a = train_surrogate(sets.benign, sets.malicious, TrainingConfig{});
  const SurrogateModel b = train_surrogate(sets.benign, sets.malicious, TrainingConfig{});
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);

  CHECK_THROWS_AS(train_surrogate({}, sets.malicious, TrainingConfig{}), DetectorError);
  CHECK_THROWS_AS(train_surrogate(sets.benign, {}, TrainingConfig{}), DetectorError);
}

TEST_CASE("constant columns are dropped, not fatal") {
  // two informative columns plus one constant column
  std::vector<std::vector<double>> benign{{0.0, 1.0, 7.0}, {0.1, 0.9, 7.0}, {0.2, 1.1, 7.0}};
  std::vector<std::vector<double>> malicious{{1.0, 0.0, 7.0}, {0.9, 0.1, 7.0}, {1.1, -0.1, 7.0}};
  TrainingReport report;
  const SurrogateModel model = train_surrogate(benign, malicious, TrainingConfig{}, &report);
  CHECK(report.dropped_columns == 1);
  CHECK(model.weights[2] == 0.0);
  CHECK(report.train_accuracy == 1.0);
}

TEST_CASE("model persistence round-trips") {
  testutil::TempDir dir("model");
  const auto sets = fixture_features(8, 17);
  SurrogateModel model = train_surrogate(sets.benign, sets.malicious, TrainingConfig{});
  model.theta = 0.625;
  model.save(dir.path() / "m.json");

  const SurrogateModel loaded = SurrogateModel::load(dir.path() / "m.json");
  CHECK(loaded.weights == model.weights);
  CHECK(loaded.bias == model.bias);
  CHECK(loaded.theta == model.theta);

  std::ofstream(dir.path() / "junk.json") << "{\"feature_layout_version\": 999}";
  CHECK_THROWS_AS(SurrogateModel::load(dir.path() / "junk.json"), DetectorError);
  CHECK_THROWS_AS(SurrogateModel::load(dir.path() / "absent.json"), DetectorError);
}

TEST_CASE("choose_threshold matches a brute-force oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> scores;
    const std::size_t n = 5 + rng.below(60);
    for (std::size_t i = 0; i < n; ++i)
      scores.push_back(std::round(rng.uniform() * 20) / 20.0);  // coarse grid forces ties
    const double target = rng.uniform();

    bool unreachable = false;
    const double theta = choose_threshold(scores, target, &unreachable);

    const auto fpr_at = [&scores](double t) {
      std::size_t hits = 0;
      for (double s : scores) hits += s >= t ? 1 : 0;
      return static_cast<double>(hits) / static_cast<double>(scores.size());
    };
    CHECK(fpr_at(theta) <= target);
    if (!unreachable) {
      // no strictly smaller candidate score is admissible
      for (double s : scores)
        if (s < theta) CHECK(fpr_at(s) > target);
    }
  }
}

TEST_CASE("choose_threshold edge cases") {
  SUBCASE("target 1.0 returns the minimum score") {
    const std::vector<double> scores{0.9, 0.2, 0.5};
    CHECK(choose_threshold(scores, 1.0) == 0.2);
  }
  SUBCASE("identical scores force theta just above") {
    const std::vector<double> scores(7, 0.4);
    bool unreachable = false;
    const double theta = choose_threshold(scores, 0.5, &unreachable);
    CHECK(theta > 0.4);
    CHECK(theta == doctest::Approx(0.4));
    CHECK(unreachable);
  }
  SUBCASE("target below granularity") {
    const std::vector<double> scores{0.1, 0.2, 0.3};
    bool unreachable = false;
    const double theta = choose_threshold(scores, 0.1, &unreachable);  // < 1/3
    CHECK(unreachable);
    CHECK(theta > 0.3);
  }
  SUBCASE("empty validation set") {
    CHECK_THROWS_AS(choose_threshold({}, 0.5), DetectorError);
  }
}

TEST_CASE("hard-label wrap maps labels to the {0, inf} sentinel pair") {
  DetectorContract soft;
  soft.theta = 0.5;
  soft.mode = LabelMode::Soft;
  double fixed_score = 0.0;
  soft.score = [&fixed_score](ByteView) { return fixed_score; };

  const DetectorContract hard = hard_label_wrap(soft);
  const Bytes any{1, 2, 3};

  fixed_score = 0.2;
  CHECK(hard.score(any) == 0.0);
  CHECK_FALSE(hard.label(any));
  fixed_score = 0.9;
  CHECK(hard.score(any) == kInf);
  CHECK(hard.label(any));
  fixed_score = 0.5;  // boundary: score >= theta is malicious
  CHECK(hard.score(any) == kInf);

  // sentinel arithmetic used by the objective stays infinite
  CHECK(kInf + 1e-6 * 12345.0 == kInf);
}

TEST_CASE("hard-label wrap with infinite theta maps everything to 0") {
  DetectorContract soft;
  soft.theta = kInf;
  soft.score = [](ByteView) { return 0.999999; };
  const DetectorContract hard = hard_label_wrap(soft);
  CHECK(hard.score(Bytes{0}) == 0.0);
}

TEST_CASE("hard-label wrap is invariant to threshold-preserving rescalings") {
  const Bytes inputs[] = {{1}, {2}, {3}, {4}};
  auto raw = [](ByteView b) { return static_cast<double>(b[0]) / 5.0; };

  DetectorContract d1;
  d1.theta = 0.5;
  d1.score = raw;
  DetectorContract d2;  // monotone rescaling: s -> 3s + 1, theta adjusted
  d2.theta = 3 * 0.5 + 1;
  d2.score = [raw](ByteView b) { return 3 * raw(b) + 1; };

  const DetectorContract h1 = hard_label_wrap(d1);
  const DetectorContract h2 = hard_label_wrap(d2);
  for (const auto& input : inputs) CHECK(h1.score(input) == h2.score(input));
}

TEST_CASE("local detector contract wraps the model") {
  const auto sets = fixture_features(6, 23);
  SurrogateModel model = train_surrogate(sets.benign, sets.malicious, TrainingConfig{});
  model.theta = 0.7;
  const DetectorContract det = make_local_detector(model);
  const Bytes img = pe::serialize(make_fixture(FixtureProfile::malware_like(24), 0));
  CHECK(det.score(img) == model.score_bytes(img));
  CHECK(det.theta == 0.7);
  CHECK(det.mode == LabelMode::Soft);
}
