#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gam/bytes.hpp"
#include "gam/features.hpp"

namespace gam {

class DetectorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LabelMode { Soft, Hard };

const char* label_mode_name(LabelMode mode);
LabelMode label_mode_from_name(const std::string& name);

/// The black box the attack queries: a maliciousness score (higher = more
/// malicious) and the decision threshold. Hard-label detectors collapse the
/// score to {0, +inf}; arithmetic with the infinite sentinel stays infinite,
/// which is exactly what the optimizer relies on to discard detected
/// candidates.
struct DetectorContract {
  std::function<double(ByteView)> score;
  double theta = 0.5;
  LabelMode mode = LabelMode::Soft;

  bool label(ByteView bytes) const { return score(bytes) >= theta; }
};

struct TrainingConfig {
  double learning_rate = 0.1;
  int epochs = 400;
  // L2 weight penalty. Keeps the fitted margins moderate on separable data,
  // so scores stay responsive inside (0,1) instead of saturating the
  // sigmoid; a score pinned at 1.0 would give a black-box attacker nothing
  // to rank candidates by, which real detectors do not exhibit.
  double l2 = 1.0;
  std::uint64_t seed = 0;  // retained for reproducibility bookkeeping; the
                           // full-batch fit below draws no random numbers
};

struct TrainingReport {
  double train_accuracy = 0.0;
  std::size_t dropped_columns = 0;  // constant across both classes
  double final_loss = 0.0;
};

/// Logistic-linear scorer over the dense feature projection:
/// score = sigmoid(w . phi(x) + b). Stands in for a pretrained detector
/// behind the same query interface; nothing downstream assumes linearity.
struct SurrogateModel {
  static constexpr int kFeatureLayoutVersion = 1;

  std::vector<double> weights;  // FeatureVector::kWidth
  double bias = 0.0;
  double theta = 0.5;

  double score_dense(const std::vector<double>& dense) const;
  double score_bytes(ByteView bytes) const;

  void save(const std::filesystem::path& path) const;
  static SurrogateModel load(const std::filesystem::path& path);
};

/// Fits the logistic model by deterministic full-batch gradient descent on
/// z-scored columns, then folds the normalization into the stored weights so
/// scoring is a plain dot product on raw dense features. Columns constant
/// across the entire training set are dropped (weight zero). Throws
/// DetectorError if either class is empty.
SurrogateModel train_surrogate(const std::vector<std::vector<double>>& benign,
                               const std::vector<std::vector<double>>& malicious,
                               const TrainingConfig& config, TrainingReport* report = nullptr);

/// File-set convenience wrapper over the matrix overload.
SurrogateModel train_surrogate_files(const std::vector<std::filesystem::path>& benign,
                                     const std::vector<std::filesystem::path>& malicious,
                                     const TrainingConfig& config,
                                     TrainingReport* report = nullptr);

/// Smallest theta whose empirical false-positive rate on the validation
/// scores is <= target_fpr. When no attainable threshold exists at the set's
/// granularity, returns just above the maximum score and sets *unreachable.
double choose_threshold(const std::vector<double>& benign_scores, double target_fpr,
                        bool* unreachable = nullptr);

/// In-process soft-label contract around a trained model.
DetectorContract make_local_detector(const SurrogateModel& model);

/// Wraps a soft-label detector into the hard-label contract: 0 when the
/// underlying label is benign, +inf otherwise; theta is fixed at 1.
DetectorContract hard_label_wrap(const DetectorContract& soft);

Bytes read_file_bytes(const std::filesystem::path& path);

}  // namespace gam
