#include "gam/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace gam {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

const char* label_mode_name(LabelMode mode) {
  return mode == LabelMode::Soft ? "soft" : "hard";
}

LabelMode label_mode_from_name(const std::string& name) {
  if (name == "soft") return LabelMode::Soft;
  if (name == "hard") return LabelMode::Hard;
  throw DetectorError("unknown label mode: " + name);
}

Bytes read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DetectorError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

double SurrogateModel::score_dense(const std::vector<double>& dense) const {
  if (dense.size() != weights.size())
    throw DetectorError("feature width " + std::to_string(dense.size()) +
                        " does not match model width " + std::to_string(weights.size()));
  double z = bias;
  for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * dense[j];
  return sigmoid(z);
}

double SurrogateModel::score_bytes(ByteView bytes) const {
  return score_dense(extract_features(bytes).to_dense());
}

void SurrogateModel::save(const std::filesystem::path& path) const {
  nlohmann::json doc{{"feature_layout_version", kFeatureLayoutVersion},
                     {"weights", weights},
                     {"bias", bias},
                     {"theta", theta}};
  std::ofstream out(path, std::ios::trunc);
  out << doc.dump(2) << '\n';
  if (!out) throw DetectorError("cannot write model to " + path.string());
}

SurrogateModel SurrogateModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DetectorError("cannot open model " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DetectorError(std::string("malformed model file: ") + e.what());
  }
  if (doc.value("feature_layout_version", -1) != kFeatureLayoutVersion)
    throw DetectorError("model feature layout version mismatch");
  SurrogateModel model;
  model.weights = doc.at("weights").get<std::vector<double>>();
  model.bias = doc.at("bias").get<double>();
  model.theta = doc.at("theta").get<double>();
  if (model.weights.size() != FeatureVector::kWidth)
    throw DetectorError("model width does not match feature layout");
  return model;
}

SurrogateModel train_surrogate(const std::vector<std::vector<double>>& benign,
                               const std::vector<std::vector<double>>& malicious,
                               const TrainingConfig& config, TrainingReport* report) {
  if (benign.empty() || malicious.empty())
    throw DetectorError("both classes must be nonempty to train");

  const std::size_t width = benign.front().size();
  const std::size_t n = benign.size() + malicious.size();
  std::vector<const std::vector<double>*> rows;
  std::vector<double> labels;
  rows.reserve(n);
  labels.reserve(n);
  for (const auto& r : benign) {
    rows.push_back(&r);
    labels.push_back(0.0);
  }
  for (const auto& r : malicious) {
    rows.push_back(&r);
    labels.push_back(1.0);
  }
  for (const auto* r : rows)
    if (r->size() != width) throw DetectorError("inconsistent feature widths in training set");

  // Column statistics; constant columns are dropped rather than divided by
  // a zero spread.
  std::vector<double> mean(width, 0.0), stddev(width, 0.0);
  for (const auto* r : rows)
    for (std::size_t j = 0; j < width; ++j) mean[j] += (*r)[j];
  for (auto& m : mean) m /= static_cast<double>(n);
  for (const auto* r : rows)
    for (std::size_t j = 0; j < width; ++j) {
      const double d = (*r)[j] - mean[j];
      stddev[j] += d * d;
    }
  // Columns that are constant, or constant up to floating-point noise, are
  // dropped outright. Dividing by a vanishing spread would fold into raw
  // weights of ~1/sigma, which detonate on inputs outside the training range.
  std::size_t dropped = 0;
  for (std::size_t j = 0; j < width; ++j) {
    auto& s = stddev[j];
    s = std::sqrt(s / static_cast<double>(n));
    if (s <= 1e-9 * (1.0 + std::fabs(mean[j]))) {
      s = 0.0;
      ++dropped;
    }
  }

  std::vector<std::vector<double>> z(n, std::vector<double>(width, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j)
      if (stddev[j] > 0.0) z[i][j] = ((*rows[i])[j] - mean[j]) / stddev[j];

  std::vector<double> w(width, 0.0);
  double b = 0.0;
  double loss = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<double> grad(width, 0.0);
    double grad_b = 0.0;
    loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double zi = b;
      for (std::size_t j = 0; j < width; ++j) zi += w[j] * z[i][j];
      const double p = sigmoid(zi);
      const double err = p - labels[i];
      for (std::size_t j = 0; j < width; ++j) grad[j] += err * z[i][j];
      grad_b += err;
      const double eps = 1e-12;
      loss -= labels[i] > 0.5 ? std::log(p + eps) : std::log(1.0 - p + eps);
    }
    const double scale = config.learning_rate / static_cast<double>(n);
    for (std::size_t j = 0; j < width; ++j)
      w[j] -= scale * grad[j] + config.learning_rate * config.l2 * w[j];
    b -= scale * grad_b;  // bias is not decayed
  }

  // Fold the z-score back into the raw-feature space:
  // w.z(x) + b == (w/sigma).x + (b - sum w*mu/sigma).
  SurrogateModel model;
  model.weights.assign(width, 0.0);
  model.bias = b;
  for (std::size_t j = 0; j < width; ++j) {
    if (stddev[j] == 0.0) continue;
    model.weights[j] = w[j] / stddev[j];
    model.bias -= w[j] * mean[j] / stddev[j];
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = model.score_dense(*rows[i]);
    if ((s >= 0.5) == (labels[i] > 0.5)) ++correct;
  }
  if (report) {
    report->train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    report->dropped_columns = dropped;
    report->final_loss = loss / static_cast<double>(n);
  }
  return model;
}

SurrogateModel train_surrogate_files(const std::vector<std::filesystem::path>& benign,
                                     const std::vector<std::filesystem::path>& malicious,
                                     const TrainingConfig& config, TrainingReport* report) {
  auto densify = [](const std::vector<std::filesystem::path>& paths) {
    std::vector<std::vector<double>> rows;
    rows.reserve(paths.size());
    for (const auto& p : paths) rows.push_back(extract_features(read_file_bytes(p)).to_dense());
    return rows;
  };
  return train_surrogate(densify(benign), densify(malicious), config, report);
}

double choose_threshold(const std::vector<double>& benign_scores, double target_fpr,
                        bool* unreachable) {
  if (benign_scores.empty()) throw DetectorError("validation set is empty");
  if (unreachable) *unreachable = false;

  std::vector<double> sorted = benign_scores;
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());

  // Walk distinct scores ascending; the first whose >=-count satisfies the
  // target is the smallest admissible theta.
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i] == sorted[i - 1]) continue;
    const double fpr = static_cast<double>(sorted.size() - i) / n;
    if (fpr <= target_fpr) return sorted[i];
  }
  if (unreachable) *unreachable = true;
  return std::nextafter(sorted.back(), std::numeric_limits<double>::infinity());
}

DetectorContract make_local_detector(const SurrogateModel& model) {
  DetectorContract det;
  det.score = [model](ByteView bytes) { return model.score_bytes(bytes); };
  det.theta = model.theta;
  det.mode = LabelMode::Soft;
  return det;
}

DetectorContract hard_label_wrap(const DetectorContract& soft) {
  DetectorContract det;
  det.score = [soft](ByteView bytes) {
    return soft.label(bytes) ? std::numeric_limits<double>::infinity() : 0.0;
  };
  det.theta = 1.0;
  det.mode = LabelMode::Hard;
  return det;
}

}  // namespace gam
