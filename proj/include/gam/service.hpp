#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>

#include "gam/detector.hpp"

namespace gam {

class BindFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedResponse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One scoring attempt (including retries) could not be completed.
class CandidateEvaluationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// HTTP facade over a detector, simulating the cloud black box:
///   POST /score  (octet-stream body) -> {"score": <double>}
///   POST /label  (octet-stream body) -> {"label": 0|1}
///   GET  /stats                      -> {"queries": <count>}
/// Every /score or /label request bumps the query counter by exactly one.
class ScoringService {
 public:
  /// Binds and starts serving on host:port (port 0 picks a free port).
  /// Throws BindFailure when the address cannot be bound.
  ScoringService(DetectorContract detector, const std::string& host, int port);
  ~ScoringService();

  ScoringService(const ScoringService&) = delete;
  ScoringService& operator=(const ScoringService&) = delete;

  int port() const;
  std::uint64_t queries() const;
  std::string base_url() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Number of retries after a failed transport attempt, fixed so traces stay
/// deterministic.
inline constexpr int kRemoteRetries = 2;

/// Client-side contract issuing one HTTP request per score call. Soft mode
/// reads /score; hard mode reads /label and maps 1 to the +inf sentinel.
/// `theta` is only needed in soft mode (the service thresholds hard labels
/// itself) and defaults to the conventional 0.5.
DetectorContract remote_detector(const std::string& base_url, LabelMode mode, double theta = 0.5);

}  // namespace gam
