#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gam/optimizer.hpp"

namespace gam {

class EmptyCampaign : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniformly random overlay padding of the given length, scored once.
struct BaselineResult {
  double score = 0.0;
  std::uint64_t injected = 0;
  bool detected = false;
};

BaselineResult random_baseline(const pe::PeFile& x, std::uint64_t payload_length,
                               std::uint64_t seed, const DetectorContract& detector);

/// Runs one attack and persists {trace.jsonl, adv.bin, meta.json} under
/// `run_dir`. Returns the result.
AttackResult run_and_persist_attack(const pe::PeFile& x, const std::string& input_name,
                                    const DetectorContract& detector, const PayloadCorpus& corpus,
                                    const OptimizerConfig& config,
                                    const std::filesystem::path& run_dir);

/// Runs one random baseline and persists {adv.bin, meta.json}.
BaselineResult run_and_persist_baseline(const pe::PeFile& x, const std::string& input_name,
                                        std::uint64_t payload_length, std::uint64_t seed,
                                        const DetectorContract& detector,
                                        const std::filesystem::path& run_dir);

struct SweepPlan {
  std::vector<std::filesystem::path> inputs;
  std::vector<double> lambdas;
  std::vector<int> budgets;
  std::vector<InjectionMode> modes;
  std::vector<std::uint64_t> seeds;
  OptimizerConfig base;  // lambda/budget/mode/seed are overridden per cell
};

/// Per-(mode, label mode, lambda, budget) aggregate over sweep runs.
struct CampaignRow {
  std::string mode;
  std::string label_mode;
  double lambda = 0.0;
  int budget = 0;
  std::size_t runs = 0;
  std::size_t failures = 0;
  double detection_rate = 0.0;
  double mean_penalty = 0.0;
  double mean_injected = 0.0;
  double mean_queries = 0.0;
  double mean_query_seconds = 0.0;
};

struct BaselineRow {
  std::uint64_t payload_length = 0;
  std::size_t runs = 0;
  double detection_rate = 0.0;
  double mean_injected = 0.0;
};

struct CampaignReport {
  std::vector<CampaignRow> rows;
  std::vector<BaselineRow> baseline;
};

/// Runs the full grid |inputs| x |lambdas| x |budgets| x |modes| x |seeds|,
/// persisting every run under out_dir/<mode>/<lambda>/<budget>/<input>__s<seed>/.
/// Individual run failures are recorded and never abort the campaign.
CampaignReport sweep(const SweepPlan& plan, const DetectorContract& detector,
                     const PayloadCorpus& corpus, const std::filesystem::path& out_dir);

/// Rebuilds the aggregate view from persisted meta.json files; deterministic
/// for an unchanged campaign directory. Throws EmptyCampaign when no run
/// records exist.
CampaignReport load_campaign(const std::filesystem::path& campaign_dir);

/// report.csv (one row per aggregate) and baseline.csv when baseline runs
/// exist.
void write_report_csv(const CampaignReport& report, const std::filesystem::path& out_dir);

/// detection_vs_queries.svg and payload_vs_queries.svg: scatter plus a
/// least-squares regression line per lambda series, and the random-baseline
/// reference when present.
void render_plots(const CampaignReport& report, const std::filesystem::path& out_dir);

}  // namespace gam
