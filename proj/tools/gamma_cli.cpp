// gamma: black-box evasion toolkit for static PE malware detectors.
//
// Subcommands cover the whole workflow at desk scale: generate synthetic
// fixtures, harvest a benign payload corpus, train and serve the surrogate
// detector, run single attacks, sweep campaigns, score the random baseline,
// and render reports. Set GAMMA_REMOTE_URL to score through a running
// `gamma serve` instance instead of in-process.

#include <cmath>
#include <cstdlib>
#include <future>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "gam/campaign.hpp"
#include "gam/corpus.hpp"
#include "gam/detector.hpp"
#include "gam/fixtures.hpp"
#include "gam/service.hpp"

namespace fs = std::filesystem;
using namespace gam;

namespace {

std::vector<fs::path> list_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

DetectorContract resolve_detector(const SurrogateModel& model, LabelMode label_mode) {
  if (const char* url = std::getenv("GAMMA_REMOTE_URL")) {
    std::cerr << "scoring through " << url << " (" << label_mode_name(label_mode) << " labels)\n";
    return remote_detector(url, label_mode, model.theta);
  }
  const DetectorContract soft = make_local_detector(model);
  return label_mode == LabelMode::Soft ? soft : hard_label_wrap(soft);
}

pe::PeFile load_pe(const fs::path& path) {
  try {
    return pe::parse(read_file_bytes(path));
  } catch (const pe::ParseError& e) {
    throw std::runtime_error(path.string() + ": not parseable: " + e.what());
  }
}

int cmd_gen_fixtures(const std::string& profile_name, int count, std::uint64_t seed,
                     const fs::path& out) {
  const FixtureProfile profile = profile_name == "benign"
                                     ? FixtureProfile::benign_like(seed)
                                     : FixtureProfile::malware_like(seed);
  const auto paths = generate_fixtures(profile, count, out);
  std::cout << "wrote " << paths.size() << " " << profile_name << " fixtures to " << out.string()
            << "\n";
  return 0;
}

int cmd_harvest(const fs::path& benign_dir, const HarvestOptions& options, const fs::path& out) {
  const PayloadCorpus corpus = harvest(benign_dir, options);
  save(corpus, out);
  std::cout << "harvested " << corpus.size() << " sections (" << corpus.total_bytes()
            << " bytes) into " << out.string() << "\n";
  return 0;
}

int cmd_train(const fs::path& benign_dir, const fs::path& malware_dir, TrainingConfig config,
              double target_fpr, const fs::path& out) {
  const auto benign = list_files(benign_dir);
  const auto malware = list_files(malware_dir);
  TrainingReport report;
  SurrogateModel model = train_surrogate_files(benign, malware, config, &report);

  std::vector<double> benign_scores;
  benign_scores.reserve(benign.size());
  for (const auto& path : benign) benign_scores.push_back(model.score_bytes(read_file_bytes(path)));
  bool unreachable = false;
  model.theta = choose_threshold(benign_scores, target_fpr, &unreachable);

  model.save(out);
  std::cout << "trained on " << benign.size() << " benign + " << malware.size()
            << " malicious files\n"
            << "train accuracy " << report.train_accuracy << ", dropped columns "
            << report.dropped_columns << "\n"
            << "theta " << model.theta << " (target FPR " << target_fpr
            << (unreachable ? ", unreachable at this set size" : "") << ")\n"
            << "model written to " << out.string() << "\n";
  return 0;
}

int cmd_serve(const fs::path& model_path, LabelMode mode, const std::string& bind) {
  const SurrogateModel model = SurrogateModel::load(model_path);
  const DetectorContract soft = make_local_detector(model);
  const DetectorContract det = mode == LabelMode::Soft ? soft : hard_label_wrap(soft);

  std::string host = bind;
  int port = 8080;
  if (const auto colon = bind.rfind(':'); colon != std::string::npos) {
    host = bind.substr(0, colon);
    port = std::stoi(bind.substr(colon + 1));
  }
  ScoringService service(det, host, port);
  std::cout << "serving " << label_mode_name(mode) << "-label scores on " << service.base_url()
            << " (POST /score, POST /label, GET /stats); Ctrl-C to stop\n";
  // park the main thread; the service runs until the process is killed
  std::promise<void>().get_future().wait();
  return 0;
}

int cmd_attack(const fs::path& input, const fs::path& corpus_dir, const fs::path& model_path,
               OptimizerConfig config, LabelMode label_mode, const fs::path& out) {
  const pe::PeFile x = load_pe(input);
  const PayloadCorpus corpus = load(corpus_dir);
  const SurrogateModel model = SurrogateModel::load(model_path);
  const DetectorContract det = resolve_detector(model, label_mode);

  const AttackResult result = run_and_persist_attack(x, input.filename().string(), det, corpus,
                                                     config, out);
  std::cout << "queries " << result.queries_used << ", best F "
            << (std::isinf(result.best_objective) ? std::string("inf")
                                                  : std::to_string(result.best_objective))
            << ", penalty " << result.best_penalty << ", injected " << result.best_injected
            << " bytes, " << (result.evasive ? "EVASIVE" : "still detected") << "\n"
            << "artifacts in " << out.string() << "\n";
  return result.evasive ? 0 : 2;
}

int cmd_sweep(const fs::path& inputs_dir, const fs::path& corpus_dir, const fs::path& model_path,
              SweepPlan plan, LabelMode label_mode, const fs::path& out) {
  plan.inputs = list_files(inputs_dir);
  const PayloadCorpus corpus = load(corpus_dir);
  const SurrogateModel model = SurrogateModel::load(model_path);
  const DetectorContract det = resolve_detector(model, label_mode);

  const CampaignReport report = sweep(plan, det, corpus, out);
  write_report_csv(report, out);
  render_plots(report, out);
  std::cout << "campaign finished: " << report.rows.size() << " aggregate rows under "
            << out.string() << "\n";
  return 0;
}

int cmd_baseline(const fs::path& inputs_dir, const fs::path& model_path,
                 const std::vector<std::uint64_t>& lengths,
                 const std::vector<std::uint64_t>& seeds, LabelMode label_mode,
                 const fs::path& out) {
  const SurrogateModel model = SurrogateModel::load(model_path);
  const DetectorContract det = resolve_detector(model, label_mode);

  std::size_t runs = 0;
  for (const auto& input : list_files(inputs_dir)) {
    const pe::PeFile x = load_pe(input);
    for (const auto length : lengths)
      for (const auto seed : seeds) {
        const fs::path run_dir = out / "baseline" / std::to_string(length) /
                                 (input.stem().string() + "__s" + std::to_string(seed));
        run_and_persist_baseline(x, input.filename().string(), length, seed, det, run_dir);
        ++runs;
      }
  }
  std::cout << "baseline: " << runs << " runs recorded under " << out.string() << "\n";
  return 0;
}

int cmd_report(const fs::path& campaign_dir, const fs::path& out) {
  const CampaignReport report = load_campaign(campaign_dir);
  write_report_csv(report, out);
  render_plots(report, out);
  std::cout << "report.csv";
  if (!report.baseline.empty()) std::cout << ", baseline.csv";
  std::cout << ", detection_vs_queries.svg, payload_vs_queries.svg written to " << out.string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"black-box evasion toolkit for static PE malware detectors"};
  app.require_subcommand(1);

  // gen-fixtures
  std::string profile = "benign";
  int count = 50;
  std::uint64_t seed = 0;
  fs::path out_dir;
  auto* gen = app.add_subcommand("gen-fixtures", "generate synthetic PE fixtures");
  gen->add_option("--profile", profile, "benign|malware")
      ->check(CLI::IsMember({"benign", "malware"}));
  gen->add_option("--count", count, "number of files")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--out", out_dir, "output directory")->required();

  // harvest
  fs::path benign_dir;
  HarvestOptions harvest_options;
  auto* harv = app.add_subcommand("harvest", "harvest benign sections into a payload corpus");
  harv->add_option("--benign-dir", benign_dir, "directory of benign PE files")->required();
  harv->add_option("--name", harvest_options.name_filter, "section name filter");
  harv->add_option("--max-sections", harvest_options.max_sections, "section count cap");
  harv->add_option("--max-bytes", harvest_options.max_total_bytes, "total byte cap");
  harv->add_option("--seed", harvest_options.seed, "selection seed");
  harv->add_option("--out", out_dir, "corpus directory")->required();

  // train
  fs::path malware_dir, model_path;
  TrainingConfig train_config;
  double target_fpr = 0.05;
  auto* train = app.add_subcommand("train", "train the surrogate detector");
  train->add_option("--benign-dir", benign_dir, "benign training files")->required();
  train->add_option("--malware-dir", malware_dir, "malicious training files")->required();
  train->add_option("--lr", train_config.learning_rate, "learning rate");
  train->add_option("--epochs", train_config.epochs, "training epochs");
  train->add_option("--l2", train_config.l2, "L2 weight penalty");
  train->add_option("--seed", train_config.seed, "training seed");
  train->add_option("--target-fpr", target_fpr, "false-positive target for theta");
  train->add_option("--out", model_path, "model JSON path")->required();

  // serve
  std::string label_mode_name_opt = "soft";
  std::string bind_addr = "127.0.0.1:8080";
  auto* serve = app.add_subcommand("serve", "expose a model over HTTP");
  serve->add_option("--model", model_path, "model JSON path")->required();
  serve->add_option("--mode", label_mode_name_opt, "soft|hard")
      ->check(CLI::IsMember({"soft", "hard"}));
  serve->add_option("--bind", bind_addr, "host:port");

  // attack
  fs::path input_path, corpus_dir;
  OptimizerConfig attack_config;
  std::string mode_name = "section-injection";
  auto* attack = app.add_subcommand("attack", "run one optimized attack");
  attack->add_option("--input", input_path, "input PE file")->required();
  attack->add_option("--corpus", corpus_dir, "payload corpus directory")->required();
  attack->add_option("--model", model_path, "model JSON path")->required();
  attack->add_option("--lambda", attack_config.lambda, "payload-size regularizer");
  attack->add_option("--budget", attack_config.query_budget, "query budget T");
  attack->add_option("--population", attack_config.population_size, "population size N");
  attack->add_option("--mutation-rate", attack_config.mutation_rate, "per-element mutation rate");
  attack->add_option("--stagnation-generations", attack_config.stagnation_generations,
                     "halt after this many stagnant generations");
  attack->add_option("--stagnation-epsilon", attack_config.stagnation_epsilon,
                     "relative improvement threshold");
  attack->add_option("--mode", mode_name, "padding|section-injection")
      ->check(CLI::IsMember({"padding", "section-injection"}));
  attack->add_option("--label-mode", label_mode_name_opt, "soft|hard")
      ->check(CLI::IsMember({"soft", "hard"}));
  attack->add_option("--seed", attack_config.seed, "attack seed");
  attack->add_option("--out", out_dir, "output directory")->required();

  // sweep
  SweepPlan plan;
  std::vector<double> lambdas{1e-3, 1e-6, 1e-9};
  std::vector<int> budgets{30, 500};
  std::vector<std::string> mode_names{"padding", "section-injection"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  fs::path inputs_dir;
  auto* sweep_cmd = app.add_subcommand("sweep", "run a full attack campaign grid");
  sweep_cmd->add_option("--inputs-dir", inputs_dir, "directory of input samples")->required();
  sweep_cmd->add_option("--corpus", corpus_dir, "payload corpus directory")->required();
  sweep_cmd->add_option("--model", model_path, "model JSON path")->required();
  sweep_cmd->add_option("--lambdas", lambdas, "lambda grid");
  sweep_cmd->add_option("--budgets", budgets, "query budget grid");
  sweep_cmd->add_option("--modes", mode_names, "injection modes");
  sweep_cmd->add_option("--seeds", seeds, "seeds per cell");
  sweep_cmd->add_option("--population", plan.base.population_size, "population size N");
  sweep_cmd->add_option("--label-mode", label_mode_name_opt, "soft|hard")
      ->check(CLI::IsMember({"soft", "hard"}));
  sweep_cmd->add_option("--out", out_dir, "campaign directory")->required();

  // baseline
  std::vector<std::uint64_t> lengths{10240, 102400, 1048576};
  auto* baseline = app.add_subcommand("baseline", "random padding baseline");
  baseline->add_option("--inputs-dir", inputs_dir, "directory of input samples")->required();
  baseline->add_option("--model", model_path, "model JSON path")->required();
  baseline->add_option("--lengths", lengths, "payload lengths in bytes");
  baseline->add_option("--seeds", seeds, "seeds per length");
  baseline->add_option("--label-mode", label_mode_name_opt, "soft|hard")
      ->check(CLI::IsMember({"soft", "hard"}));
  baseline->add_option("--out", out_dir, "campaign directory")->required();

  // report
  fs::path campaign_dir, report_out;
  auto* report = app.add_subcommand("report", "aggregate a campaign into CSV and plots");
  report->add_option("campaign", campaign_dir, "campaign directory")->required();
  report->add_option("--out", report_out, "output directory (default: campaign dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_fixtures(profile, count, seed, out_dir);
    if (harv->parsed()) return cmd_harvest(benign_dir, harvest_options, out_dir);
    if (train->parsed())
      return cmd_train(benign_dir, malware_dir, train_config, target_fpr, model_path);
    if (serve->parsed())
      return cmd_serve(model_path, label_mode_from_name(label_mode_name_opt), bind_addr);
    if (attack->parsed()) {
      attack_config.mode = injection_mode_from_name(mode_name);
      return cmd_attack(input_path, corpus_dir, model_path, attack_config,
                        label_mode_from_name(label_mode_name_opt), out_dir);
    }
    if (sweep_cmd->parsed()) {
      plan.lambdas = lambdas;
      plan.budgets = budgets;
      for (const auto& name : mode_names) plan.modes.push_back(injection_mode_from_name(name));
      plan.seeds = seeds;
      return cmd_sweep(inputs_dir, corpus_dir, model_path, plan,
                       label_mode_from_name(label_mode_name_opt), out_dir);
    }
    if (baseline->parsed())
      return cmd_baseline(inputs_dir, model_path, lengths, seeds,
                          label_mode_from_name(label_mode_name_opt), out_dir);
    if (report->parsed())
      return cmd_report(campaign_dir, report_out.empty() ? campaign_dir : report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
