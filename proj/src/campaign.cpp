#include "gam/campaign.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

namespace gam {

namespace {

namespace fs = std::filesystem;

nlohmann::json number_or_inf(double v) {
  if (std::isinf(v)) return "inf";
  return nlohmann::json(v);
}

void write_binary(const fs::path& path, ByteView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), data.size());
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string lambda_dir_name(double lambda) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", lambda);
  return buf;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

BaselineResult random_baseline(const pe::PeFile& x, std::uint64_t payload_length,
                               std::uint64_t seed, const DetectorContract& detector) {
  pe::PeFile padded = x;
  Rng rng(seed);
  padded.overlay.reserve(padded.overlay.size() + payload_length);
  for (std::uint64_t i = 0; i < payload_length; ++i)
    padded.overlay.push_back(static_cast<std::uint8_t>(rng.below(256)));

  const Bytes bytes = pe::serialize(padded);
  BaselineResult result;
  result.injected = bytes.size() - pe::serialize(x).size();
  result.score = detector.score(bytes);
  result.detected = result.score >= detector.theta;
  return result;
}

AttackResult run_and_persist_attack(const pe::PeFile& x, const std::string& input_name,
                                    const DetectorContract& detector, const PayloadCorpus& corpus,
                                    const OptimizerConfig& config, const fs::path& run_dir) {
  fs::create_directories(run_dir);
  const auto started = std::chrono::steady_clock::now();
  AttackResult result = run_attack(x, detector, corpus, config);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
  const double per_query =
      result.queries_used == 0 ? 0.0 : elapsed.count() / static_cast<double>(result.queries_used);

  {
    std::ofstream trace(run_dir / "trace.jsonl", std::ios::trunc);
    write_trace(result, trace);
  }
  write_binary(run_dir / "adv.bin", pe::serialize(result.adversarial));

  nlohmann::json meta{{"kind", "attack"},
                      {"input", input_name},
                      {"lambda", config.lambda},
                      {"budget", config.query_budget},
                      {"mode", injection_mode_name(config.mode)},
                      {"label_mode", label_mode_name(detector.mode)},
                      {"seed", config.seed},
                      {"queries", result.queries_used},
                      {"best_F", number_or_inf(result.best_objective)},
                      {"final_score", number_or_inf(result.best_score)},
                      {"penalty", result.best_penalty},
                      {"injected", result.best_injected},
                      {"detected", !result.evasive},
                      {"seconds_per_query", per_query},
                      {"theta", detector.theta}};
  std::ofstream meta_out(run_dir / "meta.json", std::ios::trunc);
  meta_out << meta.dump(2) << '\n';
  return result;
}

BaselineResult run_and_persist_baseline(const pe::PeFile& x, const std::string& input_name,
                                        std::uint64_t payload_length, std::uint64_t seed,
                                        const DetectorContract& detector,
                                        const fs::path& run_dir) {
  fs::create_directories(run_dir);
  const auto started = std::chrono::steady_clock::now();
  BaselineResult result = random_baseline(x, payload_length, seed, detector);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;

  pe::PeFile padded = x;
  Rng rng(seed);
  padded.overlay.reserve(padded.overlay.size() + payload_length);
  for (std::uint64_t i = 0; i < payload_length; ++i)
    padded.overlay.push_back(static_cast<std::uint8_t>(rng.below(256)));
  write_binary(run_dir / "adv.bin", pe::serialize(padded));

  nlohmann::json meta{{"kind", "baseline"},
                      {"input", input_name},
                      {"payload_length", payload_length},
                      {"seed", seed},
                      {"score", number_or_inf(result.score)},
                      {"injected", result.injected},
                      {"detected", result.detected},
                      {"seconds_per_query", elapsed.count()}};
  std::ofstream meta_out(run_dir / "meta.json", std::ios::trunc);
  meta_out << meta.dump(2) << '\n';
  return result;
}

CampaignReport sweep(const SweepPlan& plan, const DetectorContract& detector,
                     const PayloadCorpus& corpus, const fs::path& out_dir) {
  if (plan.inputs.empty()) throw EmptyCampaign("sweep needs at least one input sample");

  for (const auto& input : plan.inputs) {
    const pe::PeFile x = pe::parse(read_file_bytes(input));
    const std::string stem = input.stem().string();
    for (const auto mode : plan.modes) {
      for (const double lambda : plan.lambdas) {
        for (const int budget : plan.budgets) {
          for (const std::uint64_t seed : plan.seeds) {
            OptimizerConfig config = plan.base;
            config.lambda = lambda;
            config.query_budget = budget;
            config.mode = mode;
            config.seed = seed;
            const fs::path run_dir = out_dir / injection_mode_name(mode) /
                                     lambda_dir_name(lambda) / std::to_string(budget) /
                                     (stem + "__s" + std::to_string(seed));
            try {
              run_and_persist_attack(x, input.filename().string(), detector, corpus, config,
                                     run_dir);
            } catch (const std::exception& e) {
              fs::create_directories(run_dir);
              nlohmann::json meta{{"kind", "failure"},
                                  {"input", input.filename().string()},
                                  {"lambda", lambda},
                                  {"budget", budget},
                                  {"mode", injection_mode_name(mode)},
                                  {"label_mode", label_mode_name(detector.mode)},
                                  {"seed", seed},
                                  {"error", e.what()}};
              std::ofstream meta_out(run_dir / "meta.json", std::ios::trunc);
              meta_out << meta.dump(2) << '\n';
            }
          }
        }
      }
    }
  }
  return load_campaign(out_dir);
}

CampaignReport load_campaign(const fs::path& campaign_dir) {
  if (!fs::is_directory(campaign_dir))
    throw EmptyCampaign("campaign directory does not exist: " + campaign_dir.string());

  std::vector<fs::path> metas;
  for (const auto& entry : fs::recursive_directory_iterator(campaign_dir))
    if (entry.is_regular_file() && entry.path().filename() == "meta.json")
      metas.push_back(entry.path());
  if (metas.empty()) throw EmptyCampaign("no run records under " + campaign_dir.string());
  std::sort(metas.begin(), metas.end());

  struct AttackAgg {
    std::size_t runs = 0, failures = 0, detected = 0;
    double penalty = 0, injected = 0, queries = 0, seconds = 0;
  };
  struct BaselineAgg {
    std::size_t runs = 0, detected = 0;
    double injected = 0;
  };
  // Keyed by (mode, label_mode, lambda, budget); map keeps rows ordered.
  std::map<std::tuple<std::string, std::string, double, int>, AttackAgg> attacks;
  std::map<std::uint64_t, BaselineAgg> baselines;

  for (const auto& path : metas) {
    std::ifstream in(path);
    nlohmann::json meta;
    try {
      in >> meta;
    } catch (const nlohmann::json::exception&) {
      continue;  // unreadable record; skip rather than abort the report
    }
    const std::string kind = meta.value("kind", "");
    if (kind == "attack" || kind == "failure") {
      const auto key = std::make_tuple(meta.value("mode", "?"), meta.value("label_mode", "?"),
                                       meta.value("lambda", 0.0), meta.value("budget", 0));
      auto& agg = attacks[key];
      if (kind == "failure") {
        ++agg.failures;
        continue;
      }
      ++agg.runs;
      agg.detected += meta.value("detected", false) ? 1 : 0;
      agg.penalty += meta.value("penalty", 0.0);
      agg.injected += meta.value("injected", 0.0);
      agg.queries += meta.value("queries", 0.0);
      agg.seconds += meta.value("seconds_per_query", 0.0);
    } else if (kind == "baseline") {
      auto& agg = baselines[meta.value("payload_length", std::uint64_t{0})];
      ++agg.runs;
      agg.detected += meta.value("detected", false) ? 1 : 0;
      agg.injected += meta.value("injected", 0.0);
    }
  }

  CampaignReport report;
  for (const auto& [key, agg] : attacks) {
    CampaignRow row;
    std::tie(row.mode, row.label_mode, row.lambda, row.budget) = key;
    row.runs = agg.runs;
    row.failures = agg.failures;
    if (agg.runs > 0) {
      const auto n = static_cast<double>(agg.runs);
      row.detection_rate = static_cast<double>(agg.detected) / n;
      row.mean_penalty = agg.penalty / n;
      row.mean_injected = agg.injected / n;
      row.mean_queries = agg.queries / n;
      row.mean_query_seconds = agg.seconds / n;
    }
    report.rows.push_back(row);
  }
  for (const auto& [length, agg] : baselines) {
    BaselineRow row;
    row.payload_length = length;
    row.runs = agg.runs;
    row.detection_rate = static_cast<double>(agg.detected) / static_cast<double>(agg.runs);
    row.mean_injected = agg.injected / static_cast<double>(agg.runs);
    report.baseline.push_back(row);
  }
  return report;
}

void write_report_csv(const CampaignReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "report.csv", std::ios::trunc);
  csv << "lambda,budget,mode,label_mode,detection_rate,mean_penalty,mean_injected_size,"
         "mean_query_seconds\n";
  for (const auto& row : report.rows) {
    csv << format_double(row.lambda) << ',' << row.budget << ',' << row.mode << ','
        << row.label_mode << ',' << format_double(row.detection_rate) << ','
        << format_double(row.mean_penalty) << ',' << format_double(row.mean_injected) << ','
        << format_double(row.mean_query_seconds) << '\n';
  }
  if (!report.baseline.empty()) {
    std::ofstream bcsv(out_dir / "baseline.csv", std::ios::trunc);
    bcsv << "payload_length,runs,detection_rate,mean_injected_size\n";
    for (const auto& row : report.baseline)
      bcsv << row.payload_length << ',' << row.runs << ',' << format_double(row.detection_rate)
           << ',' << format_double(row.mean_injected) << '\n';
  }
}

namespace {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf"};

// Least-squares y = a + b*x; falls back to a horizontal mean line for a
// single point or a vertical point cloud.
std::pair<double, double> fit_line(const std::vector<std::pair<double, double>>& pts) {
  const auto n = static_cast<double>(pts.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) return {sy / n, 0.0};
  const double b = (n * sxy - sx * sy) / denom;
  return {(sy - b * sx) / n, b};
}

void render_xy_plot(const fs::path& path, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<Series>& series,
                    const double* baseline_y, const std::string& baseline_label) {
  constexpr double kW = 640, kH = 480, kL = 70, kR = 160, kT = 40, kB = 50;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (first) {
        xmin = xmax = x;
        ymin = ymax = y;
        first = false;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (baseline_y) {
    ymin = std::min(ymin, *baseline_y);
    ymax = std::max(ymax, *baseline_y);
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double xpad = (xmax - xmin) * 0.05, ypad = (ymax - ymin) * 0.08;
  xmin -= xpad; xmax += xpad; ymin -= ypad; ymax += ypad;

  auto px = [&](double x) { return kL + (x - xmin) / (xmax - xmin) * (kW - kL - kR); };
  auto py = [&](double y) { return kH - kB - (y - ymin) / (ymax - ymin) * (kH - kT - kB); };

  std::ofstream svg(path, std::ios::trunc);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
      << "</text>\n";
  // axes
  svg << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\""
      << kH - kB << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    svg << "<text x=\"" << px(fx) << "\" y=\"" << kH - kB + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << format_double(fx) << "</text>\n"
        << "<text x=\"" << kL - 8 << "\" y=\"" << py(fy) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << format_double(fy) << "</text>\n";
  }
  svg << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n"
      << "<text x=\"16\" y=\"" << (kT + kH - kB) / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << (kT + kH - kB) / 2 << ")\">" << y_label << "</text>\n";

  std::size_t color = 0;
  double legend_y = kT + 10;
  for (const auto& s : series) {
    const char* c = kPalette[color++ % std::size(kPalette)];
    for (const auto& [x, y] : s.points)
      svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3.5\" fill=\"" << c
          << "\"/>\n";
    const auto [a, b] = fit_line(s.points);
    svg << "<line x1=\"" << px(xmin) << "\" y1=\"" << py(a + b * xmin) << "\" x2=\"" << px(xmax)
        << "\" y2=\"" << py(a + b * xmax) << "\" stroke=\"" << c
        << "\" stroke-width=\"1.5\"/>\n";
    svg << "<text x=\"" << kW - kR + 12 << "\" y=\"" << legend_y << "\" font-size=\"12\" fill=\""
        << c << "\">" << s.label << "</text>\n";
    legend_y += 16;
  }
  if (baseline_y) {
    svg << "<line x1=\"" << px(xmin) << "\" y1=\"" << py(*baseline_y) << "\" x2=\"" << px(xmax)
        << "\" y2=\"" << py(*baseline_y)
        << "\" stroke=\"#555555\" stroke-dasharray=\"6 4\" stroke-width=\"1.5\"/>\n"
        << "<text x=\"" << kW - kR + 12 << "\" y=\"" << legend_y
        << "\" font-size=\"12\" fill=\"#555555\">" << baseline_label << "</text>\n";
  }
  svg << "</svg>\n";
}

}  // namespace

void render_plots(const CampaignReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);

  // One series per (mode, label_mode, lambda) across budgets.
  std::map<std::tuple<std::string, std::string, double>, Series> detection, payload;
  for (const auto& row : report.rows) {
    if (row.runs == 0) continue;
    const auto key = std::make_tuple(row.mode, row.label_mode, row.lambda);
    const std::string label =
        row.mode + "/" + row.label_mode + " lambda=" + lambda_dir_name(row.lambda);
    auto& d = detection[key];
    d.label = label;
    d.points.emplace_back(row.mean_queries, row.detection_rate);
    auto& p = payload[key];
    p.label = label;
    p.points.emplace_back(row.mean_queries, row.mean_injected);
  }

  std::vector<Series> detection_series, payload_series;
  for (auto& kv : detection) detection_series.push_back(std::move(kv.second));
  for (auto& kv : payload) payload_series.push_back(std::move(kv.second));

  double baseline_rate = 0, baseline_injected = 0;
  const bool have_baseline = !report.baseline.empty();
  if (have_baseline) {
    for (const auto& b : report.baseline) {
      baseline_rate += b.detection_rate;
      baseline_injected += b.mean_injected;
    }
    baseline_rate /= static_cast<double>(report.baseline.size());
    baseline_injected /= static_cast<double>(report.baseline.size());
  }

  render_xy_plot(out_dir / "detection_vs_queries.svg", "Detection rate vs queries", "queries",
                 "detection rate", detection_series, have_baseline ? &baseline_rate : nullptr,
                 "random baseline");
  render_xy_plot(out_dir / "payload_vs_queries.svg", "Injected payload vs queries", "queries",
                 "mean injected bytes", payload_series,
                 have_baseline ? &baseline_injected : nullptr, "random baseline");
}

}  // namespace gam
