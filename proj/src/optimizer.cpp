#include "gam/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <json.hpp>

namespace gam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json json_number_or_inf(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

bool improved(double previous, double current, double epsilon) {
  if (std::isinf(previous)) return !std::isinf(current);
  return previous - current > epsilon * std::fabs(previous);
}

}  // namespace

void OptimizerConfig::check() const {
  if (population_size < 2) throw OptimizerError("population size must be at least 2");
  if (query_budget < population_size)
    throw OptimizerError("query budget must cover at least one generation");
  if (lambda < 0) throw OptimizerError("lambda must be nonnegative");
  if (!(mutation_rate > 0.0 && mutation_rate < 1.0))
    throw OptimizerError("mutation rate must be in (0,1)");
  if (stagnation_generations < 1) throw OptimizerError("stagnation window must be positive");
}

CandidateEval evaluate_candidate(const pe::PeFile& x, const ManipulationVector& s,
                                 const DetectorContract& detector, const PayloadCorpus& corpus,
                                 InjectionMode mode, double lambda, std::uint64_t base_size) {
  CandidateEval eval;
  eval.penalty = penalty(s, corpus);
  try {
    if (base_size == 0) base_size = pe::serialize(x).size();
    const pe::PeFile manipulated = apply(x, s, corpus, mode);
    const Bytes bytes = pe::serialize(manipulated);
    eval.injected = bytes.size() - base_size;
    eval.score = detector.score(bytes);
    eval.evasive = eval.score < detector.theta;
    eval.objective = eval.score + lambda * eval.penalty;  // inf + anything stays inf
  } catch (const std::exception&) {
    eval.failed = true;
    eval.score = kInf;
    eval.objective = kInf;
    eval.evasive = false;
  }
  return eval;
}

std::vector<ManipulationVector> init_population(int n, std::size_t k, Rng& rng) {
  std::vector<ManipulationVector> population;
  population.reserve(n);
  for (int i = 0; i < n; ++i) {
    ManipulationVector s;
    s.values.resize(k);
    for (auto& v : s.values) v = rng.uniform();
    population.push_back(std::move(s));
  }
  return population;
}

std::vector<ScoredCandidate> select_best(std::vector<ScoredCandidate> pool, std::size_t n,
                                         LabelMode mode) {
  const bool hard = mode == LabelMode::Hard;
  std::stable_sort(pool.begin(), pool.end(),
                   [hard](const ScoredCandidate& a, const ScoredCandidate& b) {
                     if (a.eval.objective != b.eval.objective)
                       return a.eval.objective < b.eval.objective;
                     if (hard && std::isinf(a.eval.objective))
                       return a.eval.penalty > b.eval.penalty;
                     return a.eval.penalty < b.eval.penalty;
                   });
  if (pool.size() > n) pool.resize(n);
  return pool;
}

std::vector<ManipulationVector> crossover(const std::vector<ScoredCandidate>& parents,
                                          std::size_t k, Rng& rng) {
  const std::size_t n = parents.size();
  std::vector<ManipulationVector> children;
  children.reserve(n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t a = rng.below(n);
    std::size_t b = rng.below(n - 1);
    if (b >= a) ++b;  // distinct second parent
    const std::size_t cut = 1 + rng.below(k);  // j in {1..k}; j == k clones parent a
    ManipulationVector child;
    child.values.resize(k);
    for (std::size_t i = 0; i < k; ++i)
      child.values[i] = i < cut ? parents[a].s.values[i] : parents[b].s.values[i];
    children.push_back(std::move(child));
  }
  return children;
}

void mutate(std::vector<ManipulationVector>& candidates, double rate, Rng& rng) {
  for (auto& candidate : candidates)
    for (auto& v : candidate.values)
      if (rng.uniform() < rate) v = rng.uniform();
}

AttackResult run_attack(const pe::PeFile& x, const DetectorContract& detector,
                        const PayloadCorpus& corpus, const OptimizerConfig& config) {
  config.check();
  if (!pe::is_clean(pe::validate(x)))
    throw OptimizerError("input sample does not validate as a well-formed PE");

  const std::size_t k = corpus.size();
  const auto n = static_cast<std::size_t>(config.population_size);
  const auto budget = static_cast<std::uint64_t>(config.query_budget);

  Rng rng(config.seed);
  const std::uint64_t base_size = pe::serialize(x).size();
  std::vector<ScoredCandidate> population;  // S, fitness cached across generations
  std::vector<ManipulationVector> incoming = init_population(config.population_size, k, rng);

  AttackResult result;
  std::uint64_t queries = 0;
  int generation = 0;
  int stagnant = 0;
  double previous_best = kInf;

  while (queries + n <= budget) {
    std::size_t failures = 0;
    for (auto& s : incoming) {
      CandidateEval eval =
          evaluate_candidate(x, s, detector, corpus, config.mode, config.lambda, base_size);
      ++queries;
      if (eval.failed) ++failures;
      if (config.on_evaluation) config.on_evaluation(s, eval);
      population.push_back({std::move(s), eval});
    }
    if (failures == incoming.size())
      throw OptimizerError("every candidate evaluation failed in generation " +
                           std::to_string(generation + 1));

    population = select_best(std::move(population), n, detector.mode);
    ++generation;

    const ScoredCandidate& best = population.front();
    result.history.push_back({generation, queries, best.eval.objective, best.eval.penalty,
                              best.eval.injected, best.eval.evasive});

    if (improved(previous_best, best.eval.objective, config.stagnation_epsilon))
      stagnant = 0;
    else
      ++stagnant;
    previous_best = best.eval.objective;
    if (stagnant >= config.stagnation_generations) break;

    if (queries + n > budget) break;
    incoming = crossover(population, k, rng);
    mutate(incoming, config.mutation_rate, rng);
  }

  const ScoredCandidate& best = population.front();
  result.best_s = best.s;
  result.best_objective = best.eval.objective;
  result.best_score = best.eval.score;
  result.best_penalty = best.eval.penalty;
  result.best_injected = best.eval.injected;
  result.evasive = best.eval.evasive;
  result.queries_used = queries;
  result.adversarial = apply(x, best.s, corpus, config.mode);
  return result;
}

void write_trace(const AttackResult& result, std::ostream& out) {
  for (const auto& record : result.history) {
    nlohmann::json line{{"generation", record.generation},
                        {"q", record.queries},
                        {"best_F", json_number_or_inf(record.best_objective)},
                        {"best_penalty", record.best_penalty},
                        {"injected_size", record.best_injected},
                        {"evasive", record.evasive}};
    out << line.dump() << '\n';
  }
  nlohmann::json final_line{{"final", true},
                            {"q", result.queries_used},
                            {"best_F", json_number_or_inf(result.best_objective)},
                            {"best_penalty", result.best_penalty},
                            {"injected_size", result.best_injected},
                            {"evasive", result.evasive},
                            {"s_star", result.best_s.values}};
  out << final_line.dump() << '\n';
}

}  // namespace gam
