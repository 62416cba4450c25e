#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "gam/detector.hpp"
#include "gam/manipulation.hpp"
#include "gam/rng.hpp"

namespace gam {

class OptimizerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-candidate outcome of one detector query.
struct CandidateEval {
  double objective = 0.0;      // f(x + s) + lambda * C(s); +inf discards
  double score = 0.0;          // raw detector output
  double penalty = 0.0;        // C(s)
  std::uint64_t injected = 0;  // on-disk growth in bytes
  bool evasive = false;        // detector score below theta
  bool failed = false;         // evaluation errored; objective forced to +inf
};

struct ScoredCandidate {
  ManipulationVector s;
  CandidateEval eval;
};

struct OptimizerConfig {
  int population_size = 10;           // N
  int query_budget = 510;             // T
  double lambda = 1e-6;
  double mutation_rate = 0.1;         // per-element resampling probability
  int stagnation_generations = 5;     // halt after this many non-improving generations
  double stagnation_epsilon = 1e-6;   // relative improvement below this is "no progress"
  std::uint64_t seed = 0;
  InjectionMode mode = InjectionMode::SectionInjection;

  /// Optional per-evaluation hook (testing / metering); called once per
  /// detector query in candidate-index order.
  std::function<void(const ManipulationVector&, const CandidateEval&)> on_evaluation;

  void check() const;
};

struct GenerationRecord {
  int generation = 0;
  std::uint64_t queries = 0;
  double best_objective = 0.0;
  double best_penalty = 0.0;
  std::uint64_t best_injected = 0;
  bool evasive = false;
};

struct AttackResult {
  ManipulationVector best_s;
  double best_objective = 0.0;
  double best_score = 0.0;
  double best_penalty = 0.0;
  std::uint64_t best_injected = 0;
  bool evasive = false;
  std::uint64_t queries_used = 0;
  std::vector<GenerationRecord> history;
  pe::PeFile adversarial;  // x* = x + s*
};

/// Objective for one candidate: queries the detector exactly once. A failed
/// query (transport error) is charged and scored +inf rather than retried
/// beyond the client's own retry policy. `base_size` is the serialized size
/// of x when already known; 0 recomputes it.
CandidateEval evaluate_candidate(const pe::PeFile& x, const ManipulationVector& s,
                                 const DetectorContract& detector, const PayloadCorpus& corpus,
                                 InjectionMode mode, double lambda, std::uint64_t base_size = 0);

/// N vectors i.i.d. uniform on [0,1]^k.
std::vector<ManipulationVector> init_population(int n, std::size_t k, Rng& rng);

/// Keeps the n candidates with the lowest objective. Ties prefer the lower
/// penalty, then the earlier position. Exception: in hard-label mode the
/// still-detected candidates all sit at +inf, and among those the HIGHER
/// penalty wins — more benign content is the move that eventually crosses
/// the boundary.
std::vector<ScoredCandidate> select_best(std::vector<ScoredCandidate> pool, std::size_t n,
                                         LabelMode mode);

/// One child per parent slot: uniformly chosen distinct parent pair (a, b)
/// and cut j in {1..k}; elements [0, j) from a, [j, k) from b.
std::vector<ManipulationVector> crossover(const std::vector<ScoredCandidate>& parents,
                                          std::size_t k, Rng& rng);

/// Resamples each element uniformly on [0,1] with probability rate.
void mutate(std::vector<ManipulationVector>& candidates, double rate, Rng& rng);

/// The full evolutionary loop: selection over the union of the previous
/// population and the freshly evaluated one, crossover, mutation; spends N
/// queries per generation and never starts a generation it cannot afford.
/// Halts on budget exhaustion or stagnation, then materializes x*.
AttackResult run_attack(const pe::PeFile& x, const DetectorContract& detector,
                        const PayloadCorpus& corpus, const OptimizerConfig& config);

/// JSON-lines trace: one record per generation, then a final record with the
/// dense s*. Non-finite objectives are written as the string "inf".
void write_trace(const AttackResult& result, std::ostream& out);

}  // namespace gam
