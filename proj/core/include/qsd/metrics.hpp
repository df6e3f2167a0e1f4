#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qsd/cipher.hpp"
#include "qsd/detection.hpp"

// Security-relevant quantities: Bayes/minimax error gap, the advantage
// ratio surface, Monte-Carlo equivocation with the key given, and an
// exhaustive key-recovery attack at desk scale.

namespace qsd {

struct AdvantageReport {
  double pe_bayes = 0.0;    // Bayes error at the true prior
  double pe_minimax = 0.0;  // error of the minimax POVM at the same prior
  double ratio = 0.0;       // pe_minimax / pe_bayes (∞ sentinel when pe_bayes = 0)
  bool ratio_finite = true;
  PriorDistribution prior;
  std::string constellation_label;
  double theta = 0.0;
};

/// Evaluates both receivers at `prior`. Pass `precomputed` to reuse a minimax
/// solution across a sweep.
AdvantageReport advantage_ratio(const StateVectors& states,
                                const PriorDistribution& prior,
                                const MinimaxSolution* precomputed = nullptr,
                                double tol = kDefaultSolverTol);

struct EtaSearchSpec {
  std::string label = "psk";
  int m = 3;
  double mean_photon = 1.0;
  std::vector<double> thetas;  // empty: single constellation at theta 0
  std::size_t budget = 1001;   // prior evaluations per theta
  int refine_rounds = 0;       // local grid refinements around the best point
  std::uint64_t seed = 0;      // recorded; the grid search itself is
                               // deterministic and draws nothing
  double tol = kDefaultSolverTol;
  int threads = 1;
};

struct EtaSurfaceRow {
  double theta = 0.0;
  std::vector<double> prior;
  double pe_bayes = 0.0;
  double pe_minimax = 0.0;
  double ratio = 0.0;  // +inf sentinel allowed
};

struct EtaSearchResult {
  AdvantageReport best;  // best finite ratio found
  std::vector<EtaSurfaceRow> surface;
  std::size_t evaluations = 0;
};

/// Sweeps the prior simplex (deterministic grid sized to the budget, then
/// optional local refinement) and optionally a theta list, maximizing the
/// finite advantage ratio. Throws when every evaluated ratio is undefined.
EtaSearchResult eta_search(const EtaSearchSpec& spec);

struct EquivocationEstimate {
  double value_bits = 0.0;
  double standard_error = 0.0;
  std::size_t sample_count = 0;
};

struct EquivocationInput {
  StateVectors eve_states;
  Measurement eve_measurement;
  StateVectors bob_states;
  std::vector<Measurement> bob_povm;  // Bayes POVM per prior index
  PriorSchedule schedule;
  PhysicalKey physical_key;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct EquivocationReport {
  EquivocationEstimate eve;  // H(X | Y^E, keys) in bits/symbol
  EquivocationEstimate bob;  // H(X | Y^B, keys)
};

/// Semi-analytic Monte-Carlo: slots are sampled, posteriors come from the
/// exact channel matrices (Bayes rule), and the per-slot posterior entropy is
/// averaged. Given the keys the plaintext is a bijection of the transmitted
/// index, so the entropy is computed over transmitted indices.
EquivocationReport equivocation_given_key(const EquivocationInput& in);

/// Exact H(S|Y) in bits for a prior and channel matrix P(y|s).
double conditional_entropy_bits(const RVector& prior, const RMatrix& channel);

/// Entropy of a distribution in bits.
double entropy_bits(std::span<const double> p);

struct KeyAttackModel {
  int key_bits = 8;  // exhaustive search; capped at 20
  PhysicalKey physical_key;  // known to the attacker in this model
  RVector source_q;
  PriorSchedule schedule;
  RMatrix eve_channel;  // P(y|s) of the attacked receiver
  int threads = 1;
};

struct KeyAttackResult {
  std::vector<double> posterior;  // over all 2^key_bits candidate keys
  double guessing_probability = 0.0;  // max of the posterior
  std::uint64_t map_key = 0;          // argmax (lowest key on ties)
  double entropy_bits = 0.0;          // H(K | Y^E)
  std::size_t slots_used = 0;
};

/// Known-plaintext exhaustive attack on the secret key: every candidate key
/// predicts the transmitted index per slot and is scored by the exact
/// likelihood of Eve's outcomes. A zero-length slice returns the uniform
/// posterior exactly. Throws when key_bits > 20 or shapes mismatch.
KeyAttackResult key_attack(std::span<const TranscriptSlot> slice,
                           const KeyAttackModel& model);

}  // namespace qsd
