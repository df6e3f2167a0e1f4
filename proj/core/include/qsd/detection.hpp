#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qsd/linalg.hpp"
#include "qsd/states.hpp"

// Optimal measurements for pure-state constellations.
//
// A detection problem is the triple (priors ξ_i, states ρ_i = v_i v_i†, cost
// C_ji). The Bayes solver minimizes Σ_ij ξ_i C_ji Tr ρ_i Π_j over POVMs; with
// 0/1 cost this is the average error probability. Optimality is certified by
// the risk-operator conditions
//     (W_j − Γ) Π_j = 0,   Π_j (W_i − W_j) Π_i = 0,   W_j − Γ ⪰ 0,
// with W_j = Σ_i ξ_i C_ji ρ_i and Γ = Σ_j W_j Π_j (Hermitian at optimum).
// The minimax solver maximizes the Bayes value over the prior simplex; at the
// worst-case prior the optimal POVM has equal conditional risk on the prior's
// support, which is the equality condition reported as equal_error_spread.

namespace qsd {

inline constexpr double kDefaultSolverTol = 1e-7;
inline constexpr int kDefaultMaxIterations = 5000;
inline constexpr double kSupportCutoff = 1e-9;  // worst-prior support test

struct PriorDistribution {
  RVector weights;

  static PriorDistribution uniform(int m);
  static PriorDistribution point_mass(int m, int index);
  int size() const { return static_cast<int>(weights.size()); }
  /// Throws std::invalid_argument unless weights are ≥ 0 and sum to 1
  /// within 1e-12.
  void validate() const;
};

struct CostMatrix {
  RMatrix entries;  // C_ji: cost of deciding j when i was sent

  /// C_ji = 1 for i ≠ j, 0 on the diagonal (average error probability).
  static CostMatrix zero_one(int m);
  int size() const { return static_cast<int>(entries.rows()); }
  bool is_zero_one() const;
};

struct DetectionProblem {
  StateVectors states;
  PriorDistribution prior;
  CostMatrix cost;

  int symbol_count() const { return states.count(); }
  void validate() const;
};

struct Measurement {
  std::vector<CMatrix> operators;   // Π_j, d×d PSD, Σ_j Π_j = I
  double completeness_residual = 0.0;  // max-abs entry of ΣΠ − I
  double positivity_residual = 0.0;    // max(0, −min_j λ_min(Π_j))

  static Measurement from_operators(std::vector<CMatrix> ops);
  int outcome_count() const { return static_cast<int>(operators.size()); }
  int dim() const;
};

/// W_j = Σ_i ξ_i C_ji ρ_i (Hermitian by construction).
std::vector<CMatrix> risk_operators(const DetectionProblem& p);

struct BayesSolution {
  Measurement measurement;
  double bayes_risk = 0.0;          // Σ_j Tr W_j Π_j
  double error_probability = 0.0;   // 1 − Σ_i ξ_i Tr ρ_i Π_i
  double optimality_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Fixed-point iteration on the POVM, certified by the risk-operator
/// residual: max_j { ‖(W_j − Γ)Π_j‖, −λ_min(W_j − Γ), ‖Γ − Γ†‖ } ≤ tol.
/// Non-convergence returns the best iterate with converged = false.
/// `warm_start` seeds the iteration (shape-checked) when provided.
BayesSolution bayes_solve(const DetectionProblem& p,
                          double tol = kDefaultSolverTol,
                          int max_iter = kDefaultMaxIterations,
                          const Measurement* warm_start = nullptr);

/// Square-root measurement Π_j = ρ̂^{−1/2} ξ_j ρ_j ρ̂^{−1/2} with
/// ρ̂ = Σ_i ξ_i ρ_i, the inverse taken on the support of ρ̂. Completeness
/// holds on that support. Throws when ρ̂ = 0.
Measurement srm(const StateVectors& states, const PriorDistribution& prior);

/// Closed-form binary minimum error (1 − √(1 − 4ξ₁ξ₂|⟨v₁,v₂⟩|²))/2.
/// Throws unless the problem has exactly two states.
double helstrom_binary(const StateVectors& states,
                       const PriorDistribution& prior);

struct BayesOptimalityReport {
  // Per outcome j.
  std::vector<double> gamma_commutation;  // ‖(W_j − Γ)Π_j‖
  std::vector<double> pairwise;           // max_i ‖Π_j (W_i − W_j) Π_i‖
  std::vector<double> lambda_min;         // λ_min(W_j − Γ)
  double gamma_asymmetry = 0.0;           // ‖Γ − Γ†‖ before symmetrization
  double overall = 0.0;  // max residual (negative λ_min folded in)

  bool certified(double tol) const { return overall <= tol; }
};

BayesOptimalityReport check_bayes_optimality(const Measurement& m,
                                             const DetectionProblem& p);

/// Channel matrix P(j|i) = Tr ρ_i Π_j; rows are probability vectors up to
/// the measurement residuals.
RMatrix conditional_error_matrix(const Measurement& m,
                                 const StateVectors& states);

/// Conditional risk r_i = Σ_j C_ji P(j|i); equals the conditional error
/// 1 − P(i|i) for 0/1 cost.
RVector conditional_risks(const Measurement& m, const StateVectors& states,
                          const CostMatrix& cost);

struct MinimaxSolution {
  PriorDistribution worst_prior;
  Measurement measurement;  // Bayes-optimal POVM at worst_prior
  double value = 0.0;       // game value: Bayes risk at worst_prior
  double equal_error_spread = 0.0;  // max risk difference on the support
  int outer_iterations = 0;
  bool converged = false;
};

/// Maximizes the (concave) Bayes value over the prior simplex: multiplicative
/// equalization towards equal conditional risk, then an active-set Newton
/// polish on the support. `tol` bounds both the equal-risk spread and the
/// inner Bayes residual at the returned prior.
MinimaxSolution minimax_solve(const StateVectors& states,
                              const CostMatrix& cost,
                              double tol = kDefaultSolverTol);

struct MinimaxOptimalityReport {
  double equal_error_spread = 0.0;   // on the support of worst_prior
  double full_spread = 0.0;          // over all outcomes, support caveat aside
  BayesOptimalityReport bayes_at_worst;
  double off_support_slack = 0.0;    // max_i∉supp (r_i − value); ≤ 0 at optimum
  double vertex_gap = 0.0;           // max_i r_i(Π*) − value (≥ 0, exact)
  double grid_gap = 0.0;             // max over prior grid of Bayes(ξ) − value
  double grid_resolution = 0.0;      // resolution actually used
  std::size_t grid_points = 0;
};

/// Residual report for a minimax solution. The saddle gap is estimated two
/// ways: exactly through the vertex bound max_i r_i(Π*) (the affine inner
/// objective is maximized at a simplex vertex), and by re-solving Bayes on a
/// simplex grid of the requested resolution. Grids larger than
/// `max_grid_points` are coarsened to stay tractable (resolution used is
/// reported).
MinimaxOptimalityReport check_minimax_optimality(
    const MinimaxSolution& sol, const StateVectors& states,
    const CostMatrix& cost, double grid_resolution = 1e-3,
    std::size_t max_grid_points = 2'000'000, int threads = 1);

/// Enumerates the simplex grid {ξ : ξ_i = n_i/steps} and returns
/// max_ξ bayes_solve(ξ).bayes_risk, warm-starting along the scan.
double bayes_grid_maximum(const StateVectors& states, const CostMatrix& cost,
                          int steps, double inner_tol = 1e-9,
                          int threads = 1);

}  // namespace qsd
