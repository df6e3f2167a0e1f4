#include "qsd/detection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qsd {

PriorDistribution PriorDistribution::uniform(int m) {
  if (m < 1) throw std::invalid_argument("prior: M must be >= 1");
  return {RVector::Constant(m, 1.0 / m)};
}

PriorDistribution PriorDistribution::point_mass(int m, int index) {
  if (index < 0 || index >= m)
    throw std::invalid_argument("prior: point mass index out of range");
  RVector w = RVector::Zero(m);
  w[index] = 1.0;
  return {std::move(w)};
}

void PriorDistribution::validate() const {
  if (weights.size() == 0)
    throw std::invalid_argument("prior: empty weight vector");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0))
      throw std::invalid_argument("prior: negative or NaN weight");
    sum += weights[i];
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("prior: weights must sum to 1 within 1e-12");
}

CostMatrix CostMatrix::zero_one(int m) {
  RMatrix c = RMatrix::Ones(m, m) - RMatrix::Identity(m, m);
  return {std::move(c)};
}

bool CostMatrix::is_zero_one() const {
  const Eigen::Index m = entries.rows();
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double want = (i == j) ? 0.0 : 1.0;
      if (entries(j, i) != want) return false;
    }
  }
  return true;
}

void DetectionProblem::validate() const {
  prior.validate();
  const int m = states.count();
  if (prior.size() != m)
    throw std::invalid_argument("detection problem: prior size != M");
  if (cost.entries.rows() != m || cost.entries.cols() != m)
    throw std::invalid_argument("detection problem: cost matrix size != M×M");
  if (!cost.entries.allFinite())
    throw std::invalid_argument("detection problem: cost entries not finite");
}

Measurement Measurement::from_operators(std::vector<CMatrix> ops) {
  if (ops.empty()) throw std::invalid_argument("measurement: no operators");
  const Eigen::Index d = ops.front().rows();
  CMatrix sum = CMatrix::Zero(d, d);
  double worst_neg = 0.0;
  for (const auto& op : ops) {
    if (op.rows() != d || op.cols() != d)
      throw std::invalid_argument("measurement: inconsistent operator shapes");
    sum += op;
    worst_neg = std::min(worst_neg, min_eigenvalue(op));
  }
  Measurement m;
  m.completeness_residual = max_abs(sum - CMatrix::Identity(d, d));
  m.positivity_residual = std::max(0.0, -worst_neg);
  m.operators = std::move(ops);
  return m;
}

int Measurement::dim() const {
  return operators.empty() ? 0 : static_cast<int>(operators.front().rows());
}

std::vector<CMatrix> risk_operators(const DetectionProblem& p) {
  p.validate();
  const int m = p.symbol_count();
  const int d = p.states.dim();
  std::vector<CMatrix> w(m, CMatrix::Zero(d, d));
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      const double coeff = p.prior.weights[i] * p.cost.entries(j, i);
      if (coeff != 0.0) w[j] += coeff * outer(p.states.state(i));
    }
    w[j] = hermitize(w[j]);
  }
  return w;
}

RMatrix conditional_error_matrix(const Measurement& m,
                                 const StateVectors& states) {
  const int n = states.count();
  const int k = m.outcome_count();
  if (m.dim() != states.dim())
    throw std::invalid_argument("conditional_error_matrix: dimension mismatch");
  RMatrix p(n, k);
  for (int i = 0; i < n; ++i) {
    const CVector v = states.state(i);
    for (int j = 0; j < k; ++j) {
      p(i, j) = std::real(Complex(v.adjoint() * m.operators[j] * v));
    }
  }
  return p;
}

RVector conditional_risks(const Measurement& m, const StateVectors& states,
                          const CostMatrix& cost) {
  const RMatrix p = conditional_error_matrix(m, states);
  const int n = states.count();
  RVector r(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m.outcome_count(); ++j)
      acc += cost.entries(j, i) * p(i, j);
    r[i] = acc;
  }
  return r;
}

Measurement srm(const StateVectors& states, const PriorDistribution& prior) {
  prior.validate();
  const int m = states.count();
  if (prior.size() != m)
    throw std::invalid_argument("srm: prior size != state count");
  const int d = states.dim();
  CMatrix rho_hat = CMatrix::Zero(d, d);
  for (int i = 0; i < m; ++i)
    rho_hat += prior.weights[i] * outer(states.state(i));
  if (max_abs(rho_hat) == 0.0)
    throw std::invalid_argument("srm: average state is zero");
  const CMatrix root = psd_inv_sqrt(rho_hat);
  std::vector<CMatrix> ops;
  ops.reserve(m);
  for (int i = 0; i < m; ++i) {
    ops.push_back(root * (prior.weights[i] * outer(states.state(i))) * root);
  }
  return Measurement::from_operators(std::move(ops));
}

double helstrom_binary(const StateVectors& states,
                       const PriorDistribution& prior) {
  if (states.count() != 2)
    throw std::invalid_argument("helstrom_binary: exactly two states required");
  prior.validate();
  if (prior.size() != 2)
    throw std::invalid_argument("helstrom_binary: prior size != 2");
  const double s =
      std::abs(Complex(states.state(0).adjoint() * states.state(1)));
  const double x1 = prior.weights[0];
  const double x2 = prior.weights[1];
  const double disc = std::max(0.0, 1.0 - 4.0 * x1 * x2 * s * s);
  return 0.5 * (1.0 - std::sqrt(disc));
}

namespace {

CMatrix gamma_operator(const std::vector<CMatrix>& w,
                       const std::vector<CMatrix>& pis) {
  CMatrix g = CMatrix::Zero(w.front().rows(), w.front().cols());
  for (std::size_t j = 0; j < w.size(); ++j) g += w[j] * pis[j];
  return g;
}

double bayes_residual(const std::vector<CMatrix>& pis,
                      const std::vector<CMatrix>& w) {
  const CMatrix g = gamma_operator(w, pis);
  const double asym = max_abs(g - g.adjoint());
  const CMatrix gs = hermitize(g);
  double r = asym;
  for (std::size_t j = 0; j < w.size(); ++j) {
    r = std::max(r, max_abs((w[j] - gs) * pis[j]));
    r = std::max(r, -min_eigenvalue(w[j] - gs));
  }
  return r;
}

// Restores Σ_j Π_j = I: congruence by E^{-1/2}, then the (tiny) remaining
// complement is distributed uniformly.
void renormalize(std::vector<CMatrix>& pis) {
  const Eigen::Index d = pis.front().rows();
  CMatrix e = CMatrix::Zero(d, d);
  for (const auto& p : pis) e += p;
  const CMatrix ei = psd_inv_sqrt(e);
  for (auto& p : pis) p = hermitize(ei * p * ei);
  CMatrix rem = CMatrix::Identity(d, d);
  for (const auto& p : pis) rem -= p;
  if (max_abs(rem) > 1e-13) {
    const CMatrix share = rem / static_cast<double>(pis.size());
    for (auto& p : pis) p = hermitize(p + share);
  }
}

// Rebuilds the POVM from the near-kernels of (W_j − Γ). Near an optimum the
// optimal Π_j is supported exactly there, so this jump typically lands at
// machine precision.
std::vector<CMatrix> kernel_polish(const std::vector<CMatrix>& pis,
                                   const std::vector<CMatrix>& w) {
  const Eigen::Index d = pis.front().rows();
  const CMatrix gs = hermitize(gamma_operator(w, pis));
  std::vector<CMatrix> out;
  out.reserve(pis.size());
  for (const auto& wj : w) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitize(wj - gs));
    const RVector& ev = es.eigenvalues();
    const double cut = 1e-7 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    CMatrix proj = CMatrix::Zero(d, d);
    bool any = false;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (ev[i] < cut) {
        proj += outer(es.eigenvectors().col(i));
        any = true;
      }
    }
    if (!any) proj = outer(es.eigenvectors().col(0));  // smallest eigenvalue
    out.push_back(std::move(proj));
  }
  renormalize(out);
  return out;
}

double risk_of(const std::vector<CMatrix>& pis, const std::vector<CMatrix>& w) {
  double r = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j)
    r += std::real((w[j] * pis[j]).trace());
  return r;
}

}  // namespace

BayesSolution bayes_solve(const DetectionProblem& p, double tol, int max_iter,
                          const Measurement* warm_start) {
  p.validate();
  if (!(tol > 0.0)) throw std::invalid_argument("bayes_solve: tol must be > 0");
  const int m = p.symbol_count();
  const int d = p.states.dim();
  const std::vector<CMatrix> w = risk_operators(p);

  // Gain operators: the objective Σ Tr W_j Π_j is minimized exactly when
  // Σ Tr A_j Π_j is maximized. For 0/1 cost A_j = ξ_j ρ_j (rank one);
  // otherwise shift by the largest risk eigenvalue to keep A_j PSD.
  std::vector<CMatrix> gains;
  gains.reserve(m);
  if (p.cost.is_zero_one()) {
    for (int j = 0; j < m; ++j)
      gains.push_back(p.prior.weights[j] * outer(p.states.state(j)));
  } else {
    double shift = 0.0;
    for (const auto& wj : w) {
      Eigen::SelfAdjointEigenSolver<CMatrix> es(wj, Eigen::EigenvaluesOnly);
      shift = std::max(shift, es.eigenvalues().maxCoeff());
    }
    for (const auto& wj : w)
      gains.push_back(hermitize(shift * CMatrix::Identity(d, d) - wj));
  }

  std::vector<CMatrix> pis;
  if (warm_start != nullptr) {
    if (warm_start->outcome_count() != m || warm_start->dim() != d)
      throw std::invalid_argument("bayes_solve: warm start shape mismatch");
    pis = warm_start->operators;
    renormalize(pis);
  } else {
    // SRM-style seed from the gains.
    const Eigen::Index dd = d;
    CMatrix s = CMatrix::Zero(dd, dd);
    for (const auto& a : gains) s += a;
    const CMatrix si = psd_inv_sqrt(s);
    pis.clear();
    for (const auto& a : gains) pis.push_back(hermitize(si * a * si));
    renormalize(pis);
  }

  double best_res = bayes_residual(pis, w);
  std::vector<CMatrix> best = pis;
  int it = 0;
  constexpr int kPolishEvery = 20;
  for (it = 1; it <= max_iter && best_res > tol; ++it) {
    CMatrix lambda = CMatrix::Zero(d, d);
    for (int j = 0; j < m; ++j) lambda += gains[j] * pis[j] * gains[j];
    const CMatrix li = psd_inv_sqrt(lambda);
    for (int j = 0; j < m; ++j)
      pis[j] = hermitize(li * gains[j] * pis[j] * gains[j] * li);
    renormalize(pis);
    double res = bayes_residual(pis, w);
    if (res < best_res) {
      best_res = res;
      best = pis;
    }
    if (best_res <= tol) break;
    if (it % kPolishEvery == 0) {
      auto cand = kernel_polish(pis, w);
      const double cres = bayes_residual(cand, w);
      if (cres < best_res) {
        best_res = cres;
        best = cand;
        pis = std::move(cand);
      }
    }
  }
  // Final polish attempt even when the loop exited early.
  {
    auto cand = kernel_polish(best, w);
    const double cres = bayes_residual(cand, w);
    if (cres < best_res) {
      best_res = cres;
      best = std::move(cand);
    }
  }

  BayesSolution sol;
  sol.measurement = Measurement::from_operators(best);
  sol.bayes_risk = risk_of(sol.measurement.operators, w);
  double correct = 0.0;
  for (int i = 0; i < m; ++i) {
    const CVector v = p.states.state(i);
    correct += p.prior.weights[i] *
               std::real(Complex(v.adjoint() * sol.measurement.operators[i] * v));
  }
  sol.error_probability = 1.0 - correct;
  sol.optimality_residual = best_res;
  sol.iterations = it;
  sol.converged = best_res <= tol;
  return sol;
}

BayesOptimalityReport check_bayes_optimality(const Measurement& m,
                                             const DetectionProblem& p) {
  p.validate();
  const int n = p.symbol_count();
  if (m.outcome_count() != n || m.dim() != p.states.dim())
    throw std::invalid_argument("check_bayes_optimality: shape mismatch");
  const std::vector<CMatrix> w = risk_operators(p);
  const CMatrix g = gamma_operator(w, m.operators);
  BayesOptimalityReport rep;
  rep.gamma_asymmetry = max_abs(g - g.adjoint());
  const CMatrix gs = hermitize(g);
  rep.gamma_commutation.resize(n);
  rep.pairwise.resize(n);
  rep.lambda_min.resize(n);
  double overall = rep.gamma_asymmetry;
  for (int j = 0; j < n; ++j) {
    rep.gamma_commutation[j] = max_abs((w[j] - gs) * m.operators[j]);
    double pw = 0.0;
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      pw = std::max(pw,
                    max_abs(m.operators[j] * (w[i] - w[j]) * m.operators[i]));
    }
    rep.pairwise[j] = pw;
    rep.lambda_min[j] = min_eigenvalue(w[j] - gs);
    overall = std::max({overall, rep.gamma_commutation[j], pw,
                        -rep.lambda_min[j]});
  }
  rep.overall = overall;
  return rep;
}

}  // namespace qsd
