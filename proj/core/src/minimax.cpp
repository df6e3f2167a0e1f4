#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "qsd/detection.hpp"

// Worst-prior search. The Bayes value φ(ξ) is a minimum of affine functions
// of ξ, hence concave; its supergradient at ξ is the vector of conditional
// risks of the optimal POVM. The maximizer is characterized by equal risks
// on the support of ξ and no larger risk off the support, which is exactly
// the equality condition the solution reports. The search runs a
// multiplicative-weights equalization to localize the support, then an
// active-set Newton iteration on the equal-risk system.

namespace qsd {

namespace {

struct Evaluator {
  const StateVectors& states;
  const CostMatrix& cost;
  double inner_tol;
  int inner_max_iter;
  Measurement warm;
  bool has_warm = false;
  long calls = 0;

  // Returns (value, conditional risks) at prior x.
  std::pair<double, RVector> operator()(const RVector& x) {
    DetectionProblem p{states, PriorDistribution{x}, cost};
    BayesSolution sol = bayes_solve(p, inner_tol, inner_max_iter,
                                    has_warm ? &warm : nullptr);
    ++calls;
    warm = sol.measurement;
    has_warm = true;
    return {sol.bayes_risk, conditional_risks(sol.measurement, states, cost)};
  }
};

RVector normalized(RVector x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::max(x[i], 0.0);
  const double s = x.sum();
  if (s <= 0.0) return RVector::Constant(x.size(), 1.0 / x.size());
  return x / s;
}

std::vector<int> support_of(const RVector& x, double cut) {
  std::vector<int> s;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] > cut) s.push_back(static_cast<int>(i));
  return s;
}

double spread_on(const RVector& r, const std::vector<int>& sup) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int i : sup) {
    lo = std::min(lo, r[i]);
    hi = std::max(hi, r[i]);
  }
  return sup.empty() ? 0.0 : hi - lo;
}

}  // namespace

MinimaxSolution minimax_solve(const StateVectors& states,
                              const CostMatrix& cost, double tol) {
  const int m = states.count();
  if (cost.entries.rows() != m || cost.entries.cols() != m)
    throw std::invalid_argument("minimax_solve: cost matrix size != M×M");
  if (!(tol > 0.0)) throw std::invalid_argument("minimax_solve: tol must be > 0");

  MinimaxSolution out;
  if (m == 1) {
    out.worst_prior = PriorDistribution::uniform(1);
    DetectionProblem p{states, out.worst_prior, cost};
    BayesSolution sol = bayes_solve(p, tol);
    out.measurement = sol.measurement;
    out.value = sol.bayes_risk;
    out.equal_error_spread = 0.0;
    out.converged = sol.converged;
    return out;
  }

  Evaluator phi{states, cost, std::min(tol * 1e-2, 1e-9), 3000, {}, false, 0};

  RVector xi = RVector::Constant(m, 1.0 / m);
  RVector best_xi = xi;
  double best_val = -std::numeric_limits<double>::infinity();
  double best_score = std::numeric_limits<double>::infinity();

  auto consider = [&](const RVector& x, double val, const RVector& r) {
    const auto sup = support_of(x, kSupportCutoff);
    const double spread = spread_on(r, sup);
    double off = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    for (int i : sup) lo = std::min(lo, r[i]);
    for (int i = 0; i < m; ++i) {
      if (std::find(sup.begin(), sup.end(), i) == sup.end())
        off = std::max(off, r[i] - lo);
    }
    const double score = std::max(spread, off);
    if (val > best_val + 1e-15 ||
        (val > best_val - 1e-12 && score < best_score)) {
      best_val = std::max(best_val, val);
      best_score = score;
      best_xi = x;
    }
    return score;
  };

  // Phase 1: multiplicative weights on the conditional risks. States whose
  // risk sits below the average lose mass exponentially.
  double score = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 150 && score > 0.5 * tol; ++t) {
    auto [val, r] = phi(xi);
    score = consider(xi, val, r);
    const double mean = r.dot(xi);
    RVector g = r.array() - mean;
    const double gmax = g.cwiseAbs().maxCoeff();
    if (gmax <= 0.0) break;
    const double beta = 0.5 / gmax;
    for (int i = 0; i < m; ++i) xi[i] *= std::exp(beta * g[i]);
    xi = normalized(xi);
  }

  // Phase 2: active-set Newton on the equal-risk system over the support.
  xi = best_xi;
  const double kDiffStep = 1e-6;
  for (int round = 0; round < 8 && best_score > tol; ++round) {
    std::vector<int> sup = support_of(xi, std::max(kSupportCutoff, 1e-7));
    if (sup.size() < 2) {
      // Degenerate localization; fall back to the two largest components.
      std::vector<int> idx(m);
      std::iota(idx.begin(), idx.end(), 0);
      std::partial_sort(idx.begin(), idx.begin() + 2, idx.end(),
                        [&](int a, int b) { return xi[a] > xi[b]; });
      sup = {idx[0], idx[1]};
      std::sort(sup.begin(), sup.end());
    }
    const int n = static_cast<int>(sup.size());
    const int last = sup.back();

    bool support_changed = false;
    for (int it = 0; it < 40; ++it) {
      auto [val, r] = phi(xi);
      const double sc = consider(xi, val, r);
      if (sc <= tol) break;
      RVector f(n - 1);
      for (int c = 0; c < n - 1; ++c) f[c] = r[sup[c]] - r[last];
      const double fmax = f.cwiseAbs().maxCoeff();
      if (fmax <= tol) break;

      RMatrix jac(n - 1, n - 1);
      for (int c = 0; c < n - 1; ++c) {
        RVector xp = xi;
        const double h = std::min(kDiffStep, 0.5 * xp[last]);
        if (h <= 0.0) break;
        xp[sup[c]] += h;
        xp[last] -= h;
        auto [vp, rp] = phi(xp);
        (void)vp;
        for (int rr = 0; rr < n - 1; ++rr)
          jac(rr, c) = ((rp[sup[rr]] - rp[last]) - f[rr]) / h;
      }
      RVector step = jac.colPivHouseholderQr().solve(-f);
      if (!step.allFinite()) break;

      double alpha = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 14 && !accepted; ++ls, alpha *= 0.5) {
        RVector xn = xi;
        for (int c = 0; c < n - 1; ++c) xn[sup[c]] += alpha * step[c];
        xn[last] -= alpha * step.sum();
        bool neg = false;
        for (int i : sup)
          if (xn[i] < 0.0) neg = true;
        if (neg) {
          xn = normalized(xn);
          support_changed = true;  // a component hit the boundary
        }
        auto [vn, rn] = phi(xn);
        RVector fn(n - 1);
        for (int c = 0; c < n - 1; ++c) fn[c] = rn[sup[c]] - rn[last];
        if (fn.cwiseAbs().maxCoeff() < fmax) {
          xi = xn;
          consider(xi, vn, rn);
          accepted = true;
        }
      }
      if (!accepted || support_changed) break;
    }

    // Support update: drop vanished components; add any off-support state
    // whose risk exceeds the on-support level (KKT violation).
    auto [val, r] = phi(xi);
    consider(xi, val, r);
    std::vector<int> sup_now = support_of(xi, kSupportCutoff);
    double lo = std::numeric_limits<double>::infinity();
    for (int i : sup_now) lo = std::min(lo, r[i]);
    int worst_off = -1;
    double worst_gap = 0.5 * tol;
    for (int i = 0; i < m; ++i) {
      if (std::find(sup_now.begin(), sup_now.end(), i) == sup_now.end() &&
          r[i] - lo > worst_gap) {
        worst_gap = r[i] - lo;
        worst_off = i;
      }
    }
    if (worst_off >= 0) {
      xi[worst_off] = std::max(xi[worst_off], 1e-4);
      xi = normalized(xi);
    } else if (!support_changed) {
      break;  // equalized as far as this support allows
    }
    out.outer_iterations = round + 1;
  }

  // Final certification at the best prior found.
  best_xi = normalized(best_xi);
  DetectionProblem p{states, PriorDistribution{best_xi}, cost};
  BayesSolution fin =
      bayes_solve(p, std::min(tol * 1e-2, 1e-9), 5000,
                  phi.has_warm ? &phi.warm : nullptr);
  const RVector r = conditional_risks(fin.measurement, states, cost);
  const auto sup = support_of(best_xi, kSupportCutoff);

  out.worst_prior = PriorDistribution{best_xi};
  out.measurement = fin.measurement;
  out.value = fin.bayes_risk;
  out.equal_error_spread = spread_on(r, sup);
  out.converged = fin.converged && out.equal_error_spread <= tol;
  return out;
}

namespace {

// Lexicographic enumeration of integer vectors n ≥ 0 with Σ n_i = total.
void for_each_composition(int parts, int total,
                          const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> n(parts, 0);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == parts - 1) {
      n[pos] = left;
      fn(n);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      n[pos] = v;
      rec(pos + 1, left - v);
    }
  };
  if (parts == 0) {
    if (total == 0) fn(n);
    return;
  }
  rec(0, total);
}

std::size_t composition_count(int m, int steps) {
  // C(steps + m - 1, m - 1), saturating.
  long double c = 1.0L;
  for (int i = 1; i < m; ++i)
    c = c * (steps + i) / i;
  if (c > 1e18L) return static_cast<std::size_t>(1e18);
  return static_cast<std::size_t>(c + 0.5L);
}

}  // namespace

double bayes_grid_maximum(const StateVectors& states, const CostMatrix& cost,
                          int steps, double inner_tol, int threads) {
  const int m = states.count();
  if (steps < 1) throw std::invalid_argument("bayes_grid_maximum: steps < 1");
  if (m == 1) {
    DetectionProblem p{states, PriorDistribution::uniform(1), cost};
    return bayes_solve(p, inner_tol).bayes_risk;
  }

  // Stripes over the first coordinate keep the warm-start scan local.
  std::vector<double> stripe_max(static_cast<std::size_t>(steps) + 1,
                                 -std::numeric_limits<double>::infinity());
  parallel_for(static_cast<std::size_t>(steps) + 1, threads,
               [&](std::size_t begin, std::size_t end) {
                 Measurement warm;
                 bool has_warm = false;
                 RVector xi(m);
                 for (std::size_t v0 = begin; v0 < end; ++v0) {
                   double local = -std::numeric_limits<double>::infinity();
                   for_each_composition(
                       m - 1, steps - static_cast<int>(v0),
                       [&](const std::vector<int>& tail) {
                         xi[0] = static_cast<double>(v0) / steps;
                         for (int i = 1; i < m; ++i)
                           xi[i] = static_cast<double>(tail[i - 1]) / steps;
                         const double s = xi.sum();
                         xi /= s;  // exact simplex membership
                         DetectionProblem p{states, PriorDistribution{xi}, cost};
                         BayesSolution sol = bayes_solve(
                             p, inner_tol, 400, has_warm ? &warm : nullptr);
                         warm = sol.measurement;
                         has_warm = true;
                         local = std::max(local, sol.bayes_risk);
                       });
                   stripe_max[v0] = local;
                 }
               });
  return *std::max_element(stripe_max.begin(), stripe_max.end());
}

MinimaxOptimalityReport check_minimax_optimality(
    const MinimaxSolution& sol, const StateVectors& states,
    const CostMatrix& cost, double grid_resolution,
    std::size_t max_grid_points, int threads) {
  MinimaxOptimalityReport rep;
  const int m = states.count();
  const RVector r = conditional_risks(sol.measurement, states, cost);
  const auto sup = support_of(sol.worst_prior.weights, kSupportCutoff);
  rep.equal_error_spread = spread_on(r, sup);
  rep.full_spread = r.maxCoeff() - r.minCoeff();
  double lo = std::numeric_limits<double>::infinity();
  for (int i : sup) lo = std::min(lo, r[i]);
  rep.off_support_slack = 0.0;
  for (int i = 0; i < m; ++i) {
    if (std::find(sup.begin(), sup.end(), i) == sup.end())
      rep.off_support_slack = std::max(rep.off_support_slack, r[i] - lo);
  }

  DetectionProblem p{states, sol.worst_prior, cost};
  rep.bayes_at_worst = check_bayes_optimality(sol.measurement, p);

  // The inner objective is affine in ξ for a fixed POVM, so its maximum over
  // the simplex sits at a vertex: an exact upper bound on the saddle value.
  rep.vertex_gap = r.maxCoeff() - sol.value;

  if (grid_resolution > 0.0 && m >= 2) {
    int steps = std::max(1, static_cast<int>(std::lround(1.0 / grid_resolution)));
    while (steps > 1 && composition_count(m, steps) > max_grid_points) {
      steps /= 2;
    }
    rep.grid_resolution = 1.0 / steps;
    rep.grid_points = composition_count(m, steps);
    const double grid_max =
        bayes_grid_maximum(states, cost, steps, 1e-8, threads);
    rep.grid_gap = grid_max - sol.value;
  }
  return rep;
}

}  // namespace qsd
