#include "qsd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qsd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kTagEqSymbol = 0x65712D73ull;
constexpr std::uint64_t kTagEqEve = 0x65712D65ull;
constexpr std::uint64_t kTagEqBob = 0x65712D62ull;
constexpr std::size_t kShardSize = 4096;  // fixed-size shards keep the
                                          // reduction order thread-count free
}  // namespace

double entropy_bits(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

double conditional_entropy_bits(const RVector& prior, const RMatrix& channel) {
  if (prior.size() != channel.rows())
    throw std::invalid_argument("conditional_entropy: shape mismatch");
  double h = 0.0;
  for (Eigen::Index y = 0; y < channel.cols(); ++y) {
    double py = 0.0;
    for (Eigen::Index s = 0; s < prior.size(); ++s)
      py += prior[s] * channel(s, y);
    if (py <= 0.0) continue;
    double hy = 0.0;
    for (Eigen::Index s = 0; s < prior.size(); ++s) {
      const double post = prior[s] * channel(s, y) / py;
      if (post > 0.0) hy -= post * std::log2(post);
    }
    h += py * hy;
  }
  return h;
}

AdvantageReport advantage_ratio(const StateVectors& states,
                                const PriorDistribution& prior,
                                const MinimaxSolution* precomputed,
                                double tol) {
  prior.validate();
  const int m = states.count();
  if (prior.size() != m)
    throw std::invalid_argument("advantage_ratio: prior size != M");
  const CostMatrix cost = CostMatrix::zero_one(m);

  MinimaxSolution local;
  const MinimaxSolution* mm = precomputed;
  if (mm == nullptr) {
    local = minimax_solve(states, cost, tol);
    mm = &local;
  }

  AdvantageReport rep;
  rep.prior = prior;
  const RVector risks = conditional_risks(mm->measurement, states, cost);
  rep.pe_minimax = risks.dot(prior.weights);

  DetectionProblem p{states, prior, cost};
  rep.pe_bayes = bayes_solve(p, tol).error_probability;

  if (rep.pe_bayes > 0.0) {
    rep.ratio = rep.pe_minimax / rep.pe_bayes;
    rep.ratio_finite = true;
  } else {
    rep.ratio = kInf;
    rep.ratio_finite = false;
  }
  return rep;
}

namespace {

void for_each_simplex_point(int m, int steps,
                            const std::function<void(const RVector&)>& fn) {
  std::vector<int> n(m, 0);
  RVector xi(m);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == m - 1) {
      n[pos] = left;
      for (int i = 0; i < m; ++i) xi[i] = static_cast<double>(n[i]) / steps;
      const double s = xi.sum();
      xi /= s;
      fn(xi);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      n[pos] = v;
      rec(pos + 1, left - v);
    }
  };
  rec(0, steps);
}

std::size_t simplex_point_count(int m, int steps) {
  long double c = 1.0L;
  for (int i = 1; i < m; ++i) c = c * (steps + i) / i;
  return static_cast<std::size_t>(c + 0.5L);
}

int grid_steps_for_budget(int m, std::size_t budget) {
  int steps = 1;
  while (simplex_point_count(m, steps + 1) <= budget && steps < 100000)
    ++steps;
  return steps;
}

}  // namespace

EtaSearchResult eta_search(const EtaSearchSpec& spec) {
  if (spec.budget < 1)
    throw std::invalid_argument("eta_search: budget must be >= 1");
  std::vector<double> thetas = spec.thetas;
  if (thetas.empty()) {
    if (spec.label == "psk-asym")
      throw std::invalid_argument("eta_search: psk-asym sweep needs thetas");
    thetas.push_back(0.0);
  }

  EtaSearchResult result;
  result.best.ratio = -kInf;
  result.best.ratio_finite = false;
  bool any_finite = false;
  const CostMatrix cost = CostMatrix::zero_one(spec.m);

  for (double theta : thetas) {
    const Constellation c =
        build_constellation(spec.label, spec.m, spec.mean_photon, theta);
    const StateVectors states = embed_states(gram_matrix(c));
    const MinimaxSolution mm = minimax_solve(states, cost, spec.tol);
    const RVector risks = conditional_risks(mm.measurement, states, cost);

    // Evaluation points: uniform seed, then the coarsest simplex grid that
    // fits the budget. Deterministic; the seed is recorded but never drawn.
    std::vector<RVector> points;
    points.push_back(RVector::Constant(spec.m, 1.0 / spec.m));
    if (spec.budget > 1) {
      const int steps = grid_steps_for_budget(spec.m, spec.budget - 1);
      points.reserve(1 + simplex_point_count(spec.m, steps));
      for_each_simplex_point(spec.m, steps,
                             [&](const RVector& xi) { points.push_back(xi); });
    }

    const std::size_t base = result.surface.size();
    result.surface.resize(base + points.size());
    std::size_t budget_left =
        spec.budget >= points.size() ? spec.budget - points.size() : 0;

    const std::size_t shards = (points.size() + kShardSize - 1) / kShardSize;
    parallel_for(shards, spec.threads, [&](std::size_t sb, std::size_t se) {
      Measurement warm;
      bool has_warm = false;
      for (std::size_t sh = sb; sh < se; ++sh) {
        const std::size_t lo = sh * kShardSize;
        const std::size_t hi = std::min(points.size(), lo + kShardSize);
        for (std::size_t i = lo; i < hi; ++i) {
          DetectionProblem p{states, PriorDistribution{points[i]}, cost};
          BayesSolution sol =
              bayes_solve(p, spec.tol, kDefaultMaxIterations,
                          has_warm ? &warm : nullptr);
          warm = sol.measurement;
          has_warm = true;
          EtaSurfaceRow row;
          row.theta = theta;
          row.prior.assign(points[i].data(), points[i].data() + spec.m);
          row.pe_bayes = sol.error_probability;
          row.pe_minimax = risks.dot(points[i]);
          row.ratio = row.pe_bayes > 0.0 ? row.pe_minimax / row.pe_bayes : kInf;
          result.surface[base + i] = std::move(row);
        }
      }
    });
    result.evaluations += points.size();

    // Fold the grid into the running best (finite ratios only).
    RVector best_xi = points.front();
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& row = result.surface[base + i];
      if (std::isfinite(row.ratio) && row.ratio > result.best.ratio) {
        any_finite = true;
        result.best.ratio = row.ratio;
        result.best.ratio_finite = true;
        result.best.pe_bayes = row.pe_bayes;
        result.best.pe_minimax = row.pe_minimax;
        result.best.prior = PriorDistribution{points[i]};
        result.best.constellation_label = spec.label;
        result.best.theta = theta;
        best_xi = points[i];
      }
    }

    // Local pattern refinement around the incumbent: coordinate exchanges
    // with halving step. Rows found here are appended to the surface.
    if (spec.refine_rounds > 0 && any_finite &&
        result.best.theta == theta && budget_left > 0) {
      const int steps = grid_steps_for_budget(
          spec.m, std::max<std::size_t>(spec.budget - 1, 1));
      double h = 1.0 / std::max(steps, 1);
      RVector incumbent = best_xi;
      Measurement warm;
      bool has_warm = false;
      for (int round = 0; round < spec.refine_rounds && budget_left > 0;
           ++round) {
        h *= 0.5;
        bool improved = true;
        while (improved && budget_left > 0) {
          improved = false;
          for (int a = 0; a < spec.m && budget_left > 0; ++a) {
            for (int b = 0; b < spec.m && budget_left > 0; ++b) {
              if (a == b) continue;
              RVector xi = incumbent;
              xi[a] += h;
              xi[b] -= h;
              if (xi[b] < 0.0) continue;
              xi /= xi.sum();
              DetectionProblem p{states, PriorDistribution{xi}, cost};
              BayesSolution sol =
                  bayes_solve(p, spec.tol, kDefaultMaxIterations,
                              has_warm ? &warm : nullptr);
              warm = sol.measurement;
              has_warm = true;
              --budget_left;
              ++result.evaluations;
              EtaSurfaceRow row;
              row.theta = theta;
              row.prior.assign(xi.data(), xi.data() + spec.m);
              row.pe_bayes = sol.error_probability;
              row.pe_minimax = risks.dot(xi);
              row.ratio =
                  row.pe_bayes > 0.0 ? row.pe_minimax / row.pe_bayes : kInf;
              result.surface.push_back(row);
              if (std::isfinite(row.ratio) && row.ratio > result.best.ratio) {
                result.best.ratio = row.ratio;
                result.best.pe_bayes = row.pe_bayes;
                result.best.pe_minimax = row.pe_minimax;
                result.best.prior = PriorDistribution{xi};
                result.best.theta = theta;
                incumbent = xi;
                improved = true;
              }
            }
          }
        }
      }
    }
  }

  if (!any_finite) {
    throw std::invalid_argument(
        "eta_search: every evaluated prior had zero Bayes error (degenerate "
        "family)");
  }
  return result;
}

namespace {

RMatrix normalized_rows(const Measurement& m, const StateVectors& states) {
  RMatrix rows = conditional_error_matrix(m, states);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      rows(i, j) = std::max(rows(i, j), 0.0);
      total += rows(i, j);
    }
    if (total <= 0.0)
      throw std::invalid_argument("metrics: channel row has no mass");
    rows.row(i) /= total;
  }
  return rows;
}

EquivocationEstimate reduce_moments(const std::vector<double>& sum,
                                    const std::vector<double>& sumsq,
                                    std::size_t n) {
  double s = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    s += sum[i];
    ss += sumsq[i];
  }
  EquivocationEstimate est;
  est.sample_count = n;
  est.value_bits = s / static_cast<double>(n);
  const double var =
      std::max(0.0, ss / static_cast<double>(n) - est.value_bits * est.value_bits);
  est.standard_error =
      n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
  return est;
}

}  // namespace

EquivocationReport equivocation_given_key(const EquivocationInput& in) {
  if (in.samples == 0)
    throw std::invalid_argument("equivocation: samples must be > 0");
  const int m = in.eve_states.count();
  in.schedule.validate(m);
  if (static_cast<int>(in.bob_povm.size()) != static_cast<int>(in.schedule.family.size()))
    throw std::invalid_argument("equivocation: one Bob POVM per prior needed");

  const RMatrix eve_rows = normalized_rows(in.eve_measurement, in.eve_states);
  std::vector<RMatrix> bob_rows;
  bob_rows.reserve(in.bob_povm.size());
  for (const auto& povm : in.bob_povm)
    bob_rows.push_back(normalized_rows(povm, in.bob_states));

  const Keystream sym(mix64(in.seed ^ kTagEqSymbol));
  const Keystream eve_noise(mix64(in.seed ^ kTagEqEve));
  const Keystream bob_noise(mix64(in.seed ^ kTagEqBob));

  const std::size_t shards = (in.samples + kShardSize - 1) / kShardSize;
  std::vector<double> e_sum(shards, 0.0), e_sq(shards, 0.0);
  std::vector<double> b_sum(shards, 0.0), b_sq(shards, 0.0);

  parallel_for(shards, in.threads, [&](std::size_t sb, std::size_t se) {
    std::vector<double> post(m);
    for (std::size_t sh = sb; sh < se; ++sh) {
      const std::size_t lo = sh * kShardSize;
      const std::size_t hi = std::min(in.samples, lo + kShardSize);
      for (std::size_t t = lo; t < hi; ++t) {
        const std::uint64_t frame = t / in.schedule.frame_length;
        const int k = in.schedule.prior_index_for_frame(in.physical_key, frame);
        const RVector& prior = in.schedule.family[k].weights;
        const int s = sample_row(prior, Keystream::to_unit_double(sym.word(t)));

        const int ye = sample_row(eve_rows.row(s),
                                  Keystream::to_unit_double(eve_noise.word(t)));
        double norm = 0.0;
        for (int i = 0; i < m; ++i) {
          post[i] = prior[i] * eve_rows(i, ye);
          norm += post[i];
        }
        for (int i = 0; i < m; ++i) post[i] /= norm;
        const double he = entropy_bits(post);
        e_sum[sh] += he;
        e_sq[sh] += he * he;

        const int yb = sample_row(bob_rows[k].row(s),
                                  Keystream::to_unit_double(bob_noise.word(t)));
        norm = 0.0;
        for (int i = 0; i < m; ++i) {
          post[i] = prior[i] * bob_rows[k](i, yb);
          norm += post[i];
        }
        for (int i = 0; i < m; ++i) post[i] /= norm;
        const double hb = entropy_bits(post);
        b_sum[sh] += hb;
        b_sq[sh] += hb * hb;
      }
    }
  });

  EquivocationReport rep;
  rep.eve = reduce_moments(e_sum, e_sq, in.samples);
  rep.bob = reduce_moments(b_sum, b_sq, in.samples);
  return rep;
}

KeyAttackResult key_attack(std::span<const TranscriptSlot> slice,
                           const KeyAttackModel& model) {
  if (model.key_bits < 1 || model.key_bits > 20)
    throw std::invalid_argument("key_attack: key_bits must be in [1,20]");
  const int m = static_cast<int>(model.source_q.size());
  model.schedule.validate(m);
  if (model.eve_channel.rows() != m)
    throw std::invalid_argument("key_attack: channel rows != M");
  for (const auto& slot : slice) {
    if (slot.x < 0 || slot.x >= m || slot.y_eve < 0 ||
        slot.y_eve >= model.eve_channel.cols() || slot.k < 0 ||
        slot.k >= static_cast<int>(model.schedule.family.size()))
      throw std::invalid_argument("key_attack: transcript/model mismatch");
  }

  const std::size_t nkeys = std::size_t{1} << model.key_bits;
  std::vector<double> loglik(nkeys, 0.0);

  parallel_for(nkeys, model.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t kv = begin; kv < end; ++kv) {
      const SecretKey cand =
          SecretKey::from_value(kv, model.key_bits);
      const EncryptionBox box(model.source_q, model.schedule, cand,
                              model.physical_key);
      double acc = 0.0;
      for (const auto& slot : slice) {
        const int s_pred = box.transmit_index(slot.x, slot.t);
        const double p = model.eve_channel(s_pred, slot.y_eve);
        acc += p > 0.0 ? std::log(p) : -kInf;
        if (acc == -kInf) break;
      }
      loglik[kv] = acc;
    }
  });

  double max_ll = -kInf;
  for (double v : loglik) max_ll = std::max(max_ll, v);
  if (max_ll == -kInf)
    throw std::invalid_argument(
        "key_attack: transcript has zero likelihood under every key");

  KeyAttackResult res;
  res.posterior.resize(nkeys);
  double norm = 0.0;
  for (std::size_t kv = 0; kv < nkeys; ++kv) {
    res.posterior[kv] = std::exp(loglik[kv] - max_ll);
    norm += res.posterior[kv];
  }
  for (auto& p : res.posterior) p /= norm;
  res.map_key = 0;
  res.guessing_probability = res.posterior[0];
  for (std::size_t kv = 1; kv < nkeys; ++kv) {
    if (res.posterior[kv] > res.guessing_probability) {
      res.guessing_probability = res.posterior[kv];
      res.map_key = kv;
    }
  }
  res.entropy_bits = entropy_bits(res.posterior);
  res.slots_used = slice.size();
  return res;
}

}  // namespace qsd
