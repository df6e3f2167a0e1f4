#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qsd/detection.hpp"

using namespace qsd;

namespace {

StateVectors psk_states(int m, double mean_photon) {
  return embed_states(gram_matrix(build_constellation("psk", m, mean_photon)));
}

const double kHelstromBpsk1 = 0.5 * (1.0 - std::sqrt(1.0 - std::exp(-4.0)));

}  // namespace

TEST_CASE("risk operators") {
  test::Rng rng(3);
  SUBCASE("binary expansion under 0/1 cost") {
    auto [states, prior] = test::random_problem(rng, 2);
    DetectionProblem p{states, prior, CostMatrix::zero_one(2)};
    const auto w = risk_operators(p);
    CHECK(max_abs(w[0] - prior.weights[1] * outer(states.state(1))) < 1e-14);
    CHECK(max_abs(w[1] - prior.weights[0] * outer(states.state(0))) < 1e-14);
  }
  SUBCASE("zero cost gives zero operators") {
    auto [states, prior] = test::random_problem(rng, 3);
    DetectionProblem p{states, prior, CostMatrix{RMatrix::Zero(3, 3)}};
    for (const auto& w : risk_operators(p)) CHECK(max_abs(w) == 0.0);
  }
  SUBCASE("trace identity Tr W_j = 1 - xi_j under 0/1 cost") {
    for (int m = 2; m <= 4; ++m) {
      auto [states, prior] = test::random_problem(rng, m);
      DetectionProblem p{states, prior, CostMatrix::zero_one(m)};
      const auto w = risk_operators(p);
      for (int j = 0; j < m; ++j) {
        CHECK(std::real(w[j].trace()) ==
              doctest::Approx(1.0 - prior.weights[j]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("bayes_solve reproduces the Helstrom bound") {
  const StateVectors states = psk_states(2, 1.0);
  DetectionProblem p{states, PriorDistribution::uniform(2),
                     CostMatrix::zero_one(2)};
  const BayesSolution sol = bayes_solve(p, 1e-9);
  CHECK(sol.converged);
  CHECK(std::abs(sol.error_probability - kHelstromBpsk1) < 1e-10);
  CHECK(sol.measurement.completeness_residual < 1e-8);
  CHECK(sol.measurement.positivity_residual < 1e-10);
}

TEST_CASE("bayes_solve on orthogonal states is exact") {
  const StateVectors states{CMatrix::Identity(3, 3)};
  DetectionProblem p{states, PriorDistribution{(RVector(3) << 0.5, 0.2, 0.3).finished()},
                     CostMatrix::zero_one(3)};
  const BayesSolution sol = bayes_solve(p, 1e-9);
  CHECK(sol.converged);
  CHECK(sol.error_probability < 1e-12);
  const RMatrix channel =
      conditional_error_matrix(sol.measurement, states);
  CHECK(max_abs(CMatrix(channel.cast<Complex>()) -
                CMatrix::Identity(3, 3)) < 1e-10);
}

TEST_CASE("bayes_solve with a certain prior never errs") {
  const StateVectors states = psk_states(3, 1.0);
  DetectionProblem p{states, PriorDistribution::point_mass(3, 0),
                     CostMatrix::zero_one(3)};
  const BayesSolution sol = bayes_solve(p, 1e-9);
  CHECK(sol.converged);
  CHECK(sol.error_probability < 1e-10);
}

TEST_CASE("srm matches bayes_solve for symmetric states under uniform prior") {
  for (int m : {2, 3, 4}) {
    const StateVectors states = psk_states(m, 1.0);
    const PriorDistribution uniform = PriorDistribution::uniform(m);
    const Measurement srm_povm = srm(states, uniform);
    const RVector risks =
        conditional_risks(srm_povm, states, CostMatrix::zero_one(m));
    const double srm_error = risks.dot(uniform.weights);
    DetectionProblem p{states, uniform, CostMatrix::zero_one(m)};
    const BayesSolution sol = bayes_solve(p, 1e-9);
    CHECK(sol.converged);
    CHECK(std::abs(sol.error_probability - srm_error) < 1e-8);
  }
}

TEST_CASE("srm basics") {
  SUBCASE("single state") {
    const StateVectors one{CMatrix::Ones(1, 1)};
    const Measurement m = srm(one, PriorDistribution::uniform(1));
    CHECK(max_abs(m.operators[0] - CMatrix::Identity(1, 1)) < 1e-12);
  }
  SUBCASE("orthonormal states give projectors") {
    const StateVectors states{CMatrix::Identity(3, 3)};
    const Measurement m = srm(states, PriorDistribution::uniform(3));
    for (int j = 0; j < 3; ++j)
      CHECK(max_abs(m.operators[j] - outer(states.state(j))) < 1e-12);
  }
  SUBCASE("binary srm achieves the Helstrom bound at equal priors") {
    const StateVectors states = psk_states(2, 1.0);
    const PriorDistribution uniform = PriorDistribution::uniform(2);
    const Measurement m = srm(states, uniform);
    const RVector risks =
        conditional_risks(m, states, CostMatrix::zero_one(2));
    CHECK(std::abs(risks.dot(uniform.weights) -
                   helstrom_binary(states, uniform)) < 1e-10);
  }
  SUBCASE("zero average state is rejected") {
    const StateVectors states{CMatrix::Identity(2, 2)};
    PriorDistribution prior{RVector::Zero(2)};
    CHECK_THROWS(srm(states, prior));
  }
}

TEST_CASE("helstrom_binary closed form") {
  CHECK(helstrom_binary(test::two_states_with_overlap(0.0),
                        PriorDistribution{(RVector(2) << 0.3, 0.7).finished()}) == 0.0);
  CHECK(std::abs(helstrom_binary(test::two_states_with_overlap(std::exp(-2.0)),
                                 PriorDistribution::uniform(2)) -
                 kHelstromBpsk1) < 1e-15);
  CHECK(helstrom_binary(test::two_states_with_overlap(0.5),
                        PriorDistribution::point_mass(2, 0)) == 0.0);
  CHECK_THROWS_AS(
      helstrom_binary(StateVectors{CMatrix::Identity(3, 3)},
                      PriorDistribution::uniform(3)),
      std::invalid_argument);
}

TEST_CASE("optimality checker grades measurements") {
  const StateVectors states = psk_states(2, 1.0);
  DetectionProblem p{states, PriorDistribution::uniform(2),
                     CostMatrix::zero_one(2)};
  SUBCASE("solver output certifies") {
    const BayesSolution sol = bayes_solve(p, 1e-9);
    const auto rep = check_bayes_optimality(sol.measurement, p);
    CHECK(rep.certified(1e-9));
  }
  SUBCASE("the trivial uniform POVM does not certify") {
    std::vector<CMatrix> ops(2, 0.5 * CMatrix::Identity(2, 2));
    const auto rep =
        check_bayes_optimality(Measurement::from_operators(ops), p);
    CHECK(rep.overall > 1e-3);
  }
  SUBCASE("projectors are optimal for orthogonal states") {
    const StateVectors ortho{CMatrix::Identity(2, 2)};
    DetectionProblem po{ortho, PriorDistribution::uniform(2),
                        CostMatrix::zero_one(2)};
    std::vector<CMatrix> ops{outer(ortho.state(0)), outer(ortho.state(1))};
    const auto rep =
        check_bayes_optimality(Measurement::from_operators(ops), po);
    CHECK(rep.overall < 1e-12);
  }
}

TEST_CASE("conditional error matrix rows are distributions") {
  SUBCASE("identical states have identical rows") {
    Constellation c = custom_constellation(
        {Amplitude(0.8, 0.1), Amplitude(0.8, 0.1), Amplitude(0.8, 0.1)});
    const StateVectors states = embed_states(gram_matrix(c));
    DetectionProblem p{states, PriorDistribution::uniform(3),
                       CostMatrix::zero_one(3)};
    const BayesSolution sol = bayes_solve(p, 1e-8);
    const RMatrix channel = conditional_error_matrix(sol.measurement, states);
    for (int i = 1; i < 3; ++i)
      CHECK((channel.row(i) - channel.row(0)).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("BPSK Helstrom channel is symmetric") {
    const StateVectors states = psk_states(2, 1.0);
    DetectionProblem p{states, PriorDistribution::uniform(2),
                       CostMatrix::zero_one(2)};
    const BayesSolution sol = bayes_solve(p, 1e-10);
    const RMatrix channel = conditional_error_matrix(sol.measurement, states);
    CHECK(channel(0, 0) == doctest::Approx(1.0 - kHelstromBpsk1).epsilon(1e-9));
    CHECK(channel(1, 1) == doctest::Approx(1.0 - kHelstromBpsk1).epsilon(1e-9));
  }
  SUBCASE("rows sum to one on random problems") {
    test::Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      auto [states, prior] = test::random_problem(rng, 2 + rng.uniform_int(3));
      DetectionProblem p{states, prior,
                         CostMatrix::zero_one(states.count())};
      const BayesSolution sol = bayes_solve(p, 1e-8);
      const RMatrix channel =
          conditional_error_matrix(sol.measurement, states);
      for (Eigen::Index i = 0; i < channel.rows(); ++i) {
        CHECK(std::abs(channel.row(i).sum() - 1.0) < 1e-8);
        CHECK(channel.row(i).minCoeff() > -1e-10);
      }
    }
  }
}

TEST_CASE("binary solver agrees with the closed form across priors") {
  test::Rng rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const double s = rng.uniform();
    const double x = rng.uniform();
    const StateVectors states = test::two_states_with_overlap(s);
    PriorDistribution prior{(RVector(2) << x, 1.0 - x).finished()};
    DetectionProblem p{states, prior, CostMatrix::zero_one(2)};
    const BayesSolution sol = bayes_solve(p, 1e-9);
    CHECK(sol.converged);
    CHECK(std::abs(sol.error_probability - helstrom_binary(states, prior)) <
          1e-8);
  }
}

TEST_CASE("bayes error is basis independent") {
  test::Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    auto [states, prior] = test::random_problem(rng, 3);
    DetectionProblem p{states, prior, CostMatrix::zero_one(3)};
    const double base = bayes_solve(p, 1e-10).error_probability;

    // Haar-ish unitary from QR of a random complex matrix.
    CMatrix z(states.dim(), states.dim());
    for (int r = 0; r < z.rows(); ++r)
      for (int c = 0; c < z.cols(); ++c)
        z(r, c) = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const CMatrix q = Eigen::HouseholderQR<CMatrix>(z).householderQ();
    StateVectors rotated{q * states.vectors};
    DetectionProblem pr{rotated, prior, CostMatrix::zero_one(3)};
    CHECK(std::abs(bayes_solve(pr, 1e-10).error_probability - base) < 1e-9);
  }
}

TEST_CASE("BPSK error decreases with photon number") {
  double prev = 1.0;
  for (double n = 0.0; n <= 4.0 + 1e-9; n += 0.25) {
    const StateVectors states = psk_states(2, n);
    DetectionProblem p{states, PriorDistribution::uniform(2),
                       CostMatrix::zero_one(2)};
    const double err = bayes_solve(p, 1e-9).error_probability;
    CHECK(err <= prev + 1e-9);
    prev = err;
  }
}

TEST_CASE("random corpus certifies at tolerance") {
  test::Rng rng(41);
  for (int trial = 0; trial < 60; ++trial) {
    const int m = 2 + rng.uniform_int(3);
    auto [states, prior] = test::random_problem(rng, m);
    DetectionProblem p{states, prior, CostMatrix::zero_one(m)};
    const BayesSolution sol = bayes_solve(p, 1e-8);
    CHECK(sol.converged);
    const auto rep = check_bayes_optimality(sol.measurement, p);
    CHECK(rep.overall < 1e-7);
    CHECK(sol.measurement.completeness_residual < 1e-8);
    CHECK(sol.measurement.positivity_residual < 1e-10);
  }
}

TEST_CASE("general cost matrices are honored") {
  // Asymmetric costs shift the decision boundary; risk from the solver must
  // match the risk recomputed from the channel matrix, and beat 0/1-tuned
  // measurements on their own objective.
  const StateVectors states = psk_states(2, 0.5);
  RMatrix cost(2, 2);
  cost << 0.0, 5.0, 1.0, 0.0;  // missing state 1 is five times worse
  const PriorDistribution prior = PriorDistribution::uniform(2);
  DetectionProblem p{states, prior, CostMatrix{cost}};
  const BayesSolution sol = bayes_solve(p, 1e-9);
  CHECK(sol.converged);
  const RVector risks =
      conditional_risks(sol.measurement, states, CostMatrix{cost});
  CHECK(std::abs(risks.dot(prior.weights) - sol.bayes_risk) < 1e-10);

  DetectionProblem p01{states, prior, CostMatrix::zero_one(2)};
  const BayesSolution sol01 = bayes_solve(p01, 1e-9);
  const RVector risks01 =
      conditional_risks(sol01.measurement, states, CostMatrix{cost});
  CHECK(sol.bayes_risk <= risks01.dot(prior.weights) + 1e-9);
}
