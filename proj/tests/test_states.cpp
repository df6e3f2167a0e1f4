#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "qsd/states.hpp"

using namespace qsd;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("coherent inner product closed form") {
  const Amplitude a(0.37, -1.21);
  CHECK(std::abs(coherent_inner_product(a, a) - Amplitude(1.0, 0.0)) < 1e-15);

  // ⟨α|−α⟩ = e^{−2|α|²}
  const Amplitude one(1.0, 0.0);
  const Amplitude minus_one(-1.0, 0.0);
  const Amplitude ov = coherent_inner_product(one, minus_one);
  CHECK(ov.real() == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
  CHECK(std::abs(ov.imag()) < 1e-15);

  // vacuum against a unit-photon state: e^{−1/2}
  const Amplitude vac(0.0, 0.0);
  const Amplitude unit = std::polar(1.0, 0.83);
  CHECK(std::abs(coherent_inner_product(vac, unit)) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-14));

  // never exceeds unit magnitude
  test::Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Amplitude x(rng.uniform(-3, 3), rng.uniform(-3, 3));
    const Amplitude y(rng.uniform(-3, 3), rng.uniform(-3, 3));
    CHECK(std::abs(coherent_inner_product(x, y)) <= 1.0 + 1e-12);
  }
}

TEST_CASE("psk constellation phases") {
  const Constellation c = build_constellation("psk", 3, 1.0, 0.0);
  REQUIRE(c.size() == 3);
  const double want[3] = {kPi / 2, 7 * kPi / 6, 11 * kPi / 6};
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(c.amplitudes[k]) == doctest::Approx(1.0));
    double phase = std::arg(c.amplitudes[k]);
    if (phase < 0) phase += 2 * kPi;
    CHECK(phase == doctest::Approx(want[k]).epsilon(1e-12));
  }

  // BPSK is {+i, −i} under the same convention.
  const Constellation b = build_constellation("psk", 2, 1.0, 0.0);
  CHECK(std::abs(b.amplitudes[0] - Amplitude(0, 1)) < 1e-12);
  CHECK(std::abs(b.amplitudes[1] - Amplitude(0, -1)) < 1e-12);
}

TEST_CASE("asymmetric psk offsets the last phase only") {
  const double theta = 0.2;
  const Constellation c = build_constellation("psk-asym", 3, 1.0, theta);
  double phase = std::arg(c.amplitudes[2]);
  if (phase < 0) phase += 2 * kPi;
  CHECK(phase == doctest::Approx(theta + 11 * kPi / 6).epsilon(1e-12));
  // first two match the symmetric layout
  const Constellation s = build_constellation("psk", 3, 1.0, 0.0);
  CHECK(std::abs(c.amplitudes[0] - s.amplitudes[0]) < 1e-12);
  CHECK(std::abs(c.amplitudes[1] - s.amplitudes[1]) < 1e-12);

  CHECK_THROWS_AS(build_constellation("psk-asym", 3, 1.0, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_constellation("qpsk", 4, 1.0, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_constellation("psk", 0, 1.0, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_constellation("psk", 3, -1.0, 0.0),
                  std::invalid_argument);
}

TEST_CASE("qam grid normalization") {
  const Constellation c = build_constellation("qam", 16, 2.5, 0.0);
  REQUIRE(c.size() == 16);
  double avg = 0.0;
  for (auto a : c.amplitudes) avg += std::norm(a);
  avg /= 16;
  CHECK(avg == doctest::Approx(2.5).epsilon(1e-12));
  CHECK_THROWS_AS(build_constellation("qam", 5, 1.0, 0.0),
                  std::invalid_argument);
}

TEST_CASE("gram matrix invariants") {
  const Constellation c = build_constellation("psk", 4, 1.3, 0.0);
  const CMatrix g = gram_matrix(c);
  validate_gram(g);
  for (int i = 0; i < 4; ++i) CHECK(g(i, i) == Amplitude(1.0, 0.0));

  // BPSK off-diagonal is e^{−2⟨n⟩}
  const CMatrix gb = gram_matrix(build_constellation("psk", 2, 1.0, 0.0));
  CHECK(std::abs(gb(0, 1)) == doctest::Approx(std::exp(-2.0)).epsilon(1e-13));
}

TEST_CASE("symmetric psk gram is circulant, asymmetric is not") {
  CHECK(is_circulant(gram_matrix(build_constellation("psk", 5, 0.7, 0.0))));
  CHECK_FALSE(is_circulant(
      gram_matrix(build_constellation("psk-asym", 3, 1.0, 0.2))));
}

TEST_CASE("embedding reproduces the gram matrix") {
  SUBCASE("orthonormal case") {
    const CMatrix g = CMatrix::Identity(3, 3);
    const StateVectors v = embed_states(g);
    CHECK(v.dim() == 3);
    CHECK(max_abs(gram_of(v) - g) < 1e-12);
  }
  SUBCASE("random constellations round trip") {
    test::Rng rng(21);
    for (int trial = 0; trial < 40; ++trial) {
      const int m = 2 + rng.uniform_int(4);
      const Constellation c = test::random_constellation(rng, m);
      const CMatrix g = gram_matrix(c);
      const StateVectors v = embed_states(g);
      CHECK(max_abs(gram_of(v) - g) < 1e-10);
      for (int i = 0; i < m; ++i) {
        CHECK(std::abs(v.state(i).norm() - 1.0) < 1e-10);
      }
    }
  }
  SUBCASE("duplicate state drops the rank") {
    Constellation c = custom_constellation(
        {Amplitude(0.6, 0.2), Amplitude(-0.4, 0.9), Amplitude(0.6, 0.2)});
    const CMatrix g = gram_matrix(c);
    const StateVectors v = embed_states(g);
    CHECK(v.dim() == 2);
    CHECK(max_abs(gram_of(v) - g) < 1e-10);
  }
  SUBCASE("non-PSD input is rejected") {
    CMatrix bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;  // eigenvalues {3, −1}
    CHECK_THROWS_AS(embed_states(bad), std::invalid_argument);
  }
}

TEST_CASE("pure loss scales amplitudes") {
  const Constellation c = build_constellation("psk", 3, 2.0, 0.0);
  SUBCASE("identity and dark port") {
    const Constellation same = apply_loss(c, 1.0);
    for (int i = 0; i < 3; ++i)
      CHECK(std::abs(same.amplitudes[i] - c.amplitudes[i]) < 1e-15);
    const Constellation dark = apply_loss(c, 0.0);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(dark.amplitudes[i]) == 0.0);
  }
  SUBCASE("photon number halves at T = 1/2") {
    const Constellation half = apply_loss(c, 0.5);
    CHECK(std::norm(half.amplitudes[0]) == doctest::Approx(1.0));
  }
  SUBCASE("losses compose multiplicatively") {
    test::Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const double t1 = rng.uniform();
      const double t2 = rng.uniform();
      const Constellation a = apply_loss(apply_loss(c, t1), t2);
      const Constellation b = apply_loss(c, t1 * t2);
      for (int i = 0; i < 3; ++i)
        CHECK(std::abs(a.amplitudes[i] - b.amplitudes[i]) < 1e-12);
    }
  }
  SUBCASE("range check") {
    CHECK_THROWS_AS(apply_loss(c, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(apply_loss(c, 1.1), std::invalid_argument);
  }
}
