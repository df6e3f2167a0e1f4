#include "qsd/states.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qsd {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kFirstPhase = kPi / 2.0;  // PSK phase convention

bool is_perfect_square(int m, int& side) {
  side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
  return side * side == m;
}
}  // namespace

Amplitude coherent_inner_product(Amplitude a, Amplitude b) {
  return std::exp(-0.5 * std::norm(a) - 0.5 * std::norm(b) +
                  std::conj(a) * b);
}

Constellation build_constellation(const std::string& label, int m,
                                  double mean_photon, double theta) {
  if (m < 1) throw std::invalid_argument("constellation: M must be >= 1");
  if (mean_photon < 0.0)
    throw std::invalid_argument("constellation: mean_photon must be >= 0");

  Constellation c;
  c.label = label;
  c.mean_photon = mean_photon;
  c.theta = 0.0;

  if (label == "psk" || label == "psk-asym") {
    const bool asym = (label == "psk-asym");
    if (asym && theta == 0.0) {
      throw std::invalid_argument(
          "psk-asym with theta = 0 degenerates to psk; use label \"psk\"");
    }
    const double r = std::sqrt(mean_photon);
    c.amplitudes.reserve(m);
    for (int k = 0; k < m; ++k) {
      double phase = kFirstPhase + 2.0 * kPi * k / m;
      if (asym && k == m - 1) phase += theta;
      c.amplitudes.push_back(std::polar(r, phase));
    }
    c.theta = asym ? theta : 0.0;
    return c;
  }

  if (label == "qam") {
    int side = 0;
    if (!is_perfect_square(m, side)) {
      throw std::invalid_argument("qam: M must be a perfect square");
    }
    // Odd-integer grid {±1, ±3, ...}², then scale to the requested average
    // photon number under uniform weights.
    double raw_power = 0.0;
    std::vector<Amplitude> grid;
    grid.reserve(m);
    for (int iy = 0; iy < side; ++iy) {
      for (int ix = 0; ix < side; ++ix) {
        const double re = 2.0 * ix - side + 1;
        const double im = 2.0 * iy - side + 1;
        grid.emplace_back(re, im);
        raw_power += re * re + im * im;
      }
    }
    raw_power /= m;
    if (raw_power == 0.0) {
      if (mean_photon > 0.0) {
        throw std::invalid_argument(
            "qam: M = 1 grid sits at the origin; mean_photon must be 0");
      }
      c.amplitudes = std::move(grid);
      return c;
    }
    const double scale = std::sqrt(mean_photon / raw_power);
    for (auto& a : grid) a *= scale;
    c.amplitudes = std::move(grid);
    return c;
  }

  throw std::invalid_argument("unknown constellation label: " + label +
                              " (custom constellations take an explicit "
                              "amplitude list)");
}

Constellation custom_constellation(std::vector<Amplitude> amplitudes) {
  if (amplitudes.empty())
    throw std::invalid_argument("custom constellation: empty amplitude list");
  Constellation c;
  c.label = "custom";
  c.theta = 0.0;
  double power = 0.0;
  for (auto a : amplitudes) power += std::norm(a);
  c.mean_photon = power / static_cast<double>(amplitudes.size());
  c.amplitudes = std::move(amplitudes);
  return c;
}

CMatrix gram_matrix(const Constellation& c) {
  const int m = c.size();
  CMatrix g(m, m);
  for (int i = 0; i < m; ++i) {
    g(i, i) = 1.0;
    for (int j = i + 1; j < m; ++j) {
      g(i, j) = coherent_inner_product(c.amplitudes[i], c.amplitudes[j]);
      g(j, i) = std::conj(g(i, j));
    }
  }
  return g;
}

void validate_gram(const CMatrix& gram, double tol) {
  if (gram.rows() != gram.cols())
    throw std::invalid_argument("gram matrix must be square");
  if (max_abs(gram - gram.adjoint()) > tol)
    throw std::invalid_argument("gram matrix must be Hermitian");
  for (Eigen::Index i = 0; i < gram.rows(); ++i) {
    if (std::abs(gram(i, i) - 1.0) > tol)
      throw std::invalid_argument("gram matrix must have unit diagonal");
  }
  if (min_eigenvalue(gram) < -tol)
    throw std::invalid_argument("gram matrix must be positive semidefinite");
}

StateVectors embed_states(const CMatrix& gram, double rank_cutoff) {
  const Eigen::Index m = gram.rows();
  if (m == 0 || gram.cols() != m)
    throw std::invalid_argument("embed_states: square nonempty Gram required");

  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitize(gram));
  const RVector& w = es.eigenvalues();
  const double wmax = w.maxCoeff();
  if (wmax <= 0.0)
    throw std::invalid_argument("embed_states: Gram matrix is zero");
  if (w.minCoeff() < -1e-10 * std::max(wmax, 1.0)) {
    throw std::invalid_argument(
        "embed_states: Gram matrix is not PSD beyond tolerance");
  }

  // Keep eigenvalues above the relative cutoff; d = numerical rank.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (w[i] > rank_cutoff * wmax) keep.push_back(i);
  }
  const Eigen::Index d = static_cast<Eigen::Index>(keep.size());

  // V = Λ_d^{1/2} U_d†, columns satisfy  v_i† v_j = G_ij.
  CMatrix v(d, m);
  for (Eigen::Index r = 0; r < d; ++r) {
    const double s = std::sqrt(w[keep[r]]);
    v.row(r) = s * es.eigenvectors().col(keep[r]).adjoint();
  }
  return StateVectors{std::move(v)};
}

CMatrix gram_of(const StateVectors& s) {
  return s.vectors.adjoint() * s.vectors;
}

Constellation apply_loss(const Constellation& c, double transmittance) {
  if (!(transmittance >= 0.0 && transmittance <= 1.0))
    throw std::invalid_argument("apply_loss: transmittance must be in [0,1]");
  Constellation out = c;
  const double g = std::sqrt(transmittance);
  for (auto& a : out.amplitudes) a *= g;
  out.mean_photon = c.mean_photon * transmittance;
  return out;
}

bool is_circulant(const CMatrix& a, double tol) {
  const Eigen::Index m = a.rows();
  if (a.cols() != m) return false;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index shift = ((j - i) % m + m) % m;
      if (std::abs(a(i, j) - a(0, shift)) > tol) return false;
    }
  }
  return true;
}

}  // namespace qsd
