#pragma once

#include <string>
#include <vector>

#include "qsd/linalg.hpp"

// Coherent-state constellations and their exact finite-dimensional embedding.
//
// A pure coherent state |a⟩ is fully described by its complex amplitude; all
// detection quantities downstream depend on the states only through pairwise
// overlaps ⟨a|b⟩ = exp(−|a|²/2 − |b|²/2 + a*·b). We therefore represent an
// M-state constellation exactly by factoring its Gram matrix into M vectors
// of dimension d = rank(G) ≤ M, instead of truncating a photon-number basis.

namespace qsd {

using Amplitude = std::complex<double>;

/// ⟨n⟩ = |a|² of the coherent state with amplitude `a`.
inline double mean_photon_number(Amplitude a) { return std::norm(a); }

struct Constellation {
  std::vector<Amplitude> amplitudes;  // transmission-index order
  std::string label;                  // "psk", "psk-asym", "qam", "custom"
  double mean_photon = 0.0;           // average ⟨n⟩ under uniform weights
  double theta = 0.0;                 // asymmetry offset, 0 unless psk-asym

  int size() const { return static_cast<int>(amplitudes.size()); }
};

/// Exact overlap ⟨a|b⟩. Total function; |result| ≤ 1.
Amplitude coherent_inner_product(Amplitude a, Amplitude b);

/// Builds a named constellation.
///
/// psk       M phases φ_k = π/2 + 2π(k−1)/M, |α|² = mean_photon.
/// psk-asym  as psk with the last phase offset by theta (theta = 0 rejected).
/// qam       square grid (M must be a perfect square) scaled so the average
///           photon number under uniform weights equals mean_photon.
/// Throws std::invalid_argument on unknown labels or invalid parameters.
Constellation build_constellation(const std::string& label, int m,
                                  double mean_photon, double theta = 0.0);

/// Wraps an explicit amplitude list (label "custom").
Constellation custom_constellation(std::vector<Amplitude> amplitudes);

/// G_ij = ⟨α_i|α_j⟩. Hermitian, unit diagonal, PSD up to rounding.
CMatrix gram_matrix(const Constellation& c);

/// Column i holds the embedded vector of state i; pairwise inner products
/// reproduce the Gram matrix to 1e-10.
struct StateVectors {
  CMatrix vectors;  // d × M

  int dim() const { return static_cast<int>(vectors.rows()); }
  int count() const { return static_cast<int>(vectors.cols()); }
  CVector state(int i) const { return vectors.col(i); }
};

/// Factors a Gram matrix into state vectors. The embedding dimension is the
/// numerical rank of `gram` (eigenvalues > rank_cutoff · λ_max are kept).
/// Throws if `gram` is not PSD beyond tolerance (λ_min < −1e-10 · λ_max scale).
StateVectors embed_states(const CMatrix& gram, double rank_cutoff = 1e-12);

/// Recomputes pairwise inner products ⟨v_i, v_j⟩ (round-trip checks).
CMatrix gram_of(const StateVectors& s);

/// Pure-loss channel: every amplitude scaled by √transmittance.
Constellation apply_loss(const Constellation& c, double transmittance);

/// True when a_ij depends only on (j − i) mod M within `tol`. Symmetric
/// constellations have circulant Gram matrices.
bool is_circulant(const CMatrix& a, double tol = 1e-10);

/// Validates Gram-matrix invariants (Hermitian, unit diagonal, PSD);
/// throws std::invalid_argument with a description on failure.
void validate_gram(const CMatrix& gram, double tol = 1e-10);

}  // namespace qsd
