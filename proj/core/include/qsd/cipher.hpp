#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qsd/detection.hpp"
#include "qsd/states.hpp"

// Keyed-prior stream-cipher session simulator.
//
// Encryption model per slot t:
//   1. the physical key selects the frame's target prior Ω^(k) (one index per
//      frame of `frame_length` slots);
//   2. a canonical relabeling τ_k maps the public source distribution Q onto
//      Ω^(k) (weights must match as multisets, so the map is bijective);
//   3. the secret key draws a per-slot permutation σ_t from the stabilizer of
//      Ω^(k) (it shuffles only symbols of equal target probability, so the
//      transmitted marginal stays exactly Ω^(k));
//   4. the transmitted index is s = σ_t(τ_k(x)).
// With uniform priors the stabilizer is the full symmetric group and the
// binary case degenerates to XOR with a keystream bit. The receiver that
// knows both keys inverts the permutation after measuring; it also knows the
// slot prior Ω^(k) and can run the Bayes-optimal measurement.
//
// Keystream. All randomness derives from SplitMix64 used as a stateless
// counter generator: word(seed, i) = finalize(seed + (i+1)·GOLDEN) with
//   GOLDEN = 0x9E3779B97F4A7C15
//   finalize(z): z ^= z>>30; z *= 0xBF58476D1CE4E5B9;
//                z ^= z>>27; z *= 0x94D049BB133111EB; z ^= z>>31.
// Key bytes are absorbed into the seed by the same finalizer (see
// key_fingerprint). Stream tags separate independent uses of one key. The
// generator is documented and reproducible, NOT cryptographically strong;
// frozen vectors live in the test suite.

namespace qsd {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Absorbs key bytes (plus the bit length) into a 64-bit seed.
std::uint64_t key_fingerprint(std::span<const std::uint8_t> bytes,
                              int bit_length, std::uint64_t domain);

// Stream tags (domain separation of one key across uses).
inline constexpr std::uint64_t kTagSymbols = 0x73796D626F6C73ull;    // op stream
inline constexpr std::uint64_t kTagSlotPerm = 0x736C6F747065ull;     // σ_t draws
inline constexpr std::uint64_t kTagFramePrior = 0x6672616D65ull;     // k_t draws
inline constexpr std::uint64_t kTagPlaintext = 0x706C61696Eull;      // x_t draws
inline constexpr std::uint64_t kTagBobNoise = 0x626F626Eull;         // y^B draws
inline constexpr std::uint64_t kTagEveNoise = 0x6576656Eull;         // y^E draws

namespace detail {
struct KeyBits {
  std::vector<std::uint8_t> bytes;  // unused high bits of the last byte are 0
  int bit_length = 0;

  bool operator==(const KeyBits&) const = default;
};
KeyBits key_from_hex(const std::string& hex);
KeyBits key_from_value(std::uint64_t value, int bit_length);
std::string key_to_hex(const KeyBits& k);
}  // namespace detail

/// Key of the mathematical encryption box (default length 256 bits).
struct SecretKey {
  detail::KeyBits bits;

  static SecretKey from_hex(const std::string& hex) { return {detail::key_from_hex(hex)}; }
  static SecretKey from_value(std::uint64_t v, int bit_length) {
    return {detail::key_from_value(v, bit_length)};
  }
  std::string to_hex() const { return detail::key_to_hex(bits); }
  std::uint64_t fingerprint(std::uint64_t tag) const;
};

/// Key of the physical prior-control box; independent of SecretKey.
struct PhysicalKey {
  detail::KeyBits bits;

  static PhysicalKey from_hex(const std::string& hex) { return {detail::key_from_hex(hex)}; }
  static PhysicalKey from_value(std::uint64_t v, int bit_length) {
    return {detail::key_from_value(v, bit_length)};
  }
  std::string to_hex() const { return detail::key_to_hex(bits); }
  std::uint64_t fingerprint(std::uint64_t tag) const;
};

/// Stateless keyed word stream with random access.
class Keystream {
 public:
  Keystream(std::uint64_t seed) : seed_(seed) {}
  Keystream(const SecretKey& k, std::uint64_t tag) : seed_(k.fingerprint(tag)) {}
  Keystream(const PhysicalKey& k, std::uint64_t tag) : seed_(k.fingerprint(tag)) {}

  std::uint64_t word(std::uint64_t index) const {
    return mix64(seed_ + (index + 1) * kGolden);
  }
  /// Maps a word to {0..bound−1} by the high-multiply method (bias < 2⁻⁴⁸
  /// for bound ≤ 2¹⁶).
  static std::uint32_t map_to_range(std::uint64_t word, std::uint32_t bound);
  /// [0, 1) with 53-bit resolution.
  static double to_unit_double(std::uint64_t word) {
    return static_cast<double>(word >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t seed_;
};

/// The keystream operation proper: `count` symbols uniform on {0..alphabet−1}.
std::vector<int> keystream_symbols(const SecretKey& key, int alphabet,
                                   std::size_t count);
std::vector<int> keystream_symbols(const PhysicalKey& key, int alphabet,
                                   std::size_t count);

// Sessions address at most kWordsPerSlot keystream words per slot, which
// bounds the alphabet: a permutation of M symbols consumes M−1 draws.
inline constexpr int kWordsPerSlot = 16;
inline constexpr int kMaxSessionAlphabet = 16;

/// Prior family plus the keyed frame-index sequence.
struct PriorSchedule {
  std::vector<PriorDistribution> family;  // Ω^(0..K−1)
  int frame_length = 64;

  void validate(int m) const;
  int frame_count_indices() const { return static_cast<int>(family.size()); }
  /// k for the given frame, drawn from the physical-key stream.
  int prior_index_for_frame(const PhysicalKey& key, std::uint64_t frame) const;
};

/// Per-slot permutation machinery shared by encryption and attacks.
class EncryptionBox {
 public:
  /// Throws std::invalid_argument when Q and any Ω^(k) are not permutations
  /// of the same weight multiset (tolerance 1e-9), or M > kMaxSessionAlphabet.
  EncryptionBox(RVector source_q, PriorSchedule schedule, SecretKey secret,
                PhysicalKey physical);

  int alphabet() const { return m_; }
  int frame_prior_index(std::uint64_t slot) const;
  const PriorDistribution& slot_prior(std::uint64_t slot) const;

  /// s = σ_t(τ_k(x)).
  int transmit_index(int x, std::uint64_t slot) const;
  /// x̂ = τ_k⁻¹(σ_t⁻¹(ŝ)).
  int recover_index(int s_hat, std::uint64_t slot) const;
  /// Lehmer rank of the full slot permutation (running-key record).
  std::uint64_t permutation_rank(std::uint64_t slot) const;

  const RVector& source_q() const { return q_; }
  const PriorSchedule& schedule() const { return schedule_; }

 private:
  void slot_permutation(std::uint64_t slot, int* perm) const;

  int m_;
  RVector q_;
  PriorSchedule schedule_;
  SecretKey secret_;
  PhysicalKey physical_;
  std::vector<std::vector<int>> relabel_;       // τ_k per prior index
  std::vector<std::vector<std::vector<int>>> stab_classes_;  // tie classes per k
};

/// Samples one outcome from row `s` of the conditional error matrix of
/// (measurement, states); deterministic given `seed`. Throws when the row is
/// not a probability vector within 1e-6.
int measure(int s, const Measurement& m, const StateVectors& states,
            std::uint64_t seed);

/// Inverse-CDF draw from a nonnegative row (renormalized exactly).
int sample_row(const RVector& row, double u);

enum class EveMode {
  kMinimax,        // prior unknown: minimax POVM on Eve's states
  kInformedBayes,  // control: Eve granted the frame prior, runs Bayes
};

struct SessionConfig {
  Constellation constellation;
  RVector source_q;
  PriorSchedule schedule;
  SecretKey secret_key;
  PhysicalKey physical_key;
  std::uint64_t seed = 0;       // measurement + plaintext sampling
  std::uint64_t length = 0;     // slots
  double t_bob = 1.0;           // transmittance to the legitimate receiver
  double t_eve = 1.0;           // transmittance at the tap
  EveMode eve_mode = EveMode::kMinimax;
  double solver_tol = kDefaultSolverTol;
  int threads = 1;

  void validate() const;
};

struct TranscriptSlot {
  std::uint64_t t = 0;
  int x = 0;       // plaintext symbol
  int k = 0;       // frame prior index
  int s = 0;       // transmitted state index
  int y_bob = 0;
  int y_eve = 0;
  std::uint64_t perm_rank = 0;  // running-key record (Lehmer rank of π_t)
};

struct Transcript {
  std::vector<TranscriptSlot> slots;

  std::size_t length() const { return slots.size(); }
};

/// Precomputed per-session machinery; exposed so metrics and attacks reuse
/// the same channels the simulator sampled from.
struct SessionChannels {
  StateVectors bob_states;
  StateVectors eve_states;
  std::vector<Measurement> bob_povm;   // per prior index
  std::vector<RMatrix> bob_channel;    // per prior index
  Measurement eve_povm;                // minimax mode
  std::vector<Measurement> eve_povm_informed;  // informed mode, per index
  std::vector<RMatrix> eve_channel;    // per prior index (constant in minimax mode)
  MinimaxSolution eve_minimax;         // populated in minimax mode
};

SessionChannels prepare_channels(const SessionConfig& cfg);

/// Runs the whole protocol; deterministic given config (keys + seed).
Transcript run_session(const SessionConfig& cfg);
Transcript run_session(const SessionConfig& cfg, const SessionChannels& ch);

/// Recomputes slot permutations from the provided keys and inverts them on
/// Bob's outcome stream. A wrong key yields scrambled output by design.
std::vector<int> decrypt(const Transcript& tr, const RVector& source_q,
                         const PriorSchedule& schedule, const SecretKey& secret,
                         const PhysicalKey& physical);

}  // namespace qsd
