#include "qsd/cipher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qsd {

namespace detail {

namespace {
int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  throw std::invalid_argument(std::string("invalid hex digit: ") + c);
}
}  // namespace

KeyBits key_from_hex(const std::string& hex) {
  if (hex.empty()) throw std::invalid_argument("key: empty hex string");
  KeyBits k;
  k.bit_length = static_cast<int>(hex.size()) * 4;
  std::string padded = hex;
  if (padded.size() % 2 != 0) padded.insert(padded.begin(), '0');
  k.bytes.reserve(padded.size() / 2);
  for (std::size_t i = 0; i < padded.size(); i += 2) {
    k.bytes.push_back(static_cast<std::uint8_t>(hex_digit(padded[i]) * 16 +
                                                hex_digit(padded[i + 1])));
  }
  return k;
}

KeyBits key_from_value(std::uint64_t value, int bit_length) {
  if (bit_length < 1 || bit_length > 64)
    throw std::invalid_argument("key: bit_length must be in [1,64]");
  if (bit_length < 64 && (value >> bit_length) != 0)
    throw std::invalid_argument("key: value does not fit in bit_length");
  KeyBits k;
  k.bit_length = bit_length;
  const int nbytes = (bit_length + 7) / 8;
  k.bytes.resize(nbytes);
  for (int i = 0; i < nbytes; ++i) {
    k.bytes[nbytes - 1 - i] = static_cast<std::uint8_t>(value >> (8 * i));
  }
  return k;
}

std::string key_to_hex(const KeyBits& k) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(k.bytes.size() * 2);
  for (auto b : k.bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xF]);
  }
  return out;
}

}  // namespace detail

std::uint64_t key_fingerprint(std::span<const std::uint8_t> bytes,
                              int bit_length, std::uint64_t domain) {
  std::uint64_t h = mix64(domain + kGolden);
  for (auto b : bytes) h = mix64((h + kGolden) ^ b);
  return mix64((h + kGolden) ^ static_cast<std::uint64_t>(bit_length));
}

std::uint64_t SecretKey::fingerprint(std::uint64_t tag) const {
  return key_fingerprint(bits.bytes, bits.bit_length, tag);
}

std::uint64_t PhysicalKey::fingerprint(std::uint64_t tag) const {
  return key_fingerprint(bits.bytes, bits.bit_length, tag);
}

std::uint32_t Keystream::map_to_range(std::uint64_t word, std::uint32_t bound) {
  if (bound == 0) throw std::invalid_argument("map_to_range: bound = 0");
  return static_cast<std::uint32_t>(
      (static_cast<unsigned __int128>(word) * bound) >> 64);
}

namespace {
std::vector<int> stream_symbols(const Keystream& ks, int alphabet,
                                std::size_t count) {
  if (alphabet < 1)
    throw std::invalid_argument("keystream: alphabet must be >= 1");
  std::vector<int> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = static_cast<int>(Keystream::map_to_range(
        ks.word(i), static_cast<std::uint32_t>(alphabet)));
  }
  return out;
}
}  // namespace

std::vector<int> keystream_symbols(const SecretKey& key, int alphabet,
                                   std::size_t count) {
  return stream_symbols(Keystream(key, kTagSymbols), alphabet, count);
}

std::vector<int> keystream_symbols(const PhysicalKey& key, int alphabet,
                                   std::size_t count) {
  return stream_symbols(Keystream(key, kTagSymbols), alphabet, count);
}

void PriorSchedule::validate(int m) const {
  if (family.empty())
    throw std::invalid_argument("prior schedule: empty family");
  if (frame_length < 1)
    throw std::invalid_argument("prior schedule: frame_length must be >= 1");
  for (const auto& p : family) {
    p.validate();
    if (p.size() != m)
      throw std::invalid_argument("prior schedule: prior size != M");
  }
}

int PriorSchedule::prior_index_for_frame(const PhysicalKey& key,
                                         std::uint64_t frame) const {
  const Keystream ks(key, kTagFramePrior);
  return static_cast<int>(Keystream::map_to_range(
      ks.word(frame), static_cast<std::uint32_t>(family.size())));
}

namespace {

constexpr double kWeightTieTol = 1e-9;

// Indices sorted by (weight desc, index asc).
std::vector<int> sorted_by_weight(const RVector& w) {
  std::vector<int> idx(w.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return w[a] > w[b]; });
  return idx;
}

}  // namespace

EncryptionBox::EncryptionBox(RVector source_q, PriorSchedule schedule,
                             SecretKey secret, PhysicalKey physical)
    : m_(static_cast<int>(source_q.size())),
      q_(std::move(source_q)),
      schedule_(std::move(schedule)),
      secret_(std::move(secret)),
      physical_(std::move(physical)) {
  if (m_ < 1 || m_ > kMaxSessionAlphabet)
    throw std::invalid_argument("encryption box: alphabet must be 1..16");
  PriorDistribution{q_}.validate();
  schedule_.validate(m_);

  const auto q_sorted = sorted_by_weight(q_);
  relabel_.reserve(schedule_.family.size());
  stab_classes_.reserve(schedule_.family.size());
  for (const auto& omega : schedule_.family) {
    const auto o_sorted = sorted_by_weight(omega.weights);
    // The per-slot map must be a bijection carrying Q onto Ω, so their
    // weight multisets must agree.
    std::vector<int> tau(m_);
    for (int r = 0; r < m_; ++r) {
      if (std::abs(q_[q_sorted[r]] - omega.weights[o_sorted[r]]) >
          kWeightTieTol) {
        throw std::invalid_argument(
            "encryption box: every frame prior must be a permutation of the "
            "source distribution's weights");
      }
      tau[q_sorted[r]] = o_sorted[r];
    }
    relabel_.push_back(std::move(tau));

    // Tie classes of Ω: blocks of equal weight, each shuffled per slot by
    // the secret keystream. Members ascend so draws are reproducible.
    std::vector<std::vector<int>> classes;
    int pos = 0;
    while (pos < m_) {
      const double rep = omega.weights[o_sorted[pos]];
      std::vector<int> cls;
      while (pos < m_ &&
             std::abs(omega.weights[o_sorted[pos]] - rep) <= kWeightTieTol) {
        cls.push_back(o_sorted[pos]);
        ++pos;
      }
      std::sort(cls.begin(), cls.end());
      classes.push_back(std::move(cls));
    }
    stab_classes_.push_back(std::move(classes));
  }
}

int EncryptionBox::frame_prior_index(std::uint64_t slot) const {
  const std::uint64_t frame = slot / schedule_.frame_length;
  return schedule_.prior_index_for_frame(physical_, frame);
}

const PriorDistribution& EncryptionBox::slot_prior(std::uint64_t slot) const {
  return schedule_.family[frame_prior_index(slot)];
}

void EncryptionBox::slot_permutation(std::uint64_t slot, int* perm) const {
  const int k = frame_prior_index(slot);
  const auto& tau = relabel_[k];
  // σ_t: Fisher-Yates inside each tie class, words addressed per slot.
  const Keystream ks(secret_, kTagSlotPerm);
  std::uint64_t widx = slot * kWordsPerSlot;
  int sigma[kMaxSessionAlphabet];
  std::iota(sigma, sigma + m_, 0);
  for (const auto& cls : stab_classes_[k]) {
    const int n = static_cast<int>(cls.size());
    if (n < 2) continue;
    int local[kMaxSessionAlphabet];
    for (int i = 0; i < n; ++i) local[i] = cls[i];
    for (int i = n - 1; i >= 1; --i) {
      const int j = static_cast<int>(Keystream::map_to_range(
          ks.word(widx++), static_cast<std::uint32_t>(i + 1)));
      std::swap(local[i], local[j]);
    }
    for (int i = 0; i < n; ++i) sigma[cls[i]] = local[i];
  }
  for (int x = 0; x < m_; ++x) perm[x] = sigma[tau[x]];
}

int EncryptionBox::transmit_index(int x, std::uint64_t slot) const {
  if (x < 0 || x >= m_)
    throw std::invalid_argument("encrypt: symbol out of range");
  int perm[kMaxSessionAlphabet];
  slot_permutation(slot, perm);
  return perm[x];
}

int EncryptionBox::recover_index(int s_hat, std::uint64_t slot) const {
  if (s_hat < 0 || s_hat >= m_)
    throw std::invalid_argument("decrypt: symbol out of range");
  int perm[kMaxSessionAlphabet];
  slot_permutation(slot, perm);
  for (int x = 0; x < m_; ++x) {
    if (perm[x] == s_hat) return x;
  }
  throw std::logic_error("decrypt: slot permutation is not a bijection");
}

std::uint64_t EncryptionBox::permutation_rank(std::uint64_t slot) const {
  int perm[kMaxSessionAlphabet];
  slot_permutation(slot, perm);
  // Lehmer code; fits a u64 for M ≤ 16.
  std::uint64_t rank = 0;
  for (int i = 0; i < m_; ++i) {
    int smaller = 0;
    for (int j = i + 1; j < m_; ++j)
      if (perm[j] < perm[i]) ++smaller;
    rank = rank * (m_ - i) + smaller;
  }
  return rank;
}

int sample_row(const RVector& row, double u) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < row.size(); ++i)
    total += std::max(row[i], 0.0);
  if (total <= 0.0)
    throw std::invalid_argument("sample_row: row has no mass");
  double cum = 0.0;
  int last_positive = 0;
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    const double p = std::max(row[i], 0.0);
    if (p > 0.0) last_positive = static_cast<int>(i);
    cum += p / total;
    if (u < cum) return static_cast<int>(i);
  }
  return last_positive;
}

int measure(int s, const Measurement& m, const StateVectors& states,
            std::uint64_t seed) {
  const RMatrix channel = conditional_error_matrix(m, states);
  if (s < 0 || s >= channel.rows())
    throw std::invalid_argument("measure: state index out of range");
  const RVector row = channel.row(s);
  if (std::abs(row.sum() - 1.0) > 1e-6)
    throw std::invalid_argument("measure: outcome row not normalized");
  const Keystream ks(seed);
  return sample_row(row, Keystream::to_unit_double(ks.word(0)));
}

void SessionConfig::validate() const {
  const int m = constellation.size();
  if (m < 1 || m > kMaxSessionAlphabet)
    throw std::invalid_argument("session: alphabet must be 1..16");
  if (static_cast<int>(source_q.size()) != m)
    throw std::invalid_argument("session: source distribution size != M");
  PriorDistribution{source_q}.validate();
  schedule.validate(m);
  if (!(t_bob >= 0.0 && t_bob <= 1.0) || !(t_eve >= 0.0 && t_eve <= 1.0))
    throw std::invalid_argument("session: transmittance must be in [0,1]");
  if (!(solver_tol > 0.0))
    throw std::invalid_argument("session: solver_tol must be > 0");
}

namespace {

RMatrix sampling_rows(const Measurement& m, const StateVectors& states) {
  RMatrix rows = conditional_error_matrix(m, states);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      rows(i, j) = std::max(rows(i, j), 0.0);
      total += rows(i, j);
    }
    if (std::abs(total - 1.0) > 1e-6)
      throw std::invalid_argument("session: channel row not normalized");
    rows.row(i) /= total;
  }
  return rows;
}

}  // namespace

SessionChannels prepare_channels(const SessionConfig& cfg) {
  cfg.validate();
  SessionChannels ch;
  ch.bob_states = embed_states(gram_matrix(apply_loss(cfg.constellation, cfg.t_bob)));
  ch.eve_states = embed_states(gram_matrix(apply_loss(cfg.constellation, cfg.t_eve)));

  const auto& family = cfg.schedule.family;
  ch.bob_povm.reserve(family.size());
  ch.bob_channel.reserve(family.size());
  const CostMatrix cost = CostMatrix::zero_one(cfg.constellation.size());
  for (const auto& prior : family) {
    DetectionProblem p{ch.bob_states, prior, cost};
    BayesSolution sol = bayes_solve(p, cfg.solver_tol);
    if (!sol.converged)
      throw std::runtime_error("session: Bayes solver did not converge");
    ch.bob_channel.push_back(sampling_rows(sol.measurement, ch.bob_states));
    ch.bob_povm.push_back(std::move(sol.measurement));
  }

  if (cfg.eve_mode == EveMode::kMinimax) {
    ch.eve_minimax = minimax_solve(ch.eve_states, cost, cfg.solver_tol);
    if (!ch.eve_minimax.converged)
      throw std::runtime_error("session: minimax solver did not converge");
    ch.eve_povm = ch.eve_minimax.measurement;
    const RMatrix rows = sampling_rows(ch.eve_povm, ch.eve_states);
    ch.eve_channel.assign(family.size(), rows);
  } else {
    ch.eve_povm_informed.reserve(family.size());
    for (const auto& prior : family) {
      DetectionProblem p{ch.eve_states, prior, cost};
      BayesSolution sol = bayes_solve(p, cfg.solver_tol);
      if (!sol.converged)
        throw std::runtime_error("session: Bayes solver did not converge");
      ch.eve_channel.push_back(sampling_rows(sol.measurement, ch.eve_states));
      ch.eve_povm_informed.push_back(std::move(sol.measurement));
    }
  }
  return ch;
}

Transcript run_session(const SessionConfig& cfg) {
  return run_session(cfg, prepare_channels(cfg));
}

Transcript run_session(const SessionConfig& cfg, const SessionChannels& ch) {
  cfg.validate();
  const EncryptionBox box(cfg.source_q, cfg.schedule, cfg.secret_key,
                          cfg.physical_key);
  const Keystream plain(mix64(cfg.seed ^ kTagPlaintext));
  const Keystream bob_noise(mix64(cfg.seed ^ kTagBobNoise));
  const Keystream eve_noise(mix64(cfg.seed ^ kTagEveNoise));
  const RVector q = cfg.source_q;

  Transcript tr;
  tr.slots.resize(cfg.length);
  parallel_for(cfg.length, cfg.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      TranscriptSlot slot;
      slot.t = t;
      slot.x = sample_row(q, Keystream::to_unit_double(plain.word(t)));
      slot.k = box.frame_prior_index(t);
      slot.s = box.transmit_index(slot.x, t);
      slot.perm_rank = box.permutation_rank(t);
      slot.y_bob = sample_row(ch.bob_channel[slot.k].row(slot.s),
                              Keystream::to_unit_double(bob_noise.word(t)));
      slot.y_eve = sample_row(ch.eve_channel[slot.k].row(slot.s),
                              Keystream::to_unit_double(eve_noise.word(t)));
      tr.slots[t] = slot;
    }
  });
  return tr;
}

std::vector<int> decrypt(const Transcript& tr, const RVector& source_q,
                         const PriorSchedule& schedule, const SecretKey& secret,
                         const PhysicalKey& physical) {
  const EncryptionBox box(source_q, schedule, secret, physical);
  std::vector<int> out;
  out.reserve(tr.slots.size());
  for (const auto& slot : tr.slots) {
    out.push_back(box.recover_index(slot.y_bob, slot.t));
  }
  return out;
}

}  // namespace qsd
