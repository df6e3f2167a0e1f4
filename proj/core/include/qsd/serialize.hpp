#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "qsd/cipher.hpp"
#include "qsd/detection.hpp"
#include "qsd/metrics.hpp"
#include "qsd/states.hpp"

// JSON/TSV input and output. Field names are the repo schema; every emitted
// document carries its schema tag. JSON parsing is implemented in the .cpp
// so public headers stay dependency-free.

namespace qsd {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// {schema, label, M, mean_photon, theta, amplitudes: [{re, im}]}
std::string constellation_to_json(const Constellation& c);
Constellation constellation_from_json(const std::string& text);

Constellation load_constellation(const std::filesystem::path& path);
void save_constellation(const Constellation& c,
                        const std::filesystem::path& path);

/// Writes via a temp file + rename so partial output never lands at `path`.
void atomic_write_file(const std::filesystem::path& path,
                       const std::string& content);
std::string read_file(const std::filesystem::path& path);

// Command configs (parsed from JSON documents; see README for the schemas).
struct SolveConfig {
  Constellation constellation;
  PriorDistribution prior;
  CostMatrix cost;
  double tol = kDefaultSolverTol;
  int max_iter = kDefaultMaxIterations;
  double transmittance = 1.0;
};
SolveConfig solve_config_from_json(const std::string& text);

struct MinimaxConfig {
  Constellation constellation;
  CostMatrix cost;
  double tol = kDefaultSolverTol;
  double transmittance = 1.0;
  double saddle_grid_resolution = 1e-3;
  std::size_t max_grid_points = 2'000'000;
};
MinimaxConfig minimax_config_from_json(const std::string& text);

SessionConfig session_config_from_json(const std::string& text);

EtaSearchSpec eta_config_from_json(const std::string& text);

struct AttackConfig {
  SessionConfig session;   // generates the attacked transcript
  int key_bits = 8;
  std::size_t slots = 1000;  // slice length (prefix of the session)
};
AttackConfig attack_config_from_json(const std::string& text);

// Reports.
std::string solve_report_json(const SolveConfig& cfg, const BayesSolution& sol,
                              const BayesOptimalityReport& check,
                              const RMatrix& channel);
std::string minimax_report_json(const MinimaxConfig& cfg,
                                const MinimaxSolution& sol,
                                const MinimaxOptimalityReport& check,
                                const RMatrix& channel);
std::string session_report_json(const SessionConfig& cfg,
                                const Transcript& tr,
                                const SessionChannels& ch);
std::string eta_report_json(const EtaSearchSpec& spec,
                            const EtaSearchResult& result);
std::string attack_report_json(const AttackConfig& cfg,
                               const KeyAttackResult& result);

// Columnar text (TSV with `#`-prefixed header lines carrying the schema).
std::string transcript_to_tsv(const Transcript& tr);
Transcript transcript_from_tsv(const std::string& text);
std::string eta_surface_to_tsv(const EtaSearchResult& result);
std::string key_posterior_to_tsv(const KeyAttackResult& result);

}  // namespace qsd
