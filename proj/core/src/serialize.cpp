#include "qsd/serialize.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qsd/version.hpp"

namespace qsd {

using nlohmann::json;

namespace {

json amplitude_json(Amplitude a) {
  return json{{"re", a.real()}, {"im", a.imag()}};
}

Amplitude amplitude_from(const json& j) {
  if (!j.is_object() || !j.contains("re") || !j.contains("im"))
    throw ConfigError("amplitude must be an object {re, im}");
  return Amplitude(j.at("re").get<double>(), j.at("im").get<double>());
}

json parse(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw ConfigError(std::string("malformed JSON in ") + what);
  return j;
}

double get_number(const json& j, const char* key, double fallback,
                  bool required = false) {
  if (!j.contains(key)) {
    if (required) throw ConfigError(std::string("missing field: ") + key);
    return fallback;
  }
  if (!j.at(key).is_number())
    throw ConfigError(std::string("field must be a number: ") + key);
  return j.at(key).get<double>();
}

PriorDistribution prior_from(const json& j, int m) {
  if (j.is_string() && j.get<std::string>() == "uniform")
    return PriorDistribution::uniform(m);
  if (!j.is_array())
    throw ConfigError("prior must be \"uniform\" or an array of weights");
  RVector w(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) w[i] = j[i].get<double>();
  PriorDistribution p{std::move(w)};
  p.validate();
  if (m > 0 && p.size() != m) throw ConfigError("prior size != M");
  return p;
}

CostMatrix cost_from(const json& j, int m) {
  if (j.is_string() && j.get<std::string>() == "error")
    return CostMatrix::zero_one(m);
  if (!j.is_array()) throw ConfigError("cost must be \"error\" or a matrix");
  const int rows = static_cast<int>(j.size());
  if (rows != m) throw ConfigError("cost matrix must be M×M");
  RMatrix c(m, m);
  for (int r = 0; r < m; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != m)
      throw ConfigError("cost matrix must be M×M");
    for (int i = 0; i < m; ++i) c(r, i) = j[r][i].get<double>();
  }
  if (!c.allFinite()) throw ConfigError("cost entries must be finite");
  return CostMatrix{std::move(c)};
}

json vector_json(const RVector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json matrix_json(const RMatrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

json povm_json(const Measurement& m) {
  json ops = json::array();
  for (const auto& op : m.operators) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < op.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < op.cols(); ++c)
        row.push_back(amplitude_json(op(r, c)));
      rows.push_back(row);
    }
    ops.push_back(rows);
  }
  return ops;
}

void format_double(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

std::string constellation_to_json(const Constellation& c) {
  json j;
  j["schema"] = kSchemaConstellation;
  j["label"] = c.label;
  j["M"] = c.size();
  j["mean_photon"] = c.mean_photon;
  j["theta"] = c.theta;
  json amps = json::array();
  for (auto a : c.amplitudes) amps.push_back(amplitude_json(a));
  j["amplitudes"] = amps;
  return j.dump(2);
}

namespace {

Constellation constellation_from(const json& j) {
  if (!j.is_object()) throw ConfigError("constellation must be an object");
  const std::string label = j.value("label", std::string("custom"));
  if (j.contains("amplitudes")) {
    // Stored amplitudes are authoritative; parameters are metadata.
    std::vector<Amplitude> amps;
    for (const auto& a : j.at("amplitudes")) amps.push_back(amplitude_from(a));
    Constellation c = custom_constellation(std::move(amps));
    c.label = label;
    c.theta = get_number(j, "theta", 0.0);
    return c;
  }
  const int m = static_cast<int>(get_number(j, "M", 0, true));
  const double mean_photon = get_number(j, "mean_photon", 0.0, true);
  const double theta = get_number(j, "theta", 0.0);
  return build_constellation(label, m, mean_photon, theta);
}

}  // namespace

Constellation constellation_from_json(const std::string& text) {
  try {
    return constellation_from(parse(text, "constellation"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Constellation load_constellation(const std::filesystem::path& path) {
  return constellation_from_json(read_file(path));
}

void save_constellation(const Constellation& c,
                        const std::filesystem::path& path) {
  atomic_write_file(path, constellation_to_json(c) + "\n");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure: " + path.string());
  return ss.str();
}

void atomic_write_file(const std::filesystem::path& path,
                       const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create file: " + tmp.string());
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failure: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename failure: " + path.string() + ": " + ec.message());
}

namespace {

Constellation constellation_field(const json& j) {
  if (!j.contains("constellation"))
    throw ConfigError("missing field: constellation");
  const auto& c = j.at("constellation");
  if (c.is_string()) {
    try {
      return load_constellation(c.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  try {
    return constellation_from(c);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

SolveConfig solve_config_from_json(const std::string& text) {
  const json j = parse(text, "solve config");
  SolveConfig cfg;
  cfg.constellation = constellation_field(j);
  const int m = cfg.constellation.size();
  cfg.prior = j.contains("prior") ? prior_from(j.at("prior"), m)
                                  : PriorDistribution::uniform(m);
  cfg.cost = j.contains("cost") ? cost_from(j.at("cost"), m)
                                : CostMatrix::zero_one(m);
  cfg.tol = get_number(j, "tol", kDefaultSolverTol);
  cfg.max_iter = static_cast<int>(get_number(j, "max_iter", kDefaultMaxIterations));
  cfg.transmittance = get_number(j, "transmittance", 1.0);
  if (!(cfg.tol > 0.0)) throw ConfigError("tol must be > 0");
  return cfg;
}

MinimaxConfig minimax_config_from_json(const std::string& text) {
  const json j = parse(text, "minimax config");
  MinimaxConfig cfg;
  cfg.constellation = constellation_field(j);
  const int m = cfg.constellation.size();
  cfg.cost = j.contains("cost") ? cost_from(j.at("cost"), m)
                                : CostMatrix::zero_one(m);
  cfg.tol = get_number(j, "tol", kDefaultSolverTol);
  cfg.transmittance = get_number(j, "transmittance", 1.0);
  cfg.saddle_grid_resolution = get_number(j, "saddle_grid_resolution", 1e-3);
  cfg.max_grid_points = static_cast<std::size_t>(
      get_number(j, "max_grid_points", 2'000'000));
  if (!(cfg.tol > 0.0)) throw ConfigError("tol must be > 0");
  return cfg;
}

SessionConfig session_config_from_json(const std::string& text) {
  const json j = parse(text, "session config");
  SessionConfig cfg;
  cfg.constellation = constellation_field(j);
  const int m = cfg.constellation.size();
  if (!j.contains("source_q")) throw ConfigError("missing field: source_q");
  cfg.source_q = prior_from(j.at("source_q"), m).weights;
  if (!j.contains("prior_family") || !j.at("prior_family").is_array() ||
      j.at("prior_family").empty())
    throw ConfigError("prior_family must be a nonempty array of priors");
  for (const auto& p : j.at("prior_family"))
    cfg.schedule.family.push_back(prior_from(p, m));
  cfg.schedule.frame_length =
      static_cast<int>(get_number(j, "frame_length", 64));
  if (!j.contains("session_length"))
    throw ConfigError("missing field: session_length");
  cfg.length = j.at("session_length").get<std::uint64_t>();
  if (!j.contains("secret_key") || !j.at("secret_key").is_string())
    throw ConfigError("missing field: secret_key (hex string)");
  if (!j.contains("physical_key") || !j.at("physical_key").is_string())
    throw ConfigError("missing field: physical_key (hex string)");
  try {
    cfg.secret_key = SecretKey::from_hex(j.at("secret_key").get<std::string>());
    cfg.physical_key =
        PhysicalKey::from_hex(j.at("physical_key").get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!j.contains("seed"))
    throw ConfigError("missing field: seed (runs must be reproducible)");
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.t_bob = get_number(j, "t_bob", 1.0);
  cfg.t_eve = get_number(j, "t_eve", 1.0);
  const std::string mode = j.value("eve_mode", std::string("minimax"));
  if (mode == "minimax") {
    cfg.eve_mode = EveMode::kMinimax;
  } else if (mode == "informed-bayes") {
    cfg.eve_mode = EveMode::kInformedBayes;
  } else {
    throw ConfigError("eve_mode must be \"minimax\" or \"informed-bayes\"");
  }
  cfg.solver_tol = get_number(j, "tol", kDefaultSolverTol);
  cfg.threads = static_cast<int>(get_number(j, "threads", 1));
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

EtaSearchSpec eta_config_from_json(const std::string& text) {
  const json j = parse(text, "eta config");
  EtaSearchSpec spec;
  spec.label = j.value("label", std::string("psk"));
  spec.m = static_cast<int>(get_number(j, "M", 3));
  spec.mean_photon = get_number(j, "mean_photon", 1.0);
  if (j.contains("thetas")) {
    for (const auto& t : j.at("thetas")) spec.thetas.push_back(t.get<double>());
  }
  spec.budget = static_cast<std::size_t>(get_number(j, "budget", 1001, true));
  spec.refine_rounds = static_cast<int>(get_number(j, "refine_rounds", 0));
  if (!j.contains("seed"))
    throw ConfigError("missing field: seed (runs must be reproducible)");
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.tol = get_number(j, "tol", kDefaultSolverTol);
  spec.threads = static_cast<int>(get_number(j, "threads", 1));
  return spec;
}

AttackConfig attack_config_from_json(const std::string& text) {
  const json j = parse(text, "attack config");
  if (!j.contains("session")) throw ConfigError("missing field: session");
  AttackConfig cfg;
  cfg.session = session_config_from_json(j.at("session").dump());
  cfg.key_bits = static_cast<int>(get_number(j, "key_bits", 8));
  cfg.slots = static_cast<std::size_t>(get_number(j, "slots", 1000, true));
  if (cfg.key_bits < 1 || cfg.key_bits > 20)
    throw ConfigError("key_bits must be in [1,20]");
  if (cfg.session.eve_mode != EveMode::kMinimax)
    throw ConfigError(
        "attack requires eve_mode \"minimax\" (the likelihood model uses one "
        "prior-independent receiver channel)");
  if (cfg.session.secret_key.bits.bit_length != cfg.key_bits)
    throw ConfigError(
        "the session's secret_key length must equal key_bits so the true key "
        "lies in the searched space");
  if (cfg.slots > cfg.session.length)
    throw ConfigError("slots exceeds session_length");
  return cfg;
}

namespace {

json bayes_check_json(const BayesOptimalityReport& check) {
  json out;
  out["overall"] = check.overall;
  out["gamma_asymmetry"] = check.gamma_asymmetry;
  out["gamma_commutation"] = check.gamma_commutation;
  out["pairwise"] = check.pairwise;
  out["lambda_min"] = check.lambda_min;
  return out;
}

}  // namespace

std::string solve_report_json(const SolveConfig& cfg, const BayesSolution& sol,
                              const BayesOptimalityReport& check,
                              const RMatrix& channel) {
  json j;
  j["schema"] = kSchemaSolveReport;
  j["constellation"] = parse(constellation_to_json(cfg.constellation), "echo");
  j["prior"] = vector_json(cfg.prior.weights);
  j["transmittance"] = cfg.transmittance;
  j["tol"] = cfg.tol;
  j["error_probability"] = sol.error_probability;
  j["bayes_risk"] = sol.bayes_risk;
  j["optimality_residual"] = sol.optimality_residual;
  j["iterations"] = sol.iterations;
  j["converged"] = sol.converged;
  j["completeness_residual"] = sol.measurement.completeness_residual;
  j["positivity_residual"] = sol.measurement.positivity_residual;
  j["optimality_check"] = bayes_check_json(check);
  j["conditional_error_matrix"] = matrix_json(channel);
  j["povm"] = povm_json(sol.measurement);
  return j.dump(2);
}

std::string minimax_report_json(const MinimaxConfig& cfg,
                                const MinimaxSolution& sol,
                                const MinimaxOptimalityReport& check,
                                const RMatrix& channel) {
  json j;
  j["schema"] = kSchemaMinimaxReport;
  j["constellation"] = parse(constellation_to_json(cfg.constellation), "echo");
  j["transmittance"] = cfg.transmittance;
  j["tol"] = cfg.tol;
  j["worst_prior"] = vector_json(sol.worst_prior.weights);
  j["value"] = sol.value;
  j["equal_error_spread"] = sol.equal_error_spread;
  j["converged"] = sol.converged;
  j["outer_iterations"] = sol.outer_iterations;
  json chk;
  chk["equal_error_spread"] = check.equal_error_spread;
  chk["full_spread"] = check.full_spread;
  chk["off_support_slack"] = check.off_support_slack;
  chk["vertex_gap"] = check.vertex_gap;
  chk["grid_gap"] = check.grid_gap;
  chk["grid_resolution"] = check.grid_resolution;
  chk["grid_points"] = check.grid_points;
  chk["bayes_at_worst"] = bayes_check_json(check.bayes_at_worst);
  j["optimality_check"] = chk;
  j["conditional_error_matrix"] = matrix_json(channel);
  j["povm"] = povm_json(sol.measurement);
  return j.dump(2);
}

std::string session_report_json(const SessionConfig& cfg, const Transcript& tr,
                                const SessionChannels& ch) {
  const int m = cfg.constellation.size();
  const std::size_t n = tr.length();
  std::vector<std::uint64_t> frame_counts(cfg.schedule.family.size(), 0);
  std::uint64_t bob_err = 0, eve_err = 0, hamming = 0;
  for (const auto& slot : tr.slots) {
    frame_counts[slot.k] += 1;
    if (slot.y_bob != slot.s) ++bob_err;
    if (slot.y_eve != slot.s) ++eve_err;
    if (slot.y_bob != slot.y_eve) ++hamming;
  }

  // Channel-matrix predictions weighted by the realized frame composition.
  double pred_bob = 0.0, pred_eve = 0.0;
  for (std::size_t k = 0; k < frame_counts.size(); ++k) {
    if (frame_counts[k] == 0) continue;
    const double w = static_cast<double>(frame_counts[k]) / std::max<std::size_t>(n, 1);
    const RVector& prior = cfg.schedule.family[k].weights;
    double bob_ok = 0.0, eve_ok = 0.0;
    for (int s = 0; s < m; ++s) {
      bob_ok += prior[s] * ch.bob_channel[k](s, s);
      eve_ok += prior[s] * ch.eve_channel[k](s, s);
    }
    pred_bob += w * (1.0 - bob_ok);
    pred_eve += w * (1.0 - eve_ok);
  }

  const std::vector<int> decoded =
      decrypt(tr, cfg.source_q, cfg.schedule, cfg.secret_key, cfg.physical_key);
  std::uint64_t plain_err = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (decoded[i] != tr.slots[i].x) ++plain_err;
  }

  json j;
  j["schema"] = kSchemaSessionReport;
  j["constellation"] = parse(constellation_to_json(cfg.constellation), "echo");
  j["M"] = m;
  j["session_length"] = n;
  j["frame_length"] = cfg.schedule.frame_length;
  j["eve_mode"] =
      cfg.eve_mode == EveMode::kMinimax ? "minimax" : "informed-bayes";
  j["seed"] = cfg.seed;
  j["t_bob"] = cfg.t_bob;
  j["t_eve"] = cfg.t_eve;
  j["frame_counts"] = frame_counts;
  j["bob_symbol_errors"] = bob_err;
  j["eve_symbol_errors"] = eve_err;
  j["bob_error_rate"] = n ? static_cast<double>(bob_err) / n : 0.0;
  j["eve_error_rate"] = n ? static_cast<double>(eve_err) / n : 0.0;
  j["predicted_bob_error_rate"] = pred_bob;
  j["predicted_eve_error_rate"] = pred_eve;
  j["plaintext_symbol_errors"] = plain_err;
  j["plaintext_error_rate"] = n ? static_cast<double>(plain_err) / n : 0.0;
  j["hamming_distance_yb_ye"] = hamming;
  if (cfg.eve_mode == EveMode::kMinimax) {
    j["eve_minimax_value"] = ch.eve_minimax.value;
    j["eve_minimax_worst_prior"] =
        vector_json(ch.eve_minimax.worst_prior.weights);
  }
  return j.dump(2);
}

std::string eta_report_json(const EtaSearchSpec& spec,
                            const EtaSearchResult& result) {
  json j;
  j["schema"] = kSchemaEtaReport;
  j["label"] = spec.label;
  j["M"] = spec.m;
  j["mean_photon"] = spec.mean_photon;
  j["thetas"] = spec.thetas;
  j["budget"] = spec.budget;
  j["refine_rounds"] = spec.refine_rounds;
  j["seed"] = spec.seed;
  j["evaluations"] = result.evaluations;
  j["best_ratio"] = result.best.ratio;
  j["best_prior"] = vector_json(result.best.prior.weights);
  j["best_theta"] = result.best.theta;
  j["best_pe_bayes"] = result.best.pe_bayes;
  j["best_pe_minimax"] = result.best.pe_minimax;
  return j.dump(2);
}

std::string attack_report_json(const AttackConfig& cfg,
                               const KeyAttackResult& result) {
  json j;
  j["schema"] = kSchemaAttackReport;
  j["key_bits"] = cfg.key_bits;
  j["slots"] = result.slots_used;
  j["guessing_probability"] = result.guessing_probability;
  j["map_key"] = result.map_key;
  j["true_key"] = cfg.session.secret_key.to_hex();
  j["posterior_entropy_bits"] = result.entropy_bits;
  return j.dump(2);
}

std::string transcript_to_tsv(const Transcript& tr) {
  std::string out;
  out.reserve(tr.slots.size() * 16 + 64);
  out += "# schema: ";
  out += kSchemaTranscript;
  out += "\n# columns: t\tx\tk\ts\ty_B\ty_E\n";
  char buf[128];
  for (const auto& s : tr.slots) {
    std::snprintf(buf, sizeof(buf), "%" PRIu64 "\t%d\t%d\t%d\t%d\t%d\n",
                  static_cast<std::uint64_t>(s.t), s.x, s.k, s.s, s.y_bob,
                  s.y_eve);
    out += buf;
  }
  return out;
}

Transcript transcript_from_tsv(const std::string& text) {
  Transcript tr;
  std::istringstream in(text);
  std::string line;
  bool schema_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find(kSchemaTranscript) != std::string::npos)
        schema_seen = true;
      continue;
    }
    TranscriptSlot s;
    std::uint64_t t = 0;
    if (std::sscanf(line.c_str(), "%" SCNu64 "\t%d\t%d\t%d\t%d\t%d", &t, &s.x,
                    &s.k, &s.s, &s.y_bob, &s.y_eve) != 6)
      throw ConfigError("transcript: malformed row: " + line);
    s.t = t;
    tr.slots.push_back(s);
  }
  if (!schema_seen) throw ConfigError("transcript: missing schema header");
  return tr;
}

std::string eta_surface_to_tsv(const EtaSearchResult& result) {
  std::string out = "# schema: ";
  out += kSchemaEtaSurface;
  out += "\n# columns: theta\tprior...\tpe_bayes\tpe_minimax\tratio\n";
  for (const auto& row : result.surface) {
    format_double(out, row.theta);
    for (double p : row.prior) {
      out += '\t';
      format_double(out, p);
    }
    out += '\t';
    format_double(out, row.pe_bayes);
    out += '\t';
    format_double(out, row.pe_minimax);
    out += '\t';
    format_double(out, row.ratio);
    out += '\n';
  }
  return out;
}

std::string key_posterior_to_tsv(const KeyAttackResult& result) {
  std::string out = "# schema: ";
  out += kSchemaKeyPosterior;
  out += "\n# columns: key\tposterior\n";
  char buf[64];
  for (std::size_t k = 0; k < result.posterior.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%zu\t", k);
    out += buf;
    format_double(out, result.posterior[k]);
    out += '\n';
  }
  return out;
}

}  // namespace qsd
