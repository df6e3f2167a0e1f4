// qsd — batch experiment driver.
//
// Subcommands: solve, minimax, simulate, eta-sweep, attack. Every run is
// fully determined by the config file plus explicit seeds; outputs are
// written atomically so a failed run leaves no partial files.
//
// Exit codes: 0 success, 2 config error, 3 solver non-convergence,
// 4 I/O error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qsd/serialize.hpp"
#include "qsd/version.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed_override;
  int threads = 1;
};

fs::path resolve_out_dir(const CommonArgs& args) {
  if (!args.out_dir.empty()) return args.out_dir;
  if (const char* env = std::getenv("QSD_OUT_DIR"); env != nullptr && *env)
    return env;
  return ".";
}

fs::path prepare_out_dir(const CommonArgs& args) {
  const fs::path dir = resolve_out_dir(args);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw qsd::IoError("cannot create output directory: " + dir.string());
  return dir;
}

std::string load_config(const CommonArgs& args) {
  return qsd::read_file(args.config_path);
}

int run_solve(const CommonArgs& args) {
  qsd::SolveConfig cfg = qsd::solve_config_from_json(load_config(args));
  const fs::path dir = prepare_out_dir(args);

  const qsd::Constellation lossy =
      qsd::apply_loss(cfg.constellation, cfg.transmittance);
  const qsd::StateVectors states =
      qsd::embed_states(qsd::gram_matrix(lossy));
  qsd::DetectionProblem problem{states, cfg.prior, cfg.cost};
  const qsd::BayesSolution sol =
      qsd::bayes_solve(problem, cfg.tol, cfg.max_iter);
  const qsd::BayesOptimalityReport check =
      qsd::check_bayes_optimality(sol.measurement, problem);
  const qsd::RMatrix channel =
      qsd::conditional_error_matrix(sol.measurement, states);

  qsd::atomic_write_file(dir / "solve_report.json",
                         qsd::solve_report_json(cfg, sol, check, channel) + "\n");
  std::cout << "solve: error_probability=" << sol.error_probability
            << " residual=" << sol.optimality_residual
            << " converged=" << (sol.converged ? "yes" : "no") << "\n";
  return sol.converged ? kExitOk : kExitNoConvergence;
}

int run_minimax(const CommonArgs& args) {
  qsd::MinimaxConfig cfg = qsd::minimax_config_from_json(load_config(args));
  const fs::path dir = prepare_out_dir(args);

  const qsd::Constellation lossy =
      qsd::apply_loss(cfg.constellation, cfg.transmittance);
  const qsd::StateVectors states =
      qsd::embed_states(qsd::gram_matrix(lossy));
  const qsd::MinimaxSolution sol =
      qsd::minimax_solve(states, cfg.cost, cfg.tol);
  const qsd::MinimaxOptimalityReport check = qsd::check_minimax_optimality(
      sol, states, cfg.cost, cfg.saddle_grid_resolution, cfg.max_grid_points,
      args.threads);
  const qsd::RMatrix channel =
      qsd::conditional_error_matrix(sol.measurement, states);

  qsd::atomic_write_file(
      dir / "minimax_report.json",
      qsd::minimax_report_json(cfg, sol, check, channel) + "\n");
  std::cout << "minimax: value=" << sol.value
            << " spread=" << sol.equal_error_spread
            << " converged=" << (sol.converged ? "yes" : "no") << "\n";
  return sol.converged ? kExitOk : kExitNoConvergence;
}

int run_simulate(const CommonArgs& args) {
  qsd::SessionConfig cfg = qsd::session_config_from_json(load_config(args));
  if (args.seed_override) cfg.seed = *args.seed_override;
  cfg.threads = args.threads;
  const fs::path dir = prepare_out_dir(args);

  const qsd::SessionChannels channels = qsd::prepare_channels(cfg);
  const qsd::Transcript tr = qsd::run_session(cfg, channels);

  qsd::atomic_write_file(dir / "transcript.tsv", qsd::transcript_to_tsv(tr));
  qsd::atomic_write_file(dir / "session_report.json",
                         qsd::session_report_json(cfg, tr, channels) + "\n");
  std::cout << "simulate: slots=" << tr.length() << " written to "
            << (dir / "transcript.tsv").string() << "\n";
  return kExitOk;
}

int run_eta_sweep(const CommonArgs& args) {
  qsd::EtaSearchSpec spec = qsd::eta_config_from_json(load_config(args));
  if (args.seed_override) spec.seed = *args.seed_override;
  spec.threads = args.threads;
  const fs::path dir = prepare_out_dir(args);

  const qsd::EtaSearchResult result = qsd::eta_search(spec);

  qsd::atomic_write_file(dir / "eta_surface.tsv",
                         qsd::eta_surface_to_tsv(result));
  qsd::atomic_write_file(dir / "eta_report.json",
                         qsd::eta_report_json(spec, result) + "\n");
  std::cout << "eta-sweep: best_ratio=" << result.best.ratio << " at theta="
            << result.best.theta << "\n";
  return kExitOk;
}

int run_attack(const CommonArgs& args) {
  qsd::AttackConfig cfg = qsd::attack_config_from_json(load_config(args));
  if (args.seed_override) cfg.session.seed = *args.seed_override;
  cfg.session.threads = args.threads;
  const fs::path dir = prepare_out_dir(args);

  const qsd::SessionChannels channels = qsd::prepare_channels(cfg.session);
  const qsd::Transcript tr = qsd::run_session(cfg.session, channels);

  qsd::KeyAttackModel model;
  model.key_bits = cfg.key_bits;
  model.physical_key = cfg.session.physical_key;
  model.source_q = cfg.session.source_q;
  model.schedule = cfg.session.schedule;
  model.eve_channel = channels.eve_channel.front();
  model.threads = args.threads;
  const std::span<const qsd::TranscriptSlot> slice(tr.slots.data(), cfg.slots);
  const qsd::KeyAttackResult result = qsd::key_attack(slice, model);

  qsd::atomic_write_file(dir / "attack_report.json",
                         qsd::attack_report_json(cfg, result) + "\n");
  qsd::atomic_write_file(dir / "key_posterior.tsv",
                         qsd::key_posterior_to_tsv(result));
  std::cout << "attack: guessing_probability=" << result.guessing_probability
            << " posterior_entropy_bits=" << result.entropy_bits << "\n";
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config (JSON)")
      ->required();
  cmd->add_option("--out", args.out_dir,
                  "output directory (default: $QSD_OUT_DIR or .)");
  cmd->add_option("--seed", args.seed_override,
                  "override the config seed (u64)");
  cmd->add_option("--threads", args.threads, "worker threads")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimal quantum measurements and keyed-prior cipher sessions"};
  app.set_version_flag("--version", qsd::kVersion);
  app.require_subcommand(1);

  CommonArgs args;
  int (*handler)(const CommonArgs&) = nullptr;

  auto* solve = app.add_subcommand("solve", "Bayes-optimal measurement");
  add_common(solve, args);
  solve->callback([&] { handler = run_solve; });

  auto* minimax = app.add_subcommand("minimax", "minimax measurement");
  add_common(minimax, args);
  minimax->callback([&] { handler = run_minimax; });

  auto* simulate = app.add_subcommand("simulate", "cipher session transcript");
  add_common(simulate, args);
  simulate->callback([&] { handler = run_simulate; });

  auto* eta = app.add_subcommand("eta-sweep", "advantage-ratio surface");
  add_common(eta, args);
  eta->callback([&] { handler = run_eta_sweep; });

  auto* attack = app.add_subcommand("attack", "exhaustive key attack");
  add_common(attack, args);
  attack->callback([&] { handler = run_attack; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    return handler(args);
  } catch (const qsd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const qsd::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoConvergence;
  }
}
