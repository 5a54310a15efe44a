// Command-line front end. All domain work goes through the C API in
// dsnsched.h; this file only parses flags, resolves paths, and writes run
// manifests.
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dsnsched.h"

namespace {

using nlohmann::ordered_json;

// Usage problems exit 1, rejected inputs 2, runtime failures 3.
int exit_code_for(dsn_status status) {
  switch (status) {
    case DSN_OK:
      return 0;
    case DSN_ERR_INVALID_ARGUMENT:
    case DSN_ERR_PARSE:
    case DSN_ERR_VALIDATION:
    case DSN_ERR_CONFIG:
      return 2;
    default:
      return 3;
  }
}

int fail(dsn_status status) {
  std::cerr << "error: " << dsn_last_error() << "\n";
  return exit_code_for(status);
}

// Relative outputs land under $DSNSCHED_OUT_ROOT when it is set.
std::string resolve_out(const std::string& path) {
  const char* root = std::getenv("DSNSCHED_OUT_ROOT");
  if (root && *root && !path.empty() &&
      !std::filesystem::path(path).is_absolute()) {
    return (std::filesystem::path(root) / path).string();
  }
  return path;
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

void write_manifest(const std::string& path, const std::string& subcommand,
                    const std::string& config_path, std::uint64_t seed,
                    const std::string& out,
                    const std::vector<std::string>& args) {
  ordered_json doc;
  doc["subcommand"] = subcommand;
  doc["config"] = config_path;
  doc["seed"] = seed;
  doc["out"] = out;
  doc["tool_version"] = dsn_version();
  doc["timestamp"] = utc_timestamp();
  doc["args"] = args;
  std::filesystem::create_directories(
      std::filesystem::path(path).parent_path().empty()
          ? "."
          : std::filesystem::path(path).parent_path().string());
  std::ofstream file(path, std::ios::trunc);
  file << doc.dump(2) << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::min(hw == 0 ? 1u : hw, 8u));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scheduling sandbox: synthetic week generation, PPO training, "
               "evaluation and schedule comparison"};
  app.set_version_flag("--version", dsn_version());
  app.require_subcommand(1);

  std::vector<std::string> raw_args(argv, argv + argc);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic week problem");
  std::string gen_config, gen_out = "problem.json";
  std::uint64_t gen_seed = 0;
  bool gen_has_seed = false;
  int gen_requests = -1, gen_antennas = -1, gen_missions = -1;
  double gen_target_hours = -1.0, gen_maintenance_hours = -1.0;
  gen->add_option("--config", gen_config, "generator config JSON file");
  gen->add_option("--seed", gen_seed, "RNG seed")->trigger_on_parse();
  gen->add_option("--out", gen_out, "output problem file");
  gen->add_option("--requests", gen_requests, "override request count");
  gen->add_option("--antennas", gen_antennas, "override antenna count");
  gen->add_option("--missions", gen_missions, "override mission count");
  gen->add_option("--target-hours", gen_target_hours,
                  "override total requested hours");
  gen->add_option("--maintenance-hours", gen_maintenance_hours,
                  "override daily maintenance hours per antenna");

  // train
  auto* train = app.add_subcommand("train", "train a policy with PPO");
  std::string train_problem, train_config, train_out = "train_out";
  std::uint64_t train_seed = 0;
  std::int64_t train_total_steps = 0;
  int train_workers = default_workers();
  bool train_resume = false;
  train->add_option("--problem", train_problem, "problem file")->required();
  train->add_option("--config", train_config, "trainer config JSON file");
  train->add_option("--out", train_out, "output directory");
  auto* train_seed_opt = train->add_option("--seed", train_seed, "RNG seed");
  train->add_option("--total-steps", train_total_steps,
                    "environment steps to train for");
  train->add_option("--workers", train_workers,
                    "execution threads (never changes results)");
  train->add_flag("--resume", train_resume,
                  "continue from train_state.bin in the output directory");

  // eval
  auto* eval = app.add_subcommand("eval", "roll out a policy and report");
  std::string eval_problem, eval_checkpoint, eval_out = "eval_out";
  int eval_episodes = 100;
  std::uint64_t eval_seed = 0;
  int eval_workers = default_workers();
  bool eval_random = false, eval_unmasked = false, eval_argmax = false;
  eval->add_option("--problem", eval_problem, "problem file")->required();
  eval->add_option("--checkpoint", eval_checkpoint, "policy checkpoint");
  eval->add_flag("--random", eval_random, "use the random masked baseline");
  eval->add_flag("--unmasked", eval_unmasked,
                 "diagnostic: random actions without masking");
  eval->add_flag("--argmax", eval_argmax, "pick argmax actions");
  eval->add_option("--episodes", eval_episodes, "episode count");
  eval->add_option("--seed", eval_seed, "RNG seed");
  eval->add_option("--workers", eval_workers, "execution threads");
  eval->add_option("--out", eval_out, "output directory");

  // compare
  auto* cmp = app.add_subcommand(
      "compare", "random baseline vs trained policy comparison");
  std::string cmp_problem, cmp_checkpoint, cmp_out = "compare_out";
  int cmp_episodes = 100;
  std::uint64_t cmp_seed = 0;
  int cmp_workers = default_workers();
  cmp->add_option("--problem", cmp_problem, "problem file")->required();
  cmp->add_option("--checkpoint", cmp_checkpoint, "policy checkpoint")
      ->required();
  cmp->add_option("--episodes", cmp_episodes, "episodes per agent");
  cmp->add_option("--seed", cmp_seed, "RNG seed");
  cmp->add_option("--workers", cmp_workers, "execution threads");
  cmp->add_option("--out", cmp_out, "output directory");

  // export
  auto* exp = app.add_subcommand("export", "export problem/schedule CSVs");
  std::string exp_problem, exp_schedule, exp_out = "export_out";
  exp->add_option("--problem", exp_problem, "problem file")->required();
  exp->add_option("--schedule", exp_schedule,
                  "schedule JSON to convert to CSV");
  exp->add_option("--out", exp_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  gen_has_seed = gen->count("--seed") > 0;

  try {
    if (gen->parsed()) {
      ordered_json config = ordered_json::object();
      if (!gen_config.empty()) {
        config = ordered_json::parse(read_file(gen_config), nullptr, true);
      }
      if (gen_requests >= 0) config["n_requests"] = gen_requests;
      if (gen_antennas >= 0) config["n_antennas"] = gen_antennas;
      if (gen_missions >= 0) config["n_missions"] = gen_missions;
      if (gen_target_hours >= 0) {
        config["total_requested_hours"] = gen_target_hours;
      }
      if (gen_maintenance_hours >= 0) {
        config["maintenance_hours_per_day"] = gen_maintenance_hours;
      }
      const std::string config_text = config.dump();

      dsn_problem* problem = nullptr;
      dsn_status status = dsn_generate_problem(
          config_text.c_str(), gen_seed, gen_has_seed ? 1 : 0, &problem);
      if (status != DSN_OK) return fail(status);
      const std::string out_path = resolve_out(gen_out);
      status = dsn_problem_save(problem, out_path.c_str());
      dsn_problem_free(problem);
      if (status != DSN_OK) return fail(status);
      write_manifest(out_path + ".manifest.json", "gen", gen_config, gen_seed,
                     out_path, raw_args);
      std::cout << "wrote " << out_path << "\n";
      return 0;
    }

    if (train->parsed()) {
      std::string config_text;
      if (!train_config.empty()) config_text = read_file(train_config);
      const std::string out_dir = resolve_out(train_out);
      const bool has_seed = train_seed_opt->count() > 0;
      dsn_status status = dsn_train(
          train_problem.c_str(),
          config_text.empty() ? nullptr : config_text.c_str(), out_dir.c_str(),
          train_resume ? 1 : 0, train_seed, has_seed ? 1 : 0,
          train_total_steps, train_workers);
      if (status != DSN_OK) return fail(status);
      write_manifest(out_dir + "/run_manifest.json", "train", train_config,
                     train_seed, out_dir, raw_args);
      std::cout << "trained into " << out_dir << "\n";
      return 0;
    }

    if (eval->parsed()) {
      if (eval_checkpoint.empty() && !eval_random && !eval_unmasked) {
        std::cerr << "error: provide --checkpoint, --random, or --unmasked\n";
        return 1;
      }
      if (!eval_checkpoint.empty() && (eval_random || eval_unmasked)) {
        std::cerr << "error: --random/--unmasked conflict with --checkpoint\n";
        return 1;
      }
      const std::string out_dir = resolve_out(eval_out);
      dsn_status status = dsn_evaluate(
          eval_problem.c_str(),
          eval_checkpoint.empty() ? nullptr : eval_checkpoint.c_str(),
          eval_unmasked ? 0 : 1, eval_episodes, eval_seed,
          eval_argmax ? 1 : 0, eval_workers, out_dir.c_str());
      if (status != DSN_OK) return fail(status);
      write_manifest(out_dir + "/run_manifest.json", "eval", eval_checkpoint,
                     eval_seed, out_dir, raw_args);
      std::cout << "evaluated into " << out_dir << "\n";
      return 0;
    }

    if (cmp->parsed()) {
      const std::string out_dir = resolve_out(cmp_out);
      dsn_status status =
          dsn_compare(cmp_problem.c_str(), cmp_checkpoint.c_str(),
                      cmp_episodes, cmp_seed, cmp_workers, out_dir.c_str());
      if (status != DSN_OK) return fail(status);
      write_manifest(out_dir + "/run_manifest.json", "compare",
                     cmp_checkpoint, cmp_seed, out_dir, raw_args);
      std::cout << "compared into " << out_dir << "\n";
      return 0;
    }

    if (exp->parsed()) {
      const std::string out_dir = resolve_out(exp_out);
      dsn_status status =
          dsn_export_problem(exp_problem.c_str(), out_dir.c_str());
      if (status != DSN_OK) return fail(status);
      if (!exp_schedule.empty()) {
        status = dsn_export_schedule(exp_problem.c_str(), exp_schedule.c_str(),
                                     (out_dir + "/schedule.csv").c_str());
        if (status != DSN_OK) return fail(status);
      }
      write_manifest(out_dir + "/run_manifest.json", "export", exp_schedule,
                     0, out_dir, raw_args);
      std::cout << "exported into " << out_dir << "\n";
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
