#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <dsnsched.h>

namespace fs = std::filesystem;

namespace {

constexpr const char* kTinyProblemConfig = R"({
  "week_label": "capi-week",
  "n_antennas": 2,
  "n_missions": 3,
  "n_requests": 10,
  "total_requested_hours": 40.0,
  "maintenance_hours_per_day": 4.0
})";

constexpr const char* kTinyTrainConfig = R"({
  "hidden": [16],
  "rollout_batch_size": 64,
  "minibatch_size": 32,
  "epochs_per_batch": 2,
  "eval_episodes": 2,
  "total_env_steps": 128,
  "n_streams": 4,
  "seed": 3
})";

std::string fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("dsnsched_capi_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return text;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

// Deterministic tiny problem saved to disk; returns the file path.
std::string make_problem_file(const std::string& dir, std::uint64_t seed) {
  dsn_problem* problem = nullptr;
  REQUIRE(dsn_generate_problem(kTinyProblemConfig, seed, 1, &problem) == DSN_OK);
  const std::string path = dir + "/problem.json";
  REQUIRE(dsn_problem_save(problem, path.c_str()) == DSN_OK);
  dsn_problem_free(problem);
  return path;
}

int first_live_action(const std::vector<std::uint8_t>& mask) {
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

TEST_CASE("version and layout constants") {
  REQUIRE(dsn_version() != nullptr);
  CHECK(std::string(dsn_version()) == "0.1.0");
  CHECK(dsn_observation_size() == 518);
  CHECK(dsn_action_slots() == 500);
  CHECK(std::string(dsn_last_error()).empty());
}

TEST_CASE("null arguments are rejected without crashing") {
  CHECK(dsn_generate_problem(nullptr, 0, 0, nullptr) ==
        DSN_ERR_INVALID_ARGUMENT);
  CHECK(std::string(dsn_last_error()).find("out") != std::string::npos);
  CHECK(dsn_problem_load(nullptr, nullptr) == DSN_ERR_INVALID_ARGUMENT);
  CHECK(dsn_problem_save(nullptr, "x") == DSN_ERR_INVALID_ARGUMENT);
  CHECK(dsn_problem_stats(nullptr, nullptr, nullptr, nullptr, nullptr,
                          nullptr) == DSN_ERR_INVALID_ARGUMENT);
  CHECK(dsn_env_create(nullptr, nullptr) == DSN_ERR_INVALID_ARGUMENT);
  CHECK(dsn_env_reset(nullptr, 0, nullptr) == DSN_ERR_INVALID_ARGUMENT);
  CHECK(dsn_env_step(nullptr, 0, nullptr, nullptr, nullptr) ==
        DSN_ERR_INVALID_ARGUMENT);
  CHECK(dsn_env_observation(nullptr, nullptr) == DSN_ERR_INVALID_ARGUMENT);
  CHECK(dsn_env_action_mask(nullptr, nullptr) == DSN_ERR_INVALID_ARGUMENT);
  CHECK(dsn_policy_load(nullptr, nullptr) == DSN_ERR_INVALID_ARGUMENT);
  CHECK(dsn_policy_act(nullptr, nullptr, nullptr, 0, 0, nullptr) ==
        DSN_ERR_INVALID_ARGUMENT);
  CHECK(dsn_train(nullptr, nullptr, nullptr, 0, 0, 0, 0, 0) ==
        DSN_ERR_INVALID_ARGUMENT);
  CHECK(dsn_evaluate(nullptr, nullptr, 1, 1, 0, 0, 1, nullptr) ==
        DSN_ERR_INVALID_ARGUMENT);
  CHECK(dsn_compare(nullptr, nullptr, 1, 0, 1, nullptr) ==
        DSN_ERR_INVALID_ARGUMENT);
  CHECK(dsn_export_problem(nullptr, nullptr) == DSN_ERR_INVALID_ARGUMENT);
  CHECK(dsn_export_schedule(nullptr, nullptr, nullptr) ==
        DSN_ERR_INVALID_ARGUMENT);

  dsn_problem_free(nullptr);
  dsn_env_free(nullptr);
  dsn_policy_free(nullptr);
}

TEST_CASE("generate, stats, save, load round trip") {
  const std::string dir = fresh_dir("roundtrip");

  dsn_problem* a = nullptr;
  REQUIRE(dsn_generate_problem(kTinyProblemConfig, 5, 1, &a) == DSN_OK);
  double requested = 0.0, available = 0.0;
  int n_requests = 0, n_antennas = 0, n_missions = 0;
  REQUIRE(dsn_problem_stats(a, &requested, &available, &n_requests,
                            &n_antennas, &n_missions) == DSN_OK);
  CHECK(n_requests == 10);
  CHECK(n_antennas == 2);
  CHECK(n_missions == 3);
  CHECK(requested == doctest::Approx(40.0).epsilon(0.25));
  CHECK(available > 0.0);

  const std::string path_a = dir + "/a.json";
  REQUIRE(dsn_problem_save(a, path_a.c_str()) == DSN_OK);

  dsn_problem* b = nullptr;
  REQUIRE(dsn_generate_problem(kTinyProblemConfig, 5, 1, &b) == DSN_OK);
  const std::string path_b = dir + "/b.json";
  REQUIRE(dsn_problem_save(b, path_b.c_str()) == DSN_OK);
  CHECK(read_file(path_a) == read_file(path_b));

  dsn_problem* c = nullptr;
  REQUIRE(dsn_generate_problem(kTinyProblemConfig, 6, 1, &c) == DSN_OK);
  const std::string path_c = dir + "/c.json";
  REQUIRE(dsn_problem_save(c, path_c.c_str()) == DSN_OK);
  CHECK(read_file(path_a) != read_file(path_c));

  // has_seed == 0 keeps the config's rng_seed; an explicit field matches an
  // equal override.
  nlohmann::json with_seed = nlohmann::json::parse(kTinyProblemConfig);
  with_seed["rng_seed"] = 5;
  dsn_problem* d = nullptr;
  REQUIRE(dsn_generate_problem(with_seed.dump().c_str(), 999, 0, &d) == DSN_OK);
  const std::string path_d = dir + "/d.json";
  REQUIRE(dsn_problem_save(d, path_d.c_str()) == DSN_OK);
  CHECK(read_file(path_d) == read_file(path_a));

  dsn_problem* loaded = nullptr;
  REQUIRE(dsn_problem_load(path_a.c_str(), &loaded) == DSN_OK);
  const std::string path_again = dir + "/again.json";
  REQUIRE(dsn_problem_save(loaded, path_again.c_str()) == DSN_OK);
  CHECK(read_file(path_again) == read_file(path_a));

  dsn_problem_free(a);
  dsn_problem_free(b);
  dsn_problem_free(c);
  dsn_problem_free(d);
  dsn_problem_free(loaded);
  fs::remove_all(dir);
}

TEST_CASE("statuses distinguish parse, config, validation, and io") {
  const std::string dir = fresh_dir("status");
  dsn_problem* out = nullptr;

  CHECK(dsn_generate_problem("not json", 0, 0, &out) == DSN_ERR_PARSE);
  CHECK(!std::string(dsn_last_error()).empty());
  CHECK(dsn_generate_problem(R"({"n_antennas": 0})", 0, 0, &out) ==
        DSN_ERR_CONFIG);

  CHECK(dsn_problem_load((dir + "/missing.json").c_str(), &out) == DSN_ERR_IO);
  CHECK(std::string(dsn_last_error()).find("missing.json") !=
        std::string::npos);

  write_file(dir + "/junk.json", "{{{{");
  CHECK(dsn_problem_load((dir + "/junk.json").c_str(), &out) == DSN_ERR_PARSE);
  write_file(dir + "/empty.json", "{}");
  CHECK(dsn_problem_load((dir + "/empty.json").c_str(), &out) == DSN_ERR_PARSE);

  // Schema-correct but domain-invalid: negate one request's min duration.
  const std::string path = make_problem_file(dir, 5);
  std::string text = read_file(path);
  const std::size_t at = text.find("\"min_s\": ");
  REQUIRE(at != std::string::npos);
  text.insert(at + std::string("\"min_s\": ").size(), "-");
  write_file(dir + "/invalid.json", text);
  CHECK(dsn_problem_load((dir + "/invalid.json").c_str(), &out) ==
        DSN_ERR_VALIDATION);

  fs::remove_all(dir);
}

TEST_CASE("environment round trip") {
  dsn_problem* problem = nullptr;
  REQUIRE(dsn_generate_problem(kTinyProblemConfig, 7, 1, &problem) == DSN_OK);
  double requested = 0.0;
  REQUIRE(dsn_problem_stats(problem, &requested, nullptr, nullptr, nullptr,
                            nullptr) == DSN_OK);

  dsn_env* env = nullptr;
  REQUIRE(dsn_env_create(problem, &env) == DSN_OK);

  CHECK(dsn_env_step(env, 0, nullptr, nullptr, nullptr) ==
        DSN_ERR_INVALID_ARGUMENT);

  std::vector<double> obs(dsn_observation_size());
  REQUIRE(dsn_env_reset(env, 42, obs.data()) == DSN_OK);
  CHECK(obs[0] == doctest::Approx(requested).epsilon(1e-9));
  CHECK(obs[2] == doctest::Approx(10.0));

  std::vector<std::uint8_t> mask(dsn_action_slots());
  REQUIRE(dsn_env_action_mask(env, mask.data()) == DSN_OK);
  int live = 0;
  for (std::uint8_t m : mask) live += m;
  CHECK(live == 10);
  CHECK(mask[499] == 0);

  CHECK(dsn_env_step(env, -1, nullptr, nullptr, nullptr) == DSN_ERR_CONTRACT);
  CHECK(!std::string(dsn_last_error()).empty());
  CHECK(dsn_env_step(env, dsn_action_slots(), nullptr, nullptr, nullptr) ==
        DSN_ERR_CONTRACT);

  // Masked slots are steppable; they cost a step and return zero reward.
  double reward = -1.0;
  int done = 0;
  std::int64_t allocated = -1;
  REQUIRE(dsn_env_step(env, 499, &reward, &done, &allocated) == DSN_OK);
  CHECK(reward == 0.0);
  CHECK(allocated == 0);

  int steps = 1;
  double total = 0.0;
  while (!done) {
    REQUIRE(dsn_env_action_mask(env, mask.data()) == DSN_OK);
    const int action = first_live_action(mask);
    REQUIRE(action >= 0);
    REQUIRE(dsn_env_step(env, action, &reward, &done, &allocated) == DSN_OK);
    CHECK(reward >= 0.0);
    CHECK(reward <= 1.0);
    CHECK(allocated >= 0);
    total += reward;
    steps += 1;
    REQUIRE(steps <= 20);
  }
  CHECK(total > 0.0);
  CHECK(dsn_env_step(env, 0, nullptr, nullptr, nullptr) == DSN_ERR_CONTRACT);

  REQUIRE(dsn_env_observation(env, obs.data()) == DSN_OK);
  CHECK(obs[0] < requested);

  // Same seed and actions reproduce the rewards bit for bit.
  dsn_env* env2 = nullptr;
  REQUIRE(dsn_env_create(problem, &env2) == DSN_OK);
  std::vector<double> obs_a(dsn_observation_size());
  std::vector<double> obs_b(dsn_observation_size());
  REQUIRE(dsn_env_reset(env, 42, obs_a.data()) == DSN_OK);
  REQUIRE(dsn_env_reset(env2, 42, obs_b.data()) == DSN_OK);
  CHECK(obs_a == obs_b);
  double r1 = 0.0, r2 = 0.0;
  int d1 = 0, d2 = 0;
  for (int action : {0, 3, 3, 7}) {
    REQUIRE(dsn_env_step(env, action, &r1, &d1, nullptr) == DSN_OK);
    REQUIRE(dsn_env_step(env2, action, &r2, &d2, nullptr) == DSN_OK);
    CHECK(r1 == r2);
    CHECK(d1 == d2);
  }

  dsn_env_free(env);
  dsn_env_free(env2);
  dsn_problem_free(problem);
}

TEST_CASE("train, policy, evaluate, compare, export") {
  const std::string dir = fresh_dir("pipeline");
  const std::string problem_path = make_problem_file(dir, 5);
  const std::string train_dir = dir + "/train";

  SUBCASE("training error statuses") {
    CHECK(dsn_train((dir + "/absent.json").c_str(), nullptr, train_dir.c_str(),
                    0, 0, 0, 0, 0) == DSN_ERR_IO);
    CHECK(dsn_train(problem_path.c_str(), "nope", train_dir.c_str(), 0, 0, 0,
                    0, 0) == DSN_ERR_PARSE);
    CHECK(dsn_train(problem_path.c_str(), R"({"gamma": 2.0})",
                    train_dir.c_str(), 0, 0, 0, 0, 0) == DSN_ERR_CONFIG);
    return;
  }

  REQUIRE(dsn_train(problem_path.c_str(), kTinyTrainConfig, train_dir.c_str(),
                    0, 0, 0, 0, 2) == DSN_OK);
  CHECK(fs::exists(train_dir + "/train_log.csv"));
  CHECK(fs::exists(train_dir + "/checkpoint_00001.ckpt"));
  CHECK(fs::exists(train_dir + "/checkpoint_latest.ckpt"));
  CHECK(fs::exists(train_dir + "/checkpoint_best.ckpt"));
  CHECK(fs::exists(train_dir + "/train_state.bin"));
  CHECK(nlohmann::json::parse(read_file(train_dir + "/ppo_config.json"))
            .at("total_env_steps") == 128);
  CHECK(read_file(train_dir + "/train_log.csv")
            .starts_with("iter,env_steps"));

  SUBCASE("resume extends the same run") {
    REQUIRE(dsn_train(problem_path.c_str(), kTinyTrainConfig, train_dir.c_str(),
                      1, 0, 0, 192, 2) == DSN_OK);
    const std::string log = read_file(train_dir + "/train_log.csv");
    CHECK(std::count(log.begin(), log.end(), '\n') == 4);
  }

  const std::string ckpt = train_dir + "/checkpoint_latest.ckpt";

  SUBCASE("policy act") {
    dsn_policy* missing = nullptr;
    CHECK(dsn_policy_load((dir + "/absent.ckpt").c_str(), &missing) ==
          DSN_ERR_PARSE);

    dsn_policy* policy = nullptr;
    REQUIRE(dsn_policy_load(ckpt.c_str(), &policy) == DSN_OK);

    dsn_problem* problem = nullptr;
    REQUIRE(dsn_problem_load(problem_path.c_str(), &problem) == DSN_OK);
    dsn_env* env = nullptr;
    REQUIRE(dsn_env_create(problem, &env) == DSN_OK);
    std::vector<double> obs(dsn_observation_size());
    REQUIRE(dsn_env_reset(env, 1, obs.data()) == DSN_OK);
    std::vector<std::uint8_t> mask(dsn_action_slots());
    REQUIRE(dsn_env_action_mask(env, mask.data()) == DSN_OK);

    CHECK(dsn_policy_act(policy, obs.data(), mask.data(), 0, 0, nullptr) ==
          DSN_ERR_INVALID_ARGUMENT);

    int greedy_a = -1, greedy_b = -1;
    REQUIRE(dsn_policy_act(policy, obs.data(), mask.data(), 0, 1, &greedy_a) ==
            DSN_OK);
    REQUIRE(dsn_policy_act(policy, obs.data(), mask.data(), 9, 1, &greedy_b) ==
            DSN_OK);
    CHECK(greedy_a == greedy_b);
    CHECK(mask[greedy_a] == 1);

    for (std::uint64_t seed = 0; seed < 32; ++seed) {
      int action = -1;
      REQUIRE(dsn_policy_act(policy, obs.data(), mask.data(), seed, 0,
                             &action) == DSN_OK);
      CHECK(action >= 0);
      CHECK(action < dsn_action_slots());
      CHECK(mask[action] == 1);
    }

    dsn_env_free(env);
    dsn_problem_free(problem);
    dsn_policy_free(policy);
  }

  SUBCASE("evaluate and compare artifacts") {
    const std::string eval_dir = dir + "/eval";
    CHECK(dsn_evaluate(problem_path.c_str(), ckpt.c_str(), 0, 0, 1, 0, 2,
                       eval_dir.c_str()) == DSN_ERR_INVALID_ARGUMENT);
    REQUIRE(dsn_evaluate(problem_path.c_str(), ckpt.c_str(), 0, 5, 1, 0, 2,
                         eval_dir.c_str()) == DSN_OK);
    for (const char* name :
         {"rollout.csv", "report.json", "schedule.json", "schedule.csv"}) {
      CHECK(fs::exists(eval_dir + "/" + name));
    }
    const auto report =
        nlohmann::json::parse(read_file(eval_dir + "/report.json"));
    CHECK(report.at("episodes") == 5);
    CHECK(report.at("week_label") == "capi-week");
    CHECK(report.at("report").contains("u_rms"));
    CHECK(read_file(eval_dir + "/schedule.csv")
              .starts_with("request_id,mission,combo,start_s,end_s,duration_s"));

    const std::string eval_dir2 = dir + "/eval2";
    REQUIRE(dsn_evaluate(problem_path.c_str(), ckpt.c_str(), 0, 5, 1, 0, 1,
                         eval_dir2.c_str()) == DSN_OK);
    CHECK(read_file(eval_dir + "/rollout.csv") ==
          read_file(eval_dir2 + "/rollout.csv"));
    CHECK(read_file(eval_dir + "/report.json") ==
          read_file(eval_dir2 + "/report.json"));

    const std::string random_dir = dir + "/eval_random";
    REQUIRE(dsn_evaluate(problem_path.c_str(), nullptr, 1, 4, 2, 0, 1,
                         random_dir.c_str()) == DSN_OK);
    CHECK(fs::exists(random_dir + "/report.json"));
    const std::string unmasked_dir = dir + "/eval_unmasked";
    REQUIRE(dsn_evaluate(problem_path.c_str(), nullptr, 0, 4, 2, 0, 1,
                         unmasked_dir.c_str()) == DSN_OK);

    const std::string cmp_dir = dir + "/cmp";
    CHECK(dsn_compare(problem_path.c_str(), ckpt.c_str(), 0, 3, 1,
                      cmp_dir.c_str()) == DSN_ERR_INVALID_ARGUMENT);
    REQUIRE(dsn_compare(problem_path.c_str(), ckpt.c_str(), 6, 3, 2,
                        cmp_dir.c_str()) == DSN_OK);
    for (const char* name :
         {"summary.txt", "comparison_table.csv", "reward_hist_random.csv",
          "reward_hist_trained.csv", "action_hist_random.csv",
          "action_hist_trained.csv", "missions_random.csv",
          "missions_trained.csv", "rollout_random.csv",
          "rollout_trained.csv"}) {
      CHECK(fs::exists(cmp_dir + "/" + name));
    }
    CHECK(read_file(cmp_dir + "/summary.txt")
              .starts_with("schedule comparison: capi-week"));
    CHECK(read_file(cmp_dir + "/comparison_table.csv")
              .starts_with("metric,random,trained"));
  }

  SUBCASE("exports") {
    const std::string export_dir = dir + "/export";
    REQUIRE(dsn_export_problem(problem_path.c_str(), export_dir.c_str()) ==
            DSN_OK);
    const std::string requests = read_file(export_dir + "/requests.csv");
    CHECK(requests.starts_with(
        "request_id,mission,requested_s,min_s,setup_s,teardown_s,combos"));
    CHECK(std::count(requests.begin(), requests.end(), '\n') == 11);
    const std::string antennas = read_file(export_dir + "/antennas.csv");
    CHECK(antennas.starts_with("antenna,week_start_s,week_end_s,maintenance_s"));
    CHECK(std::count(antennas.begin(), antennas.end(), '\n') == 3);

    const std::string eval_dir = dir + "/export_eval";
    REQUIRE(dsn_evaluate(problem_path.c_str(), nullptr, 1, 3, 4, 0, 1,
                         eval_dir.c_str()) == DSN_OK);
    const std::string out_csv = dir + "/exported_schedule.csv";
    REQUIRE(dsn_export_schedule(problem_path.c_str(),
                                (eval_dir + "/schedule.json").c_str(),
                                out_csv.c_str()) == DSN_OK);
    CHECK(read_file(out_csv) == read_file(eval_dir + "/schedule.csv"));

    write_file(dir + "/junk_schedule.json", "not json");
    CHECK(dsn_export_schedule(problem_path.c_str(),
                              (dir + "/junk_schedule.json").c_str(),
                              out_csv.c_str()) == DSN_ERR_PARSE);
  }

  fs::remove_all(dir);
}
