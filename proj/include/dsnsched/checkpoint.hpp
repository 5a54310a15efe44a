#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsnsched/policy_net.hpp"

namespace dsnsched {

// Architecture and run metadata carried next to the flat parameter vector.
struct CheckpointMeta {
  int version = 1;
  int obs_dim = 0;
  std::vector<int> hidden;
  int n_actions = 0;
  std::string activation = "softplus";
  std::string scalar = "f32";
  std::uint64_t init_seed = 0;
  long long env_steps = 0;
  int iteration = 0;
  double eval_reward_mean = 0.0;
};

struct LoadedCheckpoint {
  PolicyNet<float> net;
  CheckpointMeta meta;
};

// Single binary file: magic line, JSON metadata, raw little-endian float32
// parameters. Byte-identical for identical params and metadata.
void save_checkpoint(const std::string& path, const PolicyNet<float>& net,
                     const CheckpointMeta& meta);

// Throws ParseError on malformed files, ConfigError on unsupported
// version/scalar or parameter-count mismatch.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace dsnsched
