#include "dsnsched/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "dsnsched/errors.hpp"

namespace dsnsched {

using json = nlohmann::ordered_json;

namespace {
constexpr char kMagic[] = "dsnsched-checkpoint\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;
}  // namespace

void save_checkpoint(const std::string& path, const PolicyNet<float>& net,
                     const CheckpointMeta& meta) {
  json doc;
  doc["version"] = meta.version;
  doc["obs_dim"] = net.obs_dim();
  doc["hidden"] = net.hidden();
  doc["n_actions"] = net.n_actions();
  doc["activation"] = meta.activation;
  doc["scalar"] = meta.scalar;
  doc["init_seed"] = net.init_seed();
  doc["env_steps"] = meta.env_steps;
  doc["iteration"] = meta.iteration;
  doc["eval_reward_mean"] = meta.eval_reward_mean;
  doc["param_count"] = net.param_count();
  const std::string header = doc.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, static_cast<std::streamsize>(kMagicLen));
  const std::uint64_t header_len = header.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(net.params().data()),
            static_cast<std::streamsize>(net.param_count() * sizeof(float)));
  if (!out) throw IoError("short write on checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path);

  char magic[kMagicLen];
  in.read(magic, static_cast<std::streamsize>(kMagicLen));
  if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0) {
    throw ParseError("not a checkpoint file: " + path);
  }
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || header_len > (1u << 20)) {
    throw ParseError("corrupt checkpoint header: " + path);
  }
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ParseError("truncated checkpoint header: " + path);

  json doc;
  try {
    doc = json::parse(header);
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint metadata is not valid JSON: ") +
                     e.what());
  }

  CheckpointMeta meta;
  try {
    meta.version = doc.at("version");
    meta.obs_dim = doc.at("obs_dim");
    meta.hidden = doc.at("hidden").get<std::vector<int>>();
    meta.n_actions = doc.at("n_actions");
    meta.activation = doc.at("activation");
    meta.scalar = doc.at("scalar");
    meta.init_seed = doc.at("init_seed");
    meta.env_steps = doc.at("env_steps");
    meta.iteration = doc.at("iteration");
    meta.eval_reward_mean = doc.at("eval_reward_mean");
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint metadata field missing: ") +
                     e.what());
  }
  if (meta.version != 1) {
    throw ConfigError("unsupported checkpoint version " +
                      std::to_string(meta.version));
  }
  if (meta.scalar != "f32") {
    throw ConfigError("unsupported checkpoint scalar type " + meta.scalar);
  }

  LoadedCheckpoint loaded{
      PolicyNet<float>(meta.obs_dim, meta.hidden, meta.n_actions,
                       meta.init_seed),
      meta};
  const std::uint64_t expect = doc.at("param_count");
  if (expect != loaded.net.param_count()) {
    throw ConfigError("checkpoint parameter count mismatch");
  }
  in.read(reinterpret_cast<char*>(loaded.net.params().data()),
          static_cast<std::streamsize>(expect * sizeof(float)));
  if (!in || in.gcount() !=
                 static_cast<std::streamsize>(expect * sizeof(float))) {
    throw ParseError("truncated checkpoint parameters: " + path);
  }
  return loaded;
}

}  // namespace dsnsched
