#ifndef RLCF_CHECKPOINT_HPP
#define RLCF_CHECKPOINT_HPP

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "rlcf/ppo.hpp"

namespace rlcf::checkpoint {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes to a sibling temporary file, then renames over `path`.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

inline std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Checkpoint {
  ppo::TrainState state;
  std::uint64_t config_hash = 0;
};

namespace detail {

inline json params_to_json(const policy::PolicyParams& p) {
  json j = json::object();
  for (int b = 0; b < policy::PolicyParams::kBlocks; ++b) {
    const auto blk = p.block(b);
    j[policy::PolicyParams::kBlockNames[b]] = std::vector<double>(blk.begin(), blk.end());
  }
  return j;
}

inline policy::PolicyParams params_from_json(const json& j, const policy::PolicyShape& shape) {
  policy::PolicyParams p(shape);
  for (int b = 0; b < policy::PolicyParams::kBlocks; ++b) {
    const char* name = policy::PolicyParams::kBlockNames[b];
    const auto v = j.at(name).get<std::vector<double>>();
    auto blk = p.block(b);
    if (v.size() != blk.size())
      throw CheckpointError(std::string("tensor '") + name + "' has " + std::to_string(v.size()) + " values, expected " +
                            std::to_string(blk.size()));
    std::copy(v.begin(), v.end(), blk.begin());
  }
  return p;
}

}  // namespace detail

inline std::string serialize(const Checkpoint& c) {
  const auto& s = c.state.params.shape();
  json j;
  j["version"] = kFormatVersion;
  j["vocab_hash"] = hex(Vocabulary::hash());
  j["config_hash"] = hex(c.config_hash);
  j["shape"] = {{"vocab", s.vocab}, {"embed", s.embed}, {"window", s.window}, {"hidden", s.hidden}};
  j["epoch"] = c.state.epoch;
  j["params"] = detail::params_to_json(c.state.params);
  j["reference"] = detail::params_to_json(c.state.reference.params());
  j["adam"] = {{"step", c.state.optimizer.step}, {"m", c.state.optimizer.m}, {"v", c.state.optimizer.v}};
  return j.dump();
}

/// Parses a checkpoint. A nonempty `expected_config_hash` must match.
inline Checkpoint deserialize(const std::string& text, std::optional<std::uint64_t> expected_config_hash = {}) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != kFormatVersion) throw CheckpointError("unsupported checkpoint version");
    if (j.at("vocab_hash").get<std::string>() != hex(Vocabulary::hash()))
      throw CheckpointError("vocabulary hash mismatch");
    const auto cfg_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    if (expected_config_hash && *expected_config_hash != cfg_hash) throw CheckpointError("config hash mismatch");

    policy::PolicyShape shape;
    const auto& js = j.at("shape");
    if (js.at("vocab").get<int>() != shape.vocab) throw CheckpointError("vocabulary size mismatch");
    shape.embed = js.at("embed").get<int>();
    shape.window = js.at("window").get<int>();
    shape.hidden = js.at("hidden").get<int>();

    Checkpoint c{ppo::start_training(detail::params_from_json(j.at("params"), shape)), cfg_hash};
    c.state.reference = policy::ReferencePolicy(detail::params_from_json(j.at("reference"), shape));
    c.state.epoch = j.at("epoch").get<int>();
    const auto& ja = j.at("adam");
    c.state.optimizer.step = ja.at("step").get<std::int64_t>();
    c.state.optimizer.m = ja.at("m").get<std::vector<double>>();
    c.state.optimizer.v = ja.at("v").get<std::vector<double>>();
    const std::size_t n = c.state.params.data().size();
    const bool fresh = c.state.optimizer.m.empty() && c.state.optimizer.v.empty();
    if (!fresh && (c.state.optimizer.m.size() != n || c.state.optimizer.v.size() != n))
      throw CheckpointError("optimizer state size mismatch");
    return c;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save(const std::filesystem::path& path, const Checkpoint& c) { atomic_write(path, serialize(c)); }

inline Checkpoint load(const std::filesystem::path& path, std::optional<std::uint64_t> expected_config_hash = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str(), expected_config_hash);
}

}  // namespace rlcf::checkpoint

#endif  // RLCF_CHECKPOINT_HPP
