#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "anchorvote/cloudio.hpp"
#include "anchorvote/eval.hpp"
#include "anchorvote/frontview.hpp"
#include "anchorvote/micronet/distill.hpp"
#include "anchorvote/uvpm.hpp"

namespace anchorvote::config {

// Flat `key = value` text; `#` starts a comment. Duplicate keys are an error.
std::map<std::string, std::string> parse_key_values(const std::string& text);

struct DistillSettings {
  std::uint64_t seed = 7;
  int steps = 200;
  double lr = 1e-3;
  micronet::DistillBand band;
  int random_proposals = 24;
  std::size_t input_size = 128;
};

inline cloudio::SceneParams default_scene() {
  cloudio::SceneParams p;
  p.rng_seed = 42;
  return p;
}

struct RunConfig {
  // "synthetic" or a .bin file / directory of .bin files.
  std::string input = "synthetic";
  int scenes = 1;  // synthetic scenes use seeds seed, seed + 1, ...
  cloudio::SceneParams scene = default_scene();
  frontview::ProjectionConfig projection;
  uvpm::UvpmConfig uvpm;
  std::vector<double> ious{0.3, 0.5};
  std::vector<eval::Metric> metrics{eval::Metric::k2d, eval::Metric::kBird, eval::Metric::k3d};
  std::vector<eval::Difficulty> difficulties{eval::Difficulty::kEasy, eval::Difficulty::kModerate,
                                             eval::Difficulty::kHard, eval::Difficulty::kAll};
  eval::Interpolation interpolation = eval::Interpolation::k11;
  DistillSettings distill;

  bool synthetic() const { return input == "synthetic"; }
};

// Applies recognised keys on top of the defaults; unknown keys and bad values
// raise InvalidArgumentError naming the key.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace anchorvote::config
