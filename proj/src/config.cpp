#include "anchorvote/config.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "anchorvote/error.hpp"

namespace anchorvote::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InvalidArgumentError("config key '" + key + "': '" + v + "' is not a number");
  }
}

long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long n = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw InvalidArgumentError("config key '" + key + "': '" + v + "' is not an integer");
  }
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const long n = to_int(key, v);
  if (n < 0) throw InvalidArgumentError("config key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(n);
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgumentError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw InvalidArgumentError("config line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) throw InvalidArgumentError("config key '" + key + "' given twice");
  }
  return kv;
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig rc;
  auto& sc = rc.scene;
  auto& pj = rc.projection;
  auto& uv = rc.uvpm;
  auto& ds = rc.distill;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto num = [](double& dst) -> Setter { return [&dst](const auto& k, const auto& v) { dst = to_double(k, v); }; };
  auto deg = [](double& dst) -> Setter {
    return [&dst](const auto& k, const auto& v) { dst = to_double(k, v) * frontview::kDegree; };
  };
  auto integer = [](int& dst) -> Setter {
    return [&dst](const auto& k, const auto& v) { dst = static_cast<int>(to_int(k, v)); };
  };
  auto count = [](std::size_t& dst) -> Setter { return [&dst](const auto& k, const auto& v) { dst = to_count(k, v); }; };

  const std::map<std::string, Setter> setters{
      {"input", [&](const auto&, const auto& v) { rc.input = v; }},
      {"scenes", integer(rc.scenes)},
      {"seed", [&](const auto& k, const auto& v) { sc.rng_seed = to_count(k, v); }},
      {"scene.n_objects", integer(sc.n_objects)},
      {"scene.points_per_object", integer(sc.points_per_object)},
      {"scene.noise_sigma", num(sc.noise_sigma)},
      {"scene.n_ground_points", integer(sc.n_ground_points)},
      {"scene.min_range", num(sc.min_range)},
      {"scene.max_range", num(sc.max_range)},
      {"projection.delta_theta_deg", deg(pj.delta_theta)},
      {"projection.delta_phi_deg", deg(pj.delta_phi)},
      {"projection.theta_min_deg", deg(pj.theta_min)},
      {"projection.theta_max_deg", deg(pj.theta_max)},
      {"projection.phi_min_deg", deg(pj.phi_min)},
      {"projection.phi_max_deg", deg(pj.phi_max)},
      {"uvpm.spacing", num(uv.spacing)},
      {"uvpm.x_min", num(uv.x_min)},
      {"uvpm.x_max", num(uv.x_max)},
      {"uvpm.y_min", num(uv.y_min)},
      {"uvpm.y_max", num(uv.y_max)},
      {"uvpm.anchor_z", num(uv.anchor_z)},
      {"uvpm.prior_dx", num(uv.prior_scale.x)},
      {"uvpm.prior_dy", num(uv.prior_scale.y)},
      {"uvpm.prior_dz", num(uv.prior_scale.z)},
      {"uvpm.delta", num(uv.delta)},
      {"uvpm.patch_size", integer(uv.patch_size)},
      {"uvpm.epsilon", num(uv.epsilon)},
      {"uvpm.shell_tolerance", integer(uv.shell_tolerance)},
      {"uvpm.ground_clearance", num(uv.ground_clearance)},
      {"uvpm.n_seeds", count(uv.n_seeds)},
      {"uvpm.k_clusters", count(uv.k_clusters)},
      {"uvpm.vote_radius", num(uv.vote_radius)},
      {"uvpm.min_vote_points", integer(uv.min_vote_points)},
      {"uvpm.cluster_radius", num(uv.cluster_radius)},
      {"uvpm.yaw_steps", integer(uv.yaw_steps)},
      {"uvpm.nms_threshold", num(uv.nms_threshold)},
      {"uvpm.nms_mode",
       [&](const auto& k, const auto& v) {
         if (v == "bev") uv.nms_mode = geometry::NmsMode::kBev;
         else if (v == "3d") uv.nms_mode = geometry::NmsMode::k3d;
         else throw InvalidArgumentError("config key '" + k + "' must be bev or 3d");
       }},
      {"uvpm.mode",
       [&](const auto& k, const auto& v) {
         if (v == "uvpm") uv.mode = uvpm::Mode::kUvpm;
         else if (v == "upm") uv.mode = uvpm::Mode::kUpm;
         else throw InvalidArgumentError("config key '" + k + "' must be uvpm or upm");
       }},
      {"uvpm.vote",
       [&](const auto& k, const auto& v) {
         if (v == "geometric") uv.vote = uvpm::VoteMode::kGeometric;
         else if (v == "learned") uv.vote = uvpm::VoteMode::kLearned;
         else throw InvalidArgumentError("config key '" + k + "' must be geometric or learned");
       }},
      {"uvpm.learned_seed", [&](const auto& k, const auto& v) { uv.learned_seed = to_count(k, v); }},
      {"uvpm.learned_points", count(uv.learned_points)},
      {"eval.iou",
       [&](const auto& k, const auto& v) {
         rc.ious.clear();
         for (const auto& s : split_list(v)) rc.ious.push_back(to_double(k, s));
       }},
      {"eval.metrics",
       [&](const auto&, const auto& v) {
         rc.metrics.clear();
         for (const auto& s : split_list(v)) rc.metrics.push_back(eval::parse_metric(s));
       }},
      {"eval.difficulties",
       [&](const auto&, const auto& v) {
         rc.difficulties.clear();
         for (const auto& s : split_list(v)) rc.difficulties.push_back(eval::parse_difficulty(s));
       }},
      {"eval.interpolation",
       [&](const auto& k, const auto& v) {
         if (v == "11") rc.interpolation = eval::Interpolation::k11;
         else if (v == "40") rc.interpolation = eval::Interpolation::k40;
         else throw InvalidArgumentError("config key '" + k + "' must be 11 or 40");
       }},
      {"distill.seed", [&](const auto& k, const auto& v) { ds.seed = to_count(k, v); }},
      {"distill.steps", integer(ds.steps)},
      {"distill.lr", num(ds.lr)},
      {"distill.band_lo", num(ds.band.lo)},
      {"distill.band_hi", num(ds.band.hi)},
      {"distill.random_proposals", integer(ds.random_proposals)},
      {"distill.input_size", count(ds.input_size)},
  };

  for (const auto& [key, value] : parse_key_values(text)) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw InvalidArgumentError("unknown config key '" + key + "'");
    it->second(key, value);
  }
  if (rc.scenes < 1) throw InvalidArgumentError("config key 'scenes' must be at least 1");
  for (double iou : rc.ious) {
    if (!(iou > 0.0 && iou <= 1.0)) throw InvalidArgumentError("config key 'eval.iou' values must lie in (0, 1]");
  }
  rc.projection.validate();
  rc.uvpm.validate();
  rc.distill.band.validate();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(cloudio::read_text(path)); }

}  // namespace anchorvote::config
