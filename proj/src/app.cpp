#include "anchorvote/app.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "anchorvote/error.hpp"
#include "anchorvote/frontview.hpp"
#include "anchorvote/micronet/distill.hpp"
#include "anchorvote/render.hpp"
#include "anchorvote/uvpm.hpp"

namespace fs = std::filesystem;

namespace anchorvote::app {

namespace {

constexpr const char* kDetsSuffix = ".dets.txt";
constexpr const char* kTruthSuffix = ".truth.txt";

std::map<std::string, fs::path> list_by_suffix(const fs::path& dir, const std::string& suffix) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > suffix.size() && name.ends_with(suffix)) {
      out.emplace(name.substr(0, name.size() - suffix.size()), e.path());
    }
  }
  return out;
}

Scan load_bin(const fs::path& path) {
  Scan s;
  s.id = path.stem().string();
  s.cloud = cloudio::read_velodyne_bin(path);
  const fs::path truth = path.parent_path() / (s.id + kTruthSuffix);
  if (fs::exists(truth)) s.truth = cloudio::read_truth(truth);
  return s;
}

std::string format_loss(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string synthetic_id(std::uint64_t seed) { return "synthetic_" + std::to_string(seed); }

std::vector<Scan> load_scans(const config::RunConfig& rc) {
  std::vector<Scan> scans;
  if (rc.synthetic()) {
    if (rc.scenes < 1) throw InvalidArgumentError("scenes must be >= 1");
    for (int i = 0; i < rc.scenes; ++i) {
      cloudio::SceneParams sp = rc.scene;
      sp.rng_seed = rc.scene.rng_seed + static_cast<std::uint64_t>(i);
      auto scene = cloudio::generate_scene(sp);
      scans.push_back({synthetic_id(sp.rng_seed), std::move(scene.cloud), std::move(scene.truth)});
    }
    return scans;
  }
  const fs::path input(rc.input);
  if (fs::is_directory(input)) {
    std::vector<fs::path> bins;
    for (const auto& e : fs::directory_iterator(input)) {
      if (e.is_regular_file() && e.path().extension() == ".bin") bins.push_back(e.path());
    }
    std::sort(bins.begin(), bins.end());
    if (bins.empty()) throw IoError("no .bin scans in " + input.string());
    for (const auto& b : bins) scans.push_back(load_bin(b));
    return scans;
  }
  if (!fs::exists(input)) throw IoError("input not found: " + input.string());
  scans.push_back(load_bin(input));
  return scans;
}

std::vector<ProjectStat> project(const config::RunConfig& rc, const fs::path& out, std::ostream& log) {
  const auto scans = load_scans(rc);
  fs::create_directories(out);
  std::vector<ProjectStat> stats;
  std::string lines;
  for (const auto& scan : scans) {
    const auto map = frontview::build_map(scan.cloud, rc.projection);
    frontview::write_channel_pgms(map, out / scan.id);
    const auto occupied = static_cast<std::size_t>(std::count(map.occupied.begin(), map.occupied.end(), 1));
    stats.push_back({scan.id, occupied});
    const std::string line = scan.id + " occupied=" + std::to_string(occupied) + "\n";
    lines += line;
    log << line;
  }
  cloudio::atomic_write(out / "occupancy.txt", lines);
  return stats;
}

std::vector<ProposeStat> propose(const config::RunConfig& rc, const fs::path& out, std::ostream& log) {
  const auto scans = load_scans(rc);
  fs::create_directories(out);
  std::vector<ProposeStat> stats;
  for (const auto& scan : scans) {
    const auto map = frontview::build_map(scan.cloud, rc.projection);
    const auto res = uvpm::propose(scan.cloud, map, rc.projection, rc.uvpm);
    cloudio::write_detections(res.proposals, out / (scan.id + kDetsSuffix));
    if (scan.truth) cloudio::write_truth(*scan.truth, out / (scan.id + kTruthSuffix));
    stats.push_back({scan.id, res.proposals.size()});
    log << scan.id << " anchors=" << res.n_anchors << " dense=" << res.n_dense << " survivors=" << res.n_survivors
        << " clusters=" << res.n_clusters << " candidates=" << res.candidates.size()
        << " detections=" << res.proposals.size() << "\n";
  }
  return stats;
}

eval::Report evaluate(const config::RunConfig& rc, const fs::path& dets_dir, const fs::path& truth_dir,
                      const fs::path& out, std::ostream& log) {
  const auto dets = list_by_suffix(dets_dir, kDetsSuffix);
  const auto truths = list_by_suffix(truth_dir, kTruthSuffix);
  std::vector<std::string> only_dets, only_truth;
  for (const auto& [id, p] : dets) {
    if (!truths.count(id)) only_dets.push_back(id);
  }
  for (const auto& [id, p] : truths) {
    if (!dets.count(id)) only_truth.push_back(id);
  }
  if (!only_dets.empty() || !only_truth.empty()) {
    std::string msg = "mismatched scene ids:";
    for (const auto& id : only_dets) msg += " " + id + " (no truth)";
    for (const auto& id : only_truth) msg += " " + id + " (no detections)";
    throw InvalidArgumentError(msg);
  }
  if (dets.empty()) throw IoError("no *.dets.txt files in " + dets_dir.string());

  std::vector<eval::Scene> scenes;
  for (const auto& [id, path] : dets) {
    scenes.push_back({id, cloudio::read_detections(path), cloudio::read_truth(truths.at(id))});
  }
  const auto report =
      eval::make_report(scenes, rc.ious, rc.metrics, rc.difficulties, rc.interpolation, rc.projection);
  fs::create_directories(out);
  cloudio::atomic_write(out / "metrics.csv", eval::to_csv(report));
  cloudio::atomic_write(out / "metrics.json", eval::to_json(report));
  for (const auto& s : scenes) cloudio::atomic_write(out / (s.id + ".bev.svg"), render::bev_svg(s.truths, s.dets));
  log << eval::to_csv(report);
  return report;
}

demo::DemoResult distill_demo(const config::RunConfig& rc, const fs::path& out, std::ostream& log) {
  micronet::ScriptedTeacher teacher;
  const auto res = demo::run_distill_demo(rc, teacher, [&](int step, double loss) {
    log << "step " << step << " loss " << format_loss(loss) << "\n";
  });
  log << "final loss " << format_loss(res.final_loss) << " (" << res.used << " of " << res.proposals
      << " proposals outside the band)\n";
  if (!out.empty()) {
    fs::create_directories(out);
    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < res.losses.size(); ++i) csv += std::to_string(i) + "," + format_loss(res.losses[i]) + "\n";
    csv += std::to_string(res.losses.size()) + "," + format_loss(res.final_loss) + "\n";
    cloudio::atomic_write(out / "loss.csv", csv);
  }
  return res;
}

void render(const config::RunConfig& rc, const std::optional<fs::path>& dets_dir, const fs::path& out,
            std::ostream& log) {
  const auto scans = load_scans(rc);
  fs::create_directories(out);
  for (const auto& scan : scans) {
    const auto map = frontview::build_map(scan.cloud, rc.projection);
    frontview::write_channel_pgms(map, out / scan.id);
    std::vector<geometry::Proposal> dets;
    if (dets_dir) dets = cloudio::read_detections(*dets_dir / (scan.id + kDetsSuffix));
    const std::vector<cloudio::TruthObject> none;
    const auto& truth = scan.truth ? *scan.truth : none;
    cloudio::atomic_write(out / (scan.id + ".bev.svg"), render::bev_svg(truth, dets, &scan.cloud));
    log << scan.id << " rendered\n";
  }
}

}  // namespace anchorvote::app
