#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "anchorvote/cloudio.hpp"
#include "anchorvote/config.hpp"
#include "anchorvote/demo.hpp"
#include "anchorvote/eval.hpp"

namespace anchorvote::app {

struct Scan {
  std::string id;
  cloudio::PointCloud cloud;
  std::optional<std::vector<cloudio::TruthObject>> truth;
};

// Synthetic runs produce scenes "synthetic_<seed>" for rc.scenes consecutive
// seeds. A .bin input (or every .bin in a directory, sorted) uses the file
// stem as id and picks up a sibling <stem>.truth.txt when present.
std::vector<Scan> load_scans(const config::RunConfig& rc);

std::string synthetic_id(std::uint64_t seed);

struct ProjectStat {
  std::string id;
  std::size_t occupied = 0;
};

// Per scan: <out>/<id>.{height,distance,intensity}.pgm and one line
// "<id> occupied=N" in <out>/occupancy.txt and on `log`.
std::vector<ProjectStat> project(const config::RunConfig& rc, const std::filesystem::path& out, std::ostream& log);

struct ProposeStat {
  std::string id;
  std::size_t detections = 0;
};

// Per scan: <out>/<id>.dets.txt, and <out>/<id>.truth.txt when truth exists.
std::vector<ProposeStat> propose(const config::RunConfig& rc, const std::filesystem::path& out, std::ostream& log);

// Pairs <id>.dets.txt in dets_dir with <id>.truth.txt in truth_dir; the id
// sets must match. Writes metrics.csv, metrics.json and <id>.bev.svg to out.
eval::Report evaluate(const config::RunConfig& rc, const std::filesystem::path& dets_dir,
                      const std::filesystem::path& truth_dir, const std::filesystem::path& out, std::ostream& log);

// Prints "step k loss v" per step and a summary line; writes loss.csv when
// out is non-empty.
demo::DemoResult distill_demo(const config::RunConfig& rc, const std::filesystem::path& out, std::ostream& log);

// Per scan: channel PGMs plus <id>.bev.svg with the cloud, truth and, when
// dets_dir is given, <id>.dets.txt from it.
void render(const config::RunConfig& rc, const std::optional<std::filesystem::path>& dets_dir,
            const std::filesystem::path& out, std::ostream& log);

}  // namespace anchorvote::app
