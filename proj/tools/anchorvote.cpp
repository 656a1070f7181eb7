#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "anchorvote/app.hpp"
#include "anchorvote/config.hpp"
#include "anchorvote/error.hpp"

namespace fs = std::filesystem;
using namespace anchorvote;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUndefinedAp = 3;
constexpr int kExitDemoCheck = 4;

struct Options {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string vote;
  std::string input;
  std::vector<std::string> set;
};

// Config file entries first, then --set key=value, then the dedicated flags.
config::RunConfig build_config(const Options& o, const std::map<std::string, std::string>& flag_keys) {
  std::map<std::string, std::string> kv;
  if (!o.config.empty()) kv = config::parse_key_values(cloudio::read_text(o.config));
  for (const auto& s : o.set) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw InvalidArgumentError("--set expects key=value, got '" + s + "'");
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t");
      const auto e = v.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    kv[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
  }
  for (const auto& [k, v] : flag_keys) kv[k] = v;
  std::string text;
  for (const auto& [k, v] : kv) text += k + " = " + v + "\n";
  return config::parse_run_config(text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anchorvote: front-view projection, anchor-vote proposals, distillation demo and evaluation"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "flat key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--seed", o.seed, "scene seed (distill-demo: demo seed)");
    sub->add_option("--input", o.input, "\"synthetic\", a .bin scan or a directory of scans");
    sub->add_option("--set", o.set, "config override key=value (repeatable)");
  };
  auto* project = app.add_subcommand("project", "front-view maps and occupancy stats per scan");
  auto* propose = app.add_subcommand("propose", "anchor-vote proposals per scan");
  auto* evaluate = app.add_subcommand("evaluate", "AP table, CSV/JSON and BEV SVGs");
  auto* distill = app.add_subcommand("distill-demo", "train the student against the scripted teacher");
  auto* render = app.add_subcommand("render", "front-view PGMs and BEV SVG per scan");
  for (auto* sub : {project, propose, evaluate, distill, render}) common(sub);
  for (auto* sub : {propose, render}) {
    sub->add_option("--mode", o.mode, "proposal mode")->check(CLI::IsMember({"uvpm", "upm"}));
    sub->add_option("--vote", o.vote, "vote mode")->check(CLI::IsMember({"geometric", "learned"}));
  }
  std::string dets_dir, truth_dir;
  evaluate->add_option("--dets", dets_dir, "directory of <id>.dets.txt (default: --out)");
  evaluate->add_option("--truth", truth_dir, "directory of <id>.truth.txt (default: --dets)");
  render->add_option("--dets", dets_dir, "directory of <id>.dets.txt to overlay");
  std::optional<int> steps;
  std::optional<double> lr;
  distill->add_option("--steps", steps, "training steps");
  distill->add_option("--lr", lr, "Adam learning rate");

  CLI11_PARSE(app, argc, argv);

  try {
    std::map<std::string, std::string> flags;
    if (!o.input.empty()) flags["input"] = o.input;
    if (!o.mode.empty()) flags["uvpm.mode"] = o.mode;
    if (!o.vote.empty()) flags["uvpm.vote"] = o.vote;
    if (o.seed) flags[distill->parsed() ? "distill.seed" : "seed"] = std::to_string(*o.seed);
    if (steps) flags["distill.steps"] = std::to_string(*steps);
    if (lr) {
      std::ostringstream s;
      s.precision(17);
      s << *lr;
      flags["distill.lr"] = s.str();
    }
    const config::RunConfig rc = build_config(o, flags);
    const fs::path out(o.out);

    if (project->parsed()) {
      app::project(rc, out, std::cout);
    } else if (propose->parsed()) {
      app::propose(rc, out, std::cout);
    } else if (evaluate->parsed()) {
      const fs::path dets = dets_dir.empty() ? out : fs::path(dets_dir);
      const fs::path truth = truth_dir.empty() ? dets : fs::path(truth_dir);
      app::evaluate(rc, dets, truth, out, std::cout);
    } else if (distill->parsed()) {
      const auto res = app::distill_demo(rc, out, std::cout);
      if (!res.losses.empty() && rc.distill.lr > 0.0 && res.used > 0 && !(res.final_loss < res.losses.front())) {
        std::cerr << "error: final loss did not fall below the initial loss\n";
        return kExitDemoCheck;
      }
    } else if (render->parsed()) {
      std::optional<fs::path> dets;
      if (!dets_dir.empty()) dets = fs::path(dets_dir);
      app::render(rc, dets, out, std::cout);
    }
  } catch (const UndefinedApError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUndefinedAp;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
