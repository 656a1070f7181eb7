#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "anchorvote/cloudio.hpp"
#include "anchorvote/config.hpp"
#include "anchorvote/demo.hpp"
#include "anchorvote/error.hpp"
#include "anchorvote/eval.hpp"
#include "anchorvote/frontview.hpp"
#include "anchorvote/geometry.hpp"
#include "anchorvote/micronet/viewpoint.hpp"
#include "anchorvote/render.hpp"
#include "anchorvote/uvpm.hpp"

namespace py = pybind11;
using namespace anchorvote;

namespace {

py::tuple vec3(const geometry::Vec3& v) { return py::make_tuple(v.x, v.y, v.z); }

geometry::Vec3 to_vec3(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

}  // namespace

PYBIND11_MODULE(_anchorvote, m) {
  m.doc() = "anchorvote native core";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<MalformedFileError>(m, "MalformedFileError", base.ptr());
  py::register_exception<SchemaMismatchError>(m, "SchemaMismatchError", base.ptr());
  py::register_exception<InvalidArgumentError>(m, "InvalidArgumentError", base.ptr());
  py::register_exception<ShapeMismatchError>(m, "ShapeMismatchError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<UndefinedApError>(m, "UndefinedApError", base.ptr());

  py::class_<geometry::Box3D>(m, "Box3D")
      .def(py::init([](std::array<double, 3> c, std::array<double, 3> s, double yaw) {
             return geometry::Box3D(to_vec3(c), to_vec3(s), yaw);
           }),
           py::arg("center"), py::arg("size"), py::arg("yaw") = 0.0)
      .def_property_readonly("center", [](const geometry::Box3D& b) { return vec3(b.center); })
      .def_property_readonly("size", [](const geometry::Box3D& b) { return vec3(b.scale); })
      .def_readonly("yaw", &geometry::Box3D::yaw)
      .def("volume", &geometry::Box3D::volume)
      .def("corners", [](const geometry::Box3D& b) {
        py::list out;
        for (const auto& c : b.corners()) out.append(vec3(c));
        return out;
      })
      .def("__repr__", [](const geometry::Box3D& b) {
        return "Box3D(center=(" + std::to_string(b.center.x) + ", " + std::to_string(b.center.y) + ", " +
               std::to_string(b.center.z) + "), yaw=" + std::to_string(b.yaw) + ")";
      });

  py::class_<geometry::Proposal>(m, "Proposal")
      .def(py::init<>())
      .def_readwrite("box", &geometry::Proposal::box)
      .def_readwrite("score", &geometry::Proposal::score)
      .def_readwrite("class_probs", &geometry::Proposal::class_probs)
      .def_readwrite("source_anchor", &geometry::Proposal::source_anchor);

  m.def("contains", [](const geometry::Box3D& b, std::array<double, 3> p) { return geometry::contains(b, to_vec3(p)); });
  m.def("iou_bev", &geometry::iou_bev);
  m.def("iou_3d", &geometry::iou_3d);
  m.def("iou_3d_oracle", &geometry::iou_3d_oracle, py::arg("a"), py::arg("b"), py::arg("n_samples") = 1000000,
        py::arg("seed") = 0);
  m.def(
      "nms",
      [](const std::vector<geometry::Proposal>& props, double thr, const std::string& mode) {
        const auto md = mode == "3d" ? geometry::NmsMode::k3d : geometry::NmsMode::kBev;
        if (mode != "3d" && mode != "bev") throw InvalidArgumentError("nms mode must be 'bev' or '3d'");
        return geometry::nms_indices(props, thr, md);
      },
      py::arg("proposals"), py::arg("threshold"), py::arg("mode") = "bev");

  py::class_<cloudio::TruthObject>(m, "TruthObject")
      .def_readonly("box", &cloudio::TruthObject::box)
      .def_readonly("label", &cloudio::TruthObject::label)
      .def_property_readonly("difficulty",
                             [](const cloudio::TruthObject& t) { return eval::to_string(eval::difficulty_bin(t)); });

  py::class_<cloudio::SyntheticScene>(m, "SyntheticScene")
      .def_property_readonly("points",
                             [](const cloudio::SyntheticScene& s) {
                               py::list out;
                               for (const auto& p : s.cloud.points) out.append(py::make_tuple(p.x, p.y, p.z, p.intensity));
                               return out;
                             })
      .def_property_readonly("n_points", [](const cloudio::SyntheticScene& s) { return s.cloud.size(); })
      .def_readonly("truth", &cloudio::SyntheticScene::truth);

  m.def(
      "generate_scene",
      [](std::uint64_t seed, int n_objects) {
        cloudio::SceneParams p;
        p.rng_seed = seed;
        p.n_objects = n_objects;
        return cloudio::generate_scene(p);
      },
      py::arg("seed") = 42, py::arg("n_objects") = 3);

  m.def(
      "occupancy",
      [](const cloudio::SyntheticScene& s) {
        return frontview::build_map(s.cloud, frontview::ProjectionConfig{}).occupied_count();
      },
      "Occupied front-view cells at the default resolution.");

  m.def(
      "propose",
      [](const cloudio::SyntheticScene& s, const std::string& mode, const std::string& vote, double delta) {
        uvpm::UvpmConfig cfg;
        if (mode == "upm") {
          cfg.mode = uvpm::Mode::kUpm;
        } else if (mode != "uvpm") {
          throw InvalidArgumentError("mode must be 'uvpm' or 'upm'");
        }
        if (vote == "learned") {
          cfg.vote = uvpm::VoteMode::kLearned;
        } else if (vote != "geometric") {
          throw InvalidArgumentError("vote must be 'geometric' or 'learned'");
        }
        cfg.delta = delta;
        const frontview::ProjectionConfig proj;
        return uvpm::propose(s.cloud, frontview::build_map(s.cloud, proj), proj, cfg).proposals;
      },
      py::arg("scene"), py::arg("mode") = "uvpm", py::arg("vote") = "geometric", py::arg("delta") = 0.3);

  m.def(
      "average_precision",
      [](const std::vector<std::pair<double, bool>>& dets, std::size_t n_truth, int points) {
        eval::MatchResult r;
        r.n_truth = n_truth;
        for (std::size_t i = 0; i < dets.size(); ++i) r.dets.push_back({i, dets[i].first, dets[i].second, -1});
        const std::vector<eval::MatchResult> rs{r};
        if (points != 11 && points != 40) throw InvalidArgumentError("points must be 11 or 40");
        return eval::average_precision(rs, points == 11 ? eval::Interpolation::k11 : eval::Interpolation::k40);
      },
      py::arg("detections"), py::arg("n_truth"), py::arg("points") = 11,
      "AP of (score, is_true_positive) pairs against n_truth objects.");

  m.def(
      "evaluate_csv",
      [](const std::vector<geometry::Proposal>& dets, const std::vector<cloudio::TruthObject>& truth) {
        const std::vector<eval::Scene> scenes{{"scene", dets, truth}};
        const std::vector<double> ious{0.3, 0.5};
        const std::vector<eval::Metric> metrics{eval::Metric::k2d, eval::Metric::kBird, eval::Metric::k3d};
        const std::vector<eval::Difficulty> diffs{eval::Difficulty::kEasy, eval::Difficulty::kModerate,
                                                  eval::Difficulty::kHard, eval::Difficulty::kAll};
        return eval::to_csv(eval::make_report(scenes, ious, metrics, diffs, eval::Interpolation::k11));
      },
      py::arg("detections"), py::arg("truth"));

  m.def("viewpoint_encode", [](double yaw) {
    const auto c = micronet::viewpoint_encode(yaw);
    return py::make_tuple(c.bin, c.residual);
  });
  m.def("viewpoint_decode", [](int bin, double residual) { return micronet::viewpoint_decode({bin, residual}); });

  m.def(
      "distill_demo",
      [](int steps, double lr, std::uint64_t seed) {
        config::RunConfig rc;
        rc.distill.steps = steps;
        rc.distill.lr = lr;
        rc.distill.seed = seed;
        const micronet::ScriptedTeacher teacher;
        py::gil_scoped_release release;
        const auto res = demo::run_distill_demo(rc, teacher);
        return std::make_pair(res.losses, res.final_loss);
      },
      py::arg("steps") = 200, py::arg("lr") = 1e-3, py::arg("seed") = 7,
      "Returns (loss before each step, final loss).");

  m.def("bev_svg", [](const cloudio::SyntheticScene& s, const std::vector<geometry::Proposal>& dets) {
    return render::bev_svg(s.truth, dets, &s.cloud);
  });

  m.def("parse_config_keys", &config::parse_key_values);
}
