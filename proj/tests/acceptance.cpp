// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "anchorvote/cloudio.hpp"
#include "anchorvote/config.hpp"
#include "anchorvote/demo.hpp"
#include "anchorvote/eval.hpp"
#include "anchorvote/frontview.hpp"
#include "anchorvote/geometry.hpp"
#include "anchorvote/micronet/attention.hpp"
#include "anchorvote/micronet/distill.hpp"
#include "anchorvote/micronet/fusion.hpp"
#include "anchorvote/micronet/layers.hpp"
#include "anchorvote/micronet/ops.hpp"
#include "anchorvote/micronet/viewpoint.hpp"
#include "anchorvote/uvpm.hpp"
#include "oracles.hpp"

using namespace anchorvote;
using namespace anchorvote::micronet;
using geometry::Box3D;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kIouTolerance = 0.01;
constexpr std::size_t kIouSamples = 1000000;
constexpr double kIouSeconds = 60.0;
constexpr double kAttentionTolerance = 1e-12;
constexpr double kRowSumTolerance = 1e-9;
constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 30.0;
constexpr double kRecallTarget = 0.9;
constexpr double kRecallIou = 0.3;
constexpr double kDensityTolerance = 0.15;
constexpr double kViewpointTolerance = 1e-12;
constexpr double kDemoRatio = 0.5;

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> d(numel(shape));
  for (auto& x : d) x = u(rng);
  return Tensor::parameter(std::move(shape), std::move(d));
}

Tensor probe(const Tensor& t) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(t.numel());
  for (auto& x : w) x = u(rng);
  return sum(mul(reshape(t, {t.numel()}), Tensor::constant({t.numel()}, w)));
}

void criterion_1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> pos(-1.5, 1.5), size(0.5, 4.0), yaw(-std::numbers::pi, std::numbers::pi);
  double worst = 0.0;
  int overlapping = 0;
  for (int i = 0; i < 200; ++i) {
    const Box3D a({pos(rng), pos(rng), 0.3 * pos(rng)}, {size(rng), size(rng), size(rng)}, yaw(rng));
    const Box3D b({pos(rng), pos(rng), 0.3 * pos(rng)}, {size(rng), size(rng), size(rng)}, yaw(rng));
    const double got = geometry::iou_3d(a, b);
    overlapping += got > 0.0 ? 1 : 0;
    worst = std::max(worst, std::abs(got - oracle::mc_iou_3d(a, b, kIouSamples, 7000 + i)));
  }
  const double secs = seconds_since(t0);
  report(1, worst <= kIouTolerance && secs < kIouSeconds,
         fmt("200 pairs, max |iou_3d - MC| = %.4g (tol %.2g), %.1f s", worst, kIouTolerance, secs) + ", " +
             std::to_string(overlapping) + " overlapping");
}

void criterion_2() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> dim(1, 8);
  double worst = 0.0, worst_row = 0.0;
  bool perm_exact = true;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = dim(rng), m = dim(rng), dk = dim(rng), dv = dim(rng);
    const auto q = random_tensor({n, dk}, rng, -2, 2), k = random_tensor({m, dk}, rng, -2, 2),
               v = random_tensor({m, dv}, rng);
    oracle::Mat qm(n, std::vector<double>(dk)), km(m, std::vector<double>(dk)), vm(m, std::vector<double>(dv));
    for (std::size_t i = 0; i < n * dk; ++i) qm[i / dk][i % dk] = q[i];
    for (std::size_t i = 0; i < m * dk; ++i) km[i / dk][i % dk] = k[i];
    for (std::size_t i = 0; i < m * dv; ++i) vm[i / dv][i % dv] = v[i];
    const auto out = attention(q, k, v);
    const auto ref = oracle::dense_attention(qm, km, vm);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < dv; ++j) worst = std::max(worst, std::abs(out[i * dv + j] - ref[i][j]));
    }
    // With V = I the output rows are the attention weights.
    std::vector<double> eye(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) eye[i * m + i] = 1.0;
    const auto w = attention(q, k, Tensor::constant({m, m}, eye));
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += w[i * m + j];
      worst_row = std::max(worst_row, std::abs(s - 1.0));
    }
    std::vector<std::int64_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto permuted = attention(q, gather_rows(k, perm), gather_rows(v, perm));
    perm_exact = perm_exact && std::equal(out.data().begin(), out.data().end(), permuted.data().begin());
  }
  report(2, worst <= kAttentionTolerance && worst_row <= kRowSumTolerance && perm_exact,
         fmt("50 instances, max |attn - dense| = %.3g, max |row sum - 1| = %.3g", worst, worst_row) +
             ", K/V permutation " + (perm_exact ? "bit-identical" : "NOT identical"));
}

void criterion_3() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(303);
  std::vector<std::pair<std::string, double>> errs;

  auto q = random_tensor({4, 3}, rng), k = random_tensor({5, 3}, rng), v = random_tensor({5, 2}, rng);
  errs.push_back({"attention", oracle::max_grad_error([&] { return probe(attention(q, k, v)); }, {q, k, v})});

  auto x = random_tensor({4, 6}, rng);
  const auto ap = AttentionParams::random(6, 2, 3, 3, rng, 0.5);
  std::vector<Tensor> mh{x, ap.w_o};
  for (std::size_t h = 0; h < ap.heads; ++h) {
    mh.push_back(ap.w_q[h]);
    mh.push_back(ap.w_k[h]);
    mh.push_back(ap.w_v[h]);
  }
  errs.push_back({"multi_head", oracle::max_grad_error([&] { return probe(multi_head(x, x, ap)); }, mh)});

  auto fmap = random_tensor({6, 7, 3}, rng);
  const geometry::Rect2D roi{{3.2, 2.7}, 4.5, 3.0, 0.4};
  errs.push_back({"roi_align", oracle::max_grad_error([&] { return probe(roi_align(fmap, roi, 3)); }, {fmap})});

  const std::vector<std::size_t> widths{6, 4};
  Mlp mlp(5, widths, rng, false);
  auto xin = random_tensor({7, 5}, rng);
  std::vector<Tensor> mp{xin};
  for (const auto& l : mlp.layers) {
    mp.push_back(l.weight);
    mp.push_back(l.bias);
  }
  errs.push_back({"mlp", oracle::max_grad_error([&] { return probe(mlp.forward(xin)); }, mp)});

  auto logits = random_tensor({6, 1}, rng, -2, 2);
  const std::vector<double> teacher{0.9, 0.5, 0.1, 0.75, 0.29, 0.6};
  errs.push_back({"distill_loss", oracle::max_grad_error(
                                      [&] { return distill_loss(sigmoid(logits), teacher, DistillBand{}).loss; },
                                      {logits})});

  const auto cfg = FusionConfig::toy();
  FusionNet net(cfg, 3);
  const auto image = random_tensor({16, 16, 3}, rng, 0, 1);
  const std::vector<geometry::Rect2D> rects{{{7.5, 7.5}, 8, 6, 0}, {{5, 9}, 4, 4, 0.3}, {{11, 4}, 5, 3, 0}};
  const std::vector<double> tconf{0.95, 0.1, 0.8};
  const std::vector<std::size_t> bins{3, 0, 12};
  std::vector<Tensor> fp;
  for (const auto& [name, t] : net.parameters()) fp.push_back(t);
  fp.push_back(image);
  errs.push_back({"fusion", oracle::max_grad_error(
                                [&] {
                                  const auto out = net.forward(image, rects, true, 17);
                                  return add(distill_loss(net.foreground_prob(out), tconf, DistillBand{}).loss,
                                             cross_entropy_rows(out.rotation_logits, bins));
                                },
                                fp)});
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string detail;
  for (const auto& [name, e] : errs) {
    worst = std::max(worst, e);
    detail += name + "=" + fmt("%.2g", e) + " ";
  }
  report(3, worst <= kGradTolerance && secs < kGradSeconds, detail + fmt("(tol %.0e), %.1f s", kGradTolerance, secs));
}

void criterion_4() {
  const frontview::ProjectionConfig cfg;
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> th(-0.8, 0.8), ph(-0.45, 0.04), r(0.5, 120.0), s(1e-3, 1e3);
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const double t = th(rng), p = ph(rng), rr = r(rng), k = s(rng);
    const geometry::Vec3 a{rr * std::cos(p) * std::cos(t), rr * std::cos(p) * std::sin(t), rr * std::sin(p)};
    const auto ga = frontview::grid_coord(a, cfg);
    const auto gb = frontview::grid_coord({a.x * k, a.y * k, a.z * k}, cfg);
    mismatches += (ga.row != gb.row || ga.col != gb.col) ? 1 : 0;
  }
  cloudio::SceneParams sp;
  sp.rng_seed = 42;
  const auto scene = cloudio::generate_scene(sp);
  const auto map = frontview::build_map(scene.cloud, cfg);
  std::vector<std::uint8_t> want(map.occupied.size(), 0);
  for (const auto& pt : scene.cloud.points) {
    int row = 0, col = 0;
    if (oracle::fv_cell(pt.xyz(), cfg, row, col)) want[static_cast<std::size_t>(row) * map.cols + col] = 1;
  }
  const bool same = want == map.occupied;
  report(4, mismatches == 0 && same,
         std::to_string(mismatches) + " index mismatches over 10^4 scaled rays; seed-42 occupancy " +
             (same ? "equals" : "DIFFERS from") + " brute force (" + std::to_string(map.occupied_count()) +
             " cells)");
}

std::pair<std::size_t, std::vector<std::vector<geometry::Proposal>>> recall_run() {
  std::size_t hit = 0;
  std::vector<std::vector<geometry::Proposal>> all;
  const frontview::ProjectionConfig proj;
  const uvpm::UvpmConfig cfg;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    cloudio::SceneParams sp;
    sp.rng_seed = seed;
    sp.n_objects = 3;
    const auto scene = cloudio::generate_scene(sp);
    const auto res = uvpm::propose(scene.cloud, frontview::build_map(scene.cloud, proj), proj, cfg);
    for (const auto& t : scene.truth) {
      bool found = false;
      for (const auto& p : res.proposals) found = found || geometry::iou_bev(p.box, t.box) >= kRecallIou;
      hit += found ? 1 : 0;
    }
    all.push_back(res.proposals);
  }
  return {hit, all};
}

void criterion_5() {
  const auto [hit, first] = recall_run();
  const auto [hit2, second] = recall_run();
  const double recall = static_cast<double>(hit) / 60.0;
  const bool deterministic = first == second && hit == hit2;
  std::size_t total = 0;
  for (const auto& v : first) total += v.size();
  report(5, recall >= kRecallTarget && deterministic,
         fmt("recall %.4f (%.0f/60) at BEV IoU >= 0.3 with %.0f proposals", recall, static_cast<double>(hit),
             static_cast<double>(total)) +
             (deterministic ? ", identical across two runs" : ", NOT deterministic"));
}

void criterion_6() {
  const frontview::ProjectionConfig proj;
  std::vector<double> d;
  for (double x : {10.0, 20.0}) {
    cloudio::SceneParams sp;
    sp.rng_seed = 6;
    sp.fixed_objects = {Box3D({x, 0.0, -1.0}, {3.9, 1.6, 1.56}, 0.0)};
    const auto scene = cloudio::generate_scene(sp);
    d.push_back(uvpm::density(scene.truth[0].box, frontview::build_map(scene.cloud, proj), proj, 16).value_or(-1.0));
  }
  const double diff = std::abs(d[0] - d[1]);
  report(6, d[0] >= 0.0 && d[1] >= 0.0 && diff <= kDensityTolerance,
         fmt("D(10 m) = %.4f, D(20 m) = %.4f, |diff| = %.4f", d[0], d[1], diff) + fmt(" (tol %.2f)", kDensityTolerance));
}

void criterion_7() {
  std::vector<double> s11, s40;
  for (int k = 0; k <= 10; ++k) s11.push_back(k / 10.0);
  for (int k = 1; k <= 40; ++k) s40.push_back(k / 40.0);
  std::mt19937_64 rng(707);
  std::uniform_int_distribution<int> n_det(0, 20), n_truth(1, 15), coin(0, 2), score(0, 19);
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = n_det(rng);
    const std::size_t nt = static_cast<std::size_t>(n_truth(rng));
    eval::MatchResult r;
    r.n_truth = nt;
    std::vector<std::pair<double, bool>> d;
    std::size_t tps = 0;
    for (int i = 0; i < n; ++i) {
      const bool tp = coin(rng) > 0 && tps < nt;
      tps += tp ? 1 : 0;
      const double sc = score(rng) / 20.0;
      d.push_back({sc, tp});
      r.dets.push_back({static_cast<std::size_t>(i), sc, tp, tp ? 0 : -1});
    }
    const std::vector<eval::MatchResult> rs{r};
    bad += std::abs(eval::average_precision(rs, eval::Interpolation::k11) - oracle::exhaustive_ap(d, nt, s11)) > 1e-12;
    bad += std::abs(eval::average_precision(rs, eval::Interpolation::k40) - oracle::exhaustive_ap(d, nt, s40)) > 1e-12;
  }
  // Hand case: ranked TP, FP, TP, TP against four truths.
  eval::MatchResult hand;
  hand.n_truth = 4;
  hand.dets = {{0, 0.9, true, 0}, {1, 0.8, false, -1}, {2, 0.7, true, 1}, {3, 0.6, true, 2}};
  const std::vector<eval::MatchResult> hs{hand};
  const double a11 = eval::average_precision(hs, eval::Interpolation::k11);
  const double a40 = eval::average_precision(hs, eval::Interpolation::k40);
  const bool hand_ok = a11 == 6.75 / 11.0 && a40 == 25.0 / 40.0;
  report(7, bad == 0 && hand_ok,
         std::to_string(bad) + " mismatches in 2 x 1000 randomized trials; hand case AP11 = " + fmt("%.10g", a11) +
             " (6.75/11), AP40 = " + fmt("%.10g", a40) + " (25/40)");
}

void criterion_8() {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> pos(0.0, 20.0), size(1.0, 5.0), yaw(-3.0, 3.0);
  std::uniform_int_distribution<int> score(0, 30);
  int bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<geometry::Proposal> props(50);
    std::vector<double> scores;
    for (auto& p : props) {
      p.box = Box3D({pos(rng), pos(rng), 0.0}, {size(rng), size(rng), 1.5}, yaw(rng));
      p.score = score(rng) / 30.0;
      scores.push_back(p.score);
    }
    const double thr = trial % 2 == 0 ? 0.1 : 0.5;
    const auto got = geometry::nms_indices(props, thr, geometry::NmsMode::kBev);
    const auto want = oracle::nms_reference(
        scores, [&](std::size_t i, std::size_t j) { return geometry::iou_bev(props[i].box, props[j].box); }, thr);
    bad += got != want;
  }
  report(8, bad == 0, std::to_string(bad) + " of 100 random 50-proposal sets differ from the O(n^2) reference");
}

void criterion_9() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(-4 * std::numbers::pi, 4 * std::numbers::pi);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double yaw = u(rng);
    worst = std::max(worst, std::abs(viewpoint_decode(viewpoint_encode(yaw)) - wrap_two_pi(yaw)));
  }
  report(9, worst <= kViewpointTolerance && kViewpointBins == 16,
         fmt("1000 yaws, max round-trip error %.3g, %.0f bins", worst, kViewpointBins));
}

void criterion_10() {
  const auto t0 = Clock::now();
  const config::RunConfig rc;
  const ScriptedTeacher teacher;
  const auto res = demo::run_distill_demo(rc, teacher);
  const double initial = res.losses.empty() ? 0.0 : res.losses.front();
  const bool halved = !res.losses.empty() && res.final_loss < kDemoRatio * initial;

  // All teacher scores inside the band: every parameter gradient is exactly 0.
  FusionConfig fc;
  FusionNet net(fc, rc.distill.seed);
  const auto batch = demo::make_batch(rc, teacher);
  std::vector<double> ambiguous(batch.image_rects.size());
  for (std::size_t i = 0; i < ambiguous.size(); ++i) ambiguous[i] = 0.31 + 0.38 * i / ambiguous.size();
  net.parameters().zero_grad();
  const auto term = distill_loss(net.foreground_prob(net.forward(batch.image, batch.image_rects)), ambiguous,
                                 rc.distill.band);
  backward(term.loss);
  bool zero = term.used == 0;
  for (const auto& [name, t] : net.parameters()) {
    for (double g : t.grad()) zero = zero && g == 0.0;
  }
  report(10, halved && zero,
         fmt("seed 7, 200 steps: loss %.6g -> %.6g (ratio %.3g", initial, res.final_loss,
             initial > 0 ? res.final_loss / initial : 0.0) +
             fmt(", need < %.2f); in-band gradients ", kDemoRatio) + (zero ? "all exactly 0" : "NONZERO") +
             fmt("; %.1f s", seconds_since(t0)));
}

void criterion_11() {
  const VoteStackConfig cfg;
  const VoteStack stack(cfg, 11);
  std::mt19937_64 rng(1111);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  PointSet in;
  for (int i = 0; i < 2048; ++i) in.xyz.push_back({u(rng), u(rng) - 5.0, 0.1 * u(rng)});
  std::vector<double> feats(2048 * cfg.in_channels, 0.0);
  for (std::size_t i = 0; i < 2048; ++i) feats[i * cfg.in_channels] = u(rng) / 10.0;
  in.features = Tensor::constant({2048, cfg.in_channels}, feats);
  const auto out = stack.forward(in);
  const bool ok = out.rank() == 2 && out.dim(0) == 2048 && out.dim(1) == 4;
  report(11, ok, "vote tensor shape " + shape_str(out.shape()) + " (expected (2048, 4))");
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> all{criterion_1, criterion_2, criterion_3, criterion_4,
                                               criterion_5, criterion_6, criterion_7, criterion_8,
                                               criterion_9, criterion_10, criterion_11};
  for (std::size_t i = 0; i < all.size(); ++i) {
    try {
      all[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, all.size());
  return failures == 0 ? 0 : 1;
}
