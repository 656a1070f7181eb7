#include "anchorvote/cloudio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <sstream>

#include "anchorvote/error.hpp"

namespace anchorvote::cloudio {

namespace fs = std::filesystem;
using geometry::Box3D;
using geometry::Vec3;

namespace {

float decode_f32_le(const unsigned char* b) {
  const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                             (static_cast<std::uint32_t>(b[2]) << 16) |
                             (static_cast<std::uint32_t>(b[3]) << 24);
  return std::bit_cast<float>(bits);
}

void encode_f32_le(float v, std::string& out) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& tok, const fs::path& path, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (tok.empty() || end != tok.c_str() + tok.size()) {
    throw MalformedFileError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
  }
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  return {std::istream_iterator<std::string>(is), std::istream_iterator<std::string>()};
}

std::vector<std::string> body_lines(const fs::path& path, const char* header) {
  const std::string text = read_text(path);
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != header) {
    throw SchemaMismatchError(path.string() + ": expected header '" + header + "'");
  }
  std::vector<std::string> out;
  while (std::getline(is, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// Ray/box slab test in the box frame. Returns the entry and exit distances.
bool intersect_box(const Box3D& box, const Vec3& dir, double& t_near, double& t_far) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  // Sensor sits at the origin.
  const double ox = -box.center.x;
  const double oy = -box.center.y;
  const double o[3] = {c * ox + s * oy, -s * ox + c * oy, -box.center.z};
  const double d[3] = {c * dir.x + s * dir.y, -s * dir.x + c * dir.y, dir.z};
  const double half[3] = {0.5 * box.scale.x, 0.5 * box.scale.y, 0.5 * box.scale.z};
  t_near = -std::numeric_limits<double>::infinity();
  t_far = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (std::abs(o[k]) > half[k]) return false;
      continue;
    }
    double t0 = (-half[k] - o[k]) / d[k];
    double t1 = (half[k] - o[k]) / d[k];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  return t_near <= t_far && t_near > 0.0;
}

// Pulls a point into the box (with a small inset) so containment is exact.
Vec3 clamp_into(const Box3D& box, const Vec3& p) {
  constexpr double kInset = 1e-6;
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double dx = p.x - box.center.x;
  const double dy = p.y - box.center.y;
  double lx = c * dx + s * dy;
  double ly = -s * dx + c * dy;
  double lz = p.z - box.center.z;
  lx = std::clamp(lx, -0.5 * box.scale.x + kInset, 0.5 * box.scale.x - kInset);
  ly = std::clamp(ly, -0.5 * box.scale.y + kInset, 0.5 * box.scale.y - kInset);
  lz = std::clamp(lz, -0.5 * box.scale.z + kInset, 0.5 * box.scale.z - kInset);
  return {box.center.x + c * lx - s * ly, box.center.y + s * lx + c * ly, box.center.z + lz};
}

struct ScanResult {
  std::vector<std::vector<Vec3>> hits;  // per box, entry/exit pairs
  std::vector<std::size_t> rays_total;  // rays crossing each box
  std::vector<std::size_t> rays_blocked;  // of those, rays stopped by another box first
};

// Casts the scanner beam grid. The nearest box on each beam reports both its
// entry and exit point so the whole footprint is sampled.
ScanResult scan_boxes(const SceneParams& p, const std::vector<Box3D>& boxes) {
  ScanResult out;
  out.hits.resize(boxes.size());
  out.rays_total.assign(boxes.size(), 0);
  out.rays_blocked.assign(boxes.size(), 0);
  const auto n_theta = static_cast<long>(std::floor((p.scan_theta_max - p.scan_theta_min) / p.scan_delta_theta));
  const auto n_phi = static_cast<long>(std::floor((p.scan_phi_max - p.scan_phi_min) / p.scan_delta_phi));
  std::vector<double> t_in(boxes.size());
  std::vector<double> t_out(boxes.size());
  std::vector<char> hit(boxes.size());
  for (long i = 0; i < n_phi; ++i) {
    const double phi = p.scan_phi_min + (static_cast<double>(i) + 0.5) * p.scan_delta_phi;
    for (long j = 0; j < n_theta; ++j) {
      const double theta = p.scan_theta_min + (static_cast<double>(j) + 0.5) * p.scan_delta_theta;
      const Vec3 dir{std::cos(phi) * std::cos(theta), std::cos(phi) * std::sin(theta), std::sin(phi)};
      long nearest = -1;
      for (std::size_t b = 0; b < boxes.size(); ++b) {
        hit[b] = intersect_box(boxes[b], dir, t_in[b], t_out[b]) ? 1 : 0;
        if (hit[b] && (nearest < 0 || t_in[b] < t_in[static_cast<std::size_t>(nearest)])) {
          nearest = static_cast<long>(b);
        }
      }
      if (nearest < 0) continue;
      for (std::size_t b = 0; b < boxes.size(); ++b) {
        if (!hit[b]) continue;
        ++out.rays_total[b];
        if (static_cast<long>(b) != nearest) ++out.rays_blocked[b];
      }
      const auto nb = static_cast<std::size_t>(nearest);
      out.hits[nb].push_back({t_in[nb] * dir.x, t_in[nb] * dir.y, t_in[nb] * dir.z});
      out.hits[nb].push_back({t_out[nb] * dir.x, t_out[nb] * dir.y, t_out[nb] * dir.z});
    }
  }
  return out;
}

void check_params(const SceneParams& p) {
  if (p.points_per_object <= 0) throw InvalidArgumentError("points_per_object must be positive");
  if (p.n_objects < 0) throw InvalidArgumentError("n_objects must be non-negative");
  if (p.x_min < 0.0 || p.x_max > 70.0 || p.y_min < -35.0 || p.y_max > 35.0 || p.x_min >= p.x_max ||
      p.y_min >= p.y_max) {
    throw InvalidArgumentError("ground extent must lie within [0,70]x[-35,35] and be non-empty");
  }
  if (p.noise_sigma < 0.0 || p.n_ground_points < 0) throw InvalidArgumentError("negative scene parameter");
  if (!(p.scan_delta_theta > 0.0 && p.scan_delta_phi > 0.0)) {
    throw InvalidArgumentError("scanner resolution must be positive");
  }
}

Box3D inflate(const Box3D& b, double margin) {
  return Box3D(b.center, {b.scale.x + 2.0 * margin, b.scale.y + 2.0 * margin, b.scale.z}, b.yaw);
}

}  // namespace

void validate(const PointCloud& cloud) {
  for (const Point& p : cloud.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw InvalidArgumentError("point cloud holds a non-finite coordinate");
    }
    if (!(p.intensity >= 0.0 && p.intensity <= 1.0)) {
      throw InvalidArgumentError("point intensity outside [0, 1]");
    }
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

void atomic_write(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

PointCloud read_velodyne_bin(const fs::path& path) {
  const std::string bytes = read_text(path);
  if (bytes.size() % 16 != 0) {
    throw MalformedFileError(path.string() + ": length " + std::to_string(bytes.size()) +
                             " is not a multiple of 16 bytes");
  }
  PointCloud cloud;
  cloud.frame_id = path.stem().string();
  cloud.points.reserve(bytes.size() / 16);
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  for (std::size_t off = 0; off < bytes.size(); off += 16) {
    Point p{decode_f32_le(raw + off), decode_f32_le(raw + off + 4), decode_f32_le(raw + off + 8),
            decode_f32_le(raw + off + 12)};
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) || !std::isfinite(p.intensity)) {
      throw MalformedFileError(path.string() + ": non-finite value in record " + std::to_string(off / 16));
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

void write_velodyne_bin(const PointCloud& cloud, const fs::path& path) {
  std::string bytes;
  bytes.reserve(cloud.size() * 16);
  for (const Point& p : cloud.points) {
    encode_f32_le(static_cast<float>(p.x), bytes);
    encode_f32_le(static_cast<float>(p.y), bytes);
    encode_f32_le(static_cast<float>(p.z), bytes);
    encode_f32_le(static_cast<float>(p.intensity), bytes);
  }
  atomic_write(path, bytes);
}

SyntheticScene generate_scene(const SceneParams& p) {
  check_params(p);
  std::mt19937_64 rng(p.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  std::vector<Box3D> boxes;
  if (!p.fixed_objects.empty()) {
    boxes = p.fixed_objects;
  } else {
    constexpr int kMaxAttempts = 500;
    for (int k = 0; k < p.n_objects; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
        const double range = uniform(p.min_range, p.max_range);
        const double az = uniform(-p.max_azimuth, p.max_azimuth);
        Vec3 scale{p.prior_scale.x * (1.0 + uniform(-p.size_jitter, p.size_jitter)),
                   p.prior_scale.y * (1.0 + uniform(-p.size_jitter, p.size_jitter)),
                   p.prior_scale.z * (1.0 + uniform(-p.size_jitter, p.size_jitter))};
        const double yaw = uniform(-std::numbers::pi, std::numbers::pi);
        const Box3D cand({range * std::cos(az), range * std::sin(az), p.ground_z + 0.5 * scale.z}, scale, yaw);

        bool ok = true;
        for (const auto& c : cand.bev_corners()) {
          ok = ok && c.x >= p.x_min && c.x < p.x_max && c.y >= p.y_min && c.y < p.y_max;
        }
        for (const Box3D& other : boxes) {
          ok = ok && geometry::iou_bev(inflate(cand, 1.0), inflate(other, 1.0)) == 0.0;
        }
        if (!ok) continue;
        boxes.push_back(cand);
        const ScanResult scan = scan_boxes(p, boxes);
        for (const auto& h : scan.hits) {
          ok = ok && h.size() >= static_cast<std::size_t>(p.points_per_object);
        }
        if (ok) {
          placed = true;
        } else {
          boxes.pop_back();
        }
      }
      if (!placed) throw Error("could not place synthetic object " + std::to_string(k));
    }
  }

  SyntheticScene scene;
  scene.cloud.frame_id = "synthetic-" + std::to_string(p.rng_seed);
  const ScanResult scan = scan_boxes(p, boxes);
  std::normal_distribution<double> noise(0.0, p.noise_sigma);
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    for (const Vec3& h : scan.hits[b]) {
      Vec3 q = h;
      if (p.noise_sigma > 0.0) q = {q.x + noise(rng), q.y + noise(rng), q.z + noise(rng)};
      q = clamp_into(boxes[b], q);
      scene.cloud.points.push_back({q.x, q.y, q.z, uniform(0.1, 0.9)});
    }
  }
  for (int g = 0; g < p.n_ground_points; ++g) {
    const double x = uniform(p.x_min, p.x_max);
    const double y = uniform(p.y_min, p.y_max);
    const double intensity = uniform(0.0, 0.3);
    bool near_object = false;
    for (const Box3D& b : boxes) {
      near_object = near_object || geometry::contains(inflate(b, 1.0), {x, y, b.center.z});
    }
    if (near_object) continue;
    scene.cloud.points.push_back({x, y, p.ground_z, intensity});
  }

  for (std::size_t b = 0; b < boxes.size(); ++b) {
    TruthAnnotation ann;
    ann.height_px = p.focal_px * boxes[b].scale.z / std::max(boxes[b].center.x, 1.0);
    const double blocked = scan.rays_total[b] == 0
                               ? 1.0
                               : static_cast<double>(scan.rays_blocked[b]) / static_cast<double>(scan.rays_total[b]);
    ann.occlusion = blocked < 0.1 ? 0 : (blocked < 0.5 ? 1 : 2);
    int outside = 0;
    for (const Vec3& c : boxes[b].corners()) {
      const double az = std::atan2(c.y, c.x);
      outside += (az < p.scan_theta_min || az >= p.scan_theta_max || c.x <= 0.0) ? 1 : 0;
    }
    ann.truncation = outside / 8.0;
    scene.truth.push_back({boxes[b], 0, ann});
  }
  return scene;
}

void write_detections(const std::vector<geometry::Proposal>& dets, const fs::path& path) {
  std::string out = std::string(kDetectionHeader) + "\n";
  for (const auto& d : dets) {
    std::size_t cls = 0;
    for (std::size_t i = 1; i < d.class_probs.size(); ++i) {
      if (d.class_probs[i] > d.class_probs[cls]) cls = i;
    }
    out += std::to_string(cls);
    for (double v : {d.score, d.box.center.x, d.box.center.y, d.box.center.z, d.box.scale.x, d.box.scale.y,
                     d.box.scale.z, d.box.yaw}) {
      out += ' ' + fmt_double(v);
    }
    for (double v : d.class_probs) out += ' ' + fmt_double(v);
    out += ' ' + std::to_string(d.source_anchor) + '\n';
  }
  atomic_write(path, out);
}

std::vector<geometry::Proposal> read_detections(const fs::path& path) {
  std::vector<geometry::Proposal> out;
  std::size_t line_no = 1;
  for (const std::string& line : body_lines(path, kDetectionHeader)) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.size() < 11) {
      throw MalformedFileError(path.string() + ":" + std::to_string(line_no) + ": too few fields");
    }
    std::vector<double> v;
    for (std::size_t i = 1; i + 1 < tok.size(); ++i) v.push_back(parse_double(tok[i], path, line_no));
    geometry::Proposal d;
    d.score = v[0];
    d.box = Box3D({v[1], v[2], v[3]}, {v[4], v[5], v[6]}, v[7]);
    d.class_probs.assign(v.begin() + 8, v.end());
    d.source_anchor = std::stoll(tok.back());
    out.push_back(std::move(d));
  }
  return out;
}

void write_truth(const std::vector<TruthObject>& truth, const fs::path& path) {
  std::string out = std::string(kTruthHeader) + "\n";
  for (const auto& t : truth) {
    out += std::to_string(t.label);
    for (double v : {t.box.center.x, t.box.center.y, t.box.center.z, t.box.scale.x, t.box.scale.y, t.box.scale.z,
                     t.box.yaw}) {
      out += ' ' + fmt_double(v);
    }
    if (t.annotation) {
      out += ' ' + fmt_double(t.annotation->height_px) + ' ' + std::to_string(t.annotation->occlusion) + ' ' +
             fmt_double(t.annotation->truncation);
    } else {
      out += " - - -";
    }
    out += '\n';
  }
  atomic_write(path, out);
}

std::vector<TruthObject> read_truth(const fs::path& path) {
  std::vector<TruthObject> out;
  std::size_t line_no = 1;
  for (const std::string& line : body_lines(path, kTruthHeader)) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.size() != 11) {
      throw MalformedFileError(path.string() + ":" + std::to_string(line_no) + ": expected 11 fields");
    }
    std::vector<double> v;
    for (std::size_t i = 1; i < 8; ++i) v.push_back(parse_double(tok[i], path, line_no));
    TruthObject t;
    t.label = std::stoi(tok[0]);
    t.box = Box3D({v[0], v[1], v[2]}, {v[3], v[4], v[5]}, v[6]);
    if (tok[8] != "-") {
      t.annotation = TruthAnnotation{parse_double(tok[8], path, line_no), std::stoi(tok[9]),
                                     parse_double(tok[10], path, line_no)};
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace anchorvote::cloudio
