// Copyright 2026 The FinePillar Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "finepillar/scene.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "finepillar/rng.hpp"

namespace finepillar {
namespace {

using json = nlohmann::json;

constexpr double kJitterSigma = 0.02;
constexpr double kTopFaceProbability = 0.15;
constexpr double kFaceInset = 1e-3;
constexpr double kSeparationMargin = 0.5;
constexpr int kPlacementAttempts = 1000;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open '" + path.string() + "'");
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot open '" + path.string() + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw InputError("write failed for '" + path.string() + "'");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

PointCloud parse_binary(const std::string& bytes, const std::string& source) {
  if (bytes.size() % 16 != 0) {
    throw InputError("'" + source + "': length " + std::to_string(bytes.size()) +
                     " is not a multiple of 16; trailing " +
                     std::to_string(bytes.size() % 16) + " bytes start at byte " +
                     std::to_string(bytes.size() - bytes.size() % 16));
  }
  PointCloud cloud;
  cloud.points.resize(static_cast<Index>(bytes.size() / 16), 4);
  float* dst = cloud.points.data();
  for (std::size_t i = 0; i < bytes.size() / 4; ++i) {
    std::uint32_t word = 0;
    for (int b = 0; b < 4; ++b) {
      word |= std::uint32_t{static_cast<unsigned char>(bytes[4 * i + b])} << (8 * b);
    }
    dst[i] = std::bit_cast<float>(word);
  }
  return cloud;
}

PointCloud parse_csv(const std::string& text, const std::string& source) {
  std::vector<float> values;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line = trim(std::string_view(text).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "x,y,z,intensity") {
        throw InputError("'" + source + "' line " + std::to_string(line_no) +
                         ": expected header 'x,y,z,intensity'");
      }
      header_seen = true;
      continue;
    }
    static constexpr const char* kColumns[4] = {"x", "y", "z", "intensity"};
    for (int col = 0; col < 4; ++col) {
      std::size_t comma = line.find(',');
      if ((col < 3) != (comma != std::string_view::npos)) {
        throw InputError("'" + source + "' line " + std::to_string(line_no) +
                         ": expected 4 comma-separated fields");
      }
      std::string_view field = trim(line.substr(0, comma));
      float v = 0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw InputError("'" + source + "' line " + std::to_string(line_no) +
                         ": non-numeric field '" + std::string(field) +
                         "' in column " + kColumns[col]);
      }
      values.push_back(v);
      if (comma != std::string_view::npos) line.remove_prefix(comma + 1);
    }
  }
  if (!header_seen) throw InputError("'" + source + "': missing CSV header");
  PointCloud cloud;
  cloud.points = Eigen::Map<const PointMatrix>(values.data(),
                                               static_cast<Index>(values.size() / 4), 4);
  return cloud;
}

std::string format_float(float v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// ---- label JSON ----------------------------------------------------------

double require_number(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw InputError(path + "." + key + ": missing");
  if (!it->is_number()) throw InputError(path + "." + key + ": expected a number");
  return it->get<double>();
}

struct ParsedEntry {
  Box7d box;
  int class_id = 0;
  std::optional<int> num_points;
  double score = 0;
};

ParsedEntry parse_entry(const json& e, const std::string& path, bool with_score) {
  if (!e.is_object()) throw InputError(path + ": expected an object");
  for (const auto& [key, value] : e.items()) {
    static const std::vector<std::string> kKnown = {
        "cx", "cy", "cz", "length", "width", "height", "yaw", "class_id",
        "num_points", "score"};
    if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end() ||
        (key == "score" && !with_score) || (key == "num_points" && with_score)) {
      throw InputError(path + "." + key + ": unknown field");
    }
  }
  ParsedEntry out;
  try {
    out.box = Box7d(require_number(e, "cx", path), require_number(e, "cy", path),
                    require_number(e, "cz", path), require_number(e, "length", path),
                    require_number(e, "width", path), require_number(e, "height", path),
                    require_number(e, "yaw", path));
  } catch (const InputError& err) {
    const std::string msg = err.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw InputError(path + ": " + msg);
  }
  auto cls = e.find("class_id");
  if (cls == e.end()) throw InputError(path + ".class_id: missing");
  if (!cls->is_number_integer() || cls->get<long long>() < 0 ||
      cls->get<long long>() >= kNumClasses) {
    throw InputError(path + ".class_id: expected integer in {0, 1, 2}");
  }
  out.class_id = cls->get<int>();
  if (auto np = e.find("num_points"); np != e.end()) {
    if (!np->is_number_integer() || np->get<long long>() < 0) {
      throw InputError(path + ".num_points: expected non-negative integer");
    }
    out.num_points = np->get<int>();
  }
  if (with_score) {
    out.score = require_number(e, "score", path);
    if (!(out.score >= 0 && out.score <= 1)) {
      throw InputError(path + ".score: expected a number in [0, 1]");
    }
  }
  return out;
}

std::vector<ParsedEntry> parse_document(const std::string& text,
                                        const std::string& source,
                                        bool with_score) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError("'" + source + "': " + e.what());
  }
  if (!doc.is_object()) throw InputError("'" + source + "': expected an object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "format_version" && key != "boxes") {
      throw InputError("'" + source + "': " + key + ": unknown field");
    }
  }
  auto ver = doc.find("format_version");
  if (ver == doc.end() || !ver->is_number_integer() ||
      ver->get<int>() != kLabelFormatVersion) {
    throw InputError("'" + source + "': format_version must be " +
                     std::to_string(kLabelFormatVersion));
  }
  auto boxes = doc.find("boxes");
  if (boxes == doc.end() || !boxes->is_array()) {
    throw InputError("'" + source + "': boxes: expected an array");
  }
  std::vector<ParsedEntry> out;
  for (std::size_t i = 0; i < boxes->size(); ++i) {
    out.push_back(parse_entry((*boxes)[i], "'" + source + "': boxes[" +
                                               std::to_string(i) + "]",
                              with_score));
  }
  return out;
}

json box_json(const Box7d& b, int class_id) {
  json j;
  j["cx"] = b.cx;
  j["cy"] = b.cy;
  j["cz"] = b.cz;
  j["length"] = b.length;
  j["width"] = b.width;
  j["height"] = b.height;
  j["yaw"] = b.yaw;
  j["class_id"] = class_id;
  return j;
}

std::string dump_document(json boxes) {
  json doc;
  doc["format_version"] = kLabelFormatVersion;
  doc["boxes"] = std::move(boxes);
  return doc.dump(1) + "\n";
}

// ---- synthesis -----------------------------------------------------------

/// Folds v back into [-half, half] and keeps it a little inside the face.
double reflect_into(double v, double half) {
  const double lim = half - std::min(kFaceInset, half / 2);
  if (v > lim) v = 2 * lim - v;
  if (v < -lim) v = -2 * lim - v;
  return std::clamp(v, -lim, lim);
}

}  // namespace

const char* class_name(int class_id) {
  switch (class_id) {
    case kVehicle: return "vehicle";
    case kPedestrian: return "pedestrian";
    case kCyclist: return "cyclist";
    default: return "unknown";
  }
}

void PointCloud::validate() const {
  for (Index i = 0; i < count(); ++i) {
    const auto p = points.row(i);
    if (!p.allFinite()) {
      throw InputError("point " + std::to_string(i) + " has non-finite values");
    }
    if (p(3) < 0.0f || p(3) > 1.0f) {
      throw InputError("point " + std::to_string(i) + " intensity " +
                       format_float(p(3)) + " outside [0, 1]");
    }
  }
}

PointFormat point_format_for(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? PointFormat::kCsv : PointFormat::kBinaryF32;
}

PointCloud read_point_cloud(const std::filesystem::path& path, PointFormat format) {
  const std::string bytes = read_file(path);
  PointCloud cloud = format == PointFormat::kBinaryF32
                         ? parse_binary(bytes, path.string())
                         : parse_csv(bytes, path.string());
  try {
    cloud.validate();
  } catch (const InputError& e) {
    throw InputError("'" + path.string() + "': " + e.what());
  }
  return cloud;
}

void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud,
                       PointFormat format) {
  std::string out;
  if (format == PointFormat::kBinaryF32) {
    out.reserve(static_cast<std::size_t>(cloud.count()) * 16);
    const float* src = cloud.points.data();
    for (Index i = 0; i < cloud.points.size(); ++i) {
      const auto word = std::bit_cast<std::uint32_t>(src[i]);
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((word >> (8 * b)) & 0xFFu));
    }
  } else {
    out = "x,y,z,intensity\n";
    for (Index i = 0; i < cloud.count(); ++i) {
      for (int c = 0; c < 4; ++c) {
        out += format_float(cloud.points(i, c));
        out += c < 3 ? ',' : '\n';
      }
    }
  }
  write_file(path, out);
}

std::vector<LabeledBox> labels_from_json_text(const std::string& text,
                                              const std::string& source) {
  std::vector<LabeledBox> out;
  for (auto& e : parse_document(text, source, false)) {
    out.push_back({e.box, e.class_id, e.num_points});
  }
  return out;
}

std::string labels_to_json_text(std::span<const LabeledBox> labels) {
  json boxes = json::array();
  for (const auto& l : labels) {
    json j = box_json(l.box, l.class_id);
    if (l.num_points_inside) j["num_points"] = *l.num_points_inside;
    boxes.push_back(std::move(j));
  }
  return dump_document(std::move(boxes));
}

std::vector<LabeledBox> read_labels(const std::filesystem::path& path) {
  return labels_from_json_text(read_file(path), path.string());
}

void write_labels(const std::filesystem::path& path,
                  std::span<const LabeledBox> labels) {
  write_file(path, labels_to_json_text(labels));
}

std::string detections_to_json_text(std::span<const Detection> dets) {
  json boxes = json::array();
  for (const auto& d : dets) {
    json j = box_json(d.box, d.class_id);
    j["score"] = d.score;
    boxes.push_back(std::move(j));
  }
  return dump_document(std::move(boxes));
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  std::vector<Detection> out;
  for (auto& e : parse_document(read_file(path), path.string(), true)) {
    out.push_back({e.box, e.class_id, e.score});
  }
  return out;
}

void write_detections(const std::filesystem::path& path,
                      std::span<const Detection> dets) {
  write_file(path, detections_to_json_text(dets));
}

void SynthConfig::validate() const {
  if (!(ground_z_stddev > 0)) throw InputError("synth: ground_z_stddev must be > 0");
  if (ground_points < 0) throw InputError("synth: ground_points must be >= 0");
  if (!(x_extent > 0 && y_extent > 0)) throw InputError("synth: extents must be > 0");
  for (int c = 0; c < kNumClasses; ++c) {
    if (object_counts[c] < 0) throw InputError("synth: object counts must be >= 0");
    if (!(size_priors[c].array() > 0).all()) {
      throw InputError("synth: size priors must be > 0");
    }
    const auto& ppo = points_per_object[c];
    if (ppo[0] < 0 || ppo[1] < ppo[0]) {
      throw InputError("synth: points_per_object must satisfy 0 <= min <= max");
    }
  }
}

Scene synth_scene(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Scene scene;

  // Boxes first, then object points, then ground points: the object part of
  // the stream does not depend on the ground point count.
  for (int cls = 0; cls < kNumClasses; ++cls) {
    for (int k = 0; k < cfg.object_counts[cls]; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
        const Eigen::Vector3d size =
            cfg.size_priors[cls].array() *
            Eigen::Array3d(rng.uniform(0.9, 1.1), rng.uniform(0.9, 1.1),
                           rng.uniform(0.9, 1.1));
        const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
        const double radius = size.head<2>().norm() / 2;
        if (radius >= cfg.x_extent || radius >= cfg.y_extent) {
          throw InputError("synth: scene extent too small for class " +
                           std::string(class_name(cls)));
        }
        const double cx = rng.uniform(-cfg.x_extent + radius, cfg.x_extent - radius);
        const double cy = rng.uniform(-cfg.y_extent + radius, cfg.y_extent - radius);
        const Box7d box(cx, cy, cfg.ground_z_mean + size.z() / 2, size.x(),
                        size.y(), size.z(), yaw);
        placed = std::all_of(scene.labels.begin(), scene.labels.end(),
                             [&](const LabeledBox& o) {
                               return (o.box.center_bev() - box.center_bev()).norm() >
                                      o.box.bev_radius() + radius + kSeparationMargin;
                             });
        if (placed) scene.labels.push_back({box, cls, std::nullopt});
      }
      if (!placed) {
        throw InputError("synth: could not place object " + std::to_string(k) +
                         " of class " + class_name(cls) + " without overlap");
      }
    }
  }

  std::vector<Eigen::Vector4f> object_points;
  for (const auto& label : scene.labels) {
    const Box7d& b = label.box;
    const auto& ppo = cfg.points_per_object[label.class_id];
    const int n = rng.uniform_int(ppo[0], ppo[1]);
    const double hl = b.length / 2, hw = b.width / 2, hh = b.height / 2;
    const double side_x = b.width * b.height;   // faces normal to local x
    const double side_y = b.length * b.height;  // faces normal to local y
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    for (int i = 0; i < n; ++i) {
      Eigen::Vector3d local(rng.uniform(-hl, hl), rng.uniform(-hw, hw),
                            rng.uniform(-hh, hh));
      if (rng.uniform() < kTopFaceProbability) {
        local.z() = hh;
      } else {
        const double pick = rng.uniform() * 2 * (side_x + side_y);
        if (pick < 2 * side_x) {
          local.x() = pick < side_x ? hl : -hl;
        } else {
          local.y() = pick - 2 * side_x < side_y ? hw : -hw;
        }
      }
      local.x() = reflect_into(local.x() + rng.normal(0, kJitterSigma), hl);
      local.y() = reflect_into(local.y() + rng.normal(0, kJitterSigma), hw);
      local.z() = reflect_into(local.z() + rng.normal(0, kJitterSigma), hh);
      const double x = b.cx + c * local.x() - s * local.y();
      const double y = b.cy + s * local.x() + c * local.y();
      object_points.emplace_back(static_cast<float>(x), static_cast<float>(y),
                                 static_cast<float>(b.cz + local.z()),
                                 static_cast<float>(rng.uniform(0.2, 1.0)));
    }
  }

  const Index total = cfg.ground_points + static_cast<Index>(object_points.size());
  scene.cloud.points.resize(total, 4);
  for (Index i = 0; i < cfg.ground_points; ++i) {
    const double x = rng.uniform(-cfg.x_extent, cfg.x_extent);
    const double y = rng.uniform(-cfg.y_extent, cfg.y_extent);
    const double z = rng.normal(cfg.ground_z_mean, cfg.ground_z_stddev);
    scene.cloud.points.row(i) << static_cast<float>(x), static_cast<float>(y),
        static_cast<float>(z), static_cast<float>(rng.uniform(0.0, 0.3));
  }
  for (std::size_t k = 0; k < object_points.size(); ++k) {
    scene.cloud.points.row(cfg.ground_points + static_cast<Index>(k)) =
        object_points[k].transpose();
  }
  fill_point_counts(scene.cloud, scene.labels);
  return scene;
}

std::vector<HistogramBin> height_histogram(const PointCloud& cloud,
                                           double bin_width, double z_lo,
                                           double z_hi) {
  if (!(bin_width > 0) || !(z_lo < z_hi)) {
    throw InputError("height_histogram: need bin_width > 0 and z_lo < z_hi");
  }
  const auto bins = static_cast<std::size_t>(
      std::max(1.0, std::ceil((z_hi - z_lo) / bin_width - 1e-9)));
  std::vector<HistogramBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].center = z_lo + (static_cast<double>(b) + 0.5) * bin_width;
  }
  for (Index i = 0; i < cloud.count(); ++i) {
    const double z = cloud.points(i, 2);
    if (z < z_lo || z >= z_hi) continue;
    auto b = static_cast<std::size_t>(std::floor((z - z_lo) / bin_width));
    out[std::min(b, bins - 1)].count++;
  }
  return out;
}

Index count_points_in_box(const PointCloud& cloud, const Box7d& box) {
  const Eigen::Matrix<double, 2, 4> corners = bev_corners(box);
  Eigen::Matrix<double, 2, 4> edges;
  for (int e = 0; e < 4; ++e) edges.col(e) = corners.col((e + 1) % 4) - corners.col(e);
  const double z0 = box.z_min(), z1 = box.z_max();
  Index n = 0;
  for (Index i = 0; i < cloud.count(); ++i) {
    const double z = cloud.points(i, 2);
    if (z < z0 || z > z1) continue;
    const Vec2<double> p(cloud.points(i, 0), cloud.points(i, 1));
    bool inside = true;
    for (int e = 0; e < 4 && inside; ++e) {
      inside = detail::cross2<double>(edges.col(e), p - corners.col(e)) >= 0;
    }
    n += inside ? 1 : 0;
  }
  return n;
}

void fill_point_counts(const PointCloud& cloud, std::span<LabeledBox> labels) {
  for (auto& l : labels) {
    l.num_points_inside = static_cast<int>(count_points_in_box(cloud, l.box));
  }
}

}  // namespace finepillar
