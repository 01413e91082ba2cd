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

#include "finepillar/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "finepillar/rng.hpp"

namespace finepillar {
namespace {

using json = nlohmann::json;

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw InputError(path + ": expected a number");
  return j.get<double>();
}

long long as_integer(const json& j, const std::string& path, long long lo,
                     long long hi = std::numeric_limits<long long>::max()) {
  if (!j.is_number_integer()) throw InputError(path + ": expected an integer");
  if (j.is_number_unsigned() && j.get<unsigned long long>() >
                                    static_cast<unsigned long long>(hi)) {
    throw InputError(path + ": out of range");
  }
  const long long v = j.get<long long>();
  if (v < lo || v > hi) {
    throw InputError(path + ": expected an integer in [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
  }
  return v;
}

const json& as_array(const json& j, const std::string& path, std::size_t size = 0) {
  if (!j.is_array()) throw InputError(path + ": expected an array");
  if (size != 0 && j.size() != size) {
    throw InputError(path + ": expected " + std::to_string(size) + " entries");
  }
  return j;
}

std::string at(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

/// An object whose keys must all be consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InputError(path_ + ": expected an object");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string sub(const char* key) const { return path_ + "." + key; }

  void number(const char* key, double& out) {
    if (const json* v = find(key)) out = as_number(*v, sub(key));
  }
  template <typename Int>
  void integer(const char* key, Int& out, long long lo = std::numeric_limits<long long>::min()) {
    if (const json* v = find(key)) out = static_cast<Int>(as_integer(*v, sub(key), lo));
  }
  void boolean(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw InputError(sub(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }
  void range(const char* key, Range& out) {
    if (const json* v = find(key)) {
      as_array(*v, sub(key), 2);
      out = {as_number((*v)[0], at(sub(key), 0)), as_number((*v)[1], at(sub(key), 1))};
    }
  }
  void index_list(const char* key, std::vector<Index>& out) {
    if (const json* v = find(key)) {
      as_array(*v, sub(key));
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        out.push_back(static_cast<Index>(as_integer((*v)[i], at(sub(key), i), 0)));
      }
    }
  }
  template <std::size_t N>
  void numbers(const char* key, std::array<double, N>& out) {
    if (const json* v = find(key)) {
      as_array(*v, sub(key), N);
      for (std::size_t i = 0; i < N; ++i) out[i] = as_number((*v)[i], at(sub(key), i));
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw InputError(path_ + "." + key + ": unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

DFSAConfig parse_module(const json& j, const std::string& path) {
  Section s(j, path);
  DFSAConfig m;
  s.integer("stride", m.stride);
  s.index_list("scales", m.scales);
  s.index_list("blocks", m.blocks);
  s.index_list("branch_channels", m.branch_channels);
  s.integer("large_channels", m.large_channels);
  s.integer("fused_channels", m.fused_channels);
  s.finish();
  return m;
}

SCBConfig parse_scb(Section& s) {
  const json* preset = s.find("preset");
  const json* modules = s.find("modules");
  const json* count = s.find("num_modules");
  if (preset && modules) {
    throw InputError(s.sub("preset") + ": give either a preset or explicit modules");
  }
  if (count && modules) {
    throw InputError(s.sub("num_modules") + ": only valid together with a preset");
  }
  SCBConfig cfg;
  if (modules) {
    as_array(*modules, s.sub("modules"));
    cfg.modules.clear();
    for (std::size_t i = 0; i < modules->size(); ++i) {
      cfg.modules.push_back(parse_module((*modules)[i], at(s.sub("modules"), i)));
    }
  } else {
    std::string name = "s24_n35";
    if (preset) {
      if (!preset->is_string()) throw InputError(s.sub("preset") + ": expected a string");
      name = preset->get<std::string>();
    }
    const int n = count ? static_cast<int>(as_integer(*count, s.sub("num_modules"), 1, 64)) : 2;
    try {
      cfg = scb_preset(name, n);
    } catch (const InputError& e) {
      throw InputError(s.sub("preset") + ": " + e.what());
    }
  }
  s.integer("target_stride", cfg.target_stride, 0);
  return cfg;
}

json module_json(const DFSAConfig& m) {
  return {{"stride", m.stride},
          {"scales", m.scales},
          {"blocks", m.blocks},
          {"branch_channels", m.branch_channels},
          {"large_channels", m.large_channels},
          {"fused_channels", m.fused_channels}};
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace

void PipelineConfig::validate() const {
  grid.validate();
  pfe.validate();
  scb.validate();
  head.validate();
  decode.validate();
  eval.validate();
  synth.validate();

  const Index nx = grid.nx(), ny = grid.ny();
  Index factor = 1;
  for (std::size_t k = 0; k < scb.modules.size(); ++k) {
    const Index need = factor * scb.modules[k].max_scale();
    if (nx % need != 0 || ny % need != 0) {
      throw InputError("config: the " + std::to_string(nx) + "x" + std::to_string(ny) +
                       " grid is not divisible by " + std::to_string(need) +
                       ", required by scb module " + std::to_string(k));
    }
    factor *= scb.modules[k].stride;
  }
  const Index ts = scb.output_stride();
  if (nx % ts != 0 || ny % ts != 0) {
    throw InputError("config: grid is not divisible by the backbone output stride");
  }
  if (decode.output_stride != ts) {
    throw InputError("config: decode.output_stride " + std::to_string(decode.output_stride) +
                     " differs from the backbone output stride " + std::to_string(ts));
  }
}

Index PipelineConfig::pseudo_image_channels() const {
  return static_cast<Index>(grid.n_sub) * pfe.cell_channels();
}

PipelineConfig parse_pipeline_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError("'" + source + "': " + e.what());
  }
  const std::string root = "'" + source + "'";
  Section top(doc, root);
  PipelineConfig cfg;
  top.integer("seed", cfg.seed, 0);
  if (const json* w = top.find("weights")) {
    if (!w->is_string()) throw InputError(top.sub("weights") + ": expected a path string");
    cfg.weights = w->get<std::string>();
  }
  if (const json* j = top.find("grid")) {
    Section s(*j, top.sub("grid"));
    s.range("x_range", cfg.grid.x_range);
    s.range("y_range", cfg.grid.y_range);
    s.range("z_range", cfg.grid.z_range);
    s.number("grid_size", cfg.grid.grid_size);
    s.integer("n_sub", cfg.grid.n_sub);
    s.integer("max_points_per_subpillar", cfg.grid.max_points_per_subpillar);
    s.integer("max_occupied_subpillars", cfg.grid.max_occupied_subpillars);
    s.finish();
  }
  if (const json* j = top.find("hpe")) {
    Section s(*j, top.sub("hpe"));
    s.boolean("enabled", cfg.pfe.hpe.enabled);
    s.integer("num_frequencies", cfg.pfe.hpe.num_frequencies);
    s.number("z_scale", cfg.pfe.hpe.z_scale);
    s.finish();
  }
  if (const json* j = top.find("pfe")) {
    Section s(*j, top.sub("pfe"));
    s.integer("vfe1_channels", cfg.pfe.vfe1_channels);
    s.integer("vfe2_channels", cfg.pfe.vfe2_channels);
    s.finish();
  }
  if (const json* j = top.find("scb")) {
    Section s(*j, top.sub("scb"));
    cfg.scb = parse_scb(s);
    s.finish();
  }
  if (const json* j = top.find("head")) {
    Section s(*j, top.sub("head"));
    s.integer("hidden_channels", cfg.head.hidden_channels);
    s.finish();
  }
  cfg.decode.output_stride = cfg.scb.output_stride();
  if (const json* j = top.find("decode")) {
    Section s(*j, top.sub("decode"));
    s.integer("top_k", cfg.decode.top_k);
    s.number("score_threshold", cfg.decode.score_threshold);
    s.number("nms_threshold", cfg.decode.nms_threshold);
    s.numbers("beta", cfg.decode.beta);
    s.integer("output_stride", cfg.decode.output_stride);
    s.finish();
  }
  if (const json* j = top.find("eval")) {
    Section s(*j, top.sub("eval"));
    s.numbers("iou_thresholds", cfg.eval.iou_thresholds);
    if (const json* k = s.find("iou_kind")) {
      const std::string v = k->is_string() ? k->get<std::string>() : "";
      if (v == "3d") {
        cfg.eval.iou_kind = IouKind::k3d;
      } else if (v == "bev") {
        cfg.eval.iou_kind = IouKind::kBev;
      } else {
        throw InputError(s.sub("iou_kind") + ": expected \"3d\" or \"bev\"");
      }
    }
    s.integer("recall_positions", cfg.eval.recall_positions);
    s.integer("level1_min_points", cfg.eval.level1_min_points);
    s.finish();
  }
  if (const json* j = top.find("synth")) {
    Section s(*j, top.sub("synth"));
    s.number("ground_z_mean", cfg.synth.ground_z_mean);
    s.number("ground_z_stddev", cfg.synth.ground_z_stddev);
    s.integer("ground_points", cfg.synth.ground_points);
    if (const json* v = s.find("object_counts")) {
      as_array(*v, s.sub("object_counts"), kNumClasses);
      for (std::size_t i = 0; i < kNumClasses; ++i) {
        cfg.synth.object_counts[i] = static_cast<int>(
            as_integer((*v)[i], at(s.sub("object_counts"), i), 0, 100000));
      }
    }
    if (const json* v = s.find("size_priors")) {
      as_array(*v, s.sub("size_priors"), kNumClasses);
      for (std::size_t i = 0; i < kNumClasses; ++i) {
        const std::string p = at(s.sub("size_priors"), i);
        as_array((*v)[i], p, 3);
        for (int d = 0; d < 3; ++d) {
          cfg.synth.size_priors[i][d] = as_number((*v)[i][static_cast<std::size_t>(d)], at(p, static_cast<std::size_t>(d)));
        }
      }
    }
    if (const json* v = s.find("points_per_object")) {
      as_array(*v, s.sub("points_per_object"), kNumClasses);
      for (std::size_t i = 0; i < kNumClasses; ++i) {
        const std::string p = at(s.sub("points_per_object"), i);
        as_array((*v)[i], p, 2);
        for (std::size_t d = 0; d < 2; ++d) {
          cfg.synth.points_per_object[i][d] =
              static_cast<int>(as_integer((*v)[i][d], at(p, d), 0, 10000000));
        }
      }
    }
    s.number("x_extent", cfg.synth.x_extent);
    s.number("y_extent", cfg.synth.y_extent);
    s.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  PipelineConfig cfg = parse_pipeline_config(text.str(), path.string());
  if (cfg.weights && cfg.weights->is_relative()) {
    cfg.weights = path.parent_path() / *cfg.weights;
  }
  return cfg;
}

std::string pipeline_config_to_json(const PipelineConfig& cfg) {
  json modules = json::array();
  for (const auto& m : cfg.scb.modules) modules.push_back(module_json(m));
  json sizes = json::array(), ppo = json::array();
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    const auto& p = cfg.synth.size_priors[i];
    sizes.push_back({p.x(), p.y(), p.z()});
    ppo.push_back(cfg.synth.points_per_object[i]);
  }
  json doc = {
      {"seed", cfg.seed},
      {"grid",
       {{"x_range", {cfg.grid.x_range.lo, cfg.grid.x_range.hi}},
        {"y_range", {cfg.grid.y_range.lo, cfg.grid.y_range.hi}},
        {"z_range", {cfg.grid.z_range.lo, cfg.grid.z_range.hi}},
        {"grid_size", cfg.grid.grid_size},
        {"n_sub", cfg.grid.n_sub},
        {"max_points_per_subpillar", cfg.grid.max_points_per_subpillar},
        {"max_occupied_subpillars", cfg.grid.max_occupied_subpillars}}},
      {"hpe",
       {{"enabled", cfg.pfe.hpe.enabled},
        {"num_frequencies", cfg.pfe.hpe.num_frequencies},
        {"z_scale", cfg.pfe.hpe.z_scale}}},
      {"pfe",
       {{"vfe1_channels", cfg.pfe.vfe1_channels}, {"vfe2_channels", cfg.pfe.vfe2_channels}}},
      {"scb", {{"modules", modules}, {"target_stride", cfg.scb.target_stride}}},
      {"head", {{"hidden_channels", cfg.head.hidden_channels}}},
      {"decode",
       {{"top_k", cfg.decode.top_k},
        {"score_threshold", cfg.decode.score_threshold},
        {"nms_threshold", cfg.decode.nms_threshold},
        {"beta", cfg.decode.beta},
        {"output_stride", cfg.decode.output_stride}}},
      {"eval",
       {{"iou_thresholds", cfg.eval.iou_thresholds},
        {"iou_kind", cfg.eval.iou_kind == IouKind::k3d ? "3d" : "bev"},
        {"recall_positions", cfg.eval.recall_positions},
        {"level1_min_points", cfg.eval.level1_min_points}}},
      {"synth",
       {{"ground_z_mean", cfg.synth.ground_z_mean},
        {"ground_z_stddev", cfg.synth.ground_z_stddev},
        {"ground_points", cfg.synth.ground_points},
        {"object_counts", cfg.synth.object_counts},
        {"size_priors", sizes},
        {"points_per_object", ppo},
        {"x_extent", cfg.synth.x_extent},
        {"y_extent", cfg.synth.y_extent}}},
  };
  if (cfg.weights) doc["weights"] = cfg.weights->string();
  return doc.dump(2) + "\n";
}

std::vector<ParamSpec> all_param_specs(const PipelineConfig& cfg) {
  cfg.validate();
  std::vector<ParamSpec> specs = pfe_params(cfg.pfe);
  auto append = [&specs](std::vector<ParamSpec> more) {
    specs.insert(specs.end(), more.begin(), more.end());
  };
  append(scb_params(cfg.scb, cfg.pseudo_image_channels()));
  append(head_params(cfg.head, cfg.scb.out_channels()));
  std::sort(specs.begin(), specs.end(),
            [](const ParamSpec& a, const ParamSpec& b) { return a.name < b.name; });
  return specs;
}

WeightStore pipeline_weights(const PipelineConfig& cfg) {
  const auto specs = all_param_specs(cfg);
  if (!cfg.weights) return init_weights(specs, derive_seed(cfg.seed, 0));
  WeightStore store = load_weights(*cfg.weights);
  for (const ParamSpec& s : specs) store.expect(s.name, s.shape);
  if (store.size() != specs.size()) {
    throw InputError("weights '" + cfg.weights->string() + "' hold " +
                     std::to_string(store.size()) + " tensors, the network uses " +
                     std::to_string(specs.size()));
  }
  return store;
}

SynthConfig synth_config_for(const PipelineConfig& cfg, std::uint64_t index) {
  SynthConfig s = cfg.synth;
  s.seed = derive_seed(cfg.seed, index + 1);
  return s;
}

InferenceResult run_inference(const PointCloud& cloud, const PipelineConfig& cfg,
                              const WeightStore& weights) {
  using Clock = std::chrono::steady_clock;
  InferenceResult result;
  auto t = Clock::now();
  const SubPillarBatch batch = assign_pillars(cloud, cfg.grid);
  result.timings.push_back({"pillarize", elapsed_ms(t)});
  result.points_assigned = batch.points_assigned;
  result.occupied_subpillars = batch.num_cells();

  // Without any occupied cell there is no evidence to decode.
  if (batch.num_cells() == 0) {
    for (const char* stage : {"pfe", "scatter", "backbone", "head", "decode"}) {
      result.timings.push_back({stage, 0.0});
    }
    return result;
  }

  t = Clock::now();
  const RowMatrix<float> cells =
      attach_hpe(vfe_forward(batch, weights, cfg.pfe), batch, cfg.pfe.hpe);
  result.timings.push_back({"pfe", elapsed_ms(t)});

  t = Clock::now();
  const Tensor4f image = scatter_to_pseudo_image(batch, cells, cfg.grid);
  result.timings.push_back({"scatter", elapsed_ms(t)});

  t = Clock::now();
  const Tensor4f features = scb_forward(image, cfg.scb, weights);
  result.timings.push_back({"backbone", elapsed_ms(t)});

  t = Clock::now();
  const HeadOutputs outputs = head_forward(features, weights, cfg.head);
  result.timings.push_back({"head", elapsed_ms(t)});

  t = Clock::now();
  result.detections = decode(outputs, cfg.grid, cfg.decode);
  result.timings.push_back({"decode", elapsed_ms(t)});
  return result;
}

}  // namespace finepillar
