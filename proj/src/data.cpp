#include "sofsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sofsim {

namespace {

bool near_integer(double v) { return std::abs(v - std::llround(v)) < 1e-9; }

}  // namespace

std::vector<AnnotationRecord> parse_annotations(std::istream& in) {
  std::vector<AnnotationRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    double frame, ped, x, y;
    if (!(ls >> frame >> ped >> x >> y)) {
      throw DataError("annotations line " + std::to_string(line_no) +
                      ": expected 'frame ped_id x y'");
    }
    std::string extra;
    if (ls >> extra) {
      throw DataError("annotations line " + std::to_string(line_no) +
                      ": trailing token '" + extra + "'");
    }
    if (!near_integer(frame) || !near_integer(ped)) {
      throw DataError("annotations line " + std::to_string(line_no) +
                      ": frame and ped_id must be integers");
    }
    if (!std::isfinite(x) || !std::isfinite(y)) {
      throw DataError("annotations line " + std::to_string(line_no) +
                      ": non-finite coordinates");
    }
    records.push_back({std::llround(frame), std::llround(ped), Vec2(x, y)});
  }
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.frame, a.ped_id) < std::tie(b.frame, b.ped_id);
  });
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].frame == records[i - 1].frame &&
        records[i].ped_id == records[i - 1].ped_id) {
      throw DataError("duplicate record for frame " + std::to_string(records[i].frame) +
                      ", ped " + std::to_string(records[i].ped_id));
    }
  }
  return records;
}

std::vector<AnnotationRecord> parse_annotations_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotations file: " + path);
  return parse_annotations(in);
}

void write_annotations(std::ostream& out, std::span<const AnnotationRecord> records) {
  out << std::setprecision(17);
  for (const AnnotationRecord& r : records) {
    out << r.frame << ' ' << r.ped_id << ' ' << r.pos.x() << ' ' << r.pos.y() << '\n';
  }
}

std::vector<AnnotationRecord> apply_homography_to_records(
    const std::vector<AnnotationRecord>& records, const Homography& h) {
  std::vector<AnnotationRecord> out = records;
  for (AnnotationRecord& r : out) r.pos = h.apply(r.pos);
  return out;
}

std::vector<Vec2> derive_forces(std::span<const Vec2> positions) {
  if (positions.size() < 3) {
    throw DataError("derive_forces needs >= 3 positions, got " +
                    std::to_string(positions.size()));
  }
  std::vector<Vec2> forces;
  forces.reserve(positions.size() - 2);
  for (std::size_t t = 1; t + 1 < positions.size(); ++t) {
    forces.push_back((positions[t + 1] - positions[t]) - (positions[t] - positions[t - 1]));
  }
  return forces;
}

std::array<Vec2, kObsSteps> derive_goal_force(const SfmParams& params,
                                              std::span<const Vec2, kObsSteps> x_obs) {
  std::array<Vec2, kObsSteps> out;
  const Vec2 goal = x_obs[kObsSteps - 1];
  for (int t = 0; t < kObsSteps; ++t) {
    const Vec2 v = t == 0 ? Vec2(x_obs[1] - x_obs[0]) : Vec2(x_obs[t] - x_obs[t - 1]);
    const Vec2 to_goal = goal - x_obs[t];
    if (to_goal.norm() < 1e-9) {
      out[t] = Vec2::Zero();  // at the goal: desired velocity achieved
      continue;
    }
    const Vec2 v0 = v.norm() * to_goal.normalized();
    out[t] = goal_force(params, v0, v);
  }
  return out;
}

std::array<Vec2, kPredSteps> TrajectoryWindow::x_rel_pred_gt() const {
  std::array<Vec2, kPredSteps> rel;
  rel[0] = x_pred_gt[0] - x_obs[kObsSteps - 1];
  for (int t = 1; t < kPredSteps; ++t) rel[t] = x_pred_gt[t] - x_pred_gt[t - 1];
  return rel;
}

namespace {

// Positions per timeline slot, sorted by pedestrian for deterministic order.
struct FrameTable {
  std::vector<std::vector<std::pair<std::int64_t, Vec2>>> slots;

  const Vec2* find(std::size_t slot, std::int64_t ped) const {
    if (slot >= slots.size()) return nullptr;
    const auto& v = slots[slot];
    auto it = std::lower_bound(v.begin(), v.end(), ped,
                               [](const auto& a, std::int64_t b) { return a.first < b; });
    if (it == v.end() || it->first != ped) return nullptr;
    return &it->second;
  }

  // Finite-difference velocity in m/s; backward difference preferred.
  Vec2 velocity(std::size_t slot, std::int64_t ped) const {
    const Vec2* here = find(slot, ped);
    if (!here) return Vec2::Zero();
    if (slot > 0) {
      if (const Vec2* prev = find(slot - 1, ped)) return (*here - *prev) / kFrameDt;
    }
    if (const Vec2* next = find(slot + 1, ped)) return (*next - *here) / kFrameDt;
    return Vec2::Zero();
  }
};

void derive_window_features(TrajectoryWindow& w, const SfmParams& params) {
  w.x_rel_obs[0] = Vec2::Zero();
  for (int t = 1; t < kObsSteps; ++t) w.x_rel_obs[t] = w.x_obs[t] - w.x_obs[t - 1];
  for (int t = 0; t < kObsSteps; ++t) w.x_r_obs[t] = w.x_obs[t] - w.x_obs[0];

  const std::vector<Vec2> interior = derive_forces(std::span<const Vec2>(w.x_obs));
  w.f_total_obs[0] = Vec2::Zero();
  w.f_total_obs[kObsSteps - 1] = Vec2::Zero();
  for (std::size_t i = 0; i < interior.size(); ++i) w.f_total_obs[i + 1] = interior[i];

  w.f_goal = derive_goal_force(params, std::span<const Vec2, kObsSteps>(w.x_obs));

  // Generating forces of the future, seeded by the last two observed positions.
  std::vector<Vec2> seq;
  seq.reserve(kWindowSteps - 6);
  seq.push_back(w.x_obs[kObsSteps - 2]);
  seq.push_back(w.x_obs[kObsSteps - 1]);
  seq.insert(seq.end(), w.x_pred_gt.begin(), w.x_pred_gt.end());
  const std::vector<Vec2> fut = derive_forces(seq);
  std::copy(fut.begin(), fut.end(), w.f_total_gt.begin());

  w.g_r_gt = w.x_pred_gt[kPredSteps - 1] - w.x_obs[0];
}

}  // namespace

std::vector<SceneBatch> build_windows(
    const std::vector<AnnotationRecord>& records,
    std::shared_ptr<const std::vector<ObstaclePolygon>> obstacles,
    const BuildOptions& opts, WindowingSummary* summary) {
  WindowingSummary local;
  if (!obstacles) obstacles = std::make_shared<const std::vector<ObstaclePolygon>>();

  // Timeline of unique frame ids; spacing must be uniform.
  std::vector<std::int64_t> frames;
  frames.reserve(records.size());
  for (const auto& r : records) frames.push_back(r.frame);
  std::sort(frames.begin(), frames.end());
  frames.erase(std::unique(frames.begin(), frames.end()), frames.end());

  std::vector<SceneBatch> batches;
  if (frames.size() < kWindowSteps) {
    // count everything as skipped
    std::vector<std::int64_t> peds;
    for (const auto& r : records) peds.push_back(r.ped_id);
    std::sort(peds.begin(), peds.end());
    peds.erase(std::unique(peds.begin(), peds.end()), peds.end());
    local.skipped_pedestrians = peds.size();
    if (summary) *summary = local;
    return batches;
  }

  std::int64_t step = frames[1] - frames[0];
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i] - frames[i - 1] != step) {
      throw DataError("non-uniform frame spacing: step " +
                      std::to_string(frames[i] - frames[i - 1]) + " vs " +
                      std::to_string(step));
    }
  }
  local.frame_step = step;
  const std::int64_t f0 = frames[0];
  const std::size_t n_slots = frames.size();
  auto slot_of = [&](std::int64_t frame) {
    return static_cast<std::size_t>((frame - f0) / step);
  };

  FrameTable table;
  table.slots.resize(n_slots);
  std::map<std::int64_t, std::vector<std::size_t>> ped_slots;
  for (const auto& r : records) {
    table.slots[slot_of(r.frame)].emplace_back(r.ped_id, r.pos);
    ped_slots[r.ped_id].push_back(slot_of(r.frame));
  }
  for (auto& v : table.slots) {
    std::sort(v.begin(), v.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  // Window starts per pedestrian: runs of >= 20 consecutive slots.
  std::map<std::size_t, std::vector<std::int64_t>> starts;  // slot -> ped ids
  for (auto& [ped, slots] : ped_slots) {
    std::sort(slots.begin(), slots.end());
    bool any = false;
    std::size_t run_begin = 0;
    for (std::size_t i = 0; i <= slots.size(); ++i) {
      const bool broken = i == slots.size() || (i > 0 && slots[i] != slots[i - 1] + 1);
      if (broken) {
        const std::size_t run_len = i - run_begin;
        if (run_len >= kWindowSteps) {
          any = true;
          for (std::size_t s = 0; s + kWindowSteps <= run_len; ++s) {
            starts[slots[run_begin] + s].push_back(ped);
          }
        }
        run_begin = i;
      }
    }
    if (!any) ++local.skipped_pedestrians;
  }

  for (const auto& [start, peds] : starts) {
    SceneBatch batch;
    batch.start_frame = f0 + static_cast<std::int64_t>(start) * step;
    batch.obstacles = obstacles;
    for (std::int64_t ped : peds) {
      TrajectoryWindow w;
      w.ped_id = ped;
      for (int t = 0; t < kObsSteps; ++t) w.x_obs[t] = *table.find(start + t, ped);
      for (int t = 0; t < kPredSteps; ++t) {
        w.x_pred_gt[t] = *table.find(start + kObsSteps + t, ped);
      }
      if (opts.with_features) {
        derive_window_features(w, opts.sfm);
        w.sfr.resize(kObsSteps);
        if (opts.keep_force_sources) w.force_sources.resize(kObsSteps);
        for (int t = 0; t < kObsSteps; ++t) {
          const std::size_t slot = start + t;
          AgentState self{ped, w.x_obs[t], table.velocity(slot, ped)};
          std::vector<AgentState> others;
          others.reserve(table.slots[slot].size());
          for (const auto& [oid, opos] : table.slots[slot]) {
            if (oid == ped) continue;
            others.push_back({oid, opos, table.velocity(slot, oid)});
          }
          auto [pf, of] = force_sources(opts.sfm, self, others, *obstacles);
          w.sfr[t] = bin_sources(pf, of, opts.partition);
          if (opts.keep_force_sources) {
            w.force_sources[t] = {std::move(pf), std::move(of)};
          }
        }
      }
      batch.windows.push_back(std::move(w));
    }
    local.windows += batch.windows.size();
    batches.push_back(std::move(batch));
  }
  local.batches = batches.size();
  if (summary) *summary = local;
  return batches;
}

SceneBatch augment_rotation(const SceneBatch& batch, double angle,
                            const BuildOptions& opts) {
  const Eigen::Matrix2d R = Eigen::Rotation2Dd(angle).toRotationMatrix();

  Vec2 centroid = Vec2::Zero();
  std::size_t n = 0;
  for (const auto& w : batch.windows) {
    for (const Vec2& p : w.x_obs) centroid += p;
    for (const Vec2& p : w.x_pred_gt) centroid += p;
    n += kWindowSteps;
  }
  if (n > 0) centroid /= static_cast<double>(n);
  auto rot = [&](const Vec2& p) -> Vec2 { return centroid + R * (p - centroid); };

  SceneBatch out;
  out.start_frame = batch.start_frame;
  if (batch.obstacles && !batch.obstacles->empty()) {
    std::vector<ObstaclePolygon> polys;
    polys.reserve(batch.obstacles->size());
    for (const auto& poly : *batch.obstacles) {
      std::vector<Vec2> verts;
      verts.reserve(poly.size());
      for (const Vec2& v : poly.vertices()) verts.push_back(rot(v));
      polys.emplace_back(std::move(verts));
    }
    out.obstacles = std::make_shared<const std::vector<ObstaclePolygon>>(std::move(polys));
  } else {
    out.obstacles = batch.obstacles;
  }

  out.windows.reserve(batch.windows.size());
  for (const auto& w : batch.windows) {
    TrajectoryWindow r;
    r.ped_id = w.ped_id;
    for (int t = 0; t < kObsSteps; ++t) r.x_obs[t] = rot(w.x_obs[t]);
    for (int t = 0; t < kPredSteps; ++t) r.x_pred_gt[t] = rot(w.x_pred_gt[t]);
    if (!w.sfr.empty()) {
      derive_window_features(r, opts.sfm);
      if (w.force_sources.empty()) {
        throw DataError("augment_rotation needs force sources (build with "
                        "keep_force_sources)");
      }
      r.sfr.resize(kObsSteps);
      r.force_sources.resize(kObsSteps);
      for (int t = 0; t < kObsSteps; ++t) {
        StepForceSources src;
        src.ped.reserve(w.force_sources[t].ped.size());
        for (const ForceSource& s : w.force_sources[t].ped) {
          src.ped.push_back({R * s.dir, R * s.force});
        }
        src.obs.reserve(w.force_sources[t].obs.size());
        for (const ForceSource& s : w.force_sources[t].obs) {
          src.obs.push_back({R * s.dir, R * s.force});
        }
        r.sfr[t] = bin_sources(src.ped, src.obs, opts.partition);
        r.force_sources[t] = std::move(src);
      }
    }
    out.windows.push_back(std::move(r));
  }
  return out;
}

std::vector<std::pair<std::vector<std::string>, std::string>> leave_one_out_splits(
    const std::vector<std::string>& names) {
  if (names.size() < 2) {
    throw DataError("leave-one-out needs >= 2 datasets, got " +
                    std::to_string(names.size()));
  }
  std::vector<std::pair<std::vector<std::string>, std::string>> splits;
  for (const std::string& test : names) {
    std::vector<std::string> train;
    for (const std::string& other : names) {
      if (other != test) train.push_back(other);
    }
    splits.emplace_back(std::move(train), test);
  }
  return splits;
}

std::vector<DatasetSpec> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path + ": " + e.what());
  }
  if (!j.contains("datasets") || !j["datasets"].is_array()) {
    throw DataError("manifest " + path + ": missing 'datasets' array");
  }
  std::vector<DatasetSpec> specs;
  for (const auto& d : j["datasets"]) {
    DatasetSpec s;
    s.name = d.at("name").get<std::string>();
    s.annotations = d.at("annotations").get<std::string>();
    s.obstacles = d.value("obstacles", std::string());
    s.homography = d.value("homography", std::string());
    s.pixel_coords = d.value("pixel_coords", false);
    specs.push_back(std::move(s));
  }
  return specs;
}

void write_manifest(const std::string& path, const std::vector<DatasetSpec>& specs) {
  nlohmann::json j;
  j["datasets"] = nlohmann::json::array();
  for (const DatasetSpec& s : specs) {
    nlohmann::json d;
    d["name"] = s.name;
    d["annotations"] = s.annotations;
    if (!s.obstacles.empty()) d["obstacles"] = s.obstacles;
    if (!s.homography.empty()) d["homography"] = s.homography;
    if (s.pixel_coords) d["pixel_coords"] = true;
    j["datasets"].push_back(std::move(d));
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << j.dump(2) << '\n';
}

LoadedDataset load_dataset(const DatasetSpec& spec) {
  LoadedDataset ds;
  ds.name = spec.name;
  ds.records = parse_annotations_file(spec.annotations);

  std::optional<Homography> h;
  if (!spec.homography.empty()) h = read_homography_file(spec.homography);
  if (spec.pixel_coords) {
    if (!h) throw DataError("dataset " + spec.name + ": pixel_coords needs a homography");
    ds.records = apply_homography_to_records(ds.records, *h);
  }

  std::vector<ObstaclePolygon> polys;
  if (!spec.obstacles.empty()) {
    polys = read_obstacles_file(spec.obstacles);
    if (spec.pixel_coords) {
      for (auto& p : polys) p = p.transformed(*h);
    }
  }
  ds.obstacles = std::make_shared<const std::vector<ObstaclePolygon>>(std::move(polys));
  return ds;
}

}  // namespace sofsim
