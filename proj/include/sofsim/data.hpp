#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sofsim/common.hpp"
#include "sofsim/geometry.hpp"
#include "sofsim/sfm.hpp"

namespace sofsim {

struct AnnotationRecord {
  std::int64_t frame = 0;
  std::int64_t ped_id = 0;
  Vec2 pos = Vec2::Zero();
};

// Lines of "frame ped_id x y"; '#' comments and blank lines skipped.
// Throws DataError with the line number on malformed input or duplicate
// (frame, ped_id) keys. Output sorted by (frame, ped_id).
std::vector<AnnotationRecord> parse_annotations(std::istream& in);
std::vector<AnnotationRecord> parse_annotations_file(const std::string& path);
void write_annotations(std::ostream& out, std::span<const AnnotationRecord> records);

std::vector<AnnotationRecord> apply_homography_to_records(
    const std::vector<AnnotationRecord>& records, const Homography& h);

// Individual repulsive forces behind a SocialForceRepresentation, kept so a
// rigid augmentation can re-bin them exactly.
struct StepForceSources {
  std::vector<ForceSource> ped;
  std::vector<ForceSource> obs;
};

// One pedestrian's 8-step observation plus 12-step ground-truth future and
// the derived model inputs.
struct TrajectoryWindow {
  std::int64_t ped_id = 0;
  std::array<Vec2, kObsSteps> x_obs;
  std::array<Vec2, kPredSteps> x_pred_gt;
  std::array<Vec2, kObsSteps> x_rel_obs;    // per-step displacements, first zero
  std::array<Vec2, kObsSteps> x_r_obs;      // positions relative to x_obs[0]
  std::array<Vec2, kObsSteps> f_total_obs;  // unit-mass second differences (dt=1)
  std::array<Vec2, kObsSteps> f_goal;       // attraction toward x_obs.back()
  std::array<Vec2, kPredSteps> f_total_gt;  // generating forces of the future
  Vec2 g_r_gt = Vec2::Zero();               // x_pred_gt.back() - x_obs[0]
  std::vector<SocialForceRepresentation> sfr;          // one per observed step
  std::vector<StepForceSources> force_sources;         // only when requested

  std::array<Vec2, kPredSteps> x_rel_pred_gt() const;  // future displacements
};

// Windows sharing one 20-frame range, i.e. pedestrians co-present in a scene.
struct SceneBatch {
  std::int64_t start_frame = 0;
  std::vector<TrajectoryWindow> windows;
  std::shared_ptr<const std::vector<ObstaclePolygon>> obstacles;
};

struct WindowingSummary {
  std::size_t batches = 0;
  std::size_t windows = 0;
  std::size_t skipped_pedestrians = 0;  // longest consecutive run < 20
  std::int64_t frame_step = 0;
};

struct BuildOptions {
  SfmParams sfm;
  AngleBinPartition partition{4};
  bool with_features = true;       // derive f_goal / f_total / SFR
  bool keep_force_sources = false; // retain per-source forces for augmentation
};

// Sliding stride-1 windows of 20 consecutive timesteps. Pedestrians with a
// gap inside a window are excluded from it; pedestrians never reaching 20
// consecutive frames are counted in the summary. Neighbors that are only
// partially present still exert forces on included pedestrians.
std::vector<SceneBatch> build_windows(
    const std::vector<AnnotationRecord>& records,
    std::shared_ptr<const std::vector<ObstaclePolygon>> obstacles,
    const BuildOptions& opts, WindowingSummary* summary = nullptr);

// Unit-mass generating forces: f_t = (x_{t+1}-x_t) - (x_t-x_{t-1}) for the
// n-2 interior timesteps. Throws DataError for fewer than 3 positions.
std::vector<Vec2> derive_forces(std::span<const Vec2> positions);

// Attractive force sequence toward the last observed position; desired speed
// equals the current speed. Zero once the pedestrian is at the goal.
std::array<Vec2, kObsSteps> derive_goal_force(const SfmParams& params,
                                              std::span<const Vec2, kObsSteps> x_obs);

// Rigid rotation of the whole batch about the scene centroid; all derived
// features are recomputed from the rotated data.
SceneBatch augment_rotation(const SceneBatch& batch, double angle,
                            const BuildOptions& opts);

// For each dataset D: (train = all others, test = D). Throws DataError for
// fewer than two names.
std::vector<std::pair<std::vector<std::string>, std::string>> leave_one_out_splits(
    const std::vector<std::string>& names);

struct DatasetSpec {
  std::string name;
  std::string annotations;
  std::string obstacles;   // optional, empty = none
  std::string homography;  // optional, empty = identity
  bool pixel_coords = false;
};

// JSON manifest: {"datasets": [{"name":..., "annotations":..., ...}]}
std::vector<DatasetSpec> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<DatasetSpec>& specs);

struct LoadedDataset {
  std::string name;
  std::vector<AnnotationRecord> records;  // world coordinates
  std::shared_ptr<const std::vector<ObstaclePolygon>> obstacles;
};

LoadedDataset load_dataset(const DatasetSpec& spec);

}  // namespace sofsim
