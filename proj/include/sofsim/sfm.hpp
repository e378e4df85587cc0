#pragma once

#include <vector>

#include "sofsim/common.hpp"
#include "sofsim/geometry.hpp"

namespace sofsim {

// Social Force Model parameters. k is the inverse relaxation time of the
// attractive force; (a_ped, b_ped) the pedestrian repulsion amplitude/range;
// (a_obs, b_obs, d_obs) the obstacle repulsion amplitude, range and
// preferred distance.
struct SfmParams {
  double k = 2.0;
  double a_ped = 1.0;
  double b_ped = 0.71;
  double a_obs = 5.0;
  double b_obs = 0.3;
  double d_obs = 0.4;

  void validate() const;
};

struct AgentState {
  std::int64_t id = 0;
  Vec2 pos = Vec2::Zero();
  Vec2 vel = Vec2::Zero();

  void validate() const;  // finite, |vel| < 15 m/s
};

// Per-angle-bin resultant repulsive forces, pedestrian-caused and
// obstacle-caused kept separate.
struct SocialForceRepresentation {
  std::vector<Vec2> f_ped_bins;
  std::vector<Vec2> f_obs_bins;

  int bins() const { return static_cast<int>(f_ped_bins.size()); }
  Vec2 ped_sum() const;
  Vec2 obs_sum() const;
};

// k * (v0 - v)
Vec2 goal_force(const SfmParams& params, const Vec2& desired_vel, const Vec2& vel);

// a_obs * exp((d_obs - d)/b_obs) toward the pedestrian. Throws GeometryError
// when the obstacle point coincides with the pedestrian (d < 1e-9).
Vec2 obstacle_force(const SfmParams& params, const Vec2& obstacle_point,
                    const AgentState& ped);

// Collision-prediction repulsion. Returns one force per entry of `others`,
// zero for agents not on a collision course (relative approach direction more
// than pi/4 off the line toward them, or no relative motion). All interacting
// agents share t_p = min over agents of the time to closest approach, clamped
// below at 1e-6 s.
std::vector<Vec2> collision_prediction_force(const SfmParams& params,
                                             const AgentState& p,
                                             const std::vector<AgentState>& others);

// Time to closest approach of `other` relative to `p`; +inf when not on a
// collision course. Exposed for the rollout baseline and tests.
double time_to_closest_approach(const AgentState& p, const AgentState& other);

Vec2 resultant_force(const Vec2& goal, const std::vector<Vec2>& ped_forces,
                     const std::vector<Vec2>& obs_forces);

// One repulsive contribution: dir is the unit vector from the pedestrian to
// the force's source, force the contribution itself. Zero contributions are
// dropped when binning.
struct ForceSource {
  Vec2 dir = Vec2::Zero();
  Vec2 force = Vec2::Zero();
};

// Per-source repulsive forces acting on p: pedestrian set (collision
// prediction) and obstacle set (nearest polygon points). first = pedestrians,
// second = obstacles.
std::pair<std::vector<ForceSource>, std::vector<ForceSource>> force_sources(
    const SfmParams& params, const AgentState& p,
    const std::vector<AgentState>& others,
    const std::vector<ObstaclePolygon>& obstacles);

// Accumulates each nonzero force into the bin of its source direction.
SocialForceRepresentation bin_sources(const std::vector<ForceSource>& ped,
                                      const std::vector<ForceSource>& obs,
                                      const AngleBinPartition& partition);

// Eqs of the angle-binned representation: every nonzero repulsive force is
// accumulated into the bin of the direction from p to its source (the other
// pedestrian, or the polygon's nearest point).
SocialForceRepresentation social_force_representation(
    const SfmParams& params, const AgentState& p,
    const std::vector<AgentState>& others,
    const std::vector<ObstaclePolygon>& obstacles,
    const AngleBinPartition& partition);

}  // namespace sofsim
