#include "sofsim/sfm.hpp"

#include <cmath>
#include <limits>

namespace sofsim {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinTca = 1e-6;        // clamp for "already colliding"
constexpr double kCosCutoff = 0.70710678118654752440;  // cos(pi/4)
}  // namespace

void SfmParams::validate() const {
  if (!(k > 0 && a_ped > 0 && b_ped > 0 && a_obs > 0 && b_obs > 0 && d_obs > 0)) {
    throw DataError("SfmParams: all parameters must be strictly positive");
  }
}

void AgentState::validate() const {
  if (!pos.allFinite() || !vel.allFinite()) {
    throw DataError("AgentState " + std::to_string(id) + ": non-finite state");
  }
  if (vel.norm() >= 15.0) {
    throw DataError("AgentState " + std::to_string(id) + ": |vel| >= 15 m/s");
  }
}

Vec2 SocialForceRepresentation::ped_sum() const {
  Vec2 s = Vec2::Zero();
  for (const Vec2& f : f_ped_bins) s += f;
  return s;
}

Vec2 SocialForceRepresentation::obs_sum() const {
  Vec2 s = Vec2::Zero();
  for (const Vec2& f : f_obs_bins) s += f;
  return s;
}

Vec2 goal_force(const SfmParams& params, const Vec2& desired_vel, const Vec2& vel) {
  return params.k * (desired_vel - vel);
}

Vec2 obstacle_force(const SfmParams& params, const Vec2& obstacle_point,
                    const AgentState& ped) {
  const Vec2 d = ped.pos - obstacle_point;  // points to the pedestrian
  const double dist = d.norm();
  if (dist < 1e-9) {
    throw GeometryError("obstacle point coincides with pedestrian " +
                        std::to_string(ped.id));
  }
  const double mag = params.a_obs * std::exp((params.d_obs - dist) / params.b_obs);
  return mag * (d / dist);
}

double time_to_closest_approach(const AgentState& p, const AgentState& other) {
  const Vec2 d = p.pos - other.pos;   // relative displacement, points to p
  const Vec2 u = p.vel - other.vel;   // relative velocity of p wrt other
  const double un = u.norm();
  if (un < 1e-12) return kInf;  // no relative motion
  // Interaction requires the relative approach direction (-u) to lie within
  // pi/4 of the displacement; otherwise the pair is not on a collision course.
  const double cosang = (-u).dot(d) / (un * d.norm());
  if (cosang < kCosCutoff) return kInf;
  const double t = -d.dot(u) / (un * un);
  return t > 0.0 ? t : 0.0;
}

std::vector<Vec2> collision_prediction_force(const SfmParams& params,
                                             const AgentState& p,
                                             const std::vector<AgentState>& others) {
  std::vector<double> tca(others.size(), kInf);
  double t_p = kInf;
  for (std::size_t i = 0; i < others.size(); ++i) {
    const Vec2 d = p.pos - others[i].pos;
    if (d.norm() < 1e-9) {
      throw GeometryError("coincident pedestrians " + std::to_string(p.id) + " and " +
                          std::to_string(others[i].id));
    }
    tca[i] = time_to_closest_approach(p, others[i]);
    t_p = std::min(t_p, tca[i]);
  }

  std::vector<Vec2> forces(others.size(), Vec2::Zero());
  if (!std::isfinite(t_p)) return forces;  // nobody on a collision course
  t_p = std::max(t_p, kMinTca);

  const double speed = p.vel.norm();
  for (std::size_t i = 0; i < others.size(); ++i) {
    if (!std::isfinite(tca[i])) continue;  // cut off: zero contribution
    const Vec2 d = p.pos - others[i].pos;
    const Vec2 u = p.vel - others[i].vel;
    Vec2 dir = d + u * t_p;  // relative position of p wrt q at t_p
    if (dir.norm() < 1e-9) dir = d;  // exact predicted collision: push straight back
    forces[i] = params.a_ped * (speed / t_p) * std::exp(-d.norm() / params.b_ped) *
                dir.normalized();
  }
  return forces;
}

Vec2 resultant_force(const Vec2& goal, const std::vector<Vec2>& ped_forces,
                     const std::vector<Vec2>& obs_forces) {
  Vec2 f = goal;
  for (const Vec2& x : ped_forces) f += x;
  for (const Vec2& x : obs_forces) f += x;
  return f;
}

std::pair<std::vector<ForceSource>, std::vector<ForceSource>> force_sources(
    const SfmParams& params, const AgentState& p,
    const std::vector<AgentState>& others,
    const std::vector<ObstaclePolygon>& obstacles) {
  std::pair<std::vector<ForceSource>, std::vector<ForceSource>> out;

  const std::vector<Vec2> ped_forces = collision_prediction_force(params, p, others);
  out.first.reserve(others.size());
  for (std::size_t i = 0; i < others.size(); ++i) {
    const Vec2 toward = others[i].pos - p.pos;
    out.first.push_back({toward.normalized(), ped_forces[i]});
  }

  out.second.reserve(obstacles.size());
  for (const ObstaclePolygon& poly : obstacles) {
    const Vec2 z = poly.nearest_point(p.pos);
    const Vec2 f = obstacle_force(params, z, p);
    out.second.push_back({(z - p.pos).normalized(), f});
  }
  return out;
}

SocialForceRepresentation bin_sources(const std::vector<ForceSource>& ped,
                                      const std::vector<ForceSource>& obs,
                                      const AngleBinPartition& partition) {
  SocialForceRepresentation rep;
  rep.f_ped_bins.assign(partition.bins(), Vec2::Zero());
  rep.f_obs_bins.assign(partition.bins(), Vec2::Zero());
  for (const ForceSource& s : ped) {
    if (s.force.isZero(0.0)) continue;
    rep.f_ped_bins[partition.bin_index(s.dir)] += s.force;
  }
  for (const ForceSource& s : obs) {
    if (s.force.isZero(0.0)) continue;
    rep.f_obs_bins[partition.bin_index(s.dir)] += s.force;
  }
  return rep;
}

SocialForceRepresentation social_force_representation(
    const SfmParams& params, const AgentState& p,
    const std::vector<AgentState>& others,
    const std::vector<ObstaclePolygon>& obstacles,
    const AngleBinPartition& partition) {
  const auto [ped, obs] = force_sources(params, p, others, obstacles);
  return bin_sources(ped, obs, partition);
}

}  // namespace sofsim
