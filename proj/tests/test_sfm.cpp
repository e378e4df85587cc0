#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sofsim/rng.hpp"
#include "sofsim/sfm.hpp"

using namespace sofsim;

namespace {
AgentState agent(std::int64_t id, double px, double py, double vx, double vy) {
  return AgentState{id, Vec2(px, py), Vec2(vx, vy)};
}
}  // namespace

TEST_CASE("goal force") {
  SfmParams params;
  const Vec2 zero = goal_force(params, Vec2(1.2, 0), Vec2(1.2, 0));
  CHECK(zero.norm() == 0.0);

  params.k = 2.0;
  const Vec2 f = goal_force(params, Vec2(1, 0), Vec2(0, 0));
  CHECK(f.x() == doctest::Approx(2.0));
  CHECK(f.y() == doctest::Approx(0.0));

  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    params.k = rng.uniform(0.1, 5.0);
    const Vec2 v0(rng.uniform(-2, 2), rng.uniform(-2, 2));
    const Vec2 v(rng.uniform(-2, 2), rng.uniform(-2, 2));
    const Vec2 got = goal_force(params, v0, v);
    CHECK(got.x() == params.k * (v0.x() - v.x()));
    CHECK(got.y() == params.k * (v0.y() - v.y()));
  }
}

TEST_CASE("obstacle force magnitude law") {
  SfmParams params;
  params.a_obs = 5.0;
  params.b_obs = 0.3;
  params.d_obs = 0.4;

  AgentState ped = agent(1, params.d_obs, 0, 0, 0);
  CHECK(obstacle_force(params, Vec2(0, 0), ped).norm() == doctest::Approx(params.a_obs));

  ped.pos = Vec2(params.d_obs + params.b_obs, 0);
  CHECK(obstacle_force(params, Vec2(0, 0), ped).norm() ==
        doctest::Approx(params.a_obs / std::exp(1.0)));

  // geometric grid of distances vs an independent exp evaluation
  double prev_mag = std::numeric_limits<double>::infinity();
  for (double d = 0.05; d < 20.0; d *= 1.5) {
    ped.pos = Vec2(d, 0);
    const double got = obstacle_force(params, Vec2(0, 0), ped).norm();
    const double expected = params.a_obs * std::exp((params.d_obs - d) / params.b_obs);
    CHECK(std::abs(got - expected) <= 1e-12 * expected);
    CHECK(got < prev_mag);  // strictly decreasing in distance
    prev_mag = got;
  }

  ped.pos = Vec2(0, 0);
  CHECK_THROWS_AS(obstacle_force(params, Vec2(0, 0), ped), GeometryError);

  // direction points to the pedestrian
  ped.pos = Vec2(0, -2);
  const Vec2 f = obstacle_force(params, Vec2(0, 0), ped);
  CHECK(f.normalized().y() == doctest::Approx(-1.0));
}

TEST_CASE("collision prediction: no relative motion means no force") {
  SfmParams params;
  const AgentState p = agent(0, 0, 0, 1, 0);
  const std::vector<AgentState> others{agent(1, 3, 0, 1, 0)};
  const auto forces = collision_prediction_force(params, p, others);
  REQUIRE(forces.size() == 1);
  CHECK(forces[0].norm() == 0.0);
}

TEST_CASE("collision prediction: receding agents give zero total force") {
  SfmParams params;
  const AgentState p = agent(0, 0, 0, 1, 0);
  const std::vector<AgentState> others{
      agent(1, 2, 0, 2, 0),    // ahead, moving away faster
      agent(2, -2, 0, -1, 0),  // behind, moving away
      agent(3, 0, 3, 0, 2),    // above, moving away
  };
  for (const auto& f : collision_prediction_force(params, p, others)) {
    CHECK(f.norm() == 0.0);
  }
}

TEST_CASE("collision prediction: head-on closed form matches dense scan") {
  SfmParams params;
  const AgentState p = agent(0, 0, 0, 1, 0);
  const AgentState q = agent(1, 4, 0, -1, 0);

  const double t_closed = time_to_closest_approach(p, q);
  REQUIRE(std::isfinite(t_closed));

  const Vec2 d = p.pos - q.pos;
  const Vec2 u = p.vel - q.vel;
  double best_t = 0.0, best_norm = std::numeric_limits<double>::infinity();
  for (double t = 0.0; t <= 10.0; t += 1e-4) {
    const double n = (d + u * t).norm();
    if (n < best_norm) {
      best_norm = n;
      best_t = t;
    }
  }
  CHECK(std::abs(t_closed - best_t) < 1e-3);

  // exact head-on: predicted relative position vanishes, force falls back to
  // pushing straight back from q
  const auto forces = collision_prediction_force(params, p, {q});
  CHECK(forces[0].normalized().x() == doctest::Approx(-1.0));

  // laterally offset approach: direction must equal unit(d'(t_p))
  const AgentState q2 = agent(2, 4, 0.3, -1, 0);
  const double t2 = time_to_closest_approach(p, q2);
  REQUIRE(std::isfinite(t2));
  const Vec2 d2 = p.pos - q2.pos;
  const Vec2 dir_expected = (d2 + (p.vel - q2.vel) * t2).normalized();
  const auto f2 = collision_prediction_force(params, p, {q2});
  CHECK((f2[0].normalized() - dir_expected).norm() < 1e-12);

  // magnitude law: A * (v_p / t_p) * exp(-d/B)
  const double expected_mag = params.a_ped * (p.vel.norm() / t2) *
                              std::exp(-d2.norm() / params.b_ped);
  CHECK(f2[0].norm() == doctest::Approx(expected_mag).epsilon(1e-12));
}

TEST_CASE("collision prediction: shared t_p and amplitude scaling") {
  SfmParams params;
  const AgentState p = agent(0, 0, 0, 1.2, 0);
  const std::vector<AgentState> others{
      agent(1, 5, 0.1, -1, 0),
      agent(2, 2, -0.1, -1, 0),  // closer: sets t_p
  };
  const double t1 = time_to_closest_approach(p, others[0]);
  const double t2 = time_to_closest_approach(p, others[1]);
  const double t_p = std::min(t1, t2);
  const auto forces = collision_prediction_force(params, p, others);
  for (std::size_t i = 0; i < others.size(); ++i) {
    const Vec2 d = p.pos - others[i].pos;
    const double mag = params.a_ped * (p.vel.norm() / t_p) *
                       std::exp(-d.norm() / params.b_ped);
    CHECK(forces[i].norm() == doctest::Approx(mag).epsilon(1e-12));
  }

  SfmParams scaled = params;
  scaled.a_ped *= 3.5;
  const auto forces2 = collision_prediction_force(scaled, p, others);
  for (std::size_t i = 0; i < others.size(); ++i) {
    CHECK((forces2[i] - 3.5 * forces[i]).norm() < 1e-15);
  }
}

TEST_CASE("resultant force") {
  CHECK(resultant_force(Vec2(0, 0), {}, {}).norm() == 0.0);
  CHECK(resultant_force(Vec2(1, 0), {Vec2(-1, 0)}, {}).norm() == 0.0);

  Rng rng(42);
  for (int i = 0; i < 50; ++i) {
    Vec2 goal(rng.uniform(-1, 1), rng.uniform(-1, 1));
    std::vector<Vec2> ped, obs;
    Vec2 expected = goal;
    for (int j = 0; j < 5; ++j) {
      ped.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1));
      obs.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1));
      expected += ped.back() + obs.back();
    }
    CHECK((resultant_force(goal, ped, obs) - expected).norm() < 1e-15);
  }
}

namespace {
struct RandomScene {
  AgentState p;
  std::vector<AgentState> others;
  std::vector<ObstaclePolygon> obstacles;
};

RandomScene random_scene(Rng& rng, int n_others, int n_obstacles) {
  RandomScene s;
  s.p = agent(0, rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1.5, 1.5),
              rng.uniform(-1.5, 1.5));
  for (int i = 0; i < n_others; ++i) {
    s.others.push_back(agent(i + 1, s.p.pos.x() + rng.uniform(-4, 4),
                             s.p.pos.y() + rng.uniform(-4, 4), rng.uniform(-1.5, 1.5),
                             rng.uniform(-1.5, 1.5)));
  }
  for (int i = 0; i < n_obstacles; ++i) {
    const Vec2 c(s.p.pos.x() + rng.uniform(-6, 6), s.p.pos.y() + rng.uniform(-6, 6));
    std::vector<Vec2> verts;
    for (double a : {0.3, 2.1, 4.0, 5.5}) {
      const double r = rng.uniform(0.3, 1.0);
      verts.emplace_back(c.x() + r * std::cos(a), c.y() + r * std::sin(a));
    }
    s.obstacles.emplace_back(verts);
  }
  return s;
}
}  // namespace

TEST_CASE("representation: empty scene gives all-zero bins") {
  SfmParams params;
  AngleBinPartition bins(4);
  const auto rep = social_force_representation(params, agent(0, 0, 0, 1, 0), {}, {}, bins);
  REQUIRE(rep.bins() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(rep.f_ped_bins[i].norm() == 0.0);
    CHECK(rep.f_obs_bins[i].norm() == 0.0);
  }
}

TEST_CASE("representation: single obstacle due north lands in bin 1") {
  SfmParams params;
  AngleBinPartition bins(4, -kPi / 4.0);
  std::vector<ObstaclePolygon> obstacles{
      ObstaclePolygon({Vec2(-0.5, 3), Vec2(0.5, 3), Vec2(0, 4)})};
  const auto rep =
      social_force_representation(params, agent(0, 0, 0, 0.5, 0), {}, obstacles, bins);
  for (int i = 0; i < 4; ++i) {
    CHECK(rep.f_ped_bins[i].norm() == 0.0);
    if (i == 1) {
      CHECK(rep.f_obs_bins[i].norm() > 0.0);
    } else {
      CHECK(rep.f_obs_bins[i].norm() == 0.0);
    }
  }
}

TEST_CASE("representation: per-bin resultants sum the member forces (5 bins)") {
  // two pedestrian forces and two obstacle forces, binned by hand
  SfmParams params;
  const int m = 5;
  AngleBinPartition bins(m, -kPi / m);
  const AgentState p = agent(0, 0, 0, 1.0, 0.2);
  const std::vector<AgentState> others{
      agent(1, 3, 0.4, -1.0, 0.0),
      agent(2, 0.5, -2.5, 0.1, 1.2),
  };
  const std::vector<ObstaclePolygon> obstacles{
      ObstaclePolygon({Vec2(-2, 1), Vec2(-1, 1), Vec2(-1.5, 2)}),
      ObstaclePolygon({Vec2(1, -2), Vec2(2, -2), Vec2(1.5, -1)}),
  };

  std::vector<Vec2> ped_expected(m, Vec2::Zero());
  std::vector<Vec2> obs_expected(m, Vec2::Zero());
  const auto ped_forces = collision_prediction_force(params, p, others);
  for (std::size_t i = 0; i < others.size(); ++i) {
    if (ped_forces[i].norm() == 0.0) continue;
    ped_expected[bins.bin_index(others[i].pos - p.pos)] += ped_forces[i];
  }
  for (const auto& poly : obstacles) {
    const Vec2 z = poly.nearest_point(p.pos);
    obs_expected[bins.bin_index(z - p.pos)] += obstacle_force(params, z, p);
  }

  const auto rep = social_force_representation(params, p, others, obstacles, bins);
  for (int i = 0; i < m; ++i) {
    CHECK((rep.f_ped_bins[i] - ped_expected[i]).norm() < 1e-15);
    CHECK((rep.f_obs_bins[i] - obs_expected[i]).norm() < 1e-15);
  }
}

TEST_CASE("representation: bin sums conserve the unbinned totals") {
  SfmParams params;
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const RandomScene s = random_scene(rng, 6, 3);
    AngleBinPartition bins(4);
    const auto rep =
        social_force_representation(params, s.p, s.others, s.obstacles, bins);

    Vec2 ped_total = Vec2::Zero();
    for (const Vec2& f : collision_prediction_force(params, s.p, s.others)) ped_total += f;
    Vec2 obs_total = Vec2::Zero();
    for (const auto& poly : s.obstacles) {
      obs_total += obstacle_force(params, poly.nearest_point(s.p.pos), s.p);
    }
    CHECK((rep.ped_sum() - ped_total).norm() < 1e-9);
    CHECK((rep.obs_sum() - obs_total).norm() < 1e-9);
  }
}

TEST_CASE("representation: rotating the scene by 2*pi/m shifts bins cyclically") {
  SfmParams params;
  Rng rng(31);
  const int m = 4;
  AngleBinPartition bins(m);
  const double delta = kTwoPi / m;
  const Eigen::Matrix2d R = Eigen::Rotation2Dd(delta).toRotationMatrix();

  for (int trial = 0; trial < 20; ++trial) {
    const RandomScene s = random_scene(rng, 5, 2);
    const auto rep = social_force_representation(params, s.p, s.others, s.obstacles, bins);

    // rotate everything about p
    AgentState p2 = s.p;
    p2.vel = R * s.p.vel;
    std::vector<AgentState> others2;
    for (const auto& o : s.others) {
      others2.push_back({o.id, s.p.pos + R * (o.pos - s.p.pos), R * o.vel});
    }
    std::vector<ObstaclePolygon> obstacles2;
    for (const auto& poly : s.obstacles) {
      std::vector<Vec2> verts;
      for (const Vec2& v : poly.vertices()) verts.push_back(s.p.pos + R * (v - s.p.pos));
      obstacles2.emplace_back(verts);
    }
    const auto rep2 = social_force_representation(params, p2, others2, obstacles2, bins);

    for (int i = 0; i < m; ++i) {
      CHECK((rep2.f_ped_bins[(i + 1) % m] - R * rep.f_ped_bins[i]).norm() < 1e-9);
      CHECK((rep2.f_obs_bins[(i + 1) % m] - R * rep.f_obs_bins[i]).norm() < 1e-9);
    }
  }
}
