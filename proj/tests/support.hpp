// Shared generators and independent oracles for the test suites.
#ifndef ORBITGUARD_TESTS_SUPPORT_HPP
#define ORBITGUARD_TESTS_SUPPORT_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "orbitguard/dynamics.hpp"
#include "orbitguard/engine.hpp"
#include "orbitguard/geometry.hpp"
#include "orbitguard/ingest.hpp"

namespace orbitguard::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

template <std::size_t D>
Aabb<D> random_box(std::mt19937_64& rng, double span, double max_extent) {
  Aabb<D> b;
  for (std::size_t k = 0; k < D; ++k) {
    const double lo = uniform(rng, -span, span);
    // Occasionally degenerate.
    const double ext = uniform_int(rng, 0, 9) == 0 ? 0.0 : uniform(rng, 0.0, max_extent);
    b.lo[k] = lo;
    b.hi[k] = lo + ext;
  }
  return b;
}

inline OrbitalElements random_elements(std::mt19937_64& rng, double a_lo, double a_hi,
                                       double e_max) {
  OrbitalElements el;
  el.a = uniform(rng, a_lo, a_hi);
  el.e = uniform(rng, 0.0, e_max);
  el.i = uniform(rng, 0.0, std::numbers::pi);
  el.raan = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  el.arg_perigee = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  el.nu0 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  return el;
}

/// Straight-line objects in a cube; densities vary per instance so that
/// roughly half of the instances contain a collision.
inline ProblemInstance random_linear_instance(std::mt19937_64& rng, int max_n = 20,
                                              int max_steps = 50) {
  ProblemInstance p;
  const int n = uniform_int(rng, 0, max_n);
  const int steps = uniform_int(rng, 1, max_steps);
  p.step_s = std::vector<double>{0.25, 0.5, 1.0}[uniform_int(rng, 0, 2)];
  p.horizon_s = steps * p.step_s;
  const double span = uniform(rng, 10.0, 80.0);
  for (int i = 0; i < n; ++i) {
    const Vec3 origin{uniform(rng, -span, span), uniform(rng, -span, span),
                      uniform(rng, -span, span)};
    const Vec3 vel{uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -3, 3)};
    p.objects.push_back({static_cast<ObjectId>(100 + i),
                         std::make_shared<LinearModel>(origin, vel), uniform(rng, 0.1, 2.0)});
  }
  return p;
}

/// Kepler objects in toy units (mu = 1) on a shell of radius ~1-1.6.
inline ProblemInstance random_kepler_instance(std::mt19937_64& rng, int max_n = 20,
                                              int max_steps = 50) {
  ProblemInstance p;
  const int n = uniform_int(rng, 0, max_n);
  const int steps = uniform_int(rng, 1, max_steps);
  p.step_s = 0.05;
  p.horizon_s = steps * p.step_s;
  const double radius_scale = uniform(rng, 0.02, 0.2);
  for (int i = 0; i < n; ++i) {
    const OrbitalElements el = random_elements(rng, 1.0, 1.6, 0.3);
    p.objects.push_back({static_cast<ObjectId>(7 + 3 * i),
                         std::make_shared<KeplerModel>(el, GravParam{1.0}),
                         uniform(rng, 0.5, 1.0) * radius_scale});
  }
  return p;
}

/// Independent first-collision oracle: recomputes positions from the models
/// directly and compares with the infinity-norm distance.
inline std::optional<Step> first_collision_step(const ProblemInstance& p) {
  std::vector<std::unique_ptr<Propagator>> props;
  for (const auto& o : p.objects) props.push_back(o.dynamics->make_propagator(p.step_s));
  std::vector<Vec3> pos(p.objects.size());
  for (Step s = 0; s <= p.total_steps(); ++s) {
    for (std::size_t i = 0; i < p.objects.size(); ++i) pos[i] = props[i]->position(s);
    for (std::size_t i = 0; i < p.objects.size(); ++i) {
      for (std::size_t j = i + 1; j < p.objects.size(); ++j) {
        bool hit = true;
        for (std::size_t k = 0; k < 3; ++k) {
          const double lo_i = pos[i][k] - p.objects[i].radius;
          const double hi_i = pos[i][k] + p.objects[i].radius;
          const double lo_j = pos[j][k] - p.objects[j].radius;
          const double hi_j = pos[j][k] + p.objects[j].radius;
          if (lo_i > hi_j || lo_j > hi_i) hit = false;
        }
        if (hit) return s;
      }
    }
  }
  return std::nullopt;
}

/// True when the two ids' occupancy cubes overlap at `step`.
inline bool pair_collides(const ProblemInstance& p, ObjectId a, ObjectId b, Step step) {
  const WorldObject* oa = nullptr;
  const WorldObject* ob = nullptr;
  for (const auto& o : p.objects) {
    if (o.id == a) oa = &o;
    if (o.id == b) ob = &o;
  }
  if (!oa || !ob || a == b) return false;
  auto pa = oa->dynamics->make_propagator(p.step_s);
  auto pb = ob->dynamics->make_propagator(p.step_s);
  return occ(*oa, *pa, step).overlaps(occ(*ob, *pb, step));
}

/// Two circular orbits of radius a, one equatorial and one polar, that both
/// pass the ascending node (a, 0, 0) at time contact_step * step_s. Adjacent
/// steps separate them by about a * n * step_s along y and z.
inline std::vector<CatalogEntry> crossing_pair(ObjectId first_id, double a, Step contact_step,
                                               double step_s, double radius) {
  const double n = std::sqrt(GravParam{}.mu / (a * a * a));
  double nu0 = std::fmod(-n * static_cast<double>(contact_step) * step_s, 2.0 * std::numbers::pi);
  if (nu0 < 0.0) nu0 += 2.0 * std::numbers::pi;
  OrbitalElements flat;
  flat.a = a;
  flat.nu0 = nu0;
  OrbitalElements polar = flat;
  polar.i = 0.5 * std::numbers::pi;
  return {{first_id, flat, radius}, {first_id + 1, polar, radius}};
}

}  // namespace orbitguard::testing

#endif  // ORBITGUARD_TESTS_SUPPORT_HPP
