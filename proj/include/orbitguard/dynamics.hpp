#ifndef ORBITGUARD_DYNAMICS_HPP
#define ORBITGUARD_DYNAMICS_HPP

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "orbitguard/geometry.hpp"
#include "orbitguard/interval.hpp"

namespace orbitguard {

/// Index of a grid instant; time in seconds is step * step_s.
using Step = std::int64_t;

class DynamicsFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-run, per-object motion state on a fixed time grid.
///
/// Not thread-safe; each engine run owns its propagators.
class Propagator {
 public:
  virtual ~Propagator() = default;

  /// Position at grid step `step`.
  virtual Vec3 position(Step step) = 0;

  /// Box containing position(s) for every grid step s in [first, last].
  /// When first == last the box is exactly the point position(first).
  /// Nested step ranges give nested boxes.
  virtual Box3 sweep(Step first, Step last) = 0;

  /// Hint that no step below `step` will be requested again.
  virtual void retire_before(Step /*step*/) {}
};

/// Immutable description of how an object moves. Shared across runs and
/// threads; all per-run state lives in the propagators it creates.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual std::unique_ptr<Propagator> make_propagator(double step_s) const = 0;

  /// Range of distances from the origin the object can take over
  /// [0, horizon_s].
  virtual Interval radial_range(double horizon_s) const = 0;
};

/// Straight-line motion p(t) = origin + velocity * t.
class LinearModel final : public DynamicsModel {
 public:
  LinearModel(const Vec3& origin, const Vec3& velocity)
      : origin_(origin), velocity_(velocity) {}

  Vec3 position_at(double t) const;
  std::unique_ptr<Propagator> make_propagator(double step_s) const override;
  Interval radial_range(double horizon_s) const override;

 private:
  Vec3 origin_;
  Vec3 velocity_;
};

// ---------------------------------------------------------------------------
// Kepler two-body motion

/// Geocentric gravitational parameter in m^3/s^2.
struct GravParam {
  double mu = 3.986004418e14;
};

/// Classical elements. Angles in radians, a in meters. `nu0` is the true
/// anomaly at t = 0.
struct OrbitalElements {
  double a = 0.0;
  double e = 0.0;
  double i = 0.0;
  double raan = 0.0;
  double arg_perigee = 0.0;
  double nu0 = 0.0;

  /// Throws std::invalid_argument unless a > 0, 0 <= e < 1 and all angles
  /// are finite.
  void validate() const;

  double perigee_radius() const { return a * (1.0 - e); }
  double apogee_radius() const { return a * (1.0 + e); }
  double period(GravParam mu = {}) const;
};

/// Right-hand side of the true-anomaly equation:
/// sqrt(mu / (a (1 - e^2))^3) * (1 + e cos nu)^2.
double nu_dot(double nu, const OrbitalElements& el, GravParam mu = {});

/// ECI position for true anomaly `nu`: perifocal (rho cos nu, rho sin nu, 0)
/// rotated by Rz(raan) Rx(i) Rz(arg_perigee).
Vec3 elements_to_eci(const OrbitalElements& el, double nu);

/// Unbounded (not wrapped) true anomaly integrated with fixed-step RK4.
///
/// Values at grid steps are memoized sparsely. Because the integrator is
/// autonomous, restarting from any stored step reproduces exactly the same
/// values as integrating from zero.
class NuTrajectory {
 public:
  NuTrajectory(const OrbitalElements& el, GravParam mu, double step_s);

  double step_s() const { return step_s_; }

  /// True anomaly at grid step `step` >= 0.
  double at(Step step);

  /// True anomaly at time t >= 0 seconds; off-grid times take one partial
  /// RK4 step from the preceding grid point.
  double at_time(double t);

  void retire_before(Step step);

  std::size_t checkpoint_count() const { return checkpoints_.size(); }

 private:
  // nu with v = sqrt(K) (1 + e cos nu), E = sqrt(K) e cos nu and
  // F = sqrt(K) e sin nu carried along the grid; the rate is v^2.
  struct State {
    double nu;
    double v;
    double E;
    double F;
  };
  struct Checkpoint {
    Step step;
    State state;
  };

  double rk4(const State& x, double h) const;
  // State at step `to` from state x at step `from`.
  State advance(State x, Step from, Step to) const;
  State exact_state(double nu) const;

  double e_;
  double rate_scale_;
  double sqrt_rate_scale_;
  double step_s_;
  bool small_steps_;  // h * max rate <= 5e-6
  double nu0_;
  std::vector<Checkpoint> checkpoints_;  // sorted by step
};

/// Convenience: nu(t) from a fresh trajectory on a grid of `step_s`.
double propagate_nu(const OrbitalElements& el, GravParam mu, double t,
                    double step_s);

class KeplerModel final : public DynamicsModel {
 public:
  /// Throws std::invalid_argument for invalid elements or mu <= 0.
  KeplerModel(const OrbitalElements& el, GravParam mu = {});

  const OrbitalElements& elements() const { return el_; }
  GravParam grav() const { return mu_; }

  std::unique_ptr<Propagator> make_propagator(double step_s) const override;
  Interval radial_range(double horizon_s) const override;

  /// Position for a given true anomaly (same arithmetic as propagators use).
  Vec3 position_for(double nu) const;

  /// Interval evaluation of the position over nu in [nu_lo, nu_hi].
  Box3 sweep_nu(double nu_lo, double nu_hi) const;

 private:
  OrbitalElements el_;
  GravParam mu_;
  double semi_latus_;
  Vec3 p_axis_;
  Vec3 q_axis_;
  // p_axis[k] cos nu + q_axis[k] sin nu == amplitude[k] cos(nu - phase[k])
  Vec3 amplitude_;
  Vec3 phase_;
  double slack_;
};

/// Interval occupancy of a Kepler object (without radius) over the grid
/// steps covering `t` seconds.
Box3 occ_int(const OrbitalElements& el, GravParam mu, const Interval& t,
             double step_s);

}  // namespace orbitguard

#endif  // ORBITGUARD_DYNAMICS_HPP
