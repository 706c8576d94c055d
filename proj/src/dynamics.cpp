#include "orbitguard/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace orbitguard {

namespace {

Vec3 axpy(const Vec3& origin, const Vec3& velocity, double t) {
  return {origin[0] + velocity[0] * t, origin[1] + velocity[1] * t,
          origin[2] + velocity[2] * t};
}

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

class LinearPropagator final : public Propagator {
 public:
  LinearPropagator(const Vec3& origin, const Vec3& velocity, double step_s)
      : origin_(origin), velocity_(velocity), step_s_(step_s) {}

  Vec3 position(Step step) override {
    return axpy(origin_, velocity_, static_cast<double>(step) * step_s_);
  }

  // Rounding is monotone, so the hull of the endpoint positions contains
  // every intermediate grid position exactly.
  Box3 sweep(Step first, Step last) override {
    const Vec3 a = position(first);
    const Vec3 b = position(last);
    Box3 box;
    for (std::size_t k = 0; k < 3; ++k) {
      box.lo[k] = std::min(a[k], b[k]);
      box.hi[k] = std::max(a[k], b[k]);
    }
    return box;
  }

 private:
  Vec3 origin_;
  Vec3 velocity_;
  double step_s_;
};

struct PerifocalBasis {
  Vec3 p;
  Vec3 q;
};

PerifocalBasis perifocal_basis(const OrbitalElements& el) {
  const double co = std::cos(el.raan), so = std::sin(el.raan);
  const double cw = std::cos(el.arg_perigee), sw = std::sin(el.arg_perigee);
  const double ci = std::cos(el.i), si = std::sin(el.i);
  return {{co * cw - so * sw * ci, so * cw + co * sw * ci, sw * si},
          {-co * sw - so * cw * ci, -so * sw + co * cw * ci, cw * si}};
}

Vec3 perifocal_to_eci(const PerifocalBasis& basis, double semi_latus, double e,
                      double nu) {
  const double c = std::cos(nu);
  const double s = std::sin(nu);
  const double rho = semi_latus / (1.0 + e * c);
  const double x = rho * c;
  const double y = rho * s;
  return {basis.p[0] * x + basis.q[0] * y, basis.p[1] * x + basis.q[1] * y,
          basis.p[2] * x + basis.q[2] * y};
}

class KeplerPropagator final : public Propagator {
 public:
  KeplerPropagator(const KeplerModel& model, double step_s)
      : model_(model), nu_(model.elements(), model.grav(), step_s) {}

  Vec3 position(Step step) override { return model_.position_for(nu_.at(step)); }

  Box3 sweep(Step first, Step last) override {
    if (first == last) {
      const Vec3 p = position(first);
      return Box3{p, p};
    }
    return model_.sweep_nu(nu_.at(first), nu_.at(last));
  }

  void retire_before(Step step) override { nu_.retire_before(step); }

 private:
  const KeplerModel& model_;
  NuTrajectory nu_;
};

// Past this many memoized points the oldest half is dropped.
constexpr std::size_t kMaxCheckpoints = 64;

}  // namespace

// ---------------------------------------------------------------------------

Vec3 LinearModel::position_at(double t) const { return axpy(origin_, velocity_, t); }

std::unique_ptr<Propagator> LinearModel::make_propagator(double step_s) const {
  return std::make_unique<LinearPropagator>(origin_, velocity_, step_s);
}

Interval LinearModel::radial_range(double horizon_s) const {
  const double r0 = norm(origin_);
  const double r1 = norm(position_at(horizon_s));
  const double vv = velocity_[0] * velocity_[0] + velocity_[1] * velocity_[1] +
                    velocity_[2] * velocity_[2];
  double closest = std::min(r0, r1);
  if (vv > 0.0) {
    const double pv = origin_[0] * velocity_[0] + origin_[1] * velocity_[1] +
                      origin_[2] * velocity_[2];
    const double t = std::clamp(-pv / vv, 0.0, horizon_s);
    closest = std::min(closest, norm(position_at(t)));
  }
  return Interval(closest, std::max(r0, r1));
}

// ---------------------------------------------------------------------------

void OrbitalElements::validate() const {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw std::invalid_argument("semi-major axis must be positive");
  }
  if (!(e >= 0.0 && e < 1.0)) {
    throw std::invalid_argument("eccentricity must lie in [0, 1)");
  }
  for (double angle : {i, raan, arg_perigee, nu0}) {
    if (!std::isfinite(angle)) throw std::invalid_argument("angles must be finite");
  }
}

double OrbitalElements::period(GravParam mu) const {
  return 2.0 * std::numbers::pi * std::sqrt(a * a * a / mu.mu);
}

double nu_dot(double nu, const OrbitalElements& el, GravParam mu) {
  const double p = el.a * (1.0 - el.e * el.e);
  const double f = 1.0 + el.e * std::cos(nu);
  return std::sqrt(mu.mu / (p * p * p)) * f * f;
}

Vec3 elements_to_eci(const OrbitalElements& el, double nu) {
  return perifocal_to_eci(perifocal_basis(el), el.a * (1.0 - el.e * el.e), el.e, nu);
}

// ---------------------------------------------------------------------------

NuTrajectory::NuTrajectory(const OrbitalElements& el, GravParam mu, double step_s)
    : e_(el.e), step_s_(step_s), nu0_(el.nu0) {
  const double p = el.a * (1.0 - el.e * el.e);
  rate_scale_ = std::sqrt(mu.mu / (p * p * p));
  sqrt_rate_scale_ = std::sqrt(rate_scale_);
  // Largest step in nu is h * rate_scale * (1 + e)^2.
  small_steps_ = step_s_ * rate_scale_ * (1.0 + e_) * (1.0 + e_) <= 5e-6;
  checkpoints_.reserve(kMaxCheckpoints + 1);
  checkpoints_.push_back({0, exact_state(nu0_)});
}

namespace {

// Carried trigonometric terms are refreshed from nu at every multiple of
// this step.
constexpr Step kResync = 64;

// cos d - 1 and sin d by series; exact to double precision for |d| <= 1e-2.
void small_angle(double d, double& cm1, double& sd) {
  const double d2 = d * d;
  if (std::abs(d) <= 2e-4) {
    cm1 = -0.5 * d2;
    sd = d - d * d2 * (1.0 / 6.0);
    return;
  }
  cm1 = -d2 * (0.5 - d2 * (1.0 / 24.0 - d2 / 720.0));
  sd = d * (1.0 - d2 * (1.0 / 6.0 - d2 * (1.0 / 120.0 - d2 / 5040.0)));
}

}  // namespace

NuTrajectory::State NuTrajectory::exact_state(double nu) const {
  const double ec = e_ * std::cos(nu);
  return {nu, sqrt_rate_scale_ * (1.0 + ec), sqrt_rate_scale_ * ec,
          sqrt_rate_scale_ * (e_ * std::sin(nu))};
}

// Classical RK4 on nu' = K (1 + e cos nu)^2. Stage values use the
// angle-addition identity on the carried terms; offsets beyond 1e-2 rad
// fall back to cos.
double NuTrajectory::rk4(const State& x, double h) const {
  auto rate_shifted = [&](double d) {
    double f;
    if (std::abs(d) > 1e-2) {
      f = sqrt_rate_scale_ * (1.0 + e_ * std::cos(x.nu + d));
    } else {
      double cm1;
      double sd;
      small_angle(d, cm1, sd);
      f = x.v + (x.E * cm1 - x.F * sd);
    }
    return f * f;
  };
  const double k1 = x.v * x.v;
  const double k2 = rate_shifted(0.5 * h * k1);
  const double k3 = rate_shifted(0.5 * h * k2);
  const double k4 = rate_shifted(h * k3);
  return x.nu + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

NuTrajectory::State NuTrajectory::advance(State x, Step from, Step to) const {
  const double h = step_s_;
  if (small_steps_) {
    // The RK4 increment through its series in h: with f = v^2, f' = -2 v F
    // and f'' = 2 (F^2 - v E), d = h f (1 + h f' / 2 + h^2 (f'^2 + f f'') / 6).
    // RK4 agrees with this through h^4; with h f <= 5e-6 the remainder is
    // below 1e-20 rad, under the rounding of nu.
    double nu = x.nu;
    double v = x.v;
    double E = x.E;
    double F = x.F;
    for (Step s = from + 1; s <= to; ++s) {
      const double q = h * v;
      const double g = q * v;
      const double c2 = F * F - (v * E) * (1.0 / 3.0);
      const double d = g * ((1.0 - q * F) + (q * q) * c2);
      nu += d;
      if (s % kResync == 0) {
        const State r = exact_state(nu);
        v = r.v;
        E = r.E;
        F = r.F;
        continue;
      }
      const double cm1 = (-0.5 * d) * d;
      const double dE = E * cm1 - F * d;
      const double dF = F * cm1 + E * d;
      v += dE;
      E += dE;
      F += dF;
    }
    return {nu, v, E, F};
  }
  for (Step s = from + 1; s <= to; ++s) {
    const double d = rk4(x, h) - x.nu;
    const double nu = x.nu + d;
    if (s % kResync == 0 || std::abs(d) > 1e-2) {
      x = exact_state(nu);
      continue;
    }
    double cm1;
    double sd;
    small_angle(d, cm1, sd);
    const double dE = x.E * cm1 - x.F * sd;
    x = {nu, x.v + dE, x.E + dE, x.F + (x.F * cm1 + x.E * sd)};
  }
  return x;
}

double NuTrajectory::at(Step step) {
  if (step < 0) throw DynamicsFailure("negative time step requested");
  auto after = [](Step s, const Checkpoint& cp) { return s < cp.step; };
  auto it = std::upper_bound(checkpoints_.begin(), checkpoints_.end(), step, after);
  const Checkpoint base = it != checkpoints_.begin()
                              ? *std::prev(it)
                              : Checkpoint{0, exact_state(nu0_)};
  if (base.step == step) return base.state.nu;
  const State x = advance(base.state, base.step, step);

  if (checkpoints_.size() >= kMaxCheckpoints) {
    const std::size_t drop = checkpoints_.size() / 2;
    checkpoints_.erase(checkpoints_.begin(), checkpoints_.begin() + drop);
  }
  it = std::upper_bound(checkpoints_.begin(), checkpoints_.end(), step, after);
  checkpoints_.insert(it, {step, x});
  return x.nu;
}

double NuTrajectory::at_time(double t) {
  if (!(t >= 0.0)) throw DynamicsFailure("negative time requested");
  const Step k = static_cast<Step>(std::floor(t / step_s_));
  const double nu = at(k);
  const double rest = t - static_cast<double>(k) * step_s_;
  if (!(rest > 0.0)) return nu;
  auto it = std::upper_bound(checkpoints_.begin(), checkpoints_.end(), k,
                             [](Step s, const Checkpoint& cp) { return s < cp.step; });
  return rk4(std::prev(it)->state, rest);
}

void NuTrajectory::retire_before(Step step) {
  // Keep the last checkpoint at or below `step` as a restart point.
  auto it = std::upper_bound(checkpoints_.begin(), checkpoints_.end(), step,
                             [](Step s, const Checkpoint& cp) { return s < cp.step; });
  if (it == checkpoints_.begin()) return;
  checkpoints_.erase(checkpoints_.begin(), std::prev(it));
}

double propagate_nu(const OrbitalElements& el, GravParam mu, double t, double step_s) {
  NuTrajectory traj(el, mu, step_s);
  return traj.at_time(t);
}

// ---------------------------------------------------------------------------

KeplerModel::KeplerModel(const OrbitalElements& el, GravParam mu) : el_(el), mu_(mu) {
  el_.validate();
  if (!(mu_.mu > 0.0)) throw std::invalid_argument("mu must be positive");
  semi_latus_ = el_.a * (1.0 - el_.e * el_.e);
  const PerifocalBasis basis = perifocal_basis(el_);
  p_axis_ = basis.p;
  q_axis_ = basis.q;
  for (std::size_t k = 0; k < 3; ++k) {
    amplitude_[k] = std::hypot(p_axis_[k], q_axis_[k]);
    phase_[k] = std::atan2(q_axis_[k], p_axis_[k]);
  }
  // Absorbs the few-ulp gap between the scalar position path and the
  // amplitude/phase form evaluated in interval arithmetic.
  slack_ = 1e-13 * el_.apogee_radius();
}

Vec3 KeplerModel::position_for(double nu) const {
  return perifocal_to_eci({p_axis_, q_axis_}, semi_latus_, el_.e, nu);
}

Box3 KeplerModel::sweep_nu(double nu_lo, double nu_hi) const {
  const Interval nu(nu_lo, nu_hi);
  const Interval denom = Interval(1.0) + Interval(el_.e) * cos(nu);
  const Interval rho = Interval(semi_latus_) / denom;
  Box3 box;
  for (std::size_t k = 0; k < 3; ++k) {
    const Interval coord = rho * (Interval(amplitude_[k]) * cos(nu - Interval(phase_[k])));
    box.lo[k] = coord.lo() - slack_;
    box.hi[k] = coord.hi() + slack_;
  }
  return box;
}

std::unique_ptr<Propagator> KeplerModel::make_propagator(double step_s) const {
  return std::make_unique<KeplerPropagator>(*this, step_s);
}

Interval KeplerModel::radial_range(double /*horizon_s*/) const {
  return Interval(el_.perigee_radius(), el_.apogee_radius());
}

Box3 occ_int(const OrbitalElements& el, GravParam mu, const Interval& t, double step_s) {
  const KeplerModel model(el, mu);
  auto prop = model.make_propagator(step_s);
  const auto first = static_cast<Step>(std::llround(t.lo() / step_s));
  const auto last = static_cast<Step>(std::llround(t.hi() / step_s));
  return prop->sweep(first, last);
}

}  // namespace orbitguard
