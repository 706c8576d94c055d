#include "orbitguard/interval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace orbitguard {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kEps = std::numeric_limits<double>::epsilon();

double down(double x) { return std::nextafter(x, -kInf); }
double up(double x) { return std::nextafter(x, kInf); }

// A rounded value together with the sign of (exact - rounded).
struct Rounded {
  double value;
  int error_sign;  // -1: exact < value, 0: exact, +1: exact > value

  double lower() const { return error_sign < 0 ? down(value) : value; }
  double upper() const { return error_sign > 0 ? up(value) : value; }
};

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

Rounded rounded_sum(double a, double b) {
  const double s = a + b;
  if (!std::isfinite(s)) return {s, 0};
  const double bb = s - a;
  const double err = (a - (s - bb)) + (b - bb);
  return {s, sign_of(err)};
}

Rounded rounded_product(double a, double b) {
  const double p = a * b;
  if (!std::isfinite(p) || a == 0.0 || b == 0.0) return {p, 0};
  // fma residual is exact only away from the subnormal range.
  if (std::abs(p) < std::numeric_limits<double>::min() * 0x1p53) {
    return {p, 2};
  }
  return {p, sign_of(std::fma(a, b, -p))};
}

double lower_of(const Rounded& r) {
  return r.error_sign == 2 ? down(r.value) : r.lower();
}
double upper_of(const Rounded& r) {
  return r.error_sign == 2 ? up(r.value) : r.upper();
}

// Does [lo, hi] contain offset + 2*pi*k for some integer k? Borderline
// cases count as contained.
bool contains_phase(double lo, double hi, double offset) {
  const double tol = 4.0 * kEps * std::max({1.0, std::abs(lo), std::abs(hi)});
  const double k = std::ceil((lo - tol - offset) / kTwoPi);
  return offset + kTwoPi * k <= hi + tol;
}

template <typename Fn>
Interval periodic_range(const Interval& a, Fn fn, double max_phase,
                        double min_phase) {
  if (!(a.width() < kTwoPi)) return Interval(-1.0, 1.0);
  const double f_lo = fn(a.lo());
  const double f_hi = fn(a.hi());
  // fn(0) is exact for both sin and cos.
  const bool lo_exact = a.lo() == 0.0;
  const bool hi_exact = a.hi() == 0.0;
  double lower = std::min(lo_exact ? f_lo : down(f_lo), hi_exact ? f_hi : down(f_hi));
  double upper = std::max(lo_exact ? f_lo : up(f_lo), hi_exact ? f_hi : up(f_hi));
  if (contains_phase(a.lo(), a.hi(), max_phase)) upper = 1.0;
  if (contains_phase(a.lo(), a.hi(), min_phase)) lower = -1.0;
  return Interval(std::max(lower, -1.0), std::min(upper, 1.0));
}

}  // namespace

Interval::Interval(double lo, double hi) : lo_(lo), hi_(hi) {
  if (std::isnan(lo) || std::isnan(hi) || lo > hi) {
    throw std::invalid_argument("interval requires lo <= hi");
  }
}

DivisionByIntervalContainingZero::DivisionByIntervalContainingZero()
    : std::domain_error("division by an interval containing zero") {}

Interval operator+(const Interval& a, const Interval& b) {
  return Interval(rounded_sum(a.lo(), b.lo()).lower(),
                  rounded_sum(a.hi(), b.hi()).upper());
}

Interval operator-(const Interval& a) { return Interval(-a.hi(), -a.lo()); }

Interval operator-(const Interval& a, const Interval& b) { return a + (-b); }

Interval operator*(const Interval& a, const Interval& b) {
  const Rounded products[4] = {
      rounded_product(a.lo(), b.lo()), rounded_product(a.lo(), b.hi()),
      rounded_product(a.hi(), b.lo()), rounded_product(a.hi(), b.hi())};
  double lo = kInf;
  double hi = -kInf;
  for (const Rounded& p : products) {
    lo = std::min(lo, lower_of(p));
    hi = std::max(hi, upper_of(p));
  }
  return Interval(lo, hi);
}

Interval reciprocal(const Interval& a) {
  if (a.contains(0.0)) throw DivisionByIntervalContainingZero();
  // 1/x is decreasing on each side of zero.
  const double r_lo = 1.0 / a.hi();
  const double r_hi = 1.0 / a.lo();
  const bool lo_exact = std::fma(r_lo, a.hi(), -1.0) == 0.0;
  const bool hi_exact = std::fma(r_hi, a.lo(), -1.0) == 0.0;
  return Interval(lo_exact ? r_lo : down(r_lo), hi_exact ? r_hi : up(r_hi));
}

Interval operator/(const Interval& a, const Interval& b) {
  return a * reciprocal(b);
}

Interval add(const Interval& a, const Interval& b) { return a + b; }
Interval mul(const Interval& a, const Interval& b) { return a * b; }
Interval div(const Interval& a, const Interval& b) { return a / b; }

Interval sin(const Interval& a) {
  return periodic_range(
      a, [](double x) { return std::sin(x); }, std::numbers::pi / 2.0,
      -std::numbers::pi / 2.0);
}

Interval cos(const Interval& a) {
  return periodic_range(
      a, [](double x) { return std::cos(x); }, 0.0, std::numbers::pi);
}

Interval hull(const Interval& a, const Interval& b) {
  return Interval(std::min(a.lo(), b.lo()), std::max(a.hi(), b.hi()));
}

}  // namespace orbitguard
