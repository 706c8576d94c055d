#ifndef ORBITGUARD_INTERVAL_HPP
#define ORBITGUARD_INTERVAL_HPP

#include <stdexcept>

namespace orbitguard {

/// Closed interval [lo, hi] over the reals.
///
/// Results of arithmetic are enclosures: when an endpoint computation is
/// inexact in floating point, that endpoint is pushed outward by one ulp.
/// Exact endpoint results are left untouched, so point intervals of exactly
/// representable values stay points.
class Interval {
 public:
  constexpr Interval() = default;
  constexpr explicit Interval(double value) : lo_(value), hi_(value) {}
  /// Throws std::invalid_argument if lo > hi or either bound is NaN.
  Interval(double lo, double hi);

  constexpr double lo() const { return lo_; }
  constexpr double hi() const { return hi_; }
  constexpr double width() const { return hi_ - lo_; }
  constexpr bool is_point() const { return lo_ == hi_; }

  constexpr bool contains(double x) const { return lo_ <= x && x <= hi_; }
  constexpr bool contains(const Interval& other) const {
    return lo_ <= other.lo_ && other.hi_ <= hi_;
  }
  constexpr bool overlaps(const Interval& other) const {
    return lo_ <= other.hi_ && other.lo_ <= hi_;
  }

  friend constexpr bool operator==(const Interval&, const Interval&) = default;

 private:
  double lo_ = 0.0;
  double hi_ = 0.0;
};

class DivisionByIntervalContainingZero : public std::domain_error {
 public:
  DivisionByIntervalContainingZero();
};

Interval operator+(const Interval& a, const Interval& b);
Interval operator-(const Interval& a, const Interval& b);
Interval operator-(const Interval& a);
Interval operator*(const Interval& a, const Interval& b);
/// Reciprocal-and-multiply. Throws DivisionByIntervalContainingZero when
/// 0 lies in b.
Interval operator/(const Interval& a, const Interval& b);

Interval add(const Interval& a, const Interval& b);
Interval mul(const Interval& a, const Interval& b);
Interval div(const Interval& a, const Interval& b);
Interval reciprocal(const Interval& a);

/// Tightest enclosure of {sin x : x in a} up to endpoint rounding.
/// Intervals at least 2*pi wide map to [-1, 1].
Interval sin(const Interval& a);
Interval cos(const Interval& a);

/// Smallest interval containing both.
Interval hull(const Interval& a, const Interval& b);

}  // namespace orbitguard

#endif  // ORBITGUARD_INTERVAL_HPP
