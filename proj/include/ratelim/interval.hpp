#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace ratelim {

/// Closed real interval [lo, hi] with lo <= hi.
///
/// Decoder cells are half-open on their upper end except for the top cell.
/// They are stored closed here: measures do not see boundary points, and
/// membership tests use closed comparison.
class Interval {
 public:
  constexpr Interval() = default;
  Interval(double lo, double hi) : lo_(lo), hi_(hi) {
    if (!(lo <= hi)) {
      throw std::invalid_argument("Interval: lower endpoint exceeds upper endpoint");
    }
  }

  static Interval point(double v) { return Interval(v, v); }
  /// [center - width/2, center + width/2]
  static Interval centered(double center, double width) {
    return Interval(center - 0.5 * width, center + 0.5 * width);
  }

  constexpr double lo() const { return lo_; }
  constexpr double hi() const { return hi_; }
  constexpr double measure() const { return hi_ - lo_; }
  constexpr double midpoint() const { return 0.5 * (lo_ + hi_); }

  constexpr bool contains(double v, double tol = 0.0) const {
    return v >= lo_ - tol && v <= hi_ + tol;
  }
  constexpr bool contains_zero() const { return lo_ <= 0.0 && 0.0 <= hi_; }

  friend constexpr bool operator==(const Interval&, const Interval&) = default;

 private:
  double lo_ = 0.0;
  double hi_ = 0.0;
};

inline std::ostream& operator<<(std::ostream& os, const Interval& i) {
  return os << '[' << i.lo() << ", " << i.hi() << ']';
}

inline double measure(const Interval& i) { return i.measure(); }

inline Interval operator-(const Interval& i) { return Interval(-i.hi(), -i.lo()); }

inline Interval translate(const Interval& i, double shift) {
  return Interval(i.lo() + shift, i.hi() + shift);
}

/// Minkowski sum. For intervals the measure is exactly additive.
inline Interval minkowski_sum(const Interval& a, const Interval& b) {
  return Interval(a.lo() + b.lo(), a.hi() + b.hi());
}

/// Exact hull {a*y : a in A, y in Y} from the four endpoint products.
inline Interval scale_product(const Interval& a, const Interval& y) {
  const double p1 = a.lo() * y.lo();
  const double p2 = a.lo() * y.hi();
  const double p3 = a.hi() * y.lo();
  const double p4 = a.hi() * y.hi();
  return Interval(std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4}));
}

/// Three-branch functional used to split mu(A*Y) into nominal and
/// uncertainty parts: mu(A*Y) = |a*| mu(Y) + eps beta(Y) when 0 is not in A.
inline double beta(const Interval& y) {
  if (0.0 <= y.lo()) return y.hi() + y.lo();
  if (y.hi() <= 0.0) return -y.hi() - y.lo();
  return y.hi() - y.lo();
}

/// mu([a*-eps, a*+eps] * Y) by case analysis on where each factor sits
/// relative to the origin.
///
/// When both factors straddle the origin the measure is not (|a*|+eps) mu(Y)
/// in general: the negative tail of A can stretch a lopsided Y further than
/// the positive tail does. That case takes the larger extreme on each side.
inline double product_measure_cases(double a_star, double eps, const Interval& y) {
  const double a = std::abs(a_star);
  const bool a_has_zero = a - eps <= 0.0;
  if (y.contains_zero()) {
    if (!a_has_zero) return (a + eps) * y.measure();
    const double top = std::max((a + eps) * y.hi(), (eps - a) * -y.lo());
    const double bottom = std::max((a + eps) * -y.lo(), (eps - a) * y.hi());
    return top + bottom;
  }
  if (!a_has_zero) return a * y.measure() + eps * std::abs(y.hi() + y.lo());
  return 2.0 * eps * std::max(std::abs(y.hi()), std::abs(y.lo()));
}

}  // namespace ratelim
