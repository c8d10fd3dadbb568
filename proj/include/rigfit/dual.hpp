#pragma once

// Forward-mode dual numbers with a fixed number of tangent lanes.
//
// A Dual<N> carries a value and N partial derivatives. Residual evaluators are
// written once, templated on the scalar, and instantiated with double for
// values and Dual<N> for Jacobian columns (N columns per evaluation pass).

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <ostream>

namespace rigfit {

template <int N>
struct Dual {
  using Tangent = Eigen::Matrix<double, N, 1>;

  double a = 0.0;
  Tangent v = Tangent::Zero();

  Dual() = default;
  Dual(double value) : a(value) {}  // NOLINT: implicit promotion from double
  Dual(double value, const Tangent& tangent) : a(value), v(tangent) {}

  /// Independent variable seeded on one tangent lane.
  static Dual variable(double value, int lane) {
    Dual d(value);
    d.v[lane] = 1.0;
    return d;
  }

  Dual& operator+=(const Dual& o) {
    a += o.a;
    v += o.v;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    a -= o.a;
    v -= o.v;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    v = v * o.a + o.v * a;
    a *= o.a;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.a;
    a *= inv;
    v = (v - a * o.v) * inv;
    return *this;
  }
  Dual& operator+=(double s) {
    a += s;
    return *this;
  }
  Dual& operator-=(double s) {
    a -= s;
    return *this;
  }
  Dual& operator*=(double s) {
    a *= s;
    v *= s;
    return *this;
  }
  Dual& operator/=(double s) {
    const double inv = 1.0 / s;
    a *= inv;
    v *= inv;
    return *this;
  }

  EIGEN_MAKE_ALIGNED_OPERATOR_NEW
};

template <int N>
Dual<N> operator-(const Dual<N>& x) {
  return Dual<N>(-x.a, -x.v);
}
template <int N>
Dual<N> operator+(const Dual<N>& x) {
  return x;
}

template <int N>
Dual<N> operator+(Dual<N> x, const Dual<N>& y) {
  return x += y;
}
template <int N>
Dual<N> operator-(Dual<N> x, const Dual<N>& y) {
  return x -= y;
}
template <int N>
Dual<N> operator*(Dual<N> x, const Dual<N>& y) {
  return x *= y;
}
template <int N>
Dual<N> operator/(Dual<N> x, const Dual<N>& y) {
  return x /= y;
}

template <int N>
Dual<N> operator+(Dual<N> x, double s) {
  return x += s;
}
template <int N>
Dual<N> operator+(double s, Dual<N> x) {
  return x += s;
}
template <int N>
Dual<N> operator-(Dual<N> x, double s) {
  return x -= s;
}
template <int N>
Dual<N> operator-(double s, const Dual<N>& x) {
  return Dual<N>(s - x.a, -x.v);
}
template <int N>
Dual<N> operator*(Dual<N> x, double s) {
  return x *= s;
}
template <int N>
Dual<N> operator*(double s, Dual<N> x) {
  return x *= s;
}
template <int N>
Dual<N> operator/(Dual<N> x, double s) {
  return x /= s;
}
template <int N>
Dual<N> operator/(double s, const Dual<N>& x) {
  const double inv = 1.0 / x.a;
  return Dual<N>(s * inv, x.v * (-s * inv * inv));
}

// Comparisons look at the value only.
template <int N>
bool operator<(const Dual<N>& x, const Dual<N>& y) {
  return x.a < y.a;
}
template <int N>
bool operator>(const Dual<N>& x, const Dual<N>& y) {
  return x.a > y.a;
}
template <int N>
bool operator<=(const Dual<N>& x, const Dual<N>& y) {
  return x.a <= y.a;
}
template <int N>
bool operator>=(const Dual<N>& x, const Dual<N>& y) {
  return x.a >= y.a;
}
template <int N>
bool operator==(const Dual<N>& x, const Dual<N>& y) {
  return x.a == y.a;
}
template <int N>
bool operator!=(const Dual<N>& x, const Dual<N>& y) {
  return x.a != y.a;
}
template <int N>
bool operator<(const Dual<N>& x, double s) {
  return x.a < s;
}
template <int N>
bool operator>(const Dual<N>& x, double s) {
  return x.a > s;
}
template <int N>
bool operator<=(const Dual<N>& x, double s) {
  return x.a <= s;
}
template <int N>
bool operator>=(const Dual<N>& x, double s) {
  return x.a >= s;
}

template <int N>
Dual<N> sqrt(const Dual<N>& x) {
  const double s = std::sqrt(x.a);
  return Dual<N>(s, x.v * (0.5 / s));
}
template <int N>
Dual<N> sin(const Dual<N>& x) {
  return Dual<N>(std::sin(x.a), x.v * std::cos(x.a));
}
template <int N>
Dual<N> cos(const Dual<N>& x) {
  return Dual<N>(std::cos(x.a), x.v * -std::sin(x.a));
}
template <int N>
Dual<N> exp(const Dual<N>& x) {
  const double e = std::exp(x.a);
  return Dual<N>(e, x.v * e);
}
template <int N>
Dual<N> log(const Dual<N>& x) {
  return Dual<N>(std::log(x.a), x.v / x.a);
}
template <int N>
Dual<N> abs(const Dual<N>& x) {
  return x.a < 0.0 ? -x : x;
}
template <int N>
Dual<N> atan2(const Dual<N>& y, const Dual<N>& x) {
  const double d = x.a * x.a + y.a * y.a;
  return Dual<N>(std::atan2(y.a, x.a), (x.v * -y.a + y.v * x.a) / d);
}
template <int N>
Dual<N> pow(const Dual<N>& x, double p) {
  const double t = std::pow(x.a, p - 1.0);
  return Dual<N>(t * x.a, x.v * (p * t));
}
template <int N>
bool isfinite(const Dual<N>& x) {
  return std::isfinite(x.a) && x.v.allFinite();
}

template <int N>
std::ostream& operator<<(std::ostream& os, const Dual<N>& x) {
  return os << x.a << " [" << x.v.transpose() << "]";
}

/// Value part of a scalar; identity for double.
inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) {
  return x.a;
}

}  // namespace rigfit

namespace Eigen {

template <int N>
struct NumTraits<rigfit::Dual<N>> {
  using Real = rigfit::Dual<N>;
  using NonInteger = rigfit::Dual<N>;
  using Nested = rigfit::Dual<N>;
  using Literal = rigfit::Dual<N>;

  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 1,
    MulCost = 3
  };

  static inline Real epsilon() { return Real(std::numeric_limits<double>::epsilon()); }
  static inline Real dummy_precision() { return Real(1e-12); }
  static inline Real highest() { return Real(std::numeric_limits<double>::max()); }
  static inline Real lowest() { return Real(std::numeric_limits<double>::lowest()); }
  static inline Real infinity() { return Real(std::numeric_limits<double>::infinity()); }
  static inline Real quiet_NaN() { return Real(std::numeric_limits<double>::quiet_NaN()); }
  static inline int digits10() { return NumTraits<double>::digits10(); }
  static inline int max_digits10() { return std::numeric_limits<double>::max_digits10; }
};

template <int N, typename BinaryOp>
struct ScalarBinaryOpTraits<rigfit::Dual<N>, double, BinaryOp> {
  using ReturnType = rigfit::Dual<N>;
};
template <int N, typename BinaryOp>
struct ScalarBinaryOpTraits<double, rigfit::Dual<N>, BinaryOp> {
  using ReturnType = rigfit::Dual<N>;
};

}  // namespace Eigen
