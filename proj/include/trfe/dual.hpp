#pragma once

#include <Eigen/Core>
#include <cmath>
#include <type_traits>

namespace trfe {

/// Forward-mode scalar carrying a value and one directional derivative.
/// Nest it for second order: Dual<Dual<double>> propagates a mixed partial
/// in its d.d slot (second-order truncated polynomial in two directions).
template <class T>
struct Dual {
  T v{};
  T d{};

  Dual() = default;
  template <class U, class = std::enable_if_t<std::is_arithmetic_v<U>>>
  Dual(U value) : v(value), d() {}  // NOLINT: implicit by design
  Dual(const T& value, const T& deriv) : v(value), d(deriv) {}
};

using Dual1 = Dual<double>;
using Dual2 = Dual<Dual<double>>;

inline double value_of(double x) { return x; }
template <class T>
double value_of(const Dual<T>& x) {
  return value_of(x.v);
}

// ---- arithmetic ----

template <class T>
Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
  return {a.v + b.v, a.d + b.d};
}
template <class T>
Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
  return {a.v - b.v, a.d - b.d};
}
template <class T>
Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.v * b.v, a.v * b.d + a.d * b.v};
}
template <class T>
Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  const T q = a.v / b.v;
  return {q, (a.d - q * b.d) / b.v};
}
template <class T>
Dual<T> operator-(const Dual<T>& a) {
  return {-a.v, -a.d};
}
template <class T>
Dual<T> operator+(const Dual<T>& a) {
  return a;
}

#define TRFE_DUAL_MIXED_OP(op)                                          \
  template <class T, class U,                                           \
            class = std::enable_if_t<std::is_arithmetic_v<U>>>          \
  Dual<T> operator op(const Dual<T>& a, U b) {                          \
    return a op Dual<T>(b);                                             \
  }                                                                     \
  template <class T, class U,                                           \
            class = std::enable_if_t<std::is_arithmetic_v<U>>>          \
  Dual<T> operator op(U a, const Dual<T>& b) {                          \
    return Dual<T>(a) op b;                                             \
  }
TRFE_DUAL_MIXED_OP(+)
TRFE_DUAL_MIXED_OP(-)
TRFE_DUAL_MIXED_OP(*)
TRFE_DUAL_MIXED_OP(/)
#undef TRFE_DUAL_MIXED_OP

template <class T>
Dual<T>& operator+=(Dual<T>& a, const Dual<T>& b) {
  a = a + b;
  return a;
}
template <class T>
Dual<T>& operator-=(Dual<T>& a, const Dual<T>& b) {
  a = a - b;
  return a;
}
template <class T>
Dual<T>& operator*=(Dual<T>& a, const Dual<T>& b) {
  a = a * b;
  return a;
}

// Comparisons act on values only.
#define TRFE_DUAL_CMP(op)                                             \
  template <class T>                                                  \
  bool operator op(const Dual<T>& a, const Dual<T>& b) {              \
    return value_of(a) op value_of(b);                                \
  }                                                                   \
  template <class T, class U,                                         \
            class = std::enable_if_t<std::is_arithmetic_v<U>>>        \
  bool operator op(const Dual<T>& a, U b) {                           \
    return value_of(a) op static_cast<double>(b);                     \
  }                                                                   \
  template <class T, class U,                                         \
            class = std::enable_if_t<std::is_arithmetic_v<U>>>        \
  bool operator op(U a, const Dual<T>& b) {                           \
    return static_cast<double>(a) op value_of(b);                     \
  }
TRFE_DUAL_CMP(<)
TRFE_DUAL_CMP(>)
TRFE_DUAL_CMP(<=)
TRFE_DUAL_CMP(>=)
TRFE_DUAL_CMP(==)
TRFE_DUAL_CMP(!=)
#undef TRFE_DUAL_CMP

// ---- math functions (chain rule) ----

using std::cos;
using std::exp;
using std::log;
using std::sin;
using std::sqrt;
using std::tanh;

template <class T>
Dual<T> sin(const Dual<T>& a) {
  return {sin(a.v), a.d * cos(a.v)};
}
template <class T>
Dual<T> cos(const Dual<T>& a) {
  return {cos(a.v), -a.d * sin(a.v)};
}
template <class T>
Dual<T> exp(const Dual<T>& a) {
  const T e = exp(a.v);
  return {e, a.d * e};
}
template <class T>
Dual<T> log(const Dual<T>& a) {
  return {log(a.v), a.d / a.v};
}
template <class T>
Dual<T> sqrt(const Dual<T>& a) {
  const T s = sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}
template <class T>
Dual<T> tanh(const Dual<T>& a) {
  const T t = tanh(a.v);
  return {t, a.d * (1.0 - t * t)};
}

inline double abs_value(double x) { return std::abs(x); }
template <class T>
double abs_value(const Dual<T>& x) {
  return std::abs(value_of(x));
}

inline bool finite_value(double x) { return std::isfinite(x); }
template <class T>
bool finite_value(const Dual<T>& x) {
  return finite_value(x.v) && finite_value(x.d);
}

/// First-order seed: component `seed_index` of the input gets unit tangent.
inline Dual1 make_dual1(double value, bool seeded) {
  return {value, seeded ? 1.0 : 0.0};
}

/// Second-order seed: direction i on the outer slot, j on the inner one.
/// The returned scalar's d.d accumulates the mixed partial over index (i, j).
inline Dual2 make_dual2(double value, bool seed_i, bool seed_j) {
  return {Dual1{value, seed_j ? 1.0 : 0.0}, Dual1{seed_i ? 1.0 : 0.0, 0.0}};
}

}  // namespace trfe

namespace Eigen {

template <class T>
struct NumTraits<trfe::Dual<T>> : GenericNumTraits<trfe::Dual<T>> {
  using Real = trfe::Dual<T>;
  using NonInteger = trfe::Dual<T>;
  using Nested = trfe::Dual<T>;
  using Literal = double;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 3,
    MulCost = 4
  };
  static inline Real epsilon() { return NumTraits<double>::epsilon(); }
  static inline Real dummy_precision() {
    return NumTraits<double>::dummy_precision();
  }
  static inline int digits10() { return NumTraits<double>::digits10(); }
};

template <class T, class BinaryOp>
struct ScalarBinaryOpTraits<trfe::Dual<T>, double, BinaryOp> {
  using ReturnType = trfe::Dual<T>;
};
template <class T, class BinaryOp>
struct ScalarBinaryOpTraits<double, trfe::Dual<T>, BinaryOp> {
  using ReturnType = trfe::Dual<T>;
};

}  // namespace Eigen
