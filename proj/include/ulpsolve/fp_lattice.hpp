#pragma once

// IEEE-754 lattice arithmetic for binary32 and binary64.
//
// Every float is mapped to a signed ordinal ("lattice index") such that
// consecutive representable values have consecutive indices and both zeros
// share index 0. ULP distances and n-ULP stepping are then plain integer
// arithmetic on these indices.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ulpsolve {

enum class FpFormat : std::uint8_t { Binary32, Binary64 };

struct FormatInfo {
  int exponent_bits;
  int significand_bits;  // includes the hidden bit
  int width;
};

constexpr FormatInfo format_info(FpFormat fmt) noexcept {
  return fmt == FpFormat::Binary32 ? FormatInfo{8, 24, 32} : FormatInfo{11, 53, 64};
}

constexpr std::string_view format_name(FpFormat fmt) noexcept {
  return fmt == FpFormat::Binary32 ? "Float32" : "Float64";
}

constexpr std::uint64_t sign_mask(FpFormat fmt) noexcept {
  return fmt == FpFormat::Binary32 ? 0x8000'0000ULL : 0x8000'0000'0000'0000ULL;
}

constexpr std::uint64_t magnitude_mask(FpFormat fmt) noexcept {
  return sign_mask(fmt) - 1;
}

/// Bit pattern of +infinity; also the largest magnitude that is not a NaN.
constexpr std::uint64_t infinity_bits(FpFormat fmt) noexcept {
  return fmt == FpFormat::Binary32 ? 0x7F80'0000ULL : 0x7FF0'0000'0000'0000ULL;
}

constexpr std::uint64_t max_finite_bits(FpFormat fmt) noexcept {
  return infinity_bits(fmt) - 1;
}

/// A float of either supported format held as its raw encoding.
///
/// The solver-facing constructor `finite()` refuses NaN and infinities; the
/// evaluator builds unrestricted values with `from_double`/`from_bits`.
class FpScalar {
 public:
  constexpr FpScalar() noexcept = default;

  static constexpr FpScalar from_bits(std::uint64_t bits, FpFormat fmt) noexcept {
    FpScalar s;
    s.bits_ = fmt == FpFormat::Binary32 ? (bits & 0xFFFF'FFFFULL) : bits;
    s.format_ = fmt;
    return s;
  }

  static FpScalar from_float(float v) noexcept {
    return from_bits(std::bit_cast<std::uint32_t>(v), FpFormat::Binary32);
  }

  static FpScalar from_double(double v) noexcept {
    return from_bits(std::bit_cast<std::uint64_t>(v), FpFormat::Binary64);
  }

  /// Rounds `v` into `fmt` (RNE). Binary32 overflow yields an infinity.
  static FpScalar round_from(double v, FpFormat fmt) noexcept {
    return fmt == FpFormat::Binary32 ? from_float(static_cast<float>(v)) : from_double(v);
  }

  /// Solver-facing constructor: rounds into `fmt` and rejects NaN and +-inf.
  static FpScalar finite(double v, FpFormat fmt) {
    const FpScalar s = round_from(v, fmt);
    if (!s.is_finite()) {
      throw std::domain_error("non-finite value is not a valid search point");
    }
    return s;
  }

  constexpr std::uint64_t bits() const noexcept { return bits_; }
  constexpr FpFormat format() const noexcept { return format_; }

  constexpr bool sign() const noexcept { return (bits_ & sign_mask(format_)) != 0; }
  constexpr std::uint64_t magnitude() const noexcept { return bits_ & magnitude_mask(format_); }
  constexpr bool is_nan() const noexcept { return magnitude() > infinity_bits(format_); }
  constexpr bool is_inf() const noexcept { return magnitude() == infinity_bits(format_); }
  constexpr bool is_finite() const noexcept { return magnitude() < infinity_bits(format_); }
  constexpr bool is_zero() const noexcept { return magnitude() == 0; }

  float to_float() const noexcept { return std::bit_cast<float>(static_cast<std::uint32_t>(bits_)); }
  double to_double() const noexcept {
    return format_ == FpFormat::Binary32 ? static_cast<double>(to_float())
                                         : std::bit_cast<double>(bits_);
  }

  /// Exponent field, biased.
  constexpr std::uint64_t exponent_field() const noexcept {
    const auto info = format_info(format_);
    return magnitude() >> (info.significand_bits - 1);
  }
  /// Trailing significand field (hidden bit excluded).
  constexpr std::uint64_t significand_field() const noexcept {
    const auto info = format_info(format_);
    return bits_ & ((std::uint64_t{1} << (info.significand_bits - 1)) - 1);
  }

  friend constexpr bool operator==(const FpScalar&, const FpScalar&) noexcept = default;

 private:
  std::uint64_t bits_ = 0;
  FpFormat format_ = FpFormat::Binary64;
};

/// Ordinal position of a float on its format's lattice.
///
/// Held in 128 bits so that sums and differences of binary64 indices never
/// overflow.
struct LatticeIndex {
  __int128 value = 0;

  friend constexpr auto operator<=>(const LatticeIndex&, const LatticeIndex&) noexcept = default;
  friend constexpr LatticeIndex operator+(LatticeIndex a, std::int64_t k) noexcept {
    return {a.value + k};
  }
};

/// Index of the largest finite value; the finite lattice is [-this, this].
constexpr __int128 max_finite_index(FpFormat fmt) noexcept {
  return static_cast<__int128>(max_finite_bits(fmt));
}

/// Number of ordinals occupied by the format, infinities included.
constexpr std::uint64_t ordinal_range_size(FpFormat fmt) noexcept {
  return 2 * infinity_bits(fmt) + 1;
}

/// Distance reported whenever an operand is NaN: strictly larger than any
/// distance between two non-NaN values of the format.
constexpr std::uint64_t nan_penalty(FpFormat fmt) noexcept {
  return ordinal_range_size(fmt) + 1;
}

inline LatticeIndex to_index(FpScalar x) {
  if (x.is_nan()) throw std::domain_error("to_index: NaN has no lattice position");
  const auto mag = static_cast<__int128>(x.magnitude());
  return {x.sign() ? -mag : mag};
}

/// Inverse of to_index on the finite range; anything outside clamps to the
/// nearest finite extreme. Index 0 decodes to +0.
inline FpScalar from_index(LatticeIndex i, FpFormat fmt) noexcept {
  const __int128 limit = max_finite_index(fmt);
  __int128 v = i.value;
  if (v > limit) v = limit;
  if (v < -limit) v = -limit;
  if (v >= 0) return FpScalar::from_bits(static_cast<std::uint64_t>(v), fmt);
  return FpScalar::from_bits(sign_mask(fmt) | static_cast<std::uint64_t>(-v), fmt);
}

/// Moves `x` by `k` lattice positions in O(1), clamping at the finite extremes.
inline FpScalar n_ulp(std::int64_t k, FpScalar x) {
  return from_index(to_index(x) + k, x.format());
}

inline FpScalar next_up(FpScalar x) { return n_ulp(1, x); }
inline FpScalar next_down(FpScalar x) { return n_ulp(-1, x); }

enum class CmpOp : std::uint8_t { Eq, Le, Lt, Ge, Gt };

constexpr std::string_view cmp_name(CmpOp op) noexcept {
  switch (op) {
    case CmpOp::Eq: return "fp.eq";
    case CmpOp::Le: return "fp.leq";
    case CmpOp::Lt: return "fp.lt";
    case CmpOp::Ge: return "fp.geq";
    case CmpOp::Gt: return "fp.gt";
  }
  return "?";
}

/// IEEE comparison of two values of the same format. Unordered (NaN) operands
/// make every predicate false.
inline bool ieee_compare(FpScalar a, FpScalar b, CmpOp op) noexcept {
  const double x = a.to_double();
  const double y = b.to_double();
  switch (op) {
    case CmpOp::Eq: return x == y;
    case CmpOp::Le: return x <= y;
    case CmpOp::Lt: return x < y;
    case CmpOp::Ge: return x >= y;
    case CmpOp::Gt: return x > y;
  }
  return false;
}

namespace detail {

inline std::uint64_t abs_diff(__int128 a, __int128 b) noexcept {
  const __int128 d = a > b ? a - b : b - a;
  return static_cast<std::uint64_t>(d);
}

inline void require_same_format(FpScalar a, FpScalar b) {
  if (a.format() != b.format()) throw std::domain_error("ULP distance across formats");
}

}  // namespace detail

/// Lattice steps between a and b; zero iff fp.eq(a, b).
inline std::uint64_t ulp_distance_eq(FpScalar a, FpScalar b) {
  detail::require_same_format(a, b);
  if (a.is_nan() || b.is_nan()) return nan_penalty(a.format());
  return detail::abs_diff(to_index(a).value, to_index(b).value);
}

/// Minimal number of steps of `a` (or, equivalently, of `b` in the opposite
/// direction) that makes `a op b` hold; zero iff it already holds.
inline std::uint64_t ulp_distance_cmp(FpScalar a, FpScalar b, CmpOp op) {
  detail::require_same_format(a, b);
  if (op == CmpOp::Eq) return ulp_distance_eq(a, b);
  if (a.is_nan() || b.is_nan()) return nan_penalty(a.format());
  if (ieee_compare(a, b, op)) return 0;
  const __int128 ia = to_index(a).value;
  const __int128 ib = to_index(b).value;
  switch (op) {
    case CmpOp::Le: return static_cast<std::uint64_t>(ia - ib);
    case CmpOp::Lt: return static_cast<std::uint64_t>(ia - ib + 1);
    case CmpOp::Ge: return static_cast<std::uint64_t>(ib - ia);
    case CmpOp::Gt: return static_cast<std::uint64_t>(ib - ia + 1);
    case CmpOp::Eq: break;
  }
  return 0;
}

inline std::string to_string(FpScalar x) {
  std::string out;
  const auto info = format_info(x.format());
  out.reserve(info.width + 16);
  out += "(fp #b";
  out += x.sign() ? '1' : '0';
  out += " #b";
  for (int i = info.exponent_bits - 1; i >= 0; --i) out += ((x.exponent_field() >> i) & 1) ? '1' : '0';
  out += " #b";
  for (int i = info.significand_bits - 2; i >= 0; --i) out += ((x.significand_field() >> i) & 1) ? '1' : '0';
  out += ')';
  return out;
}

}  // namespace ulpsolve
