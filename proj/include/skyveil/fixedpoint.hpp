#ifndef SKYVEIL_FIXEDPOINT_HPP
#define SKYVEIL_FIXEDPOINT_HPP

#include <gmpxx.h>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace skyveil {

using u128 = unsigned __int128;
using i128 = __int128;

mpz_class mpz_from_u128(u128 v);
u128 u128_from_mpz(const mpz_class& v);  // v must fit 128 bits, nonnegative

// Fixed-point format: k-bit two's complement raw value interpreted as
// raw / 2^f. k and f are fixed per session.
struct FpParams {
    int k;  // total bits, 8..128
    int f;  // fraction bits, 0..k-3

    FpParams(int k_, int f_);
    bool operator==(const FpParams&) const = default;

    u128 mask() const {
        return k == 128 ? ~u128(0) : ((u128(1) << k) - 1);
    }
};

class FixedPoint {
public:
    FixedPoint(u128 raw, FpParams p) : raw_(raw & p.mask()), p_(p) {}

    static FixedPoint from_raw(u128 raw, FpParams p) { return FixedPoint(raw, p); }
    static FixedPoint from_signed(const mpz_class& v, FpParams p);  // v in [-2^(k-1), 2^(k-1))
    // raw = floor(value * 2^f); throws std::out_of_range when |value| >= 2^(k-f-1)
    static FixedPoint encode(double value, FpParams p);
    // exact decimal, e.g. "-2.25"; same rounding and range rule as encode()
    static FixedPoint encode_decimal(std::string_view text, FpParams p);

    u128 raw() const { return raw_; }
    FpParams params() const { return p_; }
    uint8_t bit(int i) const { return uint8_t((raw_ >> i) & 1); }
    bool negative() const { return bit(p_.k - 1) != 0; }

    mpz_class signed_raw() const;  // sign-extended raw as an integer
    double to_double() const;      // lossy above 53 significant bits; display only
    std::string to_decimal() const;

    bool operator==(const FixedPoint& o) const { return raw_ == o.raw_ && p_ == o.p_; }

private:
    u128 raw_;
    FpParams p_;
};

struct Vec3 {
    FixedPoint x, y, z;
    FpParams params() const { return x.params(); }
    std::array<FixedPoint, 3> comps() const { return {x, y, z}; }
    bool operator==(const Vec3&) const = default;
};

// Axis-aligned box the satellite enforces, min <= max per axis (signed).
struct Bounds {
    FixedPoint x_min, x_max, y_min, y_max, z_min, z_max;

    Bounds(FixedPoint xmin, FixedPoint xmax, FixedPoint ymin, FixedPoint ymax,
           FixedPoint zmin, FixedPoint zmax);
    FpParams params() const { return x_min.params(); }
    std::array<FixedPoint, 6> comps() const {
        return {x_min, x_max, y_min, y_max, z_min, z_max};
    }
    bool operator==(const Bounds&) const = default;
};

// floor(sqrt(n)), n >= 0
mpz_class isqrt(const mpz_class& n);
uint64_t isqrt_u64(uint64_t n);

// Reference trajectory-unit-vector computation. This is the bit-exact
// specification the Boolean circuit must match:
//   v_i = air_i - sat_i                     (exact)
//   m   = floor(sqrt(vx^2 + vy^2 + vz^2))   (raw integers)
//   u_i = trunc(v_i * 2^f / m)              (toward zero), re-encoded at k bits
// Throws std::invalid_argument when sat == air (zero magnitude).
Vec3 trajectory_plain(const Vec3& sat, const Vec3& air);

// 1 iff loc is inside b on all three axes, inclusive, signed comparisons.
// Throws std::invalid_argument on FpParams mismatch.
uint8_t in_bounds_plain(const Vec3& loc, const Bounds& b);

struct PathPoint {
    int64_t t_ms;
    Vec3 pos;
};

// Flight-path CSV: lines "t_ms,x,y,z" with decimal reals, '#' comments allowed.
std::vector<PathPoint> load_flight_csv(const std::string& path, FpParams p);
std::vector<PathPoint> parse_flight_csv(std::string_view text, FpParams p);

}  // namespace skyveil

#endif
