#include "skyveil/fixedpoint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "skyveil/errors.hpp"

namespace skyveil {

mpz_class mpz_from_u128(u128 v) {
    mpz_class hi(uint64_t(v >> 64));
    mpz_class out = hi << 64;
    out += uint64_t(v);
    return out;
}

u128 u128_from_mpz(const mpz_class& v) {
    if (v < 0 || mpz_sizeinbase(v.get_mpz_t(), 2) > 128)
        throw std::out_of_range("value does not fit in 128 bits");
    mpz_class lo = v & mpz_class((mpz_class(1) << 64) - 1);
    mpz_class hi = v >> 64;
    return (u128(hi.get_ui()) << 64) | u128(lo.get_ui());
}

FpParams::FpParams(int k_, int f_) : k(k_), f(f_) {
    if (k < 8 || k > 128) throw std::invalid_argument("FpParams: k must be in [8,128]");
    if (f < 0 || f > k - 3) throw std::invalid_argument("FpParams: f must be in [0,k-3]");
}

FixedPoint FixedPoint::from_signed(const mpz_class& v, FpParams p) {
    mpz_class lim = mpz_class(1) << (p.k - 1);
    if (v < -lim || v >= lim) throw std::out_of_range("raw value out of k-bit range");
    mpz_class wrapped = v < 0 ? v + (mpz_class(1) << p.k) : v;
    return FixedPoint(u128_from_mpz(wrapped), p);
}

FixedPoint FixedPoint::encode(double value, FpParams p) {
    if (!std::isfinite(value)) throw std::out_of_range("encode: non-finite value");
    // exact: value = mant * 2^(exp-53) with |mant| <= 2^53
    int exp = 0;
    double m = std::frexp(value, &exp);
    auto mant = int64_t(std::ldexp(m, 53));
    mpz_class raw(mant);
    int shift = exp - 53 + p.f;
    if (shift >= 0)
        raw <<= shift;
    else
        mpz_fdiv_q_2exp(raw.get_mpz_t(), raw.get_mpz_t(), -shift);  // floor
    mpz_class lim = mpz_class(1) << (p.k - 1);
    if (raw < -lim || raw >= lim) throw std::out_of_range("encode: value out of range");
    return from_signed(raw, p);
}

FixedPoint FixedPoint::encode_decimal(std::string_view text, FpParams p) {
    size_t i = 0;
    bool neg = false;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
        neg = text[i] == '-';
        i++;
    }
    std::string int_digits, frac_digits;
    while (i < text.size() && isdigit(static_cast<unsigned char>(text[i]))) int_digits += text[i++];
    if (i < text.size() && text[i] == '.') {
        i++;
        while (i < text.size() && isdigit(static_cast<unsigned char>(text[i])))
            frac_digits += text[i++];
    }
    if (i != text.size() || (int_digits.empty() && frac_digits.empty()))
        throw std::invalid_argument("encode_decimal: malformed number '" + std::string(text) + "'");
    // base 10 must be explicit: the default base-0 rule would read a
    // leading zero (as in "0.09") as octal
    mpz_class num(int_digits.empty() ? "0" : int_digits, 10);
    mpz_class den = 1;
    if (!frac_digits.empty()) {
        mpz_class frac(frac_digits, 10);
        mpz_class scale;
        mpz_ui_pow_ui(scale.get_mpz_t(), 10, frac_digits.size());
        num = num * scale + frac;
        den = scale;
    }
    if (neg) num = -num;
    // raw = floor(num / den * 2^f)
    mpz_class raw;
    mpz_class shifted = num << p.f;
    mpz_fdiv_q(raw.get_mpz_t(), shifted.get_mpz_t(), den.get_mpz_t());
    mpz_class lim = mpz_class(1) << (p.k - 1);
    if (raw < -lim || raw >= lim) throw std::out_of_range("encode_decimal: value out of range");
    return from_signed(raw, p);
}

mpz_class FixedPoint::signed_raw() const {
    mpz_class v = mpz_from_u128(raw_);
    if (negative()) v -= mpz_class(1) << p_.k;
    return v;
}

double FixedPoint::to_double() const {
    return std::ldexp(signed_raw().get_d(), -p_.f);
}

std::string FixedPoint::to_decimal() const {
    mpz_class v = signed_raw();
    bool neg = v < 0;
    if (neg) v = -v;
    mpz_class ip = v >> p_.f;
    mpz_class fp = v - (ip << p_.f);
    std::string out = (neg ? "-" : "") + ip.get_str();
    if (p_.f == 0) return out;
    // fractional part exactly, trailing zeros trimmed
    mpz_class num = fp;
    mpz_class scale;
    mpz_ui_pow_ui(scale.get_mpz_t(), 5, p_.f);  // 10^f / 2^f
    num *= scale;
    std::string frac = num.get_str();
    if (frac.size() < size_t(p_.f)) frac = std::string(p_.f - frac.size(), '0') + frac;
    while (frac.size() > 1 && frac.back() == '0') frac.pop_back();
    if (frac == "0") return out;
    return out + "." + frac;
}

Bounds::Bounds(FixedPoint xmin, FixedPoint xmax, FixedPoint ymin, FixedPoint ymax,
               FixedPoint zmin, FixedPoint zmax)
    : x_min(xmin), x_max(xmax), y_min(ymin), y_max(ymax), z_min(zmin), z_max(zmax) {
    FpParams p = x_min.params();
    for (const auto& c : comps())
        if (!(c.params() == p)) throw std::invalid_argument("Bounds: mixed FpParams");
    if (x_min.signed_raw() > x_max.signed_raw() || y_min.signed_raw() > y_max.signed_raw() ||
        z_min.signed_raw() > z_max.signed_raw())
        throw std::invalid_argument("Bounds: min > max");
}

mpz_class isqrt(const mpz_class& n) {
    if (n < 0) throw std::invalid_argument("isqrt: negative input");
    mpz_class r;
    mpz_sqrt(r.get_mpz_t(), n.get_mpz_t());
    return r;
}

uint64_t isqrt_u64(uint64_t n) {
    mpz_class r = isqrt(mpz_class(mpz_from_u128(n)));
    return r.get_ui();
}

Vec3 trajectory_plain(const Vec3& sat, const Vec3& air) {
    FpParams p = sat.params();
    if (!(air.params() == p)) throw std::invalid_argument("trajectory_plain: mixed FpParams");

    std::array<mpz_class, 3> v;
    auto s = sat.comps(), a = air.comps();
    for (int i = 0; i < 3; i++) v[i] = a[i].signed_raw() - s[i].signed_raw();

    mpz_class sum = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    mpz_class m = isqrt(sum);
    if (m == 0) throw std::invalid_argument("trajectory_plain: degenerate input (sat == air)");

    std::array<FixedPoint, 3> u = {FixedPoint(0, p), FixedPoint(0, p), FixedPoint(0, p)};
    for (int i = 0; i < 3; i++) {
        mpz_class num = v[i] << p.f;
        mpz_class q;
        mpz_tdiv_q(q.get_mpz_t(), num.get_mpz_t(), m.get_mpz_t());  // trunc toward zero
        u[i] = FixedPoint::from_signed(q, p);
    }
    return Vec3{u[0], u[1], u[2]};
}

uint8_t in_bounds_plain(const Vec3& loc, const Bounds& b) {
    if (!(loc.params() == b.params()))
        throw std::invalid_argument("in_bounds_plain: mixed FpParams");
    auto ge = [](const FixedPoint& a, const FixedPoint& c) {
        return a.signed_raw() >= c.signed_raw();
    };
    bool ok = ge(loc.x, b.x_min) && ge(b.x_max, loc.x) && ge(loc.y, b.y_min) &&
              ge(b.y_max, loc.y) && ge(loc.z, b.z_min) && ge(b.z_max, loc.z);
    return ok ? 1 : 0;
}

std::vector<PathPoint> parse_flight_csv(std::string_view text, FpParams p) {
    std::vector<PathPoint> out;
    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t end = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
        line_no++;
        // strip \r and whitespace-only / comment lines
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
        while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
        if (line.empty() || line.front() == '#') continue;

        std::array<std::string, 4> field;
        size_t fi = 0, start = 0;
        for (size_t i = 0; i <= line.size(); i++) {
            if (i == line.size() || line[i] == ',') {
                if (fi >= 4) throw ParseError("flight CSV: too many fields", line_no);
                std::string_view f = line.substr(start, i - start);
                while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
                while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.remove_suffix(1);
                field[fi++] = std::string(f);
                start = i + 1;
            }
        }
        if (fi != 4) throw ParseError("flight CSV: expected t_ms,x,y,z", line_no);
        try {
            int64_t t = std::stoll(field[0]);
            Vec3 v{FixedPoint::encode_decimal(field[1], p), FixedPoint::encode_decimal(field[2], p),
                   FixedPoint::encode_decimal(field[3], p)};
            if (!out.empty() && t < out.back().t_ms)
                throw ParseError("flight CSV: timestamps must be nondecreasing", line_no);
            out.push_back({t, v});
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(std::string("flight CSV: ") + e.what(), line_no);
        }
    }
    return out;
}

std::vector<PathPoint> load_flight_csv(const std::string& path, FpParams p) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open flight path file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_flight_csv(ss.str(), p);
}

}  // namespace skyveil
