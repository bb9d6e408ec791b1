// Exact rational fractions for sampling ratios. Counts like
// round(fraction * n) must be bit-stable across platforms, so ratios are
// kept as int64 rationals instead of doubles.
#pragma once

#include <charconv>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gkg {

struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    constexpr Fraction() = default;
    Fraction(std::int64_t n, std::int64_t d) : num(n), den(d) {
        if (den <= 0) throw std::invalid_argument("fraction denominator must be positive");
        if (num < 0) throw std::invalid_argument("fraction must be non-negative");
        std::int64_t g = std::gcd(num, den);
        if (g > 1) { num /= g; den /= g; }
    }

    static Fraction zero() { return Fraction(0, 1); }
    static Fraction one() { return Fraction(1, 1); }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool is_zero() const { return num == 0; }
    bool is_one() const { return num == den; }

    bool operator==(const Fraction& o) const { return num == o.num && den == o.den; }

    // round(this * n), half away from zero. Exact integer arithmetic.
    std::int64_t round_of(std::int64_t n) const {
        return (2 * num * n + den) / (2 * den);
    }

    std::string str() const {
        if (den == 1) return std::to_string(num);
        return std::to_string(num) + "/" + std::to_string(den);
    }
};

// Accepts "a/b", "0.25", "1". Decimal forms are exact ("0.1" -> 1/10).
inline Fraction parse_fraction(std::string_view s) {
    auto fail = [&] { throw std::invalid_argument("bad fraction: '" + std::string(s) + "'"); };
    if (s.empty()) fail();
    auto slash = s.find('/');
    if (slash != std::string_view::npos) {
        std::int64_t n = 0, d = 0;
        auto r1 = std::from_chars(s.data(), s.data() + slash, n);
        auto r2 = std::from_chars(s.data() + slash + 1, s.data() + s.size(), d);
        if (r1.ec != std::errc{} || r2.ec != std::errc{} || r1.ptr != s.data() + slash ||
            r2.ptr != s.data() + s.size())
            fail();
        return Fraction(n, d);
    }
    auto dot = s.find('.');
    if (dot == std::string_view::npos) {
        std::int64_t n = 0;
        auto r = std::from_chars(s.data(), s.data() + s.size(), n);
        if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) fail();
        return Fraction(n, 1);
    }
    std::int64_t whole = 0;
    if (dot > 0) {
        auto r = std::from_chars(s.data(), s.data() + dot, whole);
        if (r.ec != std::errc{} || r.ptr != s.data() + dot) fail();
    }
    std::string_view frac = s.substr(dot + 1);
    if (frac.empty() || frac.size() > 15) fail();
    std::int64_t fnum = 0;
    auto r = std::from_chars(frac.data(), frac.data() + frac.size(), fnum);
    if (r.ec != std::errc{} || r.ptr != frac.data() + frac.size()) fail();
    std::int64_t fden = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) fden *= 10;
    return Fraction(whole * fden + fnum, fden);
}

// Doubles coming out of JSON parse round-trip through their shortest decimal
// form, so config values like 0.1 land on the exact rational 1/10.
inline Fraction fraction_from_double(double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return parse_fraction(std::string_view(buf, r.ptr - buf));
}

}  // namespace gkg
