#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjb {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
/* hard threshold separating finite cells from the +inf sentinel */
inline constexpr double kOverflow = 1e12;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AssumptionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/* small dense vector, dimension <= 3 */
struct Vec {
    std::array<double, 3> c{0.0, 0.0, 0.0};
    int n = 0;

    Vec() = default;
    explicit Vec(int dim) : n(dim) {}
    Vec(double a) : n(1) { c[0] = a; }
    Vec(double a, double b) : n(2) {
        c[0] = a;
        c[1] = b;
    }
    Vec(double a, double b, double d) : n(3) {
        c[0] = a;
        c[1] = b;
        c[2] = d;
    }
    double& operator[](int i) { return c[(size_t)i]; }
    double operator[](int i) const { return c[(size_t)i]; }
    int dim() const { return n; }
};

inline Vec operator+(const Vec& a, const Vec& b) {
    Vec r(a.n);
    for (int i = 0; i < a.n; ++i) r[i] = a[i] + b[i];
    return r;
}
inline Vec operator-(const Vec& a, const Vec& b) {
    Vec r(a.n);
    for (int i = 0; i < a.n; ++i) r[i] = a[i] - b[i];
    return r;
}
inline Vec operator*(double s, const Vec& a) {
    Vec r(a.n);
    for (int i = 0; i < a.n; ++i) r[i] = s * a[i];
    return r;
}
inline double dot(const Vec& a, const Vec& b) {
    double s = 0;
    for (int i = 0; i < a.n; ++i) s += a[i] * b[i];
    return s;
}
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }
inline double dist(const Vec& a, const Vec& b) { return norm(a - b); }
inline Vec concat(const Vec& a, double last) {
    Vec r(a.n + 1);
    for (int i = 0; i < a.n; ++i) r[i] = a[i];
    r[a.n] = last;
    return r;
}

/* deterministic Halton sequence, bases 2/3/5 */
inline double halton(uint64_t i, uint64_t base) {
    double f = 1.0, r = 0.0;
    for (uint64_t k = i + 1; k > 0; k /= base) {
        f /= (double)base;
        r += f * (double)(k % base);
    }
    return r;
}

/* low-discrepancy points in the closed unit ball of dimension m (2 or 3) */
inline std::vector<Vec> halton_ball(int m, int count, uint64_t skip = 0) {
    static const uint64_t bases[3] = {2, 3, 5};
    std::vector<Vec> out;
    out.reserve((size_t)count);
    uint64_t i = skip;
    while ((int)out.size() < count) {
        Vec p(m);
        for (int d = 0; d < m; ++d) p[d] = 2.0 * halton(i, bases[d]) - 1.0;
        ++i;
        if (dot(p, p) <= 1.0) out.push_back(p);
    }
    return out;
}

/* uniform directions on the unit sphere; exact ring in 2-D, spiral in 3-D */
inline std::vector<Vec> sphere_directions(int m, int count) {
    std::vector<Vec> out;
    out.reserve((size_t)count);
    if (m == 1) {
        out.push_back(Vec(1.0));
        if (count > 1) out.push_back(Vec(-1.0));
        return out;
    }
    if (m == 2) {
        for (int k = 0; k < count; ++k) {
            double th = 2.0 * M_PI * (double)k / (double)count;
            out.push_back(Vec(std::cos(th), std::sin(th)));
        }
        return out;
    }
    const double ga = M_PI * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
        double z = 1.0 - 2.0 * ((double)k + 0.5) / (double)count;
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        double th = ga * (double)k;
        out.push_back(Vec(r * std::cos(th), r * std::sin(th), z));
    }
    return out;
}

inline std::mt19937_64 seeded_rng(uint64_t seed, uint64_t purpose) {
    std::seed_seq seq{seed, purpose, (uint64_t)(seed ^ 0x9e3779b97f4a7c15ull)};
    return std::mt19937_64(seq);
}

/* 12 significant digits, the CSV contract */
std::string fmt_g12(double v);

struct GridAxis {
    double lo = 0.0, hi = 0.0;
    int count = 0;
    double step() const { return count > 1 ? (hi - lo) / (double)(count - 1) : 0.0; }
    double at(int i) const { return count > 1 ? lo + step() * (double)i : lo; }
    /* index of nearest node */
    int snap(double v) const {
        if (count < 2) return 0;
        int i = (int)std::lround((v - lo) / step());
        return std::min(std::max(i, 0), count - 1);
    }
};

} // namespace hjb
