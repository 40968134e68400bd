#include "hjbrep/geometry.hpp"

#include <algorithm>
#include <cstdio>

namespace hjb {

std::string fmt_g12(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::string(buf);
}

static std::vector<Vec> dedupe_points(const std::vector<Vec>& pts, double tol) {
    std::vector<Vec> out;
    out.reserve(pts.size());
    for (const auto& p : pts) {
        bool dup = false;
        for (const auto& q : out)
            if (dist(p, q) <= tol) {
                dup = true;
                break;
            }
        if (!dup) out.push_back(p);
    }
    return out;
}

static double cross2(const Vec& o, const Vec& a, const Vec& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

std::vector<Vec> convex_hull_2d(std::vector<Vec> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec& a, const Vec& b) {
        return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Vec& a, const Vec& b) {
                              return a[0] == b[0] && a[1] == b[1];
                          }),
              pts.end());
    size_t n = pts.size();
    if (n <= 2) return pts;
    double scale = 0;
    for (const auto& p : pts) scale = std::max({scale, std::fabs(p[0]), std::fabs(p[1])});
    double eps = 1e-12 * scale * scale + 1e-300;
    std::vector<Vec> h(2 * n);
    size_t k = 0;
    for (size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross2(h[k - 2], h[k - 1], pts[i]) <= eps) --k;
        h[k++] = pts[i];
    }
    for (size_t i = n - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross2(h[k - 2], h[k - 1], pts[i]) <= eps) --k;
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    return h;
}

ConvexBody make_polytope(int n, std::vector<Vec> verts) {
    if (verts.empty()) throw std::invalid_argument("make_polytope: no vertices");
    double scale = 1e-300;
    for (const auto& v : verts)
        for (int i = 0; i < n; ++i) scale = std::max(scale, std::fabs(v[i]));
    verts = dedupe_points(verts, 1e-12 * scale);
    if (n == 1 && verts.size() > 1) {
        double lo = kInf, hi = -kInf;
        for (const auto& v : verts) {
            lo = std::min(lo, v[0]);
            hi = std::max(hi, v[0]);
        }
        verts = {Vec(lo), Vec(hi)};
    }
    if (n == 2 && verts.size() >= 3) verts = convex_hull_2d(verts);
    ConvexBody b;
    b.n = n;
    b.verts = std::move(verts);
    Vec c(n);
    for (const auto& v : b.verts) c = c + v;
    b.center = (1.0 / (double)b.verts.size()) * c;
    for (const auto& v : b.verts) b.bounding_radius = std::max(b.bounding_radius, dist(b.center, v));
    return b;
}

ConvexBody make_interval(double a, double b) {
    if (a > b) std::swap(a, b);
    return a == b ? make_polytope(1, {Vec(a)}) : make_polytope(1, {Vec(a), Vec(b)});
}

ConvexBody make_oracle(int n, std::function<Vec(const Vec&)> proj, Vec member,
                       double bounding_radius) {
    ConvexBody b;
    b.n = n;
    b.oracle = std::move(proj);
    b.center = member;
    b.bounding_radius = bounding_radius;
    return b;
}

double support(const ConvexBody& J, const Vec& p, std::vector<Vec>* face) {
    if (!J.is_polytope())
        throw std::invalid_argument("support: body carries no vertex list");
    double best = -kInf;
    for (const auto& v : J.verts) best = std::max(best, dot(p, v));
    if (face) {
        face->clear();
        double tau = 1e-9 * J.bounding_radius;
        for (const auto& v : J.verts)
            if (dot(p, v) >= best - tau) face->push_back(v);
    }
    return best;
}

static bool solve_linear(std::vector<double>& M, std::vector<double>& b, int m) {
    double scale = 1e-300;
    for (double v : M) scale = std::max(scale, std::fabs(v));
    for (int col = 0; col < m; ++col) {
        int piv = col;
        for (int r = col + 1; r < m; ++r)
            if (std::fabs(M[(size_t)r * m + col]) > std::fabs(M[(size_t)piv * m + col])) piv = r;
        if (std::fabs(M[(size_t)piv * m + col]) < 1e-13 * scale) return false;
        if (piv != col) {
            for (int c = 0; c < m; ++c) std::swap(M[(size_t)piv * m + c], M[(size_t)col * m + c]);
            std::swap(b[(size_t)piv], b[(size_t)col]);
        }
        double d = M[(size_t)col * m + col];
        for (int r = 0; r < m; ++r) {
            if (r == col) continue;
            double f = M[(size_t)r * m + col] / d;
            if (f == 0.0) continue;
            for (int c = col; c < m; ++c) M[(size_t)r * m + c] -= f * M[(size_t)col * m + c];
            b[(size_t)r] -= f * b[(size_t)col];
        }
    }
    for (int i = 0; i < m; ++i) b[(size_t)i] /= M[(size_t)i * m + i];
    return true;
}

Vec min_norm_point_hull(const std::vector<Vec>& pts0) {
    if (pts0.empty()) throw std::invalid_argument("min_norm_point_hull: empty set");
    double scale = 1e-300;
    for (const auto& p : pts0) scale = std::max(scale, norm(p));
    auto pts = dedupe_points(pts0, 1e-14 * scale);
    int n = pts[0].dim();
    size_t start = 0;
    for (size_t i = 1; i < pts.size(); ++i)
        if (dot(pts[i], pts[i]) < dot(pts[start], pts[start])) start = i;
    std::vector<size_t> S{start};
    std::vector<double> lam{1.0};
    Vec x = pts[start];
    int K = (int)pts.size();
    if (K == 1) return x;
    double s2 = scale * scale;

    auto rebuild = [&]() {
        Vec y(n);
        for (size_t i = 0; i < S.size(); ++i) y = y + lam[i] * pts[S[i]];
        x = y;
    };

    for (int major = 0; major < 2 * K + 16; ++major) {
        size_t j = 0;
        double bestip = kInf;
        for (size_t i = 0; i < pts.size(); ++i) {
            double ip = dot(x, pts[i]);
            if (ip < bestip) {
                bestip = ip;
                j = i;
            }
        }
        if (dot(x, x) <= bestip + 1e-12 * s2) break;
        if (std::find(S.begin(), S.end(), j) != S.end()) break;
        S.push_back(j);
        lam.push_back(0.0);
        for (int minor = 0; minor < 64; ++minor) {
            int k = (int)S.size();
            int m = k + 1;
            std::vector<double> M((size_t)m * m, 0.0), a((size_t)m, 0.0);
            for (int r = 0; r < k; ++r)
                for (int c = 0; c < k; ++c) M[(size_t)r * m + c] = dot(pts[S[(size_t)r]], pts[S[(size_t)c]]);
            for (int r = 0; r < k; ++r) {
                M[(size_t)r * m + k] = 1.0;
                M[(size_t)k * m + r] = 1.0;
            }
            a[(size_t)k] = 1.0;
            bool ok = solve_linear(M, a, m);
            if (!ok) {
                size_t drop = 0;
                for (size_t i = 1; i < lam.size(); ++i)
                    if (lam[i] < lam[drop]) drop = i;
                S.erase(S.begin() + (long)drop);
                lam.erase(lam.begin() + (long)drop);
                double sum = 0;
                for (double l : lam) sum += l;
                if (sum > 0)
                    for (double& l : lam) l /= sum;
                else if (!lam.empty())
                    lam.assign(lam.size(), 1.0 / (double)lam.size());
                if (S.size() <= 1) break;
                continue;
            }
            a.resize((size_t)k);
            bool feas = true;
            for (double v : a)
                if (v < -1e-12) feas = false;
            if (feas) {
                lam.assign(a.begin(), a.end());
                break;
            }
            double th = 1.0;
            for (int i = 0; i < k; ++i)
                if (lam[(size_t)i] - a[(size_t)i] > 1e-15)
                    th = std::min(th, lam[(size_t)i] / (lam[(size_t)i] - a[(size_t)i]));
            for (int i = 0; i < k; ++i) lam[(size_t)i] = (1 - th) * lam[(size_t)i] + th * a[(size_t)i];
            std::vector<size_t> S2;
            std::vector<double> l2;
            for (size_t i = 0; i < S.size(); ++i)
                if (lam[i] > 1e-12) {
                    S2.push_back(S[i]);
                    l2.push_back(lam[i]);
                }
            if (S2.size() == S.size() && !S2.empty()) {
                size_t drop = 0;
                for (size_t i = 1; i < l2.size(); ++i)
                    if (l2[i] < l2[drop]) drop = i;
                S2.erase(S2.begin() + (long)drop);
                l2.erase(l2.begin() + (long)drop);
            }
            if (S2.empty()) {
                S2.push_back(S[0]);
                l2.push_back(1.0);
            }
            double sum = 0;
            for (double l : l2) sum += l;
            for (double& l : l2) l /= sum;
            S = std::move(S2);
            lam = std::move(l2);
        }
        rebuild();
    }
    return x;
}

static Vec project_segment(const Vec& a, const Vec& b, const Vec& z) {
    Vec d = b - a;
    double dd = dot(d, d);
    if (dd <= 0) return a;
    double t = dot(z - a, d) / dd;
    t = std::min(1.0, std::max(0.0, t));
    return a + t * d;
}

static Vec project_polygon(const std::vector<Vec>& hull, const Vec& z) {
    size_t K = hull.size();
    bool inside = true;
    for (size_t i = 0; i < K; ++i) {
        if (cross2(hull[i], hull[(i + 1) % K], z) < 0) {
            inside = false;
            break;
        }
    }
    if (inside) return z;
    Vec best = hull[0];
    double bd = kInf;
    for (size_t i = 0; i < K; ++i) {
        Vec p = project_segment(hull[i], hull[(i + 1) % K], z);
        double d = dist(p, z);
        if (d < bd) {
            bd = d;
            best = p;
        }
    }
    return best;
}

Vec project_point(const ConvexBody& J, const Vec& z) {
    if (!J.is_polytope()) {
        if (!J.oracle) throw std::invalid_argument("project_point: empty body");
        return J.oracle(z);
    }
    const auto& V = J.verts;
    if (V.size() == 1) return V[0];
    if (J.n == 1) {
        Vec r(1);
        r[0] = std::min(V[1][0], std::max(V[0][0], z[0]));
        return r;
    }
    if (J.n == 2) {
        if (V.size() == 2) return project_segment(V[0], V[1], z);
        return project_polygon(V, z);
    }
    std::vector<Vec> shifted;
    shifted.reserve(V.size());
    for (const auto& v : V) shifted.push_back(v - z);
    return z + min_norm_point_hull(shifted);
}

double distance(const ConvexBody& J, const Vec& z) { return dist(project_point(J, z), z); }

bool contains(const ConvexBody& J, const Vec& z, double tol) {
    return distance(J, z) <= tol * (1.0 + J.bounding_radius);
}

static std::vector<Vec> body_samples(const ConvexBody& A, const HausdorffOptions& opt) {
    std::vector<Vec> out;
    if (A.is_polytope()) {
        out = A.verts;
        size_t K = A.verts.size();
        if (opt.face_samples > 0 && K >= 2 && A.n <= 2) {
            size_t E = (K == 2) ? 1 : K;
            for (size_t i = 0; i < E; ++i) {
                const Vec& a = A.verts[i];
                const Vec& b = A.verts[(i + 1) % K];
                for (int s = 1; s <= opt.face_samples; ++s) {
                    double t = (double)s / (double)(opt.face_samples + 1);
                    out.push_back(a + t * (b - a));
                }
            }
        }
        return out;
    }
    if (A.bounding_radius <= 1e-14) {
        out.push_back(A.center);
        return out;
    }
    auto dirs = sphere_directions(A.n, opt.directions);
    double R = A.bounding_radius * (1.0 + 1e-7);
    double memtol = 1e-8 * (1.0 + A.bounding_radius + norm(A.center));
    for (const auto& d : dirs) {
        double lo = 0.0, hi = R;
        for (int it = 0; it < 40; ++it) {
            double mid = 0.5 * (lo + hi);
            Vec pt = A.center + mid * d;
            if (dist(A.oracle(pt), pt) <= memtol)
                lo = mid;
            else
                hi = mid;
        }
        out.push_back(A.oracle(A.center + lo * d));
    }
    return out;
}

double hausdorff(const ConvexBody& A, const ConvexBody& B, HausdorffOptions opt) {
    auto sa = body_samples(A, opt);
    auto sb = body_samples(B, opt);
    double e = 0.0;
    for (const auto& s : sa) e = std::max(e, distance(B, s));
    for (const auto& s : sb) e = std::max(e, distance(A, s));
    return e;
}

Vec dykstra_project(const Vec& z, const std::function<Vec(const Vec&)>& projA,
                    const std::function<Vec(const Vec&)>& projB, int max_sweeps, double tol) {
    Vec x = z, p(z.dim()), q(z.dim());
    double scale = 1.0 + norm(z);
    for (int s = 0; s < max_sweeps; ++s) {
        Vec y = projA(x + p);
        p = x + p - y;
        Vec xn = projB(y + q);
        q = y + q - xn;
        double ch = dist(xn, x);
        x = xn;
        if (ch <= tol * scale && s > 0) break;
    }
    return x;
}

ConvexBody proj_map(const Vec& u, const ConvexBody& J) {
    Vec pj = project_point(J, u);
    double d = dist(u, pj);
    if (d == 0.0) return make_polytope(J.n, {u});
    double r = 2.0 * d;
    Vec c = u;
    auto projJ = [J](const Vec& z) { return project_point(J, z); };
    auto projB = [c, r](const Vec& z) {
        Vec w = z - c;
        double nw = norm(w);
        if (nw <= r) return z;
        return c + (r / nw) * w;
    };
    auto oracle = [projJ, projB](const Vec& z) {
        return dykstra_project(z, projJ, projB);
    };
    return make_oracle(J.n, oracle, pj, 3.0 * d);
}

Vec oracle_support_point(const ConvexBody& J, const Vec& p, int iters) {
    if (J.is_polytope()) {
        std::vector<Vec> face;
        support(J, p, &face);
        return face.size() == 1 ? face[0] : min_norm_point_hull(face);
    }
    double pn = norm(p);
    if (pn <= 0) return J.center;
    Vec dir = (1.0 / pn) * p;
    double step = std::max(J.bounding_radius, 1e-9);
    Vec x = J.center;
    for (int k = 0; k < iters; ++k) x = J.oracle(x + step * dir);
    return x;
}

Vec steiner_polygon_exact(const std::vector<Vec>& hull0) {
    std::vector<Vec> hull;
    hull.reserve(hull0.size());
    double scale = 1e-300;
    for (const auto& v : hull0) scale = std::max({scale, std::fabs(v[0]), std::fabs(v[1])});
    for (const auto& v : hull0) {
        if (hull.empty() || dist(hull.back(), v) > 1e-13 * scale) hull.push_back(v);
    }
    while (hull.size() > 1 && dist(hull.front(), hull.back()) <= 1e-13 * scale) hull.pop_back();
    size_t K = hull.size();
    if (K == 0) throw std::invalid_argument("steiner_polygon_exact: empty polygon");
    if (K == 1) return hull[0];
    if (K == 2) return 0.5 * (hull[0] + hull[1]);
    std::vector<double> psi(K);
    for (size_t i = 0; i < K; ++i) {
        Vec d = hull[(i + 1) % K] - hull[i];
        psi[i] = std::atan2(-d[0], d[1]); /* outward normal (dy, -dx) of CCW edge */
    }
    Vec S(2);
    for (size_t i = 0; i < K; ++i) {
        double a = psi[(i + K - 1) % K], b = psi[i];
        double arc = b - a;
        if (arc < -1e-9) arc += 2.0 * M_PI;
        if (arc < 0) arc = 0;
        b = a + arc;
        double s2b = std::sin(2 * b), s2a = std::sin(2 * a);
        double c2b = std::cos(2 * b), c2a = std::cos(2 * a);
        double A11 = arc / 2 + (s2b - s2a) / 4;
        double A12 = (c2a - c2b) / 4;
        double A22 = arc / 2 - (s2b - s2a) / 4;
        const Vec& v = hull[i];
        S[0] += A11 * v[0] + A12 * v[1];
        S[1] += A12 * v[0] + A22 * v[1];
    }
    return (1.0 / M_PI) * S;
}

Vec steiner(const ConvexBody& J, const SteinerOptions& opt, double* err_est) {
    if (J.is_polytope()) {
        if (J.verts.size() == 1) {
            if (err_est) *err_est = 0.0;
            return J.verts[0];
        }
        if (opt.closed_form_2d && J.n == 2 && J.verts.size() >= 2) {
            if (err_est) *err_est = 0.0;
            Vec s = steiner_polygon_exact(J.verts);
            return project_point(J, s);
        }
    } else if (J.bounding_radius <= 1e-14) {
        if (err_est) *err_est = 0.0;
        return J.center;
    }
    int m = J.n;
    int budget = std::max(opt.budget, 16);
    /* antithetic pairs +-u: exact for centrally symmetric bodies and it
     * cancels the leading odd term of the quadrature error elsewhere */
    int pairs = budget / 2;
    auto nodes = halton_ball(m, pairs);
    Vec acc(m), acc_half(m);
    int half = pairs / 2;
    for (int i = 0; i < pairs; ++i) {
        Vec pt = oracle_support_point(J, nodes[(size_t)i], opt.ascent_iters);
        Vec mir = oracle_support_point(J, -1.0 * nodes[(size_t)i], opt.ascent_iters);
        acc = acc + pt + mir;
        if (i < half) acc_half = acc_half + pt + mir;
    }
    Vec S = (1.0 / (double)(2 * pairs)) * acc;
    Vec Sh = (1.0 / (double)(2 * half)) * acc_half;
    double shift = dist(S, Sh);
    if (err_est) *err_est = shift;
    if (shift > opt.conv_tol * std::max(J.bounding_radius, 1e-12))
        throw NumericError("steiner: quadrature estimate did not settle");
    return project_point(J, S);
}

Cone normal_cone(const ConvexBody& J, const Vec& x) {
    if (!J.is_polytope())
        throw std::invalid_argument("normal_cone: body carries no vertex list");
    Cone c;
    c.n = J.n;
    double tau = 1e-9 * (1.0 + J.bounding_radius);
    const auto& V = J.verts;
    if (J.n == 1) {
        if (V.size() == 1) {
            c.gens = {Vec(-1.0), Vec(1.0)};
            return c;
        }
        if (std::fabs(x[0] - V[0][0]) <= tau) c.gens.push_back(Vec(-1.0));
        if (std::fabs(x[0] - V[1][0]) <= tau) c.gens.push_back(Vec(1.0));
        return c;
    }
    if (V.size() == 1) {
        c.gens = {Vec(1.0, 0.0), Vec(-1.0, 0.0), Vec(0.0, 1.0), Vec(0.0, -1.0)};
        return c;
    }
    if (V.size() == 2) {
        Vec d = V[1] - V[0];
        double dn = norm(d);
        Vec dh = (1.0 / dn) * d;
        Vec nh(dh[1], -dh[0]);
        if (dist(x, V[0]) <= tau)
            c.gens = {nh, -1.0 * nh, -1.0 * dh};
        else if (dist(x, V[1]) <= tau)
            c.gens = {nh, -1.0 * nh, dh};
        else if (dist(project_segment(V[0], V[1], x), x) <= tau)
            c.gens = {nh, -1.0 * nh};
        return c;
    }
    size_t K = V.size();
    for (size_t i = 0; i < K; ++i) {
        const Vec& a = V[i];
        const Vec& b = V[(i + 1) % K];
        if (dist(project_segment(a, b, x), x) <= tau) {
            Vec d = b - a;
            double dn = norm(d);
            if (dn <= 0) continue;
            c.gens.push_back(Vec(d[1] / dn, -d[0] / dn));
        }
    }
    return c;
}

std::vector<Vec> boundary_normals(const ConvexBody& omega, const Vec& y, double eta,
                                  int blend_steps) {
    if (!omega.is_polytope())
        throw std::invalid_argument("boundary_normals: body carries no vertex list");
    std::vector<Vec> out;
    const auto& V = omega.verts;
    if (omega.n == 1) {
        if (V.size() < 2) return {Vec(-1.0), Vec(1.0)};
        if (std::fabs(y[0] - V[0][0]) <= eta) out.push_back(Vec(-1.0));
        if (std::fabs(y[0] - V[1][0]) <= eta) out.push_back(Vec(1.0));
        return out;
    }
    size_t K = V.size();
    if (K < 3) return out;
    std::vector<int> hit;
    std::vector<Vec> normals(K);
    for (size_t i = 0; i < K; ++i) {
        const Vec& a = V[i];
        const Vec& b = V[(i + 1) % K];
        Vec d = b - a;
        double dn = norm(d);
        normals[i] = dn > 0 ? Vec(d[1] / dn, -d[0] / dn) : Vec(0.0, 0.0);
        if (dist(project_segment(a, b, y), y) <= eta) hit.push_back((int)i);
    }
    for (int i : hit) out.push_back(normals[(size_t)i]);
    /* blend across shared corners: combine first, then normalize */
    for (size_t a = 0; a < hit.size(); ++a) {
        for (size_t b2 = 0; b2 < hit.size(); ++b2) {
            if ((hit[a] + 1) % (int)K != hit[b2]) continue;
            const Vec& n1 = normals[(size_t)hit[a]];
            const Vec& n2 = normals[(size_t)hit[b2]];
            for (int s = 1; s < blend_steps; ++s) {
                double t = (double)s / (double)blend_steps;
                Vec m = (1 - t) * n1 + t * n2;
                double mn = norm(m);
                if (mn > 1e-12) out.push_back((1.0 / mn) * m);
            }
        }
    }
    /* dedupe */
    std::vector<Vec> ded;
    for (const auto& v : out) {
        bool dup = false;
        for (const auto& w : ded)
            if (dist(v, w) <= 1e-9) dup = true;
        if (!dup) ded.push_back(v);
    }
    return ded;
}

std::vector<Vec> clip_halfplane(const std::vector<Vec>& poly, const Vec& a, double b) {
    std::vector<Vec> out;
    size_t K = poly.size();
    if (K == 0) return out;
    out.reserve(K + 2);
    Vec prev = poly[K - 1];
    double dp = dot(a, prev) - b;
    for (size_t i = 0; i < K; ++i) {
        const Vec& cur = poly[i];
        double dc = dot(a, cur) - b;
        bool inp = dp <= 0, inc = dc <= 0;
        if (inp != inc) {
            double t = dp / (dp - dc);
            out.push_back(prev + t * (cur - prev));
        }
        if (inc) out.push_back(cur);
        prev = cur;
        dp = dc;
    }
    return out;
}

std::vector<Vec> regular_disk_polygon(const Vec& c, double r, int sides) {
    std::vector<Vec> out;
    out.reserve((size_t)sides);
    for (int k = 0; k < sides; ++k) {
        double th = 2.0 * M_PI * (double)k / (double)sides;
        out.push_back(Vec(c[0] + r * std::cos(th), c[1] + r * std::sin(th)));
    }
    return out;
}

} // namespace hjb
