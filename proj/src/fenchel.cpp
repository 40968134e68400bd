#include "hjbrep/fenchel.hpp"

#include <algorithm>

namespace hjb {

GridFunction sample_grid(int dims, const std::array<GridAxis, 2>& axes,
                         const std::function<double(const Vec&)>& f) {
    GridFunction g;
    g.dims = dims;
    g.axes = axes;
    g.prov = Provenance::sampled;
    int n0 = axes[0].count, n1 = dims == 2 ? axes[1].count : 1;
    g.values.resize((size_t)n0 * (size_t)n1);
    for (int i = 0; i < n0; ++i)
        for (int j = 0; j < n1; ++j) {
            double v = f(g.node(i, j));
            if (std::isnan(v)) throw NumericError("sample_grid: NaN sample");
            g.at(i, j) = v;
        }
    return g;
}

double grid_value(const GridFunction& g, const Vec& q) {
    const GridAxis& a0 = g.axes[0];
    double h0 = a0.step();
    if (q[0] < a0.lo - 1e-12 * (1 + std::fabs(a0.lo)) ||
        q[0] > a0.hi + 1e-12 * (1 + std::fabs(a0.hi)))
        return kInf;
    int i = h0 > 0 ? (int)std::floor((q[0] - a0.lo) / h0) : 0;
    i = std::min(std::max(i, 0), std::max(a0.count - 2, 0));
    double t0 = h0 > 0 ? (q[0] - a0.at(i)) / h0 : 0.0;
    t0 = std::min(1.0, std::max(0.0, t0));
    if (g.dims == 1) {
        double v0 = g.at(i), v1 = a0.count > 1 ? g.at(i + 1) : v0;
        if (t0 <= 0.0) return v0;
        if (t0 >= 1.0) return v1;
        if (std::isinf(v0) || std::isinf(v1)) return kInf;
        return v0 + t0 * (v1 - v0);
    }
    const GridAxis& a1 = g.axes[1];
    double h1 = a1.step();
    if (q[1] < a1.lo - 1e-12 * (1 + std::fabs(a1.lo)) ||
        q[1] > a1.hi + 1e-12 * (1 + std::fabs(a1.hi)))
        return kInf;
    int j = h1 > 0 ? (int)std::floor((q[1] - a1.lo) / h1) : 0;
    j = std::min(std::max(j, 0), std::max(a1.count - 2, 0));
    double t1 = h1 > 0 ? (q[1] - a1.at(j)) / h1 : 0.0;
    t1 = std::min(1.0, std::max(0.0, t1));
    int i1 = std::min(i + 1, a0.count - 1), j1 = std::min(j + 1, a1.count - 1);
    double v00 = g.at(i, j), v10 = g.at(i1, j), v01 = g.at(i, j1), v11 = g.at(i1, j1);
    double w00 = (1 - t0) * (1 - t1), w10 = t0 * (1 - t1), w01 = (1 - t0) * t1, w11 = t0 * t1;
    double acc = 0.0;
    for (auto [v, w] : {std::pair{v00, w00}, {v10, w10}, {v01, w01}, {v11, w11}}) {
        if (w <= 0.0) continue;
        if (std::isinf(v)) return kInf;
        acc += v * w;
    }
    return acc;
}

/* 1-D transform core. Raw sup values (no sentinel yet) plus a flag saying the
 * sup is attained, within tie tolerance, at an interior primal node that is
 * also eligible. h entries of +inf are skipped; all-inf input gives -inf. */
static void llt_1d(const std::vector<double>& pnodes, const std::vector<double>& h,
                   const std::vector<uint8_t>* eligible, const GridAxis& dual,
                   LltMethod method, std::vector<double>& out, std::vector<uint8_t>& ok) {
    int N = (int)pnodes.size();
    int M = dual.count;
    out.assign((size_t)M, -kInf);
    ok.assign((size_t)M, 0);
    auto elig = [&](int i) { return !eligible || (*eligible)[(size_t)i]; };
    auto interior = [&](int i) { return i > 0 && i < N - 1; };

    if (method == LltMethod::brute) {
        for (int jq = 0; jq < M; ++jq) {
            double q = dual.at(jq);
            double best = -kInf, best_int = -kInf;
            for (int i = 0; i < N; ++i) {
                if (std::isinf(h[(size_t)i])) continue;
                double v = q * pnodes[(size_t)i] - h[(size_t)i];
                if (v > best) best = v;
                if (interior(i) && elig(i) && v > best_int) best_int = v;
            }
            out[(size_t)jq] = best;
            double tie = 1e-9 * (1.0 + std::fabs(best));
            ok[(size_t)jq] = std::isfinite(best) && best_int >= best - tie;
        }
        return;
    }

    /* fast path: lower hull of the finite samples, collinear points kept,
     * then a monotone walk over the ascending dual nodes */
    std::vector<int> fin;
    fin.reserve((size_t)N);
    for (int i = 0; i < N; ++i)
        if (!std::isinf(h[(size_t)i])) fin.push_back(i);
    if (fin.empty()) return;
    double scale = 1e-300;
    for (int i : fin)
        scale = std::max({scale, std::fabs(pnodes[(size_t)i]), std::fabs(h[(size_t)i])});
    double eps = 1e-12 * scale * scale;
    std::vector<int> hull;
    hull.reserve(fin.size());
    auto crossv = [&](int o, int a, int b) {
        return (pnodes[(size_t)a] - pnodes[(size_t)o]) * (h[(size_t)b] - h[(size_t)o]) -
               (h[(size_t)a] - h[(size_t)o]) * (pnodes[(size_t)b] - pnodes[(size_t)o]);
    };
    for (int i : fin) {
        while (hull.size() >= 2 && crossv(hull[hull.size() - 2], hull.back(), i) < -eps)
            hull.pop_back();
        hull.push_back(i);
    }
    int H = (int)hull.size();
    int j = 0;
    for (int jq = 0; jq < M; ++jq) {
        double q = dual.at(jq);
        auto f = [&](int k) { return q * pnodes[(size_t)hull[(size_t)k]] - h[(size_t)hull[(size_t)k]]; };
        while (j + 1 < H && f(j + 1) >= f(j)) ++j;
        double best = f(j);
        double tie = 1e-9 * (1.0 + std::fabs(best));
        bool good = false;
        for (int k = j; k >= 0 && f(k) >= best - tie; --k)
            if (interior(hull[(size_t)k]) && elig(hull[(size_t)k])) {
                good = true;
                break;
            }
        for (int k = j + 1; !good && k < H && f(k) >= best - tie; ++k)
            if (interior(hull[(size_t)k]) && elig(hull[(size_t)k])) good = true;
        out[(size_t)jq] = best;
        ok[(size_t)jq] = std::isfinite(best) && good;
    }
}

GridFunction llt(const GridFunction& h, const std::array<GridAxis, 2>& dual, LltMethod method) {
    GridFunction g;
    g.dims = h.dims;
    g.axes = dual;
    g.prov = h.prov == Provenance::conjugate ? Provenance::biconjugate : Provenance::conjugate;

    if (h.dims == 1) {
        std::vector<double> pnodes((size_t)h.axes[0].count);
        for (int i = 0; i < h.axes[0].count; ++i) pnodes[(size_t)i] = h.axes[0].at(i);
        std::vector<double> raw;
        std::vector<uint8_t> ok;
        llt_1d(pnodes, h.values, nullptr, dual[0], method, raw, ok);
        g.values.resize(raw.size());
        for (size_t i = 0; i < raw.size(); ++i)
            g.values[i] = (ok[i] && raw[i] <= kOverflow) ? raw[i] : kInf;
        return g;
    }

    int N1 = h.axes[0].count, N2 = h.axes[1].count;
    int M1 = dual[0].count, M2 = dual[1].count;
    std::vector<double> p1((size_t)N1), p2((size_t)N2);
    for (int i = 0; i < N1; ++i) p1[(size_t)i] = h.axes[0].at(i);
    for (int i = 0; i < N2; ++i) p2[(size_t)i] = h.axes[1].at(i);

    /* pass 1: conjugate in p1 for every p2 row -> A(q1, p2) */
    std::vector<double> A((size_t)M1 * (size_t)N2);
    std::vector<uint8_t> okA((size_t)M1 * (size_t)N2);
    std::vector<double> row((size_t)N1), raw;
    std::vector<uint8_t> ok;
    for (int j2 = 0; j2 < N2; ++j2) {
        for (int i1 = 0; i1 < N1; ++i1) row[(size_t)i1] = h.at(i1, j2);
        llt_1d(p1, row, nullptr, dual[0], method, raw, ok);
        for (int m1 = 0; m1 < M1; ++m1) {
            A[(size_t)m1 * (size_t)N2 + (size_t)j2] = raw[(size_t)m1];
            okA[(size_t)m1 * (size_t)N2 + (size_t)j2] = ok[(size_t)m1];
        }
    }

    /* pass 2: sup over p2 of q2 p2 + A(q1, p2), eligibility from pass 1 */
    g.values.assign((size_t)M1 * (size_t)M2, kInf);
    std::vector<double> h2((size_t)N2);
    std::vector<uint8_t> elig((size_t)N2);
    for (int m1 = 0; m1 < M1; ++m1) {
        for (int j2 = 0; j2 < N2; ++j2) {
            double a = A[(size_t)m1 * (size_t)N2 + (size_t)j2];
            h2[(size_t)j2] = std::isfinite(a) ? -a : kInf;
            elig[(size_t)j2] = okA[(size_t)m1 * (size_t)N2 + (size_t)j2];
        }
        llt_1d(p2, h2, &elig, dual[1], method, raw, ok);
        for (int m2 = 0; m2 < M2; ++m2)
            g.values[(size_t)m1 * (size_t)M2 + (size_t)m2] =
                (ok[(size_t)m2] && raw[(size_t)m2] <= kOverflow) ? raw[(size_t)m2] : kInf;
    }
    return g;
}

double biconjugate_residual(const GridFunction& h, const std::array<GridAxis, 2>& dual,
                            LltMethod method) {
    GridFunction c = llt(h, dual, method);
    GridFunction b = llt(c, h.axes, method);
    double worst = 0.0;
    for (int i = 0; i < h.count0(); ++i)
        for (int j = 0; j < h.count1(); ++j) {
            if (std::isinf(h.at(i, j))) continue;
            double bb = b.at(i, j);
            worst = std::max(worst, std::isinf(bb) ? kInf : std::fabs(bb - h.at(i, j)));
        }
    return worst;
}

ConjugateData conjugate_data(const std::function<double(const Vec&)>& H_of_p, int n,
                             const std::array<GridAxis, 2>& pgrid,
                             const std::array<GridAxis, 2>& qgrid, LltMethod method) {
    GridFunction h = sample_grid(n, pgrid, H_of_p);
    for (double v : h.values)
        if (!std::isfinite(v)) throw NumericError("conjugate_data: non-finite sample of H");
    ConjugateData cd;
    cd.n = n;
    cd.hstar = llt(h, qgrid, method);
    cd.dom_lo = {kInf, kInf};
    cd.dom_hi = {-kInf, -kInf};
    for (int i = 0; i < cd.hstar.count0(); ++i)
        for (int j = 0; j < cd.hstar.count1(); ++j) {
            double v = cd.hstar.at(i, j);
            if (std::isinf(v)) continue;
            cd.finite_cells.push_back({i, j});
            Vec q = cd.hstar.node(i, j);
            for (int d = 0; d < n; ++d) {
                cd.dom_lo[(size_t)d] = std::min(cd.dom_lo[(size_t)d], q[d]);
                cd.dom_hi[(size_t)d] = std::max(cd.dom_hi[(size_t)d], q[d]);
            }
            cd.gamma = std::max(cd.gamma, v);
            cd.graph_norm = std::max(cd.graph_norm, std::sqrt(dot(q, q) + v * v));
        }
    if (cd.finite_cells.empty()) return cd;
    if (n == 1)
        cd.domain = make_interval(cd.dom_lo[0], cd.dom_hi[0]);
    else
        cd.domain = make_polytope(2, {Vec(cd.dom_lo[0], cd.dom_lo[1]), Vec(cd.dom_hi[0], cd.dom_lo[1]),
                                      Vec(cd.dom_hi[0], cd.dom_hi[1]), Vec(cd.dom_lo[0], cd.dom_hi[1])});
    return cd;
}

/* ---- assumption checkers ---- */

static Vec rand_in_box(std::mt19937_64& rng, const CheckSpec& s) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Vec x(s.n);
    for (int d = 0; d < s.n; ++d) {
        const GridAxis& a = s.xbox[(size_t)d];
        x[d] = a.lo + (a.hi - a.lo) * U(rng);
    }
    return x;
}

static Vec rand_in_ball(std::mt19937_64& rng, int m, double R) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (;;) {
        Vec p(m);
        for (int d = 0; d < m; ++d) p[d] = U(rng);
        if (dot(p, p) <= 1.0) return (R)*p;
    }
}

CheckReport check_fiber_convexity(const Heval& H, const CheckSpec& s) {
    CheckReport r;
    auto rng = seeded_rng(s.seed, 11);
    for (int it = 0; it < s.tgrid.count; ++it) {
        double t = s.tgrid.at(it);
        for (int k = 0; k < s.draws; ++k) {
            Vec x = rand_in_box(rng, s);
            Vec p = rand_in_ball(rng, s.n, s.p_radius);
            Vec q = rand_in_ball(rng, s.n, s.p_radius);
            double mid = H(t, x, 0.5 * (p + q));
            double avg = 0.5 * (H(t, x, p) + H(t, x, q));
            r.worst = std::max(r.worst, mid - avg);
        }
    }
    r.pass = r.worst <= s.tol;
    if (!r.pass) r.note = "midpoint convexity violated along the last coordinate block";
    return r;
}

CheckReport check_x_lipschitz(const Heval& H, const CheckSpec& s, const Envelope& declared_Cr) {
    CheckReport r;
    auto rng = seeded_rng(s.seed, 12);
    double viol = 0.0;
    for (int it = 0; it < s.tgrid.count; ++it) {
        double t = s.tgrid.at(it);
        double emp = 0.0;
        for (int k = 0; k < s.draws; ++k) {
            Vec x = rand_in_box(rng, s);
            Vec y = rand_in_box(rng, s);
            double dxy = dist(x, y);
            if (dxy < 1e-9) continue;
            Vec p = rand_in_ball(rng, s.n, s.p_radius);
            double num = std::fabs(H(t, x, p) - H(t, y, p));
            emp = std::max(emp, num / ((1.0 + norm(p)) * dxy));
        }
        r.per_t.push_back(emp);
        r.worst = std::max(r.worst, emp);
        if (declared_Cr) viol = std::max(viol, emp - declared_Cr(t));
    }
    if (declared_Cr) {
        r.pass = viol <= s.tol + 1e-9 * (1.0 + r.worst);
        if (!r.pass) r.note = "empirical constant exceeds the declared envelope";
    }
    return r;
}

CheckReport check_p_lipschitz(const Heval& H, const CheckSpec& s, const Envelope& declared_ctilde) {
    CheckReport r;
    auto rng = seeded_rng(s.seed, 13);
    double viol = 0.0;
    double growth_lo = 0.0, growth_hi = 0.0;
    for (int it = 0; it < s.tgrid.count; ++it) {
        double t = s.tgrid.at(it);
        double emp = 0.0;
        for (double radius : {s.p_radius, 4.0 * s.p_radius}) {
            double emp_r = 0.0;
            for (int k = 0; k < s.draws; ++k) {
                Vec x = rand_in_box(rng, s);
                Vec p = rand_in_ball(rng, s.n, radius);
                Vec q = rand_in_ball(rng, s.n, radius);
                double dpq = dist(p, q);
                if (dpq < 1e-9) continue;
                double num = std::fabs(H(t, x, p) - H(t, x, q));
                emp_r = std::max(emp_r, num / ((1.0 + norm(x)) * dpq));
            }
            if (radius == s.p_radius) {
                emp = emp_r;
                growth_lo = std::max(growth_lo, emp_r);
            } else {
                growth_hi = std::max(growth_hi, emp_r);
            }
        }
        r.per_t.push_back(emp);
        r.worst = std::max(r.worst, emp);
        if (declared_ctilde) viol = std::max(viol, emp - declared_ctilde(t));
    }
    if (growth_hi > 1.5 * growth_lo + s.tol) {
        r.pass = false;
        r.note = "slope keeps growing with the sampling radius; no uniform bound";
    }
    if (declared_ctilde && viol > s.tol + 1e-9 * (1.0 + r.worst)) {
        r.pass = false;
        if (!r.note.empty()) r.note += "; ";
        r.note += "empirical constant exceeds the declared envelope";
    }
    return r;
}

static std::array<GridAxis, 2> square_axes(int n, double radius, int count) {
    std::array<GridAxis, 2> a{};
    for (int d = 0; d < n; ++d) a[(size_t)d] = GridAxis{-radius, radius, count};
    return a;
}

CheckReport check_local_boundedness(const Heval& H, const CheckSpec& s) {
    CheckReport r;
    auto rng = seeded_rng(s.seed, 14);
    int count = s.n == 1 ? 241 : 101;
    auto pg = square_axes(s.n, s.p_radius, count);
    auto qg = square_axes(s.n, 1.1 * s.p_radius, count);
    int tested = 0;
    for (int it = 0; it < s.tgrid.count && tested < 12; ++it) {
        double t = s.tgrid.at(it);
        Vec x = rand_in_box(rng, s);
        ++tested;
        auto cd = conjugate_data([&](const Vec& p) { return H(t, x, p); }, s.n, pg, qg);
        double global = 0.0, near_bdr = 0.0;
        for (auto& c : cd.finite_cells) {
            double v = std::fabs(cd.hstar.at(c[0], c[1]));
            global = std::max(global, v);
            bool bdr = false;
            for (int di = -1; di <= 1 && !bdr; ++di)
                for (int dj = -1; dj <= 1 && !bdr; ++dj) {
                    int i2 = c[0] + di, j2 = c[1] + dj;
                    if (i2 < 0 || i2 >= cd.hstar.count0() || j2 < 0 || j2 >= cd.hstar.count1())
                        continue;
                    if (std::isinf(cd.hstar.at(i2, j2))) bdr = true;
                }
            if (bdr) near_bdr = std::max(near_bdr, v);
        }
        r.worst = std::max(r.worst, std::max(global, near_bdr));
    }
    r.pass = r.worst <= kOverflow;
    r.note = "on a compact discrete domain the local and global bounds coincide; "
             "reported value is the global max over the domain";
    return r;
}

static std::vector<Vec> omega_boundary_samples(const ConvexBody& omega, int per_edge) {
    std::vector<Vec> out;
    const auto& V = omega.verts;
    if (omega.n == 1) {
        out.push_back(V.front());
        out.push_back(V.back());
        return out;
    }
    size_t K = V.size();
    for (size_t i = 0; i < K; ++i) {
        const Vec& a = V[i];
        const Vec& b = V[(i + 1) % K];
        for (int sNum = 0; sNum < per_edge; ++sNum) {
            double u = (double)sNum / (double)per_edge;
            out.push_back(a + u * (b - a));
        }
    }
    return out;
}

CheckReport check_envelopes(const Heval& H, const CheckSpec& s, const ConvexBody& omega,
                                    const Envelope& phi_lo, const Envelope& phi_hi,
                                    const Envelope& psi) {
    CheckReport r;
    if (!phi_lo || !phi_hi || !psi) {
        r.pass = false;
        r.note = "envelopes not declared";
        return r;
    }
    auto rng = seeded_rng(s.seed, 26);
    int count = s.n == 1 ? 241 : 81;
    auto pg = square_axes(s.n, s.p_radius, count);
    auto qg = square_axes(s.n, 1.1 * s.p_radius, count);
    auto bdr = omega_boundary_samples(omega, 5);
    for (int it = 0; it < s.tgrid.count; ++it) {
        double t = s.tgrid.at(it);
        for (int k = 0; k < 6; ++k) {
            Vec x = rand_in_box(rng, s);
            auto cd = conjugate_data([&](const Vec& p) { return H(t, x, p); }, s.n, pg, qg);
            double lo = kInf, hi = -kInf;
            for (auto& c : cd.finite_cells) {
                lo = std::min(lo, cd.hstar.at(c[0], c[1]));
                hi = std::max(hi, cd.hstar.at(c[0], c[1]));
            }
            r.worst = std::max(r.worst, phi_lo(t) - lo);
            r.worst = std::max(r.worst, hi - phi_hi(t) * (1.0 + norm(x)));
        }
        for (const auto& x : bdr) {
            auto cd = conjugate_data([&](const Vec& p) { return H(t, x, p); }, s.n, pg, qg);
            for (auto& c : cd.finite_cells) {
                Vec q = cd.hstar.node(c[0], c[1]);
                double v = std::fabs(cd.hstar.at(c[0], c[1]));
                r.worst = std::max(r.worst, norm(q) + v - psi(t));
            }
        }
    }
    r.pass = r.worst <= s.tol;
    if (!r.pass) r.note = "integrable envelope bounds violated on samples";
    return r;
}

} // namespace hjb
