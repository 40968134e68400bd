#include "hjbrep/representation.hpp"

#include <algorithm>
#include <fstream>

namespace hjb {

/* ---- Fiber ---- */

double Fiber::hstar(const Vec& q) const {
    if (n == 1) {
        double qq = q[0];
        size_t K = bq.size();
        double tol = 1e-12 * (1.0 + std::fabs(bq.front()) + std::fabs(bq.back()));
        if (qq < bq.front() - tol || qq > bq.back() + tol) return kInf;
        if (K == 1) return bv[0];
        qq = std::min(std::max(qq, bq.front()), bq.back());
        size_t k = (size_t)(std::upper_bound(bq.begin(), bq.end(), qq) - bq.begin());
        if (k == 0) return bv[0];
        if (k >= K) k = K - 1;
        double w = (qq - bq[k - 1]) / (bq[k] - bq[k - 1]);
        return (1 - w) * bv[k - 1] + w * bv[k];
    }
    if (!contains(dom2, q, 1e-9)) return kInf;
    double v = grid_value(grid2, q);
    if (std::isfinite(v)) return v;
    /* boundary cells carry +inf corners even though the hull contains q;
     * nudge toward the hull centroid until the interpolation certifies */
    double h = std::max(grid2.axes[0].step(), grid2.axes[1].step());
    Vec dir = dom2.center - q;
    double len = norm(dir);
    if (len <= 1e-15) return kInf;
    dir = (1.0 / len) * dir;
    for (double w : {0.05, 0.35, 0.8, 1.4}) {
        double step = std::min(w * h, len);
        v = grid_value(grid2, q + step * dir);
        if (std::isfinite(v)) return v;
    }
    return kInf;
}

bool Fiber::in_epi(const Vec& z) const {
    Vec q(n);
    for (int d = 0; d < n; ++d) q[d] = z[d];
    double h = hstar(q);
    if (std::isinf(h)) return false;
    return z[n] >= h - 1e-12 * (1.0 + std::fabs(h));
}

namespace {

/* golden-section minimum of a unimodal objective on [lo, hi] */
double golden_min(double lo, double hi, const std::function<double(double)>& g, double* argmin) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = g(c), fd = g(d);
    for (int it = 0; it < 80 && (b - a) > 1e-9 * (1.0 + std::fabs(lo) + std::fabs(hi)); ++it) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = g(d);
        }
    }
    double m = 0.5 * (a + b), fm = g(m);
    for (double cand : {lo, hi}) {
        double f = g(cand);
        if (f < fm) {
            fm = f;
            m = cand;
        }
    }
    if (argmin) *argmin = m;
    return fm;
}

} // namespace

double Fiber::epi_distance(const Vec& z, Vec* foot) const {
    if (n == 1) {
        double q0 = z[0], l0 = z[1];
        auto obj = [&](double q) {
            double over = std::max(hstar(Vec(q)), l0) - l0;
            return (q - q0) * (q - q0) + over * over;
        };
        double qstar;
        double d2 = golden_min(bq.front(), bq.back(), obj, &qstar);
        if (foot) *foot = Vec(qstar, std::max(hstar(Vec(qstar)), l0));
        return std::sqrt(std::max(0.0, d2));
    }
    /* coordinate descent over the domain box; +inf cells get a steep penalty
     * that keeps the search pointed at the finite region */
    double lo0 = kInf, hi0 = -kInf, lo1 = kInf, hi1 = -kInf;
    for (const auto& v : dom2.verts) {
        lo0 = std::min(lo0, v[0]);
        hi0 = std::max(hi0, v[0]);
        lo1 = std::min(lo1, v[1]);
        hi1 = std::max(hi1, v[1]);
    }
    double l0 = z[2];
    auto obj = [&](const Vec& q) {
        double h = hstar(q);
        if (std::isinf(h)) return 1e30 + dot(q - Vec(z[0], z[1]), q - Vec(z[0], z[1]));
        double over = std::max(h, l0) - l0;
        return (q[0] - z[0]) * (q[0] - z[0]) + (q[1] - z[1]) * (q[1] - z[1]) + over * over;
    };
    Vec q = project_point(dom2, Vec(z[0], z[1]));
    double best = obj(q);
    for (int sweep = 0; sweep < 8; ++sweep) {
        for (int axis = 0; axis < 2; ++axis) {
            double lo = axis == 0 ? lo0 : lo1, hi = axis == 0 ? hi0 : hi1;
            double arg;
            golden_min(lo, hi,
                       [&](double s) {
                           Vec qq = q;
                           qq[axis] = s;
                           return obj(qq);
                       },
                       &arg);
            q[axis] = arg;
        }
        double cur = obj(q);
        if (best - cur < 1e-12 * (1.0 + best)) {
            best = cur;
            break;
        }
        best = cur;
    }
    if (best >= 1e29) best = dot(q - Vec(z[0], z[1]), q - Vec(z[0], z[1])) + l0 * l0;
    if (foot) {
        double hq = hstar(q);
        *foot = Vec(q[0], q[1], std::isfinite(hq) ? std::max(hq, l0) : l0);
    }
    return std::sqrt(std::max(0.0, best));
}

std::vector<Vec> Fiber::graph_points() const {
    std::vector<Vec> out;
    if (n == 1) {
        for (size_t k = 0; k < bq.size(); ++k) out.push_back(Vec(bq[k], bv[k]));
        return out;
    }
    return graph2;
}

/* ---- Representation ---- */

Representation::Representation(ProblemSpec ps, EtaMode mode, LltMethod method)
    : ps_(std::move(ps)), mode_(mode), method_(method) {
    if (mode_ != EtaMode::graph && ps_.H.env_ctilde.empty())
        throw ConfigError("eta growth modes need the declared p_lipschitz envelope");
    if (mode_ == EtaMode::growth_cr && ps_.H.env_cr.empty())
        throw ConfigError("eta growth_cr mode needs the declared x_lipschitz envelope");

    int m = ps_.H.n + 1;
    controls_ = halton_ball(m, ps_.control_interior);
    if (ps_.control_boundary > 0)
        for (const auto& dir : sphere_directions(m, ps_.control_boundary)) controls_.push_back(dir);
    controls_.push_back(Vec(m)); /* the origin */

    if (ps_.H.n == 2) {
        /* the planar-state selection runs a quadrature per call; keep the
         * per-call budget modest, callers can raise it */
        phi_options.steiner.budget = 1024;
        phi_options.steiner.conv_tol = 0.25;
    }

    bool xdep = ps_.H.x_dependent();
    if (!xdep) {
        kind_ = CacheKind::per_t;
        cache_.resize((size_t)ps_.tgrid.count);
    } else if (ps_.H.family == HamiltonianFamily::scaled_eikonal && !ps_.H.a.depends_on_x() &&
               !ps_.H.b[0].depends_on_x() && !(ps_.H.n == 2 && ps_.H.b[1].depends_on_x())) {
        /* only the offset c(t,x) moves with x: the conjugate is a vertical
         * shift of a per-t base fiber, an exact family identity */
        kind_ = CacheKind::per_t_shift;
        cache_.resize((size_t)ps_.tgrid.count);
    } else {
        kind_ = CacheKind::per_tx;
        size_t nx = (size_t)ps_.xgrid[0].count * (size_t)(ps_.H.n == 2 ? ps_.xgrid[1].count : 1);
        cache_.resize((size_t)ps_.tgrid.count * nx);
    }
}

void Representation::finish_fiber(Fiber& F) const {
    F.gamma = 0.0;
    F.graph_norm = 0.0;
    for (const auto& g : F.graph_points()) {
        F.gamma = std::max(F.gamma, g[F.n]);
        F.graph_norm = std::max(F.graph_norm, norm(g));
    }
    switch (mode_) {
        case EtaMode::graph:
            F.eta = F.graph_norm > 0 ? F.graph_norm : 1.0;
            break;
        case EtaMode::growth:
            F.eta = ps_.H.env_ctilde.eval(F.t, F.x) * (1.0 + norm(F.x)) + F.gamma +
                    std::fabs(ps_.H.eval(F.t, F.x, Vec(ps_.H.n)));
            break;
        case EtaMode::growth_cr:
            F.eta = (ps_.H.env_ctilde.eval(F.t, F.x) + ps_.H.env_cr.eval(F.t, F.x)) *
                        (1.0 + norm(F.x)) +
                    F.gamma + std::fabs(ps_.H.eval(F.t, Vec(ps_.H.n), Vec(ps_.H.n)));
            break;
    }
    if (!(F.eta > 0)) F.eta = 1.0;
}

FiberPtr Representation::build_fiber(double t, const Vec& x) const {
    auto fiber = std::make_shared<Fiber>();
    Fiber& F = *fiber;
    F.n = ps_.H.n;
    F.t = t;
    F.x = x;
    auto Hp = [&](const Vec& p) { return ps_.H.eval(t, x, p); };
    ConjugateData cd = conjugate_data(Hp, F.n, ps_.pgrid, ps_.qgrid, method_);
    if (cd.empty())
        throw NumericError("conjugate epigraph is empty on the dual grid; "
                           "enlarge conjugate_grids.q_radius");

    if (F.n == 1) {
        int i0 = cd.finite_cells.front()[0], i1 = cd.finite_cells.back()[0];
        if ((int)cd.finite_cells.size() != i1 - i0 + 1)
            throw NumericError("conjugate domain is not connected on the dual grid");
        double scale = 1e-300;
        for (int i = i0; i <= i1; ++i)
            scale = std::max({scale, std::fabs(ps_.qgrid[0].at(i)), std::fabs(cd.hstar.at(i))});
        double eps = 1e-12 * scale * scale;
        for (int i = i0; i <= i1; ++i) {
            double q = ps_.qgrid[0].at(i), v = cd.hstar.at(i);
            while (F.bq.size() >= 2) {
                size_t K = F.bq.size();
                double cr = (F.bq[K - 1] - F.bq[K - 2]) * (v - F.bv[K - 2]) -
                            (F.bv[K - 1] - F.bv[K - 2]) * (q - F.bq[K - 2]);
                if (std::fabs(cr) <= eps) {
                    F.bq.pop_back();
                    F.bv.pop_back();
                } else
                    break;
            }
            F.bq.push_back(q);
            F.bv.push_back(v);
        }
    } else {
        std::vector<Vec> nodes;
        F.vmin = kInf;
        F.vmax = -kInf;
        for (const auto& c : cd.finite_cells) {
            nodes.push_back(cd.hstar.node(c[0], c[1]));
            double v = cd.hstar.at(c[0], c[1]);
            F.vmin = std::min(F.vmin, v);
            F.vmax = std::max(F.vmax, v);
        }
        F.dom2 = make_polytope(2, nodes);
        F.grid2 = cd.hstar;
        for (const auto& v : F.dom2.verts) {
            int i = ps_.qgrid[0].snap(v[0]), j = ps_.qgrid[1].snap(v[1]);
            F.graph2.push_back(Vec(v[0], v[1], cd.hstar.at(i, j)));
        }
        size_t stride = std::max<size_t>(1, cd.finite_cells.size() / 32);
        for (size_t k = 0; k < cd.finite_cells.size(); k += stride) {
            const auto& c = cd.finite_cells[k];
            F.graph2.push_back(Vec(cd.hstar.node(c[0], c[1])[0], cd.hstar.node(c[0], c[1])[1],
                                   cd.hstar.at(c[0], c[1])));
        }
    }
    finish_fiber(F);
    return fiber;
}

FiberPtr Representation::fiber(double t, const Vec& x) const {
    int kt = ps_.tgrid.snap(t);
    bool on_t = std::fabs(ps_.tgrid.at(kt) - t) <= 1e-7 * (1.0 + ps_.tgrid.hi);

    if (kind_ == CacheKind::per_t || kind_ == CacheKind::per_t_shift) {
        Vec xref = ps_.omega.center;
        FiberPtr base;
        if (on_t) {
            {
                std::lock_guard<std::mutex> lk(mu_);
                base = cache_[(size_t)kt];
            }
            if (!base) {
                base = build_fiber(ps_.tgrid.at(kt), xref);
                std::lock_guard<std::mutex> lk(mu_);
                if (cache_[(size_t)kt])
                    base = cache_[(size_t)kt];
                else
                    cache_[(size_t)kt] = base;
            }
        } else {
            base = build_fiber(t, xref);
        }
        if (kind_ == CacheKind::per_t) {
            if (dist(x, xref) <= 1e-12 || !ps_.H.x_dependent()) return base;
        }
        double shift = ps_.H.c.eval(base->t, x) - ps_.H.c.eval(base->t, xref);
        if (std::fabs(shift) <= 1e-15 * (1.0 + std::fabs(base->bv.empty() ? 0.0 : base->bv[0])) )
            return base;
        auto shifted = std::make_shared<Fiber>(*base);
        shifted->x = x;
        for (double& v : shifted->bv) v += shift;
        finish_fiber(*shifted);
        return shifted;
    }

    /* per (t,x) cache, keyed by snapped grid indices when on-node */
    int i0 = ps_.xgrid[0].snap(x[0]);
    int j0 = ps_.H.n == 2 ? ps_.xgrid[1].snap(x[1]) : 0;
    bool on_x = std::fabs(ps_.xgrid[0].at(i0) - x[0]) <= 1e-9 * (1.0 + std::fabs(ps_.xgrid[0].hi));
    if (ps_.H.n == 2)
        on_x = on_x &&
               std::fabs(ps_.xgrid[1].at(j0) - x[1]) <= 1e-9 * (1.0 + std::fabs(ps_.xgrid[1].hi));
    if (!(on_t && on_x)) return build_fiber(t, x);
    size_t nx1 = (size_t)(ps_.H.n == 2 ? ps_.xgrid[1].count : 1);
    size_t key = ((size_t)kt * (size_t)ps_.xgrid[0].count + (size_t)i0) * nx1 + (size_t)j0;
    {
        std::lock_guard<std::mutex> lk(mu_);
        if (cache_[key]) return cache_[key];
    }
    FiberPtr f = build_fiber(ps_.tgrid.at(kt), ps_.H.n == 2
                                                   ? Vec(ps_.xgrid[0].at(i0), ps_.xgrid[1].at(j0))
                                                   : Vec(ps_.xgrid[0].at(i0)));
    std::lock_guard<std::mutex> lk(mu_);
    if (!cache_[key]) cache_[key] = f;
    return cache_[key];
}

namespace {
/* unit-circle nodes, shared by every planar ball polygonization */
const std::vector<Vec>& circle_table(int sides) {
    thread_local std::vector<Vec> tab;
    thread_local int tab_sides = 0;
    if (tab_sides != sides) {
        tab.clear();
        for (int k = 0; k < sides; ++k) {
            double th = 2.0 * M_PI * ((double)k + 0.5) / (double)sides;
            tab.push_back(Vec(std::cos(th), std::sin(th)));
        }
        tab_sides = sides;
    }
    return tab;
}
} // namespace

Vec Representation::phi(const Fiber& F, const Vec& u, double* err) const {
    if (err) *err = 0.0;
    if (F.n == 1) {
        Vec z = F.eta * u;
        if (F.in_epi(z)) return z;
        Vec foot;
        double d = F.epi_distance(z, &foot);
        if (d <= 1e-13 * (1.0 + F.eta)) return foot;
        double R = 2.0 * d;
        const int N = phi_options.disk_sides;
        const auto& tab = circle_table(N);
        std::vector<Vec> poly;
        poly.reserve((size_t)N);
        for (const auto& c : tab) poly.push_back(Vec(z[0] + R * c[0], z[1] + R * c[1]));
        double qlo = F.bq.front(), qhi = F.bq.back();
        poly = clip_halfplane(poly, Vec(-1.0, 0.0), -qlo);
        if (!poly.empty()) poly = clip_halfplane(poly, Vec(1.0, 0.0), qhi);
        size_t K = F.bq.size();
        if (K == 1) {
            if (!poly.empty()) poly = clip_halfplane(poly, Vec(0.0, -1.0), -F.bv[0]);
        } else {
            /* pieces whose q-interval meets the ball window; a convex
             * piecewise-linear graph makes the others redundant here */
            double wlo = z[0] - R, whi = z[0] + R;
            size_t k0 = (size_t)(std::upper_bound(F.bq.begin(), F.bq.end(), wlo) - F.bq.begin());
            k0 = k0 > 0 ? k0 - 1 : 0;
            for (size_t k = k0; k + 1 < K && F.bq[k] <= whi && !poly.empty(); ++k) {
                double m = (F.bv[k + 1] - F.bv[k]) / (F.bq[k + 1] - F.bq[k]);
                poly = clip_halfplane(poly, Vec(m, -1.0), m * F.bq[k] - F.bv[k]);
            }
        }
        if (poly.empty()) return foot; /* vanishing sliver: the foot is the limit */
        Vec s = steiner_polygon_exact(poly);
        if (err) *err = R * (1.0 - std::cos(M_PI / (double)N)) + 1e-12 * (1.0 + F.eta);
        return s;
    }

    /* planar state: P = epi(F) cap B(z, 2d). Sphere quadrature as in
     * steiner(), but with support points computed directly: for a fixed q
     * the best admissible height is the upper spherical cap when the
     * direction points up, else the graph (or the lower cap), so the search
     * collapses to a concave 2-D problem handled by coordinate descent. */
    Vec z = F.eta * u;
    if (F.in_epi(z)) return z;
    Vec foot;
    double d = F.epi_distance(z, &foot);
    if (d <= 1e-12 * (1.0 + F.eta)) return foot;
    double R = 2.0 * d;

    auto support_pt = [&](const Vec& dir) -> Vec {
        auto score = [&](double q0, double q1) -> double {
            double dq0 = q0 - z[0], dq1 = q1 - z[1];
            double rr = R * R - dq0 * dq0 - dq1 * dq1;
            if (rr < 0) return -1e14 * (1.0 - rr);
            double h = F.hstar(Vec(q0, q1));
            if (std::isinf(h)) return -1e14 * (1.0 + dq0 * dq0 + dq1 * dq1);
            double s = std::sqrt(rr);
            if (h > z[2] + s) return -1e14 * (1.0 + h - z[2] - s);
            double v = dir[2] >= 0 ? z[2] + s : std::max(h, z[2] - s);
            return dir[0] * q0 + dir[1] * q1 + dir[2] * v;
        };
        Vec q(foot[0], foot[1]);
        double best = score(q[0], q[1]);
        for (int sweep = 0; sweep < 6; ++sweep) {
            for (int axis = 0; axis < 2; ++axis) {
                double arg;
                golden_min(z[axis] - R, z[axis] + R,
                           [&](double s) {
                               Vec qq = q;
                               qq[axis] = s;
                               return -score(qq[0], qq[1]);
                           },
                           &arg);
                q[axis] = arg;
            }
            double cur = score(q[0], q[1]);
            if (cur - best < 1e-10 * (1.0 + std::fabs(best))) {
                best = cur;
                break;
            }
            best = cur;
        }
        if (best < -1e13) return foot; /* search never left the penalty zone */
        double dq0 = q[0] - z[0], dq1 = q[1] - z[1];
        double s = std::sqrt(std::max(0.0, R * R - dq0 * dq0 - dq1 * dq1));
        double h = F.hstar(Vec(q[0], q[1]));
        double v = dir[2] >= 0 ? z[2] + s : std::max(h, z[2] - s);
        return Vec(q[0], q[1], v);
    };

    int pairs = std::max(phi_options.steiner.budget, 16) / 2;
    auto dirs = halton_ball(3, pairs);
    Vec acc(3), acc_half(3);
    int half = pairs / 2;
    for (int i = 0; i < pairs; ++i) {
        Vec pt = support_pt(dirs[(size_t)i]);
        Vec mir = support_pt(-1.0 * dirs[(size_t)i]);
        acc = acc + pt + mir;
        if (i < half) acc_half = acc_half + pt + mir;
    }
    Vec S = (1.0 / (double)(2 * pairs)) * acc;
    Vec Sh = (1.0 / (double)(2 * half)) * acc_half;
    double serr = dist(S, Sh);
    if (serr > phi_options.steiner.conv_tol * std::max(R, 1e-12))
        throw NumericError("steiner: quadrature estimate did not settle");

    /* pull the average into P, then lift the height the last epsilon */
    auto projEpi = [&](const Vec& y) {
        Vec f;
        F.epi_distance(y, &f);
        return f;
    };
    auto projBall = [&](const Vec& y) {
        Vec w = y - z;
        double nw = norm(w);
        return nw <= R ? y : z + (R / nw) * w;
    };
    Vec s = dykstra_project(S, projEpi, projBall, 32, 1e-12);
    double hs = F.hstar(Vec(s[0], s[1]));
    if (std::isfinite(hs)) s[2] = std::max(s[2], hs);
    if (err) *err = serr + 0.05 * dual_step();
    return s;
}

Vec Representation::phi(double t, const Vec& x, const Vec& u, double* err) const {
    FiberPtr F = fiber(t, x);
    return phi(*F, u, err);
}

std::vector<Vec> Representation::anchor_controls(const Fiber& F) const {
    std::vector<Vec> out;
    for (const auto& g : F.graph_points()) out.push_back((1.0 / F.eta) * g);
    return out;
}

/* ---- verification ---- */

double Representation::verify_identity(double t, const Vec& x, int p_samples, int u_samples,
                                       double* overshoot, double* tol_out,
                                       double u_ball_radius) const {
    FiberPtr F = fiber(t, x);
    int m = ps_.H.n + 1;
    std::vector<Vec> us = halton_ball(m, u_samples);
    for (const auto& dir : sphere_directions(m, std::max(16, u_samples / 4))) us.push_back(dir);
    us.push_back(Vec(m));
    if (u_ball_radius != 1.0)
        for (auto& u : us) u = u_ball_radius * u;
    for (const auto& a : anchor_controls(*F)) us.push_back(a);

    double werr = 0.0;
    std::vector<Vec> cloud;
    cloud.reserve(us.size());
    for (const auto& u : us) {
        double e = 0.0;
        cloud.push_back(phi(*F, u, &e));
        werr = std::max(werr, e);
    }

    auto rng = seeded_rng(ps_.seed, 41);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double p_radius = std::fabs(ps_.pgrid[0].hi);
    double worst = -kInf, over = 0.0;
    for (int k = 0; k < p_samples; ++k) {
        Vec p(ps_.H.n);
        if (k < 2 * ps_.H.n) {
            p[k % ps_.H.n] = (k / ps_.H.n == 0 ? 1.0 : -1.0) * p_radius;
        } else {
            for (int dd = 0; dd < ps_.H.n; ++dd) p[dd] = U(rng) * p_radius;
        }
        double sup = -kInf;
        for (const auto& y : cloud) {
            double v = -y[ps_.H.n];
            for (int dd = 0; dd < ps_.H.n; ++dd) v += p[dd] * y[dd];
            sup = std::max(sup, v);
        }
        double resid = ps_.H.eval(t, x, p) - sup;
        worst = std::max(worst, resid);
        over = std::max(over, -resid);
    }
    if (overshoot) *overshoot = over;
    if (tol_out) *tol_out = 5.0 * (dual_step() + werr + 1e-9);
    return worst;
}

double Representation::verify_domain_cover(double t, const Vec& x, int u_samples) const {
    FiberPtr F = fiber(t, x);
    int m = ps_.H.n + 1;
    std::vector<Vec> us = halton_ball(m, u_samples);
    for (const auto& dir : sphere_directions(m, std::max(16, u_samples / 4))) us.push_back(dir);
    for (const auto& a : anchor_controls(*F)) us.push_back(a);
    std::vector<Vec> fpts;
    fpts.reserve(us.size());
    for (const auto& u : us) {
        Vec y = phi(*F, u);
        Vec f(ps_.H.n);
        for (int d = 0; d < ps_.H.n; ++d) f[d] = y[d];
        fpts.push_back(f);
    }
    ConvexBody cloud = make_polytope(ps_.H.n, fpts);
    ConvexBody dom = ps_.H.n == 1 ? make_interval(F->bq.front(), F->bq.back()) : F->dom2;
    return hausdorff(dom, cloud);
}

double Representation::verify_graph_cover(double t, const Vec& x, int q_samples) const {
    FiberPtr F = fiber(t, x);
    std::vector<Vec> qs;
    if (F->n == 1) {
        for (int k = 0; k < q_samples; ++k) {
            double w = q_samples > 1 ? (double)k / (double)(q_samples - 1) : 0.5;
            qs.push_back(Vec(F->bq.front() + w * (F->bq.back() - F->bq.front())));
        }
        for (double q : F->bq) qs.push_back(Vec(q));
    } else {
        for (const auto& g : F->graph2) qs.push_back(Vec(g[0], g[1]));
    }
    double worst = 0.0;
    for (const auto& q : qs) {
        double h = F->hstar(q);
        if (std::isinf(h)) continue;
        Vec g = concat(q, h);
        Vec u = (1.0 / F->eta) * g;
        Vec y = phi(*F, u);
        worst = std::max(worst, dist(y, g));
    }
    return worst;
}

Representation::LipschitzReport Representation::verify_lipschitz(double t, double r,
                                                                 int pair_samples) const {
    LipschitzReport rep;
    rep.bound = 5.0 * (ps_.H.n + 1);
    bool xdep = ps_.H.x_dependent();
    if (xdep && ps_.H.env_cr.empty())
        throw ConfigError("lipschitz check on an x-dependent Hamiltonian needs the "
                          "declared x_lipschitz envelope");
    double Cr = ps_.H.env_cr.empty() ? 0.0 : ps_.H.env_cr.eval_t(t);
    auto rng = seeded_rng(ps_.seed, 63);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    int m = ps_.H.n + 1;
    auto rand_ball = [&](int dim, double radius) {
        for (;;) {
            Vec v(dim);
            for (int d = 0; d < dim; ++d) v[d] = U(rng);
            if (dot(v, v) <= 1.0) return radius * v;
        }
    };
    for (int k = 0; k < pair_samples; ++k) {
        Vec xx = rand_ball(ps_.H.n, r), yy = rand_ball(ps_.H.n, r);
        Vec uu = rand_ball(m, 1.0), vv = rand_ball(m, 1.0);
        FiberPtr Fx = fiber(t, xx), Fy = fiber(t, yy);
        double den = Cr * dist(xx, yy) + dist(Fx->eta * uu, Fy->eta * vv);
        if (den < 1e-12) continue;
        double num = dist(phi(*Fx, uu), phi(*Fy, vv));
        rep.max_ratio = std::max(rep.max_ratio, num / den);
        ++rep.pairs;
    }
    rep.pass = rep.max_ratio <= rep.bound + 0.1;
    return rep;
}

double Representation::verify_excess_bound(double t, const Vec& x, int u_samples,
                                           double* bound_out) const {
    FiberPtr F = fiber(t, x);
    if (ps_.H.env_ctilde.empty())
        throw ConfigError("excess bound needs the declared p_lipschitz envelope");
    double ctilde = ps_.H.env_ctilde.eval(t, x);
    double Cr = ps_.H.env_cr.empty() ? 0.0 : ps_.H.env_cr.eval_t(t);
    double bound = 10.0 * (ps_.H.n + 1) * (ctilde + Cr) * (1.0 + norm(x)) +
                   std::fabs(ps_.H.eval(t, Vec(ps_.H.n), Vec(ps_.H.n))) + F->gamma;
    if (bound_out) *bound_out = bound;
    int m = ps_.H.n + 1;
    std::vector<Vec> us = halton_ball(m, u_samples);
    for (const auto& dir : sphere_directions(m, std::max(16, u_samples / 4))) us.push_back(dir);
    double worst = -kInf;
    for (const auto& u : us) {
        Vec y = phi(*F, u);
        Vec f(ps_.H.n);
        for (int d = 0; d < ps_.H.n; ++d) f[d] = y[d];
        double h = F->hstar(f);
        if (std::isinf(h)) {
            /* f can sit a hair outside the domain through rounding */
            Vec fc = f;
            fc[0] = std::min(std::max(fc[0], F->bq.front()), F->bq.back());
            h = F->hstar(fc);
        }
        worst = std::max(worst, y[ps_.H.n] - h);
    }
    return worst;
}

void Representation::dump_csv(const std::string& path, int t_samples, int x_samples,
                              int u_samples) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    int n = ps_.H.n;
    out << "t";
    for (int d = 0; d < n; ++d) out << ",x" << d + 1;
    for (int d = 0; d < n + 1; ++d) out << ",u" << d + 1;
    for (int d = 0; d < n; ++d) out << ",f" << d + 1;
    out << ",ell\n";
    std::vector<Vec> us = halton_ball(n + 1, u_samples);
    for (const auto& a : sphere_directions(n + 1, std::max(4, u_samples / 4))) us.push_back(a);
    for (int it = 0; it < t_samples; ++it) {
        double t = ps_.tgrid.at((ps_.tgrid.count - 1) * it / std::max(1, t_samples - 1));
        for (int ix = 0; ix < x_samples; ++ix) {
            Vec x(n);
            x[0] = ps_.xgrid[0].at((ps_.xgrid[0].count - 1) * ix / std::max(1, x_samples - 1));
            if (n == 2) x[1] = ps_.xgrid[1].at((ps_.xgrid[1].count - 1) * ix / std::max(1, x_samples - 1));
            FiberPtr F = fiber(t, x);
            for (const auto& u : us) {
                Vec y = phi(*F, u);
                out << fmt_g12(t);
                for (int d = 0; d < n; ++d) out << "," << fmt_g12(x[d]);
                for (int d = 0; d < n + 1; ++d) out << "," << fmt_g12(u[d]);
                for (int d = 0; d < n; ++d) out << "," << fmt_g12(y[d]);
                out << "," << fmt_g12(y[n]) << "\n";
            }
        }
    }
}

} // namespace hjb
