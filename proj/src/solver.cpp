#include "hjbrep/solver.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

namespace hjb {

namespace {

/* locate v on the axis: cell index and weight; false when out of range */
bool locate(const GridAxis& g, double v, int& i, double& w) {
    if (g.count < 2) {
        i = 0;
        w = 0.0;
        return std::fabs(v - g.lo) <= 1e-9 * (1.0 + std::fabs(g.lo));
    }
    double rel = (v - g.lo) / g.step();
    if (rel < -1e-9 || rel > (double)(g.count - 1) + 1e-9) return false;
    i = (int)std::floor(rel);
    if (i < 0) i = 0;
    if (i > g.count - 2) i = g.count - 2;
    w = rel - (double)i;
    if (w < 0.0) w = 0.0;
    if (w > 1.0) w = 1.0;
    /* snap to the node when essentially on it, so exact-node queries do not
     * inherit +inf from an infeasible neighbor */
    if (w < 1e-7) w = 0.0;
    if (w > 1.0 - 1e-7) w = 1.0;
    return true;
}

double blend(double a, double b, double w) {
    if (w <= 0.0) return a;
    if (w >= 1.0) return b;
    if (std::isinf(a) || std::isinf(b)) return kInf;
    return (1.0 - w) * a + w * b;
}

template <class Fn>
void parallel_for(size_t count, int threads, const Fn& fn) {
    if (threads <= 0) threads = (int)std::thread::hardware_concurrency();
    if (threads < 1) threads = 1;
    threads = (int)std::min<size_t>((size_t)threads, count);
    if (threads <= 1) {
        fn(0, count);
        return;
    }
    std::vector<std::thread> pool;
    size_t chunk = (count + (size_t)threads - 1) / (size_t)threads;
    for (int w = 0; w < threads; ++w) {
        size_t b = (size_t)w * chunk, e = std::min(count, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& th : pool) th.join();
}

} // namespace

double ValueGrid::slice_value(int k, const Vec& x) const {
    int i, j = 0;
    double wi, wj = 0.0;
    if (!locate(xgrid[0], x[0], i, wi)) return kInf;
    if (n == 2 && !locate(xgrid[1], x[1], j, wj)) return kInf;
    if (n == 1) {
        if (xgrid[0].count < 2) return at(k, 0);
        return blend(at(k, i), at(k, i + 1), wi);
    }
    double lo = blend(at(k, i, j), at(k, i + 1, j), wi);
    double hi = blend(at(k, i, j + 1), at(k, i + 1, j + 1), wi);
    return blend(lo, hi, wj);
}

double ValueGrid::value(double t, const Vec& x) const {
    int k;
    double wk;
    if (!locate(tgrid, t, k, wk)) return kInf;
    if (tgrid.count < 2) return slice_value(0, x);
    if (wk <= 0.0) return slice_value(k, x);
    if (wk >= 1.0) return slice_value(k + 1, x);
    return blend(slice_value(k, x), slice_value(k + 1, x), wk);
}

double envelope_tail(const ProblemSpec& ps, double from_t, double radius) {
    if (ps.H.env_phi_lo.empty() || ps.H.env_phi_hi.empty())
        throw ConfigError("tail bound needs the declared decay envelopes phi_lo and phi_hi");
    auto integrand = [&](double s) {
        return std::max(std::fabs(ps.H.env_phi_lo.eval_t(s)),
                        ps.H.env_phi_hi.eval_t(s) * (1.0 + radius));
    };
    const int N = 4001;
    double h = ps.tail_horizon / (double)(N - 1);
    double sum = 0.0, peak = 0.0, endpeak = 0.0;
    double prev = integrand(from_t);
    peak = prev;
    for (int k = 1; k < N; ++k) {
        double cur = integrand(from_t + h * (double)k);
        sum += 0.5 * h * (prev + cur);
        peak = std::max(peak, cur);
        if (k >= N - 1 - N / 100) endpeak = std::max(endpeak, cur);
        prev = cur;
    }
    if (endpeak > 1e-6 * (1.0 + peak))
        throw AssumptionError("the declared decay envelopes have not vanished by the end of "
                              "the tail horizon; the truncation error is unbounded");
    return sum;
}

namespace {

/* per x-node integral of the decay envelope from each time node to the far
 * horizon; empty when the envelopes are not declared */
std::vector<double> decay_bound_table(const ValueGrid& V, const ProblemSpec& ps) {
    if (ps.H.env_phi_lo.empty() || ps.H.env_phi_hi.empty()) return {};
    int nt = V.tgrid.count;
    size_t nx = V.xcount();
    std::vector<double> B((size_t)nt * nx, kInf);
    double T = V.tgrid.hi;
    for (int i = 0; i < V.nx0(); ++i) {
        for (int j = 0; j < V.nx1(); ++j) {
            size_t xi = V.xindex(i, j);
            if (!V.mask[xi]) continue;
            double growth = 1.0 + norm(V.xnode(i, j));
            auto integrand = [&](double s) {
                return std::max(std::fabs(ps.H.env_phi_lo.eval_t(s)),
                                ps.H.env_phi_hi.eval_t(s) * growth);
            };
            const int M = 2001;
            double h = ps.tail_horizon / (double)(M - 1);
            double tail = 0.0, prev = integrand(T);
            for (int k = 1; k < M; ++k) {
                double cur = integrand(T + h * (double)k);
                tail += 0.5 * h * (prev + cur);
                prev = cur;
            }
            double cum = tail;
            B[(size_t)(nt - 1) * nx + xi] = cum;
            const int sub = 4;
            double hs = V.tgrid.step() / (double)sub;
            for (int k = nt - 2; k >= 0; --k) {
                double t0 = V.tgrid.at(k);
                double p = integrand(t0);
                double seg = 0.0;
                for (int s = 1; s <= sub; ++s) {
                    double cur = integrand(t0 + hs * (double)s);
                    seg += 0.5 * hs * (p + cur);
                    p = cur;
                }
                cum += seg;
                B[(size_t)k * nx + xi] = cum;
            }
        }
    }
    return B;
}

struct StepCandidates {
    std::vector<Vec> f;
    std::vector<double> l;
    void clear() {
        f.clear();
        l.clear();
    }
};
using CandidateFn = std::function<void(double, const Vec&, StepCandidates&)>;

double domain_speed(const Fiber& F) {
    if (F.n == 1) return std::max(std::fabs(F.bq.front()), std::fabs(F.bq.back()));
    double m = 0.0;
    for (const auto& v : F.dom2.verts) m = std::max(m, norm(v));
    return m;
}

double max_speed(const ProblemSpec& ps, const Representation& rep) {
    double m = 0.0;
    std::vector<Vec> xs = {ps.omega.center};
    for (const auto& v : ps.omega.verts) xs.push_back(v);
    int nt = ps.tgrid.count;
    for (int k : {0, (nt - 1) / 4, (nt - 1) / 2, 3 * (nt - 1) / 4, nt - 1}) {
        double t = ps.tgrid.at(k);
        if (!ps.H.x_dependent()) {
            m = std::max(m, domain_speed(*rep.fiber(t, ps.omega.center)));
            continue;
        }
        for (const auto& x : xs) m = std::max(m, domain_speed(*rep.fiber(t, x)));
    }
    return m;
}

ValueGrid solve_core(const ProblemSpec& ps, const Representation& rep, const CandidateFn& cands,
                     const SolveOptions& opt) {
    ValueGrid V;
    V.n = ps.H.n;
    V.tgrid = ps.tgrid;
    V.xgrid = ps.xgrid;
    int nt = V.tgrid.count;
    size_t nx = V.xcount();
    V.values.assign((size_t)nt * nx, kInf);
    V.mask.assign(nx, 0);
    for (int i = 0; i < V.nx0(); ++i)
        for (int j = 0; j < V.nx1(); ++j)
            V.mask[V.xindex(i, j)] = contains(ps.omega, V.xnode(i, j), 1e-9) ? 1 : 0;

    double fmax = max_speed(ps, rep);
    double dx = V.xgrid[0].step();
    if (V.n == 2) dx = std::min(dx, V.xgrid[1].step());
    double dt = V.tgrid.step();
    if (fmax > 1e-12 && dt > dx / fmax * (1.0 + 1e-9))
        throw ConfigError("time step " + fmt_g12(dt) + " violates the step bound dx/max|f| = " +
                          fmt_g12(dx / fmax) + "; refine the time grid");

    V.tail_bound = opt.no_tail_bound ? 0.0 : envelope_tail(ps, V.tgrid.hi, ps.omega_radius());

    /* terminal slice: zero inside the state domain */
    for (size_t xi = 0; xi < nx; ++xi)
        if (V.mask[xi]) V.values[(size_t)(nt - 1) * nx + xi] = 0.0;

    auto node_value = [&](int k, size_t xi, StepCandidates& sc) {
        int i = (int)(xi / (size_t)V.nx1()), j = (int)(xi % (size_t)V.nx1());
        Vec x = V.xnode(i, j);
        double t = V.tgrid.at(k);
        sc.clear();
        cands(t, x, sc);
        double best = kInf;
        for (size_t c = 0; c < sc.f.size(); ++c) {
            Vec xn = x + dt * sc.f[c];
            if (!contains(ps.omega, xn, 1e-9)) continue;
            double cont = V.slice_value(k + 1, xn);
            if (std::isinf(cont)) continue;
            best = std::min(best, dt * sc.l[c] + cont);
        }
        return best;
    };

    for (int k = nt - 2; k >= 0; --k) {
        parallel_for(nx, opt.threads, [&](size_t b, size_t e) {
            StepCandidates sc;
            for (size_t xi = b; xi < e; ++xi) {
                if (!V.mask[xi]) continue;
                V.values[(size_t)k * nx + xi] = node_value(k, xi, sc);
            }
        });
    }

    if (opt.self_test) {
        StepCandidates sc;
        int kstride = std::max(1, (nt - 1) / 5), xstride = (int)std::max<size_t>(1, nx / 13);
        for (int k = 0; k < nt - 1; k += kstride) {
            for (size_t xi = 0; xi < nx; xi += (size_t)xstride) {
                if (!V.mask[xi]) continue;
                double again = node_value(k, xi, sc);
                double stored = V.values[(size_t)k * nx + xi];
                bool ok = (std::isinf(again) && std::isinf(stored)) ||
                          std::fabs(again - stored) <= 1e-11 * (1.0 + std::fabs(stored));
                if (!ok)
                    throw NumericError("the dynamic-programming recursion self-test failed at "
                                       "a spot-checked node");
            }
        }
    }
    return V;
}

} // namespace

ValueGrid solve_v(const ProblemSpec& ps, const Representation& rep, const SolveOptions& opt) {
    CandidateFn provider = [&rep](double t, const Vec& x, StepCandidates& out) {
        FiberPtr F = rep.fiber(t, x);
        /* the candidate list depends on the fiber only; reuse it while the
         * fiber is the same object (x-independent Hamiltonians) */
        thread_local FiberPtr memo_F;
        thread_local StepCandidates memo;
        if (memo_F.get() != F.get()) {
            memo.clear();
            auto push = [&](const Vec& u) {
                Vec y = rep.phi(*F, u);
                Vec f(F->n);
                for (int d = 0; d < F->n; ++d) f[d] = y[d];
                memo.f.push_back(f);
                memo.l.push_back(y[F->n]);
            };
            for (const auto& u : rep.ball_controls()) push(u);
            for (const auto& u : rep.anchor_controls(*F)) push(u);
            memo_F = F;
        }
        out = memo;
    };
    return solve_core(ps, rep, provider, opt);
}

ValueGrid solve_W(const ProblemSpec& ps, const Representation& conj, const SolveOptions& opt) {
    int qcount = std::max(33, ps.control_interior + ps.control_boundary);
    CandidateFn provider = [&conj, qcount](double t, const Vec& x, StepCandidates& out) {
        FiberPtr F = conj.fiber(t, x);
        thread_local FiberPtr memo_F;
        thread_local StepCandidates memo;
        if (memo_F.get() != F.get()) {
            memo.clear();
            if (F->n == 1) {
                double lo = F->bq.front(), hi = F->bq.back();
                for (int k = 0; k < qcount; ++k) {
                    double w = qcount > 1 ? (double)k / (double)(qcount - 1) : 0.5;
                    Vec q(lo + w * (hi - lo));
                    memo.f.push_back(q);
                    memo.l.push_back(F->hstar(q));
                }
                for (size_t k = 0; k < F->bq.size(); ++k) {
                    memo.f.push_back(Vec(F->bq[k]));
                    memo.l.push_back(F->bv[k]);
                }
            } else {
                size_t finite = 0;
                for (double v : F->grid2.values)
                    if (!std::isinf(v)) ++finite;
                size_t stride = std::max<size_t>(1, finite / 160);
                size_t seen = 0;
                for (int i = 0; i < F->grid2.count0(); ++i) {
                    for (int j = 0; j < F->grid2.count1(); ++j) {
                        double v = F->grid2.at(i, j);
                        if (std::isinf(v)) continue;
                        if (seen++ % stride) continue;
                        memo.f.push_back(F->grid2.node(i, j));
                        memo.l.push_back(v);
                    }
                }
                for (const auto& g : F->graph2) {
                    memo.f.push_back(Vec(g[0], g[1]));
                    memo.l.push_back(g[2]);
                }
            }
            memo_F = F;
        }
        out = memo;
    };
    return solve_core(ps, conj, provider, opt);
}

std::vector<Subgradient> numeric_subdifferential(const ValueGrid& V, int t_idx, int x_idx,
                                                 int y_idx, int stencil, double sigma) {
    double V0 = V.at(t_idx, x_idx, y_idx);
    if (std::isinf(V0)) return {};
    double dt = V.tgrid.step();
    double dxs = V.xgrid[0].step() + (V.n == 2 ? V.xgrid[1].step() : 0.0);
    double eps = sigma * (dt + dxs);
    int nt = V.tgrid.count;

    auto axis_quotients = [&](int count, int idx, double step,
                              const std::function<double(int)>& val) {
        std::vector<double> qs;
        for (int m = 1; m <= stencil; ++m) {
            double back = kInf, fwd = kInf;
            if (idx - m >= 0) back = val(idx - m);
            if (idx + m < count) fwd = val(idx + m);
            if (!std::isinf(back)) qs.push_back((V0 - back) / ((double)m * step));
            if (!std::isinf(fwd)) qs.push_back((fwd - V0) / ((double)m * step));
            if (!std::isinf(back) && !std::isinf(fwd))
                qs.push_back((fwd - back) / (2.0 * (double)m * step));
        }
        return qs;
    };

    auto tq = axis_quotients(nt, t_idx, dt, [&](int k) { return V.at(k, x_idx, y_idx); });
    auto xq = axis_quotients(V.nx0(), x_idx, V.xgrid[0].step(),
                             [&](int i) { return V.at(t_idx, i, y_idx); });
    std::vector<double> yq = {0.0};
    if (V.n == 2)
        yq = axis_quotients(V.nx1(), y_idx, V.xgrid[1].step(),
                            [&](int j) { return V.at(t_idx, x_idx, j); });
    if (tq.empty() || xq.empty() || yq.empty()) return {};

    auto admissible = [&](double pt, double px, double py) {
        for (int a = -stencil; a <= stencil; ++a) {
            int k = t_idx + a;
            if (k < 0 || k >= nt) continue;
            for (int b = -stencil; b <= stencil; ++b) {
                int i = x_idx + b;
                if (i < 0 || i >= V.nx0()) continue;
                for (int c = -(V.n == 2 ? stencil : 0); c <= (V.n == 2 ? stencil : 0); ++c) {
                    int j = y_idx + c;
                    if (j < 0 || j >= V.nx1()) continue;
                    double val = V.at(k, i, j);
                    if (std::isinf(val)) continue;
                    double ds = (double)a * dt, dx0 = (double)b * V.xgrid[0].step();
                    double dy0 = (double)c * (V.n == 2 ? V.xgrid[1].step() : 0.0);
                    double lin = pt * ds + px * dx0 + py * dy0;
                    double rad = std::sqrt(ds * ds + dx0 * dx0 + dy0 * dy0);
                    if (val < V0 + lin - eps * rad - 1e-12) return false;
                }
            }
        }
        return true;
    };

    std::vector<Subgradient> accepted;
    for (double pt : tq)
        for (double px : xq)
            for (double py : yq)
                if (admissible(pt, px, py)) {
                    Subgradient s;
                    s.pt = pt;
                    s.px = V.n == 2 ? Vec(px, py) : Vec(px);
                    accepted.push_back(s);
                }

    /* merge clusters closer than the acceptance slack to their mean */
    std::vector<Subgradient> out;
    std::vector<int> weight;
    for (const auto& s : accepted) {
        bool merged = false;
        for (size_t c = 0; c < out.size(); ++c) {
            double d2 = (s.pt - out[c].pt) * (s.pt - out[c].pt) + dot(s.px - out[c].px, s.px - out[c].px);
            if (d2 <= eps * eps) {
                double w = (double)weight[c];
                out[c].pt = (out[c].pt * w + s.pt) / (w + 1.0);
                out[c].px = (1.0 / (w + 1.0)) * (w * out[c].px + s.px);
                ++weight[c];
                merged = true;
                break;
            }
        }
        if (!merged) {
            out.push_back(s);
            weight.push_back(1);
        }
    }
    return out;
}

WeakSolutionReport check_weak_solution(const ValueGrid& V, const ProblemSpec& ps,
                                       double tol_scale, int stencil) {
    WeakSolutionReport rep;
    double dt = V.tgrid.step();
    double dxs = V.xgrid[0].step() + (V.n == 2 ? V.xgrid[1].step() : 0.0);
    rep.tol = 2.0 * (dt + dxs) * tol_scale;
    rep.eps_sub = 2.0 * (dt + dxs);
    auto B = decay_bound_table(V, ps);
    rep.decay_gate = !B.empty();

    int nt = V.tgrid.count;
    size_t nx = V.xcount();

    std::vector<uint8_t> boundary(nx, 0);
    for (int i = 0; i < V.nx0(); ++i) {
        for (int j = 0; j < V.nx1(); ++j) {
            size_t xi = V.xindex(i, j);
            if (!V.mask[xi]) continue;
            bool bd = false;
            for (int axis = 0; axis < V.n; ++axis) {
                for (int s : {-1, 1}) {
                    int ii = i + (axis == 0 ? s : 0), jj = j + (axis == 1 ? s : 0);
                    if (ii < 0 || ii >= V.nx0() || jj < 0 || jj >= V.nx1() ||
                        !V.mask[V.xindex(ii, jj)])
                        bd = true;
                }
            }
            boundary[xi] = bd ? 1 : 0;
        }
    }

    /* per-node status: 0 untested, 1 pass, 2 residual fail, 3 bound fail,
     * 5 empty candidate set; worst residual alongside */
    std::vector<uint8_t> status((size_t)nt * nx, 0);
    std::vector<double> resid((size_t)nt * nx, 0.0);

    std::vector<int> rows;
    for (int k = 1; k <= nt - 2; ++k) rows.push_back(k);
    parallel_for(rows.size(), 0, [&](size_t rb, size_t re) {
        for (size_t rr = rb; rr < re; ++rr) {
            int k = rows[rr];
            double t = V.tgrid.at(k);
            for (int i = 0; i < V.nx0(); ++i) {
                for (int j = 0; j < V.nx1(); ++j) {
                    size_t xi = V.xindex(i, j);
                    if (!V.mask[xi]) continue;
                    double V0 = V.at(k, i, j);
                    if (std::isinf(V0)) continue;
                    size_t node = (size_t)k * nx + xi;
                    auto cands = numeric_subdifferential(V, k, i, j, stencil, 2.0);
                    if (cands.empty()) {
                        status[node] = 5;
                        continue;
                    }
                    Vec x = V.xnode(i, j);
                    double worst = 0.0;
                    for (const auto& s : cands) {
                        double r = -s.pt + ps.H.eval(t, x, -1.0 * s.px);
                        if (boundary[xi])
                            worst = std::max(worst, -r); /* negative part */
                        else
                            worst = std::max(worst, std::fabs(r));
                    }
                    bool bound_bad =
                        rep.decay_gate && std::fabs(V0) > B[node] + rep.tol;
                    resid[node] = worst;
                    if (worst > rep.tol)
                        status[node] = 2;
                    else if (bound_bad)
                        status[node] = 3;
                    else
                        status[node] = 1;
                }
            }
        }
    });

    for (size_t node = 0; node < status.size(); ++node) {
        if (!status[node]) continue;
        size_t xi = node % nx;
        int k = (int)(node / nx);
        if (status[node] == 5) {
            ++rep.empty_subdiff;
            continue;
        }
        bool fail = status[node] != 1;
        if (status[node] == 3) ++rep.bound_failed;
        if (boundary[xi]) {
            ++rep.boundary_tested;
            if (fail) ++rep.boundary_failed;
            rep.worst_boundary = std::max(rep.worst_boundary, resid[node]);
        } else {
            ++rep.interior_tested;
            if (fail) ++rep.interior_failed;
            rep.worst_interior = std::max(rep.worst_interior, resid[node]);
        }
        if (fail && rep.violations.size() < 64) {
            int i = (int)(xi / (size_t)V.nx1()), j = (int)(xi % (size_t)V.nx1());
            Vec x = V.xnode(i, j);
            rep.violations.push_back(
                {V.tgrid.at(k), x[0], V.n == 2 ? x[1] : 0.0, resid[node]});
        }
    }
    rep.interior_fraction =
        rep.interior_tested ? 1.0 - (double)rep.interior_failed / rep.interior_tested : 1.0;
    rep.boundary_fraction =
        rep.boundary_tested ? 1.0 - (double)rep.boundary_failed / rep.boundary_tested : 1.0;
    rep.pass = rep.interior_fraction >= rep.required_fraction &&
               rep.boundary_fraction >= rep.required_fraction;
    return rep;
}

EpiHypoReport check_epi_hypo_derivatives(const ValueGrid& V, const Representation& rep,
                                         const ProblemSpec& ps, int u_samples,
                                         double tol_scale) {
    EpiHypoReport out;
    double dt = V.tgrid.step();
    double dxs = V.xgrid[0].step() + (V.n == 2 ? V.xgrid[1].step() : 0.0);
    out.tol = 5.0 * (dt + dxs) * tol_scale;
    int nt = V.tgrid.count;

    int tstride = std::max(1, (nt - 1) / 12);
    int xstride = std::max(1, (V.nx0() - 1) / 12);
    int ystride = V.n == 2 ? std::max(1, (V.nx1() - 1) / 8) : 1;

    std::vector<Vec> us(rep.ball_controls().begin(),
                        rep.ball_controls().begin() +
                            std::min<size_t>((size_t)u_samples, rep.ball_controls().size()));

    for (int k = 3; k <= nt - 4; k += tstride) {
        double t = V.tgrid.at(k);
        for (int i = 1; i < V.nx0() - 1; i += xstride) {
            for (int j = (V.n == 2 ? 1 : 0); j < (V.n == 2 ? V.nx1() - 1 : 1); j += ystride) {
                size_t xi = V.xindex(i, j);
                if (!V.mask[xi]) continue;
                double V0 = V.at(k, i, j);
                if (std::isinf(V0)) continue;
                Vec x = V.xnode(i, j);
                FiberPtr F = rep.fiber(t, x);
                ++out.nodes;
                auto all = us;
                for (const auto& a : rep.anchor_controls(*F)) all.push_back(a);
                for (const auto& u : all) {
                    Vec y = rep.phi(*F, u);
                    Vec f(F->n);
                    for (int d = 0; d < F->n; ++d) f[d] = y[d];
                    double l = y[F->n];
                    double up = kInf, dn = -kInf;
                    for (int m = 1; m <= 3; ++m) {
                        double h = (double)m * dt;
                        double back = V.value(t - h, x - h * f);
                        if (!std::isinf(back)) up = std::min(up, (back - V0) / h);
                        double fwd = V.value(t + h, x + h * f);
                        if (!std::isinf(fwd)) dn = std::max(dn, (fwd - V0) / h);
                    }
                    ++out.samples;
                    if (!std::isinf(up)) {
                        double viol = up - l;
                        out.worst_upper = std::max(out.worst_upper, viol);
                        if (viol > out.tol) ++out.upper_failures;
                    }
                    if (!std::isinf(dn) && dn != -kInf) {
                        double viol = -l - dn;
                        out.worst_lower = std::max(out.worst_lower, viol);
                        if (viol > out.tol) ++out.lower_failures;
                    }
                }
            }
        }
    }
    out.pass = (out.upper_failures + out.lower_failures) <= (int)(0.02 * out.samples);
    return out;
}

namespace {

std::vector<Vec> domain_samples(const Fiber& F, int count) {
    std::vector<Vec> qs;
    if (F.n == 1) {
        double lo = F.bq.front(), hi = F.bq.back();
        for (int k = 0; k < count; ++k) {
            double w = count > 1 ? (double)k / (double)(count - 1) : 0.5;
            qs.push_back(Vec(lo + w * (hi - lo)));
        }
        for (double q : F.bq) qs.push_back(Vec(q));
        return qs;
    }
    for (const auto& v : F.dom2.verts) qs.push_back(v);
    size_t finite = 0;
    for (double v : F.grid2.values)
        if (!std::isinf(v)) ++finite;
    size_t stride = std::max<size_t>(1, finite / (size_t)count);
    size_t seen = 0;
    for (int i = 0; i < F.grid2.count0(); ++i)
        for (int j = 0; j < F.grid2.count1(); ++j) {
            if (std::isinf(F.grid2.at(i, j))) continue;
            if (seen++ % stride) continue;
            qs.push_back(F.grid2.node(i, j));
        }
    return qs;
}

std::vector<Vec> collar_points(const ConvexBody& omega, double eta) {
    std::vector<Vec> ys;
    if (omega.n == 1) {
        for (const auto& v : omega.verts)
            for (double s : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
                double sign = v[0] >= omega.center[0] ? 1.0 : -1.0;
                ys.push_back(Vec(v[0] + sign * s * eta));
            }
        return ys;
    }
    size_t K = omega.verts.size();
    for (size_t i = 0; i < K; ++i) {
        const Vec& a = omega.verts[i];
        const Vec& b = omega.verts[(i + 1) % K];
        Vec d = b - a;
        double dn = norm(d);
        if (dn <= 0) continue;
        Vec nrm(d[1] / dn, -d[0] / dn);
        for (double w : {0.0, 0.5}) {
            Vec base = a + w * d;
            for (double s : {-0.5, 0.0, 0.5}) ys.push_back(base + (s * eta) * nrm);
        }
    }
    return ys;
}

} // namespace

OpcReport check_opc(const ProblemSpec& ps, const Representation& conj) {
    if (!ps.opc.declared)
        throw ConfigError("outward-pointing check needs the declared (eta, r, M) parameters");
    OpcReport rep;
    rep.declared = true;
    double eta = ps.opc.eta, r = ps.opc.r, M = ps.opc.M;

    int nt = ps.tgrid.count;
    std::vector<int> tks = {0, (nt - 1) / 4, (nt - 1) / 2, 3 * (nt - 1) / 4, nt - 1};
    auto ys = collar_points(ps.omega, eta);

    for (int tk : tks) {
        double t = ps.tgrid.at(tk);
        for (const auto& y : ys) {
            auto normals = boundary_normals(ps.omega, y, eta);
            if (normals.empty()) continue;
            ++rep.collar_points;
            FiberPtr F = conj.fiber(t, y);
            auto qs = domain_samples(*F, ps.H.n == 1 ? 41 : 64);
            for (const auto& q : qs) {
                Vec worst_n = normals.front();
                double worst_ip = kInf;
                for (const auto& nn : normals) {
                    double ip = dot(nn, q);
                    if (ip < worst_ip) {
                        worst_ip = ip;
                        worst_n = nn;
                    }
                }
                if (worst_ip > 1e-12) continue; /* velocity points inward everywhere */
                ++rep.triggered;
                bool found = false;
                for (const auto& w : qs) {
                    if (dist(w, q) > M + 1e-9) continue;
                    bool ok = true;
                    for (const auto& nn : normals) {
                        if (dot(nn, w) < r - 1e-9 || dot(nn, w - q) < r - 1e-9) {
                            ok = false;
                            break;
                        }
                    }
                    if (ok) {
                        found = true;
                        break;
                    }
                }
                if (!found) {
                    OpcReport::Failure fl;
                    fl.t = t;
                    fl.y = y;
                    fl.normal = worst_n;
                    fl.q = q;
                    if (rep.failures.size() < 32) rep.failures.push_back(fl);
                }
            }
        }
    }
    rep.vacuous = rep.triggered == 0;
    rep.pass = rep.failures.empty();
    return rep;
}

double check_vanishing(const ValueGrid& V, const ProblemSpec& ps) {
    (void)ps;
    int k = std::max(0, V.tgrid.count - 2);
    double sup = 0.0;
    for (int i = 0; i < V.nx0(); ++i)
        for (int j = 0; j < V.nx1(); ++j) {
            if (!V.mask[V.xindex(i, j)]) continue;
            double v = V.at(k, i, j);
            if (!std::isinf(v)) sup = std::max(sup, std::fabs(v));
        }
    return sup + V.tail_bound;
}

EquivalenceReport equivalence_experiment(const ProblemSpec& ps, const SolveOptions& opt) {
    EquivalenceReport out;
    Heval H = make_heval(ps.H);

    CheckSpec cs;
    cs.n = ps.H.n;
    cs.tgrid = GridAxis{ps.tgrid.lo, ps.tgrid.hi, 9};
    cs.xbox = ps.xgrid;
    cs.p_radius = std::fabs(ps.pgrid[0].hi);
    cs.seed = ps.seed;

    std::vector<std::string> failed;
    auto gate = [&](const std::string& name, const CheckReport& r) {
        out.assumption_log.push_back(name + ": " + (r.pass ? "pass" : "FAIL") +
                                     " (worst " + fmt_g12(r.worst) +
                                     (r.note.empty() ? "" : ", " + r.note) + ")");
        if (!r.pass) failed.push_back(name);
    };
    gate("fiber convexity", check_fiber_convexity(H, cs));
    gate("x lipschitz",
         check_x_lipschitz(H, cs,
                               ps.H.env_cr.empty()
                                   ? Envelope{}
                                   : Envelope{[&](double t) { return ps.H.env_cr.eval_t(t); }}));
    gate("p lipschitz",
         check_p_lipschitz(H, cs,
                               ps.H.env_ctilde.empty() ? Envelope{}
                                                       : Envelope{[&](double t) {
                                                             return ps.H.env_ctilde.eval_t(t);
                                                         }}));
    gate("local boundedness", check_local_boundedness(H, cs));
    if (!ps.H.env_phi_lo.empty() && !ps.H.env_phi_hi.empty() && !ps.H.env_psi.empty()) {
        gate("decay envelopes",
             check_envelopes(
                 H, cs, ps.omega, [&](double t) { return ps.H.env_phi_lo.eval_t(t); },
                 [&](double t) { return ps.H.env_phi_hi.eval_t(t); },
                 [&](double t) { return ps.H.env_psi.eval_t(t); }));
    } else {
        out.assumption_log.push_back("decay envelopes: FAIL (not declared)");
        failed.push_back("decay envelopes");
    }

    Representation rep(ps);
    if (ps.opc.declared) {
        OpcReport opc = check_opc(ps, rep);
        out.assumption_log.push_back(std::string("outward pointing: ") +
                                     (opc.pass ? "pass" : "FAIL") +
                                     (opc.vacuous ? " (vacuous)" : ""));
        if (!opc.pass) failed.push_back("outward pointing");
    } else {
        out.assumption_log.push_back("outward pointing: FAIL (parameters not declared)");
        failed.push_back("outward pointing");
    }
    if (!failed.empty()) {
        std::string msg = "assumption gate failed:";
        for (const auto& f : failed) msg += " [" + f + "]";
        throw AssumptionError(msg);
    }

    ValueGrid v = solve_v(ps, rep, opt);
    out.vanishing = check_vanishing(v, ps);
    if (out.vanishing > out.vanishing_threshold)
        throw AssumptionError("the computed value does not vanish at the horizon: " +
                              fmt_g12(out.vanishing) + " > " +
                              fmt_g12(out.vanishing_threshold));

    double dt = v.tgrid.step();
    double dxs = v.xgrid[0].step() + (v.n == 2 ? v.xgrid[1].step() : 0.0);
    out.tol_eq = 5.0 * (dt + dxs) * opt.tol_scale + v.tail_bound;

    int nt = v.tgrid.count;
    size_t nx = v.xcount();

    /* step-increment sum, the discrete stand-in for absolute continuity of
     * the slice family; reported, never asserted */
    for (int k = 0; k + 1 < nt; ++k) {
        double sup = 0.0;
        for (size_t xi = 0; xi < nx; ++xi) {
            double a = v.values[(size_t)k * nx + xi], b = v.values[(size_t)(k + 1) * nx + xi];
            if (std::isinf(a) || std::isinf(b)) continue;
            sup = std::max(sup, std::fabs(a - b));
        }
        out.lac_surrogate += sup;
    }

    /* lower envelope margin: v(t,x) >= integral of phi_lo from t, minus tail */
    {
        double margin = kInf;
        std::vector<double> L((size_t)nt, 0.0);
        for (int k = nt - 2; k >= 0; --k) {
            double a = ps.H.env_phi_lo.eval_t(v.tgrid.at(k));
            double b = ps.H.env_phi_lo.eval_t(v.tgrid.at(k + 1));
            L[(size_t)k] = L[(size_t)k + 1] + 0.5 * dt * (a + b);
        }
        for (int k = 0; k < nt; ++k)
            for (size_t xi = 0; xi < nx; ++xi) {
                double val = v.values[(size_t)k * nx + xi];
                if (std::isinf(val)) continue;
                margin = std::min(margin, val - L[(size_t)k] + v.tail_bound);
            }
        out.lower_envelope_margin = margin;
    }

    auto run_scenario = [&](const std::string& name, const ValueGrid& W, bool expect) {
        EquivalenceScenario sc;
        sc.name = name;
        sc.expected_pass = expect;
        sc.weak = check_weak_solution(W, ps, opt.tol_scale);
        sc.observed_pass = sc.weak.pass;
        sc.consistent = sc.observed_pass == sc.expected_pass;
        out.scenarios.push_back(std::move(sc));
    };

    run_scenario("computed value", v, true);

    double lo = ps.xgrid[0].lo, hi = ps.xgrid[0].hi;
    double mid = 0.5 * (lo + hi), halfw = 0.5 * (hi - lo);
    struct Pert {
        const char* name;
        double delta;
        std::function<double(const Vec&)> g;
    };
    std::vector<Pert> perts = {
        {"shifted copy", 0.2, [](const Vec&) { return 1.0; }},
        {"tilted copy", 0.25, [=](const Vec& x) { return (x[0] - mid) / halfw; }},
        {"bumped copy", 0.25,
         [=](const Vec& x) { return std::sin(M_PI * (x[0] - lo) / (hi - lo)); }}};
    for (const auto& p : perts) {
        ValueGrid W = v;
        for (int k = 0; k < nt; ++k)
            for (int i = 0; i < W.nx0(); ++i)
                for (int j = 0; j < W.nx1(); ++j) {
                    double& val = W.at(k, i, j);
                    if (!std::isinf(val)) val += p.delta * p.g(W.xnode(i, j));
                }
        run_scenario(p.name, W, false);
    }

    if (!ps.closed_form_V.empty()) {
        ValueGrid R = v;
        for (int k = 0; k < nt; ++k)
            for (int i = 0; i < R.nx0(); ++i)
                for (int j = 0; j < R.nx1(); ++j) {
                    if (!R.mask[R.xindex(i, j)]) continue;
                    R.at(k, i, j) = ps.closed_form_V.eval(R.tgrid.at(k), R.xnode(i, j));
                }
        double sup = 0.0;
        size_t incl_num = 0, incl_den = 0;
        for (int k = 0; k < nt; ++k)
            for (size_t xi = 0; xi < nx; ++xi) {
                double a = v.values[(size_t)k * nx + xi], b = R.values[(size_t)k * nx + xi];
                if (!std::isinf(a) && !std::isinf(b)) sup = std::max(sup, std::fabs(a - b));
                if (k >= (3 * (nt - 1)) / 4 && !std::isinf(a)) {
                    ++incl_den;
                    if (!std::isinf(b)) ++incl_num;
                }
            }
        out.dom_inclusion = incl_den ? (double)incl_num / (double)incl_den : 1.0;
        bool agrees = sup <= out.tol_eq;
        run_scenario("declared reference", R, agrees);
        out.scenarios.back().sup_diff = sup;
    }

    out.pass = true;
    for (const auto& sc : out.scenarios) out.pass = out.pass && sc.consistent;
    return out;
}

void write_value_csv(const ValueGrid& V, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f << (V.n == 2 ? "t,x1,x2,value\n" : "t,x1,value\n");
    for (int k = 0; k < V.tgrid.count; ++k)
        for (int i = 0; i < V.nx0(); ++i)
            for (int j = 0; j < V.nx1(); ++j) {
                double val = V.at(k, i, j);
                f << fmt_g12(V.tgrid.at(k)) << "," << fmt_g12(V.xgrid[0].at(i));
                if (V.n == 2) f << "," << fmt_g12(V.xgrid[1].at(j));
                f << "," << (std::isinf(val) ? std::string("inf") : fmt_g12(val)) << "\n";
            }
}

} // namespace hjb
