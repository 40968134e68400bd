#include "hjbrep.h"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "hjbrep/solver.hpp"

using nlohmann::json;

struct hjb_problem {
    hjb::ProblemSpec ps;
};
struct hjb_representation {
    hjb::Representation rep;
};
struct hjb_value {
    hjb::ValueGrid grid;
};

namespace {

thread_local std::string g_error;

template <class Fn>
hjb_status guard(Fn&& fn) {
    try {
        fn();
        g_error.clear();
        return HJB_OK;
    } catch (const hjb::ConfigError& e) {
        g_error = e.what();
        return HJB_ERR_CONFIG;
    } catch (const hjb::AssumptionError& e) {
        g_error = e.what();
        return HJB_ERR_ASSUMPTION;
    } catch (const std::exception& e) {
        g_error = e.what();
        return HJB_ERR_VERIFICATION;
    }
}

hjb::Vec to_vec(const double* x, int n) {
    hjb::Vec v(n);
    for (int d = 0; d < n; ++d) v[d] = x[d];
    return v;
}

hjb::SolveOptions to_options(const hjb_solve_options* opt) {
    hjb::SolveOptions o;
    if (opt) {
        o.no_tail_bound = opt->no_tail_bound != 0;
        o.threads = opt->threads;
        if (opt->tol_scale > 0) o.tol_scale = opt->tol_scale;
    }
    return o;
}

std::filesystem::path prep_dir(const char* out_dir) {
    if (!out_dir || !*out_dir) throw hjb::ConfigError("output directory not given");
    std::filesystem::path p(out_dir);
    std::filesystem::create_directories(p);
    return p;
}

void write_text(const std::filesystem::path& p, const std::string& body) {
    std::ofstream f(p);
    if (!f) throw hjb::ConfigError("cannot write " + p.string());
    f << body;
}

std::vector<int> spread_indices(int count, int wanted) {
    std::vector<int> out;
    wanted = std::min(std::max(wanted, 1), count);
    for (int i = 0; i < wanted; ++i)
        out.push_back(wanted == 1 ? count / 2 : (int)std::lround((double)i * (count - 1) / (wanted - 1)));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<hjb::Vec> state_samples(const hjb::ProblemSpec& ps) {
    std::vector<hjb::Vec> xs;
    if (!ps.H.x_dependent()) {
        xs.push_back(ps.omega.center);
        return xs;
    }
    const hjb::GridAxis& a0 = ps.xgrid[0];
    for (int q : {1, 2, 3}) {
        int i = q * (a0.count - 1) / 4;
        if (ps.H.n == 1)
            xs.push_back(hjb::Vec(a0.at(i)));
        else
            xs.push_back(hjb::Vec(a0.at(i), ps.xgrid[1].at(q * (ps.xgrid[1].count - 1) / 4)));
    }
    return xs;
}

} // namespace

extern "C" {

const char* hjb_version(void) { return "0.1.0"; }

const char* hjb_last_error(void) { return g_error.c_str(); }

hjb_status hjb_problem_load_file(const char* path, hjb_problem** out) {
    return guard([&] {
        if (!path || !out) throw hjb::ConfigError("null argument");
        auto ps = hjb::load_problem_file(path);
        *out = new hjb_problem{std::move(ps)};
    });
}

hjb_status hjb_problem_parse(const char* json_text, hjb_problem** out) {
    return guard([&] {
        if (!json_text || !out) throw hjb::ConfigError("null argument");
        auto ps = hjb::parse_problem(json_text);
        *out = new hjb_problem{std::move(ps)};
    });
}

void hjb_problem_free(hjb_problem* p) { delete p; }

int hjb_problem_dim(const hjb_problem* p) { return p ? p->ps.H.n : 0; }

hjb_status hjb_problem_set_seed(hjb_problem* p, unsigned long long seed) {
    return guard([&] {
        if (!p) throw hjb::ConfigError("null argument");
        p->ps.seed = (uint64_t)seed;
    });
}

hjb_status hjb_eval_hamiltonian(const hjb_problem* p, double t, const double* x,
                                const double* pvec, double* out) {
    return guard([&] {
        if (!p || !x || !pvec || !out) throw hjb::ConfigError("null argument");
        *out = p->ps.H.eval(t, to_vec(x, p->ps.H.n), to_vec(pvec, p->ps.H.n));
    });
}

hjb_status hjb_representation_create(const hjb_problem* p, const char* eta_mode,
                                     hjb_representation** out) {
    return guard([&] {
        if (!p || !out) throw hjb::ConfigError("null argument");
        hjb::EtaMode mode = hjb::EtaMode::graph;
        if (eta_mode && *eta_mode) {
            std::string m(eta_mode);
            if (m == "graph")
                mode = hjb::EtaMode::graph;
            else if (m == "growth")
                mode = hjb::EtaMode::growth;
            else if (m == "growth_cr")
                mode = hjb::EtaMode::growth_cr;
            else
                throw hjb::ConfigError("unknown eta mode \"" + m +
                                       "\" (expected graph, growth, or growth_cr)");
        }
        *out = new hjb_representation{hjb::Representation(p->ps, mode)};
    });
}

void hjb_representation_free(hjb_representation* r) { delete r; }

hjb_status hjb_representation_eta(const hjb_representation* r, double t, const double* x,
                                  double* out) {
    return guard([&] {
        if (!r || !x || !out) throw hjb::ConfigError("null argument");
        *out = r->rep.eta(t, to_vec(x, r->rep.problem().H.n));
    });
}

hjb_status hjb_representation_eval(const hjb_representation* r, double t, const double* x,
                                   const double* u, double* f_out, double* l_out) {
    return guard([&] {
        if (!r || !x || !u || !f_out || !l_out) throw hjb::ConfigError("null argument");
        int n = r->rep.problem().H.n;
        hjb::Vec y = r->rep.phi(t, to_vec(x, n), to_vec(u, n + 1));
        for (int d = 0; d < n; ++d) f_out[d] = y[d];
        *l_out = y[n];
    });
}

hjb_status hjb_solve_value(const hjb_problem* p, const hjb_representation* r,
                           const hjb_solve_options* opt, hjb_value** out) {
    return guard([&] {
        if (!p || !r || !out) throw hjb::ConfigError("null argument");
        *out = new hjb_value{hjb::solve_v(p->ps, r->rep, to_options(opt))};
    });
}

hjb_status hjb_solve_velocity_value(const hjb_problem* p, const hjb_representation* r,
                                    const hjb_solve_options* opt, hjb_value** out) {
    return guard([&] {
        if (!p || !r || !out) throw hjb::ConfigError("null argument");
        *out = new hjb_value{hjb::solve_W(p->ps, r->rep, to_options(opt))};
    });
}

void hjb_value_free(hjb_value* v) { delete v; }

hjb_status hjb_value_at(const hjb_value* v, double t, const double* x, double* out) {
    return guard([&] {
        if (!v || !x || !out) throw hjb::ConfigError("null argument");
        *out = v->grid.value(t, to_vec(x, v->grid.n));
    });
}

double hjb_value_tail_bound(const hjb_value* v) { return v ? v->grid.tail_bound : 0.0; }

hjb_status hjb_value_write_csv(const hjb_value* v, const char* path) {
    return guard([&] {
        if (!v || !path) throw hjb::ConfigError("null argument");
        hjb::write_value_csv(v->grid, path);
    });
}

hjb_status hjb_run_conjugate(const hjb_problem* p, const char* out_dir) {
    return guard([&] {
        if (!p) throw hjb::ConfigError("null argument");
        auto dir = prep_dir(out_dir);
        const auto& ps = p->ps;
        hjb::Representation rep(ps);
        auto tks = spread_indices(ps.tgrid.count, 9);
        auto xs = state_samples(ps);

        std::string slices = ps.H.n == 2 ? "t,x1,x2,q1,q2,hstar\n" : "t,x1,q1,hstar\n";
        std::string domain = ps.H.n == 2 ? "t,x1,x2,vertex,q1,q2\n" : "t,x1,dom_lo,dom_hi\n";
        std::string gamma = ps.H.n == 2 ? "t,x1,x2,gamma,graph_norm,eta\n"
                                        : "t,x1,gamma,graph_norm,eta\n";
        for (int tk : tks) {
            double t = ps.tgrid.at(tk);
            for (const auto& x : xs) {
                auto F = rep.fiber(t, x);
                std::string xcols = hjb::fmt_g12(x[0]);
                if (ps.H.n == 2) xcols += "," + hjb::fmt_g12(x[1]);
                if (ps.H.n == 1) {
                    for (int i = 0; i < ps.qgrid[0].count; ++i) {
                        double q = ps.qgrid[0].at(i);
                        double h = F->hstar(hjb::Vec(q));
                        if (std::isinf(h)) continue;
                        slices += hjb::fmt_g12(t) + "," + xcols + "," + hjb::fmt_g12(q) + "," +
                                  hjb::fmt_g12(h) + "\n";
                    }
                    domain += hjb::fmt_g12(t) + "," + xcols + "," +
                              hjb::fmt_g12(F->bq.front()) + "," + hjb::fmt_g12(F->bq.back()) +
                              "\n";
                } else {
                    for (const auto& g : F->graph2)
                        slices += hjb::fmt_g12(t) + "," + xcols + "," + hjb::fmt_g12(g[0]) +
                                  "," + hjb::fmt_g12(g[1]) + "," + hjb::fmt_g12(g[2]) + "\n";
                    int vk = 0;
                    for (const auto& v : F->dom2.verts)
                        domain += hjb::fmt_g12(t) + "," + xcols + "," + std::to_string(vk++) +
                                  "," + hjb::fmt_g12(v[0]) + "," + hjb::fmt_g12(v[1]) + "\n";
                }
                gamma += hjb::fmt_g12(t) + "," + xcols + "," + hjb::fmt_g12(F->gamma) + "," +
                         hjb::fmt_g12(F->graph_norm) + "," + hjb::fmt_g12(F->eta) + "\n";
            }
        }
        write_text(dir / "conjugate_slices.csv", slices);
        write_text(dir / "conjugate_domain.csv", domain);
        write_text(dir / "conjugate_gamma.csv", gamma);
    });
}

hjb_status hjb_run_represent(const hjb_problem* p, const char* out_dir) {
    return guard([&] {
        if (!p) throw hjb::ConfigError("null argument");
        auto dir = prep_dir(out_dir);
        hjb::Representation rep(p->ps);
        rep.dump_csv((dir / "selection.csv").string(), 5, 5, 64);
        const auto& ps = p->ps;
        std::string eta = ps.H.n == 2 ? "t,x1,x2,eta\n" : "t,x1,eta\n";
        for (int tk : spread_indices(ps.tgrid.count, 9)) {
            double t = ps.tgrid.at(tk);
            for (const auto& x : state_samples(ps)) {
                eta += hjb::fmt_g12(t) + "," + hjb::fmt_g12(x[0]);
                if (ps.H.n == 2) eta += "," + hjb::fmt_g12(x[1]);
                eta += "," + hjb::fmt_g12(rep.eta(t, x)) + "\n";
            }
        }
        write_text(dir / "eta.csv", eta);
    });
}

hjb_status hjb_run_verify(const hjb_problem* p, const char* out_dir, double tol_scale) {
    return guard([&] {
        if (!p) throw hjb::ConfigError("null argument");
        auto dir = prep_dir(out_dir);
        if (tol_scale <= 0) tol_scale = 1.0;
        const auto& ps = p->ps;
        hjb::Representation rep(ps);
        double hp = ps.pgrid[0].step();
        double over_slack = 0.5 * hp * (1.0 + std::fabs(ps.pgrid[0].hi)) + 1e-9;

        json rows = json::array();
        bool all_pass = true;
        std::vector<double> ts = {ps.tgrid.lo, 0.5 * (ps.tgrid.lo + ps.tgrid.hi), ps.tgrid.hi};
        std::vector<hjb::Vec> xs = state_samples(ps);
        if (!ps.H.x_dependent()) xs = {ps.omega.center};
        for (double t : ts) {
            for (const auto& x : xs) {
                double over = 0.0, tol = 0.0;
                double resid = rep.verify_identity(t, x, 64, 512, &over, &tol);
                tol *= tol_scale;
                double cover = rep.verify_domain_cover(t, x, 256);
                double graph = rep.verify_graph_cover(t, x, 65);
                double bound = 0.0;
                double excess = rep.verify_excess_bound(t, x, 256, &bound);
                bool pass = resid <= tol && over <= over_slack * tol_scale &&
                            cover <= 0.05 * tol_scale && graph <= tol && excess <= bound;
                all_pass = all_pass && pass;
                json row;
                row["t"] = t;
                row["x"] = std::vector<double>(x.c.begin(), x.c.begin() + ps.H.n);
                row["identity_residual"] = resid;
                row["identity_tol"] = tol;
                row["identity_overshoot"] = over;
                row["overshoot_slack"] = over_slack;
                row["domain_cover"] = cover;
                row["graph_cover"] = graph;
                row["excess"] = excess;
                row["excess_bound"] = bound;
                row["pass"] = pass;
                rows.push_back(row);
            }
        }
        auto lip = rep.verify_lipschitz(0.5 * (ps.tgrid.lo + ps.tgrid.hi), 1.0, 160);
        all_pass = all_pass && lip.pass;

        json rep_json;
        rep_json["problem"] = ps.name;
        rep_json["samples"] = rows;
        rep_json["lipschitz"] = {{"max_ratio", lip.max_ratio},
                                 {"bound", lip.bound},
                                 {"pairs", lip.pairs},
                                 {"pass", lip.pass}};
        rep_json["pass"] = all_pass;
        write_text(dir / "verify.json", rep_json.dump(2) + "\n");
        if (!all_pass) throw hjb::NumericError("representation checks failed; see verify.json");
    });
}

hjb_status hjb_run_solve(const hjb_problem* p, const char* out_dir,
                         const hjb_solve_options* opt) {
    return guard([&] {
        if (!p) throw hjb::ConfigError("null argument");
        auto dir = prep_dir(out_dir);
        const auto& ps = p->ps;
        hjb::Representation rep(ps);
        auto options = to_options(opt);
        auto t0 = std::chrono::steady_clock::now();
        hjb::ValueGrid v = hjb::solve_v(ps, rep, options);
        auto t1 = std::chrono::steady_clock::now();
        hjb::ValueGrid w = hjb::solve_W(ps, rep, options);
        auto t2 = std::chrono::steady_clock::now();
        hjb::write_value_csv(v, (dir / "value.csv").string());
        hjb::write_value_csv(w, (dir / "velocity_value.csv").string());

        double gap = 0.0;
        for (size_t idx = 0; idx < v.values.size(); ++idx) {
            double a = v.values[idx], b = w.values[idx];
            if (std::isinf(a) != std::isinf(b)) gap = hjb::kInf;
            if (!std::isinf(a) && !std::isinf(b)) gap = std::max(gap, std::fabs(a - b));
        }
        double dt = ps.tgrid.step();
        double dxs = ps.xgrid[0].step() + (ps.H.n == 2 ? ps.xgrid[1].step() : 0.0);

        json rj;
        rj["problem"] = ps.name;
        rj["tail_bound"] = v.tail_bound;
        rj["value_at_origin_t0"] = v.value(ps.tgrid.lo, ps.omega.center);
        rj["cross_gap"] = std::isinf(gap) ? -1.0 : gap;
        rj["cross_gap_tol"] = 2.0 * (dt + dxs + v.tail_bound);
        rj["solve_v_seconds"] = std::chrono::duration<double>(t1 - t0).count();
        rj["solve_w_seconds"] = std::chrono::duration<double>(t2 - t1).count();
        write_text(dir / "solve.json", rj.dump(2) + "\n");
    });
}

hjb_status hjb_run_check_opc(const hjb_problem* p, const char* out_dir) {
    return guard([&] {
        if (!p) throw hjb::ConfigError("null argument");
        auto dir = prep_dir(out_dir);
        hjb::Representation rep(p->ps);
        hjb::OpcReport r = hjb::check_opc(p->ps, rep);
        json rj;
        rj["problem"] = p->ps.name;
        rj["pass"] = r.pass;
        rj["vacuous"] = r.vacuous;
        rj["triggered"] = r.triggered;
        rj["collar_points"] = r.collar_points;
        json fails = json::array();
        for (const auto& f : r.failures) {
            json fj;
            fj["t"] = f.t;
            fj["y"] = std::vector<double>(f.y.c.begin(), f.y.c.begin() + p->ps.H.n);
            fj["normal"] = std::vector<double>(f.normal.c.begin(),
                                               f.normal.c.begin() + p->ps.H.n);
            fj["q"] = std::vector<double>(f.q.c.begin(), f.q.c.begin() + p->ps.H.n);
            fails.push_back(fj);
        }
        rj["failures"] = fails;
        write_text(dir / "opc.json", rj.dump(2) + "\n");
        if (!r.pass)
            throw hjb::NumericError("outward-pointing check failed with " +
                                    std::to_string(r.failures.size()) + " recorded witnesses");
    });
}

hjb_status hjb_run_equivalence(const hjb_problem* p, const char* out_dir,
                               const hjb_solve_options* opt) {
    return guard([&] {
        if (!p) throw hjb::ConfigError("null argument");
        auto dir = prep_dir(out_dir);
        hjb::EquivalenceReport er;
        try {
            er = hjb::equivalence_experiment(p->ps, to_options(opt));
        } catch (const hjb::AssumptionError& e) {
            json rj;
            rj["problem"] = p->ps.name;
            rj["error"] = e.what();
            rj["pass"] = false;
            write_text(dir / "equivalence.json", rj.dump(2) + "\n");
            throw;
        }
        json rj;
        rj["problem"] = p->ps.name;
        rj["assumptions"] = er.assumption_log;
        rj["vanishing"] = er.vanishing;
        rj["vanishing_threshold"] = er.vanishing_threshold;
        rj["tol_eq"] = er.tol_eq;
        rj["lac_surrogate"] = er.lac_surrogate;
        rj["dom_inclusion_final_quarter"] = er.dom_inclusion;
        rj["lower_envelope_margin"] = er.lower_envelope_margin;
        json scs = json::array();
        for (const auto& sc : er.scenarios) {
            json sj;
            sj["name"] = sc.name;
            sj["expected_pass"] = sc.expected_pass;
            sj["observed_pass"] = sc.observed_pass;
            sj["consistent"] = sc.consistent;
            sj["interior_fraction"] = sc.weak.interior_fraction;
            sj["boundary_fraction"] = sc.weak.boundary_fraction;
            sj["worst_interior"] = sc.weak.worst_interior;
            sj["worst_boundary"] = sc.weak.worst_boundary;
            sj["bound_failed"] = sc.weak.bound_failed;
            sj["tol"] = sc.weak.tol;
            if (sc.name == "declared reference") sj["sup_diff"] = sc.sup_diff;
            scs.push_back(sj);
        }
        rj["scenarios"] = scs;
        rj["pass"] = er.pass;
        write_text(dir / "equivalence.json", rj.dump(2) + "\n");
        if (!er.pass)
            throw hjb::NumericError("equivalence scenarios disagree; see equivalence.json");
    });
}

} /* extern "C" */
