#pragma once

#include <memory>
#include <mutex>

#include "hamiltonian.hpp"

namespace hjb {

/* which scaling formula eta(t,x) uses; the graph norm is the primary one,
 * the growth variants come from the declared envelope constants */
enum class EtaMode { graph, growth, growth_cr };

/* conjugate of one (t,x) fiber restricted to its finite domain */
struct Fiber {
    int n = 1;
    double t = 0.0;
    Vec x;
    double eta = 1.0;
    double gamma = 0.0;      /* max(0, sup hstar) */
    double graph_norm = 0.0; /* sup |(q, hstar(q))| over the domain */

    /* n == 1: piecewise linear values over ascending breakpoints */
    std::vector<double> bq, bv;

    /* n == 2: domain hull, grid values, graph samples at hull vertices */
    ConvexBody dom2;
    GridFunction grid2;
    std::vector<Vec> graph2; /* (q1, q2, hstar) at domain hull vertices */
    double vmin = 0.0, vmax = 0.0;

    double hstar(const Vec& q) const; /* +inf outside the domain */
    bool in_epi(const Vec& z) const;  /* z = (q, lambda), exact test */
    /* distance from z to the epigraph: min over q in D of
     * |q - z_q|^2 + (max(hstar(q), z_r) - z_r)^2, golden-section in each
     * coordinate; returns the distance, optionally the foot point */
    double epi_distance(const Vec& z, Vec* foot = nullptr) const;
    std::vector<Vec> graph_points() const; /* (q_j, hstar(q_j)) anchors */
};
using FiberPtr = std::shared_ptr<const Fiber>;

struct PhiOptions {
    int disk_sides = 48;    /* ball polygonization, planar path */
    SteinerOptions steiner; /* n == 2 path */
};

/* The measurable selection (f, l) built from conjugate fibers: for a control
 * u in the closed unit ball of R^{n+1},
 *     phi(t,x,u) = Steiner(P(eta(t,x) u, Ep(t,x)))
 * where Ep is the conjugate epigraph and P(z,J) = J intersected with the ball
 * B(z, 2 dist(z,J)). f = leading n coordinates, l = last coordinate. */
class Representation {
  public:
    explicit Representation(ProblemSpec ps, EtaMode mode = EtaMode::graph,
                            LltMethod method = LltMethod::fast);

    const ProblemSpec& problem() const { return ps_; }
    EtaMode eta_mode() const { return mode_; }
    double dual_step() const { return ps_.qgrid[0].step(); }

    PhiOptions phi_options; /* selection budgets, tunable per run */

    FiberPtr fiber(double t, const Vec& x) const;
    double eta(double t, const Vec& x) const { return fiber(t, x)->eta; }
    Vec phi(const Fiber& F, const Vec& u, double* err = nullptr) const;
    Vec phi(double t, const Vec& x, const Vec& u, double* err = nullptr) const;

    /* shared control samples: low-discrepancy interior + boundary shell */
    const std::vector<Vec>& ball_controls() const { return controls_; }
    /* graph anchors of a fiber mapped to controls (q, hstar(q)) / eta */
    std::vector<Vec> anchor_controls(const Fiber& F) const;

    /* max over p-samples of H - sup_u(<p,f> - l); also reports the largest
     * overshoot max(0, sup - H) and the attributable tolerance */
    double verify_identity(double t, const Vec& x, int p_samples, int u_samples,
                           double* overshoot = nullptr, double* tol_out = nullptr,
                           double u_ball_radius = 1.0) const;
    /* Hausdorff distance between the domain and the f(u) cloud */
    double verify_domain_cover(double t, const Vec& x, int u_samples) const;
    /* max reconstruction error of graph points through phi */
    double verify_graph_cover(double t, const Vec& x, int q_samples) const;

    struct LipschitzReport {
        double max_ratio = 0.0;
        double bound = 0.0;
        int pairs = 0;
        bool pass = false;
    };
    /* ratio |phi(t,x,u)-phi(t,y,v)| / (C_r(t)|x-y| + |eta(t,x)u - eta(t,y)v|),
     * bound 5(n+1) plus slack */
    LipschitzReport verify_lipschitz(double t, double r, int pair_samples) const;

    /* max over u of l - hstar(f), checked against the growth-constant bound
     * 10(n+1)(ctilde + C_r)(1+|x|) + |H(t,0,0)| + gamma */
    double verify_excess_bound(double t, const Vec& x, int u_samples,
                               double* bound_out = nullptr) const;

    void dump_csv(const std::string& path, int t_samples, int x_samples,
                  int u_samples) const;

  private:
    enum class CacheKind { per_t, per_t_shift, per_tx };
    ProblemSpec ps_;
    EtaMode mode_;
    LltMethod method_;
    CacheKind kind_;
    std::vector<Vec> controls_;
    mutable std::vector<FiberPtr> cache_;
    mutable std::mutex mu_;

    FiberPtr build_fiber(double t, const Vec& x) const;
    void finish_fiber(Fiber& F) const; /* gamma, graph norm, eta */
};

} // namespace hjb
