#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fenchel.hpp"

namespace hjb {

/* Scalar expression in the variables t, x1, x2 and |x|. Grammar: numbers,
 * + - * / ^, unary minus, exp(...), abs(...), parentheses. Parsed once,
 * evaluated many times. */
class Expr {
  public:
    Expr() = default;
    static Expr parse(const std::string& src); /* throws ConfigError */
    static Expr constant(double v);

    bool empty() const { return !root_; }
    double eval(double t, const Vec& x) const;
    double eval_t(double t) const { return eval(t, Vec(0.0)); }
    bool depends_on_x() const;
    bool uses_x2() const;
    const std::string& source() const { return src_; }

    struct Node;

  private:
    std::shared_ptr<const Node> root_;
    std::string src_;
};

enum class HamiltonianFamily { scaled_eikonal, sup_affine, quadratic };

std::string family_name(HamiltonianFamily f);

struct AffinePiece {
    std::array<Expr, 2> drift; /* f_i(t,x) */
    Expr cost;                 /* running cost offset */
};

/* Hamiltonian in one of three parametric families:
 *   scaled eikonal   a(t,x)|p| + <b(t,x), p> - c(t,x)
 *   sup of affine    max_i <p, f_i(t,x)> - cost_i(t,x)
 *   quadratic        a/2 |p|^2 - c(t,x)   (coercive, unbounded slope)
 */
struct HamiltonianSpec {
    int n = 1;
    HamiltonianFamily family = HamiltonianFamily::scaled_eikonal;

    Expr a, c;
    std::array<Expr, 2> b;
    std::vector<AffinePiece> pieces;

    /* declared envelopes, all optional */
    Expr env_phi_lo, env_phi_hi, env_psi;
    Expr env_cr, env_ctilde;

    double eval(double t, const Vec& x, const Vec& p) const;
    bool x_dependent() const;
    /* empirical sup of the p-slope over [t0,t1] x box (17 nodes per axis) */
    double slope_bound(double t0, double t1, const std::array<GridAxis, 2>& xbox) const;
};

Heval make_heval(const HamiltonianSpec& H);

/* closed-form conjugate where the family admits one; used as an independent
 * cross-check against the grid transform */
struct AnalyticConjugate {
    bool available = false;
    ConvexBody domain;
    std::function<double(const Vec&)> value;
};
AnalyticConjugate analytic_conjugate(const HamiltonianSpec& H, double t, const Vec& x);

struct OpcParams {
    bool declared = false;
    double eta = 0.0; /* collar width around the state boundary */
    double r = 0.0;   /* required inward margin */
    double M = 0.0;   /* witness search radius */
};

struct ProblemSpec {
    std::string name;
    HamiltonianSpec H;
    ConvexBody omega;
    GridAxis tgrid;                 /* [0, T] */
    std::array<GridAxis, 2> xgrid;  /* covers omega */
    std::array<GridAxis, 2> pgrid, qgrid;
    int control_interior = 96;
    int control_boundary = 32;
    OpcParams opc;
    Expr closed_form_V;
    double tail_horizon = 60.0;
    uint64_t seed = 12345;

    double omega_radius() const; /* max |x| over omega vertices */
};

/* JSON -> ProblemSpec with path-qualified error messages */
ProblemSpec parse_problem(const std::string& json_text);
ProblemSpec load_problem_file(const std::string& path);

} // namespace hjb
