#pragma once

#include <functional>

#include "common.hpp"
#include "geometry.hpp"

namespace hjb {

enum class Provenance { sampled, conjugate, biconjugate, derived };
enum class LltMethod { brute, fast };

/* uniform-grid function, dim 1 or 2, +inf sentinel for out-of-domain cells */
struct GridFunction {
    int dims = 1;
    std::array<GridAxis, 2> axes{};
    std::vector<double> values;
    Provenance prov = Provenance::sampled;

    int count0() const { return axes[0].count; }
    int count1() const { return dims == 2 ? axes[1].count : 1; }
    double& at(int i, int j = 0) { return values[(size_t)i * (size_t)count1() + (size_t)j]; }
    double at(int i, int j = 0) const { return values[(size_t)i * (size_t)count1() + (size_t)j]; }
    Vec node(int i, int j = 0) const {
        return dims == 1 ? Vec(axes[0].at(i)) : Vec(axes[0].at(i), axes[1].at(j));
    }
};

GridFunction sample_grid(int dims, const std::array<GridAxis, 2>& axes,
                         const std::function<double(const Vec&)>& f);

/* multilinear interpolation; +inf outside the grid or across +inf nodes */
double grid_value(const GridFunction& g, const Vec& q);

/* discrete Legendre transform onto the dual grid. A dual cell is marked +inf
 * when the sup is attained only on the boundary of the primal grid (the grid
 * cannot certify a finite value there) or when it exceeds the overflow
 * threshold. Dim 2 runs as two nested 1-D sweeps. */
GridFunction llt(const GridFunction& h, const std::array<GridAxis, 2>& dual,
                 LltMethod method = LltMethod::brute);

/* max |h** - h| over primal nodes with finite h */
double biconjugate_residual(const GridFunction& h, const std::array<GridAxis, 2>& dual,
                            LltMethod method = LltMethod::brute);

struct ConjugateData {
    int n = 1;
    GridFunction hstar;
    ConvexBody domain; /* interval / box hull of finite cells */
    std::vector<std::array<int, 2>> finite_cells;
    std::array<double, 2> dom_lo{0, 0}, dom_hi{0, 0};
    double gamma = 0.0;      /* max(0, sup finite hstar) */
    double graph_norm = 0.0; /* sup |(q, hstar(q))| over finite nodes */
    bool empty() const { return finite_cells.empty(); }
};

ConjugateData conjugate_data(const std::function<double(const Vec&)>& H_of_p, int n,
                             const std::array<GridAxis, 2>& pgrid,
                             const std::array<GridAxis, 2>& qgrid,
                             LltMethod method = LltMethod::brute);

using Heval = std::function<double(double, const Vec&, const Vec&)>;
using Envelope = std::function<double(double)>;

struct CheckSpec {
    int n = 1;
    GridAxis tgrid;
    std::array<GridAxis, 2> xbox;
    double p_radius = 4.0;
    int draws = 160;
    uint64_t seed = 12345;
    double tol = 1e-6;
};

struct CheckReport {
    bool pass = true;
    double worst = 0.0;
    std::string note;
    std::vector<double> per_t; /* empirical constant per time node, when relevant */
};

CheckReport check_fiber_convexity(const Heval& H, const CheckSpec& spec);
CheckReport check_x_lipschitz(const Heval& H, const CheckSpec& spec,
                                  const Envelope& declared_Cr = {});
CheckReport check_p_lipschitz(const Heval& H, const CheckSpec& spec,
                                  const Envelope& declared_ctilde = {});
CheckReport check_local_boundedness(const Heval& H, const CheckSpec& spec);
CheckReport check_envelopes(const Heval& H, const CheckSpec& spec,
                                    const ConvexBody& omega, const Envelope& phi_lo,
                                    const Envelope& phi_hi, const Envelope& psi);

} // namespace hjb
