#pragma once

#include <functional>
#include <optional>

#include "common.hpp"

namespace hjb {

/* Convex body in dimension 1..3. Two representations:
 *  - vertex list (convex hull of verts), hull-ordered in 2-D
 *  - metric-projection oracle with a known member point and bounding radius
 */
struct ConvexBody {
    int n = 1;
    std::vector<Vec> verts;
    std::function<Vec(const Vec&)> oracle;
    Vec center;
    double bounding_radius = 0.0;

    bool is_polytope() const { return !verts.empty(); }
    bool is_point() const { return verts.size() == 1; }
};

ConvexBody make_polytope(int n, std::vector<Vec> verts);
ConvexBody make_interval(double a, double b);
inline ConvexBody make_point(const Vec& v) { return make_polytope(v.dim(), {v}); }
ConvexBody make_oracle(int n, std::function<Vec(const Vec&)> proj, Vec member,
                       double bounding_radius);

/* convex cone spanned by nonnegative combinations of generators (empty = {0}) */
struct Cone {
    int n = 1;
    std::vector<Vec> gens;
};

/* support function value; optionally the argmax face (vertices within
 * tau_face = 1e-9 * bounding radius of the max). Vertex-list bodies only. */
double support(const ConvexBody& J, const Vec& p, std::vector<Vec>* face = nullptr);

Vec project_point(const ConvexBody& J, const Vec& z);
double distance(const ConvexBody& J, const Vec& z);
bool contains(const ConvexBody& J, const Vec& z, double tol = 1e-9);

/* min-norm point of conv(pts), Wolfe's algorithm */
Vec min_norm_point_hull(const std::vector<Vec>& pts);
inline Vec min_norm_point(const ConvexBody& J) { return project_point(J, Vec(J.n)); }
inline Vec min_norm_point(const Cone& c) { return Vec(c.n); }

struct HausdorffOptions {
    int directions = 256;   /* boundary sample fan for oracle bodies */
    int face_samples = 8;   /* extra interior samples per edge, vertex bodies */
};
double hausdorff(const ConvexBody& A, const ConvexBody& B, HausdorffOptions opt = {});

/* J \cap B(u, 2 dist(u, J)); fixes points of J, returns an oracle body otherwise */
ConvexBody proj_map(const Vec& u, const ConvexBody& J);

struct SteinerOptions {
    int budget = 1 << 14;       /* quadrature nodes over the unit ball */
    bool closed_form_2d = false; /* exact normal-fan integration for polygons */
    double conv_tol = 0.05;     /* half vs full budget shift, relative */
    int ascent_iters = 48;      /* support-point iterations, oracle bodies */
};
Vec steiner(const ConvexBody& J, const SteinerOptions& opt = {},
            double* err_est = nullptr);

/* exact Steiner point of a 2-D convex polygon (hull-ordered vertices) */
Vec steiner_polygon_exact(const std::vector<Vec>& hull);

/* normal cone of a vertex-list body at a boundary (or interior) point */
Cone normal_cone(const ConvexBody& J, const Vec& x);

/* unit normal directions at boundary points of omega within eta of y;
 * adjacent face normals are combined nonnegatively, then normalized */
std::vector<Vec> boundary_normals(const ConvexBody& omega, const Vec& y, double eta,
                                  int blend_steps = 4);

/* ---- low-level helpers (shared with other modules) ---- */

/* keep { x : <a,x> <= b }, Sutherland-Hodgman */
std::vector<Vec> clip_halfplane(const std::vector<Vec>& poly, const Vec& a, double b);
std::vector<Vec> convex_hull_2d(std::vector<Vec> pts);
std::vector<Vec> regular_disk_polygon(const Vec& c, double r, int sides);

Vec dykstra_project(const Vec& z, const std::function<Vec(const Vec&)>& projA,
                    const std::function<Vec(const Vec&)>& projB,
                    int max_sweeps = 500, double tol = 1e-10);

/* support point of an oracle body: fixed-point iteration x <- proj(x + r p) */
Vec oracle_support_point(const ConvexBody& J, const Vec& p, int iters = 48);

} // namespace hjb
