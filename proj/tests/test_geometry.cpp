#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "hjbrep/geometry.hpp"

using namespace hjb;

namespace {

Vec rand_ball(std::mt19937_64& rng, int n, double radius) {
    std::uniform_real_distribution<double> co(-1.0, 1.0);
    for (;;) {
        Vec v(n);
        for (int d = 0; d < n; ++d) v[d] = co(rng);
        if (dot(v, v) <= 1.0) return radius * v;
    }
}

ConvexBody random_polytope(std::mt19937_64& rng, int n, double radius) {
    std::uniform_int_distribution<int> nv(3, 7);
    int k = (n == 1) ? 2 : nv(rng);
    std::vector<Vec> vs;
    for (int i = 0; i < k; ++i) vs.push_back(rand_ball(rng, n, radius));
    if (n == 1 && std::fabs(vs[0][0] - vs[1][0]) < 0.1) vs[1][0] = vs[0][0] + 0.5;
    return make_polytope(n, vs);
}

ConvexBody perturbed_copy(std::mt19937_64& rng, const ConvexBody& J, double scale) {
    std::vector<Vec> vs;
    for (const auto& v : J.verts) vs.push_back(v + rand_ball(rng, J.n, scale));
    return make_polytope(J.n, vs);
}

/* direct Riemann quadrature of the defining integral
 *   s(J) = (1/pi) * integral over the unit circle of h_J(u) u dtheta,
 * independent of the closed-form normal-fan evaluation */
Vec steiner_by_quadrature(const ConvexBody& J, int nodes) {
    Vec acc(2);
    double dth = 2.0 * M_PI / (double)nodes;
    for (int k = 0; k < nodes; ++k) {
        double th = dth * ((double)k + 0.5);
        Vec u(std::cos(th), std::sin(th));
        acc = acc + support(J, u) * u;
    }
    return (dth / M_PI) * acc;
}

} // namespace

TEST_CASE("interval projection, distance, membership") {
    ConvexBody J = make_interval(-1.0, 2.0);
    CHECK(project_point(J, Vec(3.0))[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(project_point(J, Vec(-5.0))[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(project_point(J, Vec(0.5))[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(distance(J, Vec(3.0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(contains(J, Vec(2.0)));
    CHECK(!contains(J, Vec(2.1)));
}

TEST_CASE("support function of the unit square reports the argmax face") {
    ConvexBody sq = make_polytope(
        2, {Vec(-1, -1), Vec(1, -1), Vec(1, 1), Vec(-1, 1)});
    std::vector<Vec> face;
    CHECK(support(sq, Vec(1, 1), &face) == doctest::Approx(2.0).epsilon(1e-12));
    REQUIRE(face.size() == 1);
    CHECK(dist(face[0], Vec(1, 1)) < 1e-12);

    CHECK(support(sq, Vec(1, 0), &face) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(face.size() == 2); /* whole right edge */
}

TEST_CASE("min-norm point of a hull") {
    /* segment from (2,1) to (1,2): nearest point to the origin is (1.5, 1.5) */
    Vec w = min_norm_point_hull({Vec(2, 1), Vec(1, 2)});
    CHECK(dist(w, Vec(1.5, 1.5)) < 1e-9);

    /* triangle containing the origin */
    Vec z = min_norm_point_hull({Vec(-1, -1), Vec(3, -1), Vec(-1, 3)});
    CHECK(norm(z) < 1e-9);

    /* single point */
    Vec s = min_norm_point_hull({Vec(0.3, -0.4)});
    CHECK(dist(s, Vec(0.3, -0.4)) < 1e-12);
}

TEST_CASE("convex hull orders vertices and drops interior points") {
    auto hull = convex_hull_2d(
        {Vec(0, 0), Vec(2, 0), Vec(2, 2), Vec(0, 2), Vec(1, 1), Vec(1, 0)});
    CHECK(hull.size() == 4);
    /* counterclockwise orientation: positive signed area */
    double area2 = 0.0;
    for (size_t i = 0; i < hull.size(); ++i) {
        const Vec& a = hull[i];
        const Vec& b = hull[(i + 1) % hull.size()];
        area2 += a[0] * b[1] - b[0] * a[1];
    }
    CHECK(area2 == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("halfplane clip keeps the requested side") {
    std::vector<Vec> sq = {Vec(-1, -1), Vec(1, -1), Vec(1, 1), Vec(-1, 1)};
    auto cut = clip_halfplane(sq, Vec(1.0, 0.0), 0.25); /* keep x <= 0.25 */
    REQUIRE(cut.size() == 4);
    double mx = -10.0;
    for (const auto& v : cut) mx = std::max(mx, v[0]);
    CHECK(mx == doctest::Approx(0.25).epsilon(1e-12));

    /* fully removed */
    auto gone = clip_halfplane(sq, Vec(1.0, 0.0), -2.0);
    CHECK(gone.empty());
}

TEST_CASE("exact polygon Steiner point matches direct quadrature") {
    std::vector<ConvexBody> bodies;
    bodies.push_back(make_polytope(2, {Vec(0, 0), Vec(1, 0), Vec(0, 1)}));
    bodies.push_back(make_polytope(
        2, {Vec(-1.2, 0.1), Vec(0.4, -0.9), Vec(1.3, 0.2), Vec(0.6, 1.1), Vec(-0.5, 0.9)}));
    for (const auto& J : bodies) {
        Vec exact = steiner_polygon_exact(J.verts);
        Vec quad = steiner_by_quadrature(J, 200000);
        CHECK(dist(exact, quad) < 1e-4);
    }

    /* symmetric bodies: center exactly */
    Vec c = steiner_polygon_exact({Vec(-1, -1), Vec(1, -1), Vec(1, 1), Vec(-1, 1)});
    CHECK(norm(c) < 1e-12);
    Vec s = steiner_polygon_exact(
        {Vec(-0.7, -1.7), Vec(1.3, -1.7), Vec(1.3, 0.3), Vec(-0.7, 0.3)});
    CHECK(dist(s, Vec(0.3, -0.7)) < 1e-12);

    /* degenerate hulls */
    Vec seg = steiner_polygon_exact({Vec(0, 0), Vec(2, 2)});
    CHECK(dist(seg, Vec(1, 1)) < 1e-12);
    Vec pt = steiner_polygon_exact({Vec(0.5, -0.25)});
    CHECK(dist(pt, Vec(0.5, -0.25)) < 1e-12);
}

TEST_CASE("quadrature Steiner point is exact on symmetric bodies and stays inside") {
    double err = 0.0;
    Vec mid = steiner(make_interval(-1.0, 3.0), {}, &err);
    CHECK(std::fabs(mid[0] - 1.0) < 1e-3);

    ConvexBody sq = make_polytope(
        2, {Vec(-0.7, -1.7), Vec(1.3, -1.7), Vec(1.3, 0.3), Vec(-0.7, 0.3)});
    Vec c = steiner(sq, {}, &err);
    CHECK(dist(c, Vec(0.3, -0.7)) < 1e-3);
    CHECK(distance(sq, c) < 1e-9);

    /* asymmetric polygon: quadrature near the closed form, point inside */
    ConvexBody tri = make_polytope(2, {Vec(0, 0), Vec(1, 0), Vec(0, 1)});
    Vec q = steiner(tri, {}, &err);
    Vec exact = steiner_polygon_exact(tri.verts);
    CHECK(dist(q, exact) < std::max(3.0 * err, 0.02));
    CHECK(distance(tri, q) < 1e-9);
}

TEST_CASE("Steiner points contract in Hausdorff distance") {
    auto rng = seeded_rng(2024, 7);
    for (int it = 0; it < 30; ++it) {
        int n = 1 + (it % 2);
        ConvexBody J = random_polytope(rng, n, 2.5);
        ConvexBody K = perturbed_copy(rng, J, 0.4);
        double dl = hausdorff(J, K);
        double eJ = 0.0, eK = 0.0;
        Vec sJ = steiner(J, {}, &eJ);
        Vec sK = steiner(K, {}, &eK);
        CHECK(dist(sJ, sK) <= (double)n * dl + 3.0 * (eJ + eK) + 1e-6);
        CHECK(distance(J, sJ) < 1e-9);
        CHECK(distance(K, sK) < 1e-9);
    }
}

TEST_CASE("projection map fixes member points and clips to twice the distance") {
    ConvexBody J = make_polytope(2, {Vec(0, 0), Vec(2, 0), Vec(2, 2), Vec(0, 2)});

    ConvexBody fixed = proj_map(Vec(0.5, 1.0), J);
    REQUIRE(fixed.is_point());
    CHECK(dist(fixed.verts[0], Vec(0.5, 1.0)) < 1e-12);

    Vec u(3.0, 1.0);
    double d = distance(J, u); /* = 1 */
    ConvexBody P = proj_map(u, J);
    CHECK(!P.is_polytope());
    /* the metric projection of u itself belongs to the clipped body */
    CHECK(contains(P, project_point(J, u), 1e-8));
    /* the body projection lands inside both J and the ball B(u, 2d) */
    for (const Vec& z : {Vec(1.0, 1.0), Vec(2.5, 0.0), Vec(0.0, 3.0)}) {
        Vec w = P.oracle(z);
        CHECK(distance(J, w) < 1e-7);
        CHECK(norm(w - u) < 2.0 * d + 1e-7);
    }
}

TEST_CASE("projection map pairs stay within the contraction bound") {
    auto rng = seeded_rng(2024, 9);
    HausdorffOptions hopt;
    hopt.directions = 48;
    hopt.face_samples = 6;
    for (int it = 0; it < 40; ++it) {
        int n = 1 + (it % 2);
        ConvexBody J = random_polytope(rng, n, 3.0);
        ConvexBody K = perturbed_copy(rng, J, 0.5);
        Vec u = rand_ball(rng, n, 3.0);
        Vec v = u + rand_ball(rng, n, 0.8);
        double dl = hausdorff(J, K, hopt);
        double lhs = hausdorff(proj_map(u, J), proj_map(v, K), hopt);
        CHECK(lhs <= 5.0 * (dl + dist(u, v)) + 1e-6);
    }
}

TEST_CASE("boundary normals blend adjacent faces near corners") {
    ConvexBody iv = make_interval(-2.0, 2.0);
    auto nr = boundary_normals(iv, Vec(2.0), 0.1);
    REQUIRE(nr.size() == 1);
    CHECK(nr[0][0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(boundary_normals(iv, Vec(0.0), 0.1).empty());

    ConvexBody sq = make_polytope(
        2, {Vec(-1, -1), Vec(1, -1), Vec(1, 1), Vec(-1, 1)});
    auto edge = boundary_normals(sq, Vec(1.0, 0.0), 0.05);
    REQUIRE(edge.size() == 1);
    CHECK(dist(edge[0], Vec(1, 0)) < 1e-12);

    auto corner = boundary_normals(sq, Vec(1.0, 1.0), 0.05);
    CHECK(corner.size() >= 3); /* both edges plus blends */
    bool saw_right = false, saw_up = false;
    for (const auto& nv : corner) {
        CHECK(std::fabs(norm(nv) - 1.0) < 1e-12);
        if (dist(nv, Vec(1, 0)) < 1e-9) saw_right = true;
        if (dist(nv, Vec(0, 1)) < 1e-9) saw_up = true;
    }
    CHECK(saw_right);
    CHECK(saw_up);

    CHECK(boundary_normals(sq, Vec(0.0, 0.0), 0.05).empty());
}

TEST_CASE("Dykstra projection onto an intersection") {
    auto half = [](const Vec& z) { return z[0] >= 0.3 ? z : Vec(0.3, z[1]); };
    auto disk = [](const Vec& z) {
        double r = norm(z);
        return r <= 1.0 ? z : (1.0 / r) * z;
    };
    Vec w = dykstra_project(Vec(-1.0, 0.0), half, disk);
    CHECK(dist(w, Vec(0.3, 0.0)) < 1e-8);

    /* point already inside is fixed */
    Vec inside = dykstra_project(Vec(0.5, 0.2), half, disk);
    CHECK(dist(inside, Vec(0.5, 0.2)) < 1e-8);
}

TEST_CASE("normal cone generators at vertices, edges, interior") {
    ConvexBody sq = make_polytope(
        2, {Vec(-1, -1), Vec(1, -1), Vec(1, 1), Vec(-1, 1)});
    Cone at_vertex = normal_cone(sq, Vec(1, 1));
    CHECK(at_vertex.gens.size() == 2);
    Cone at_edge = normal_cone(sq, Vec(1, 0));
    REQUIRE(at_edge.gens.size() == 1);
    CHECK(dist(at_edge.gens[0], Vec(1, 0)) < 1e-9);
    Cone inside = normal_cone(sq, Vec(0, 0));
    CHECK(inside.gens.empty());

    Cone end = normal_cone(make_interval(-1, 1), Vec(1.0));
    REQUIRE(end.gens.size() == 1);
    CHECK(end.gens[0][0] == doctest::Approx(1.0));
}

TEST_CASE("Hausdorff distance on shifts, nestings, oracle bodies") {
    ConvexBody a = make_polytope(2, {Vec(-1, -1), Vec(1, -1), Vec(1, 1), Vec(-1, 1)});
    ConvexBody b = make_polytope(
        2, {Vec(-0.5, -1), Vec(1.5, -1), Vec(1.5, 1), Vec(-0.5, 1)});
    CHECK(hausdorff(a, b) == doctest::Approx(0.5).epsilon(1e-9));

    CHECK(hausdorff(make_interval(0, 1), make_interval(0, 2)) ==
          doctest::Approx(1.0).epsilon(1e-12));

    auto disk = [](double R) {
        return make_oracle(
            2,
            [R](const Vec& z) {
                double r = norm(z);
                return r <= R ? z : (R / r) * z;
            },
            Vec(0.0, 0.0), R);
    };
    CHECK(std::fabs(hausdorff(disk(1.0), disk(2.0)) - 1.0) < 2e-2);
}

TEST_CASE("oracle support points climb to the face") {
    Vec ctr(1.0, 2.0);
    ConvexBody disk = make_oracle(
        2,
        [ctr](const Vec& z) {
            Vec d = z - ctr;
            double r = norm(d);
            return r <= 1.0 ? z : ctr + (1.0 / r) * d;
        },
        ctr, 1.0);
    Vec top = oracle_support_point(disk, Vec(0.0, 1.0));
    CHECK(dist(top, Vec(1.0, 3.0)) < 1e-6);

    ConvexBody tri = make_polytope(2, {Vec(0, 0), Vec(1, 0), Vec(0, 1)});
    Vec far = oracle_support_point(tri, Vec(1.0, 1.0));
    /* tie along the hypotenuse resolves to its min-norm point */
    CHECK(distance(tri, far) < 1e-9);
    CHECK(dot(far, Vec(1.0, 1.0)) == doctest::Approx(1.0).epsilon(1e-9));
}
