#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hjbrep/hamiltonian.hpp"

using namespace hjb;

#ifndef HJB_CONFIG_DIR
#define HJB_CONFIG_DIR "configs"
#endif

TEST_CASE("expression parsing and evaluation") {
    Expr e = Expr::parse("exp(-t) * (abs(x1) - 1 + exp(-abs(x1)))");
    double t = 0.5;
    Vec x(-1.2);
    double want = std::exp(-t) * (1.2 - 1.0 + std::exp(-1.2));
    CHECK(e.eval(t, x) == doctest::Approx(want).epsilon(1e-14));
    CHECK(e.depends_on_x());
    CHECK(!e.uses_x2());

    CHECK(Expr::parse("1 + 2*3").eval_t(0.0) == doctest::Approx(7.0));
    CHECK(Expr::parse("2^3 + 1").eval_t(0.0) == doctest::Approx(9.0));
    CHECK(Expr::parse("-t^2").eval_t(3.0) == doctest::Approx(-9.0));
    CHECK(Expr::parse("|x|").eval(0.0, Vec(3.0, 4.0)) == doctest::Approx(5.0));
    CHECK(Expr::parse("x2 / 2").eval(0.0, Vec(1.0, 6.0)) == doctest::Approx(3.0));

    Expr c = Expr::constant(2.5);
    CHECK(c.eval_t(1.0) == doctest::Approx(2.5));
    CHECK(!c.depends_on_x());
    CHECK(Expr().empty());
    CHECK(!c.empty());
}

TEST_CASE("expression errors carry the offending position") {
    CHECK_THROWS_AS(Expr::parse("exp("), ConfigError);
    CHECK_THROWS_AS(Expr::parse("1 + * 2"), ConfigError);
    CHECK_THROWS_AS(Expr::parse(""), ConfigError);
    try {
        Expr::parse("foo(t)");
        FAIL("expected a parse error");
    } catch (const ConfigError& err) {
        std::string msg = err.what();
        CHECK(msg.find("unknown name 'foo'") != std::string::npos);
        CHECK(msg.find("position") != std::string::npos);
    }
}

TEST_CASE("hamiltonian families evaluate their closed forms") {
    HamiltonianSpec eik;
    eik.n = 1;
    eik.family = HamiltonianFamily::scaled_eikonal;
    eik.a = Expr::parse("1");
    eik.b[0] = Expr::parse("0");
    eik.c = Expr::parse("exp(-t)");
    Heval He = make_heval(eik);
    CHECK(He(0.5, Vec(0.3), Vec(-2.0)) ==
          doctest::Approx(2.0 - std::exp(-0.5)).epsilon(1e-14));
    CHECK(!eik.x_dependent());

    HamiltonianSpec sup;
    sup.n = 1;
    sup.family = HamiltonianFamily::sup_affine;
    for (const char* drift : {"1", "-1", "0"}) {
        AffinePiece pc;
        pc.drift[0] = Expr::parse(drift);
        pc.cost = Expr::parse(drift[0] == '0' ? "-0.5*exp(-t)" : "0");
        sup.pieces.push_back(pc);
    }
    Heval Hs = make_heval(sup);
    CHECK(Hs(0.0, Vec(0.0), Vec(2.0)) == doctest::Approx(2.0));
    CHECK(Hs(0.0, Vec(0.0), Vec(0.1)) == doctest::Approx(0.5)); /* flat piece wins */

    HamiltonianSpec quad;
    quad.n = 1;
    quad.family = HamiltonianFamily::quadratic;
    quad.a = Expr::parse("1");
    quad.c = Expr::parse("0");
    Heval Hq = make_heval(quad);
    CHECK(Hq(0.0, Vec(0.0), Vec(3.0)) == doctest::Approx(4.5));

    CHECK(family_name(HamiltonianFamily::scaled_eikonal) == "scaled-eikonal");
}

TEST_CASE("closed-form conjugates for the eikonal and sup-affine families") {
    HamiltonianSpec eik;
    eik.n = 1;
    eik.family = HamiltonianFamily::scaled_eikonal;
    eik.a = Expr::parse("0.5");
    eik.b[0] = Expr::parse("-0.5");
    eik.c = Expr::parse("exp(-t)");
    auto ac = analytic_conjugate(eik, 1.0, Vec(0.0));
    REQUIRE(ac.available);
    /* velocity set b + a[-1,1] = [-1, 0] */
    CHECK(contains(ac.domain, Vec(-1.0)));
    CHECK(contains(ac.domain, Vec(0.0)));
    CHECK(!contains(ac.domain, Vec(0.2)));
    CHECK(ac.value(Vec(-0.5)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));

    HamiltonianSpec sup;
    sup.n = 1;
    sup.family = HamiltonianFamily::sup_affine;
    for (const char* drift : {"1", "-1", "0"}) {
        AffinePiece pc;
        pc.drift[0] = Expr::parse(drift);
        pc.cost = Expr::parse(drift[0] == '0' ? "-0.5*exp(-t)" : "0");
        sup.pieces.push_back(pc);
    }
    auto sc = analytic_conjugate(sup, 0.0, Vec(0.0));
    REQUIRE(sc.available);
    CHECK(contains(sc.domain, Vec(1.0)));
    CHECK(!contains(sc.domain, Vec(1.1)));
    /* lower hull through (-1,0), (0,-0.5), (1,0) */
    CHECK(sc.value(Vec(0.0)) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(sc.value(Vec(0.5)) == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(sc.value(Vec(-1.0)) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("problem parsing applies defaults and validates the schema") {
    const char* text = R"js({
        "name": "toy",
        "state_dim": 1,
        "hamiltonian": { "family": "scaled-eikonal", "a": "1", "b": ["0"], "c": "exp(-t)" },
        "domain": { "box": [[-2.0, 2.0]] },
        "time": { "horizon": 8.0, "nodes": 81 },
        "state_nodes": [41]
    })js";
    ProblemSpec ps = parse_problem(text);
    CHECK(ps.name == "toy");
    CHECK(ps.H.n == 1);
    CHECK(ps.tgrid.count == 81);
    CHECK(ps.xgrid[0].lo == doctest::Approx(-2.0));
    CHECK(ps.xgrid[0].hi == doctest::Approx(2.0));
    CHECK(ps.control_interior == 96);
    CHECK(ps.control_boundary == 32);
    CHECK(!ps.opc.declared);
    CHECK(ps.closed_form_V.empty());
    /* dual grid sized from the empirical slope bound: radius 2, step 0.005 */
    CHECK(ps.pgrid[0].hi == doctest::Approx(4.0));
    CHECK(ps.pgrid[0].count == 481);
    CHECK(ps.qgrid[0].hi == doctest::Approx(2.0));
    CHECK(ps.qgrid[0].count == 801);
    CHECK(ps.omega_radius() == doctest::Approx(2.0));
    CHECK(ps.H.slope_bound(0.0, 8.0, ps.xgrid) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("problem parsing rejects malformed configs with located messages") {
    auto expect_error = [](const char* text, const char* needle) {
        try {
            parse_problem(text);
            FAIL_CHECK("expected a config error for: " << needle);
        } catch (const ConfigError& err) {
            CHECK(std::string(err.what()).find(needle) != std::string::npos);
        }
    };

    expect_error("{ not json", "not valid JSON");
    expect_error(R"({"domain":{"box":[[-1,1]]},"time":{"horizon":1,"nodes":3},"state_nodes":[3]})",
                 "hamiltonian");
    expect_error(R"({"hamiltonian":{"family":"mystery"},"domain":{"box":[[-1,1]]},
                    "time":{"horizon":1,"nodes":3},"state_nodes":[3]})",
                 "unknown family");
    expect_error(R"({"hamiltonian":{"family":"scaled-eikonal","a":"1","b":["0","0"],"c":"0"},
                    "state_dim":1,"domain":{"box":[[-1,1]]},
                    "time":{"horizon":1,"nodes":3},"state_nodes":[3]})",
                 "state_dim expressions");
    expect_error(R"({"hamiltonian":{"family":"scaled-eikonal","a":"1","b":["0"],"c":"x2"},
                    "state_dim":1,"domain":{"box":[[-1,1]]},
                    "time":{"horizon":1,"nodes":3},"state_nodes":[3]})",
                 "references x2");
    expect_error(R"({"hamiltonian":{"family":"scaled-eikonal","a":"1","b":["0"],"c":"0"},
                    "domain":{"box":[[1,-1]]},
                    "time":{"horizon":1,"nodes":3},"state_nodes":[3]})",
                 "lo < hi");
    expect_error(R"({"hamiltonian":{"family":"scaled-eikonal","a":"1","b":["0"],"c":"0"},
                    "domain":{"box":[[-1,1]]},
                    "time":{"horizon":-1,"nodes":3},"state_nodes":[3]})",
                 "horizon");
    expect_error(R"({"hamiltonian":{"family":"scaled-eikonal","a":"1","b":["0"],"c":"0"},
                    "domain":{"box":[[-1,1]]},
                    "time":{"horizon":1,"nodes":3},"state_nodes":[3],
                    "outward_pointing":{"eta":0,"r":1,"M":2}})",
                 "positive");
}

TEST_CASE("shipped problem files load") {
    const std::string dir = HJB_CONFIG_DIR;
    ProblemSpec cc = load_problem_file(dir + "/eikonal-constant-cost.json");
    CHECK(cc.name == "eikonal-constant-cost");
    CHECK(cc.tgrid.count == 401);
    CHECK(cc.xgrid[0].count == 201);
    CHECK(cc.opc.declared);
    CHECK(cc.opc.eta == doctest::Approx(0.5));
    CHECK(!cc.closed_form_V.empty());
    CHECK(cc.H.eval(0.25, Vec(0.4), Vec(1.5)) ==
          doctest::Approx(1.5 - std::exp(-0.25)).epsilon(1e-14));

    ProblemSpec dc = load_problem_file(dir + "/distance-cost.json");
    CHECK(dc.H.x_dependent());
    CHECK(!dc.H.env_cr.empty());
    CHECK(dc.closed_form_V.eval(0.5, Vec(-1.0)) ==
          doctest::Approx(std::exp(-0.5) * (1.0 - 1.0 + std::exp(-1.0))).epsilon(1e-12));

    ProblemSpec sa = load_problem_file(dir + "/sup-affine.json");
    CHECK(sa.H.family == HamiltonianFamily::sup_affine);
    CHECK(sa.H.pieces.size() == 3);

    ProblemSpec oc = load_problem_file(dir + "/opc-failure.json");
    auto ac = analytic_conjugate(oc.H, 0.0, Vec(0.0));
    REQUIRE(ac.available);
    CHECK(contains(ac.domain, Vec(-1.0)));
    CHECK(contains(ac.domain, Vec(0.0)));
    CHECK(!contains(ac.domain, Vec(0.5)));

    CHECK_THROWS_AS(load_problem_file(dir + "/does-not-exist.json"), ConfigError);
}
