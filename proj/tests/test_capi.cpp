#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hjbrep.h"

namespace fs = std::filesystem;

namespace {

const char* kCoarse = R"js({
    "name": "capi-coarse",
    "state_dim": 1,
    "hamiltonian": { "family": "scaled-eikonal", "a": "1", "b": ["0"], "c": "exp(-t)" },
    "envelopes": { "phi_lo": "exp(-t)", "phi_hi": "exp(-t)", "psi": "1 + exp(-t)",
                   "x_lipschitz": "0", "p_lipschitz": "1" },
    "domain": { "box": [[-2.0, 2.0]] },
    "time": { "horizon": 8.0, "nodes": 81 },
    "state_nodes": [41],
    "outward_pointing": { "eta": 0.5, "r": 1.0, "M": 2.0 },
    "reference_solution": "exp(-t)"
})js";

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string cfg_path(const char* base) {
    return std::string(HJB_CONFIG_DIR) + "/" + base;
}

} // namespace

TEST_CASE("version and error state") {
    REQUIRE(hjb_version() != nullptr);
    CHECK(std::strchr(hjb_version(), '.') != nullptr);
    REQUIRE(hjb_last_error() != nullptr);
}

TEST_CASE("problem loading errors set the config status") {
    hjb_problem* p = nullptr;
    CHECK(hjb_problem_load_file("no-such-file.json", &p) == HJB_ERR_CONFIG);
    CHECK(p == nullptr);
    CHECK(std::string(hjb_last_error()).find("cannot open") != std::string::npos);

    CHECK(hjb_problem_parse("{ this is not json", &p) == HJB_ERR_CONFIG);
    CHECK(p == nullptr);
    CHECK(std::string(hjb_last_error()).find("JSON") != std::string::npos);

    CHECK(hjb_problem_parse(kCoarse, &p) == HJB_OK);
    REQUIRE(p != nullptr);
    CHECK(std::string(hjb_last_error()).empty());
    CHECK(hjb_problem_dim(p) == 1);
    CHECK(hjb_problem_set_seed(p, 99) == HJB_OK);
    hjb_problem_free(p);
}

TEST_CASE("hamiltonian evaluation through the C surface") {
    hjb_problem* p = nullptr;
    REQUIRE(hjb_problem_parse(kCoarse, &p) == HJB_OK);
    double x = 0.3, pv = -2.0, out = 0.0;
    CHECK(hjb_eval_hamiltonian(p, 0.5, &x, &pv, &out) == HJB_OK);
    CHECK(out == doctest::Approx(2.0 - std::exp(-0.5)).epsilon(1e-14));
    hjb_problem_free(p);
}

TEST_CASE("representation evaluation stays in the epigraph") {
    hjb_problem* p = nullptr;
    REQUIRE(hjb_problem_parse(kCoarse, &p) == HJB_OK);

    hjb_representation* r = nullptr;
    CHECK(hjb_representation_create(p, "bogus-mode", &r) == HJB_ERR_CONFIG);
    CHECK(r == nullptr);

    REQUIRE(hjb_representation_create(p, nullptr, &r) == HJB_OK);
    REQUIRE(r != nullptr);

    double x = 0.0, eta = 0.0;
    CHECK(hjb_representation_eta(r, 0.3, &x, &eta) == HJB_OK);
    double c = std::exp(-0.3);
    CHECK(eta == doctest::Approx(std::sqrt(1.0 + c * c)).epsilon(1e-9));

    /* control pointing straight up lands on the scaled control itself */
    double up[2] = {0.0, 1.0}, f = 0.0, l = 0.0;
    CHECK(hjb_representation_eval(r, 0.3, &x, up, &f, &l) == HJB_OK);
    CHECK(std::fabs(f) <= 1e-9);
    CHECK(l == doctest::Approx(eta).epsilon(1e-9));

    /* control pointing below the graph projects into the epigraph */
    double down[2] = {0.0, -1.0};
    CHECK(hjb_representation_eval(r, 0.3, &x, down, &f, &l) == HJB_OK);
    CHECK(std::fabs(f) <= 1.0 + 1e-6);
    CHECK(l >= c - 1e-7);

    hjb_representation_free(r);
    hjb_problem_free(p);
}

TEST_CASE("value solve and lookup") {
    hjb_problem* p = nullptr;
    REQUIRE(hjb_problem_parse(kCoarse, &p) == HJB_OK);
    hjb_representation* r = nullptr;
    REQUIRE(hjb_representation_create(p, nullptr, &r) == HJB_OK);

    hjb_value* v = nullptr;
    REQUIRE(hjb_solve_value(p, r, nullptr, &v) == HJB_OK);
    REQUIRE(v != nullptr);

    double want = 0.0, dt = 8.0 / 80.0;
    for (int m = 0; m < 80; ++m) want += dt * std::exp(-dt * (double)m);
    double x = 0.0, got = 0.0;
    CHECK(hjb_value_at(v, 0.0, &x, &got) == HJB_OK);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
    CHECK(hjb_value_tail_bound(v) == doctest::Approx(3.0 * std::exp(-8.0)).epsilon(1e-3));

    fs::path csv = "capi_value_test.csv";
    CHECK(hjb_value_write_csv(v, csv.string().c_str()) == HJB_OK);
    CHECK(fs::exists(csv));
    fs::remove(csv);

    hjb_value* w = nullptr;
    REQUIRE(hjb_solve_velocity_value(p, r, nullptr, &w) == HJB_OK);
    double gotw = 0.0;
    CHECK(hjb_value_at(w, 0.0, &x, &gotw) == HJB_OK);
    CHECK(gotw == doctest::Approx(got).epsilon(1e-9));

    hjb_value_free(w);
    hjb_value_free(v);
    hjb_representation_free(r);
    hjb_problem_free(p);
}

TEST_CASE("report pipelines write their files") {
    hjb_problem* p = nullptr;
    REQUIRE(hjb_problem_parse(kCoarse, &p) == HJB_OK);
    fs::path out = "capi_out";
    fs::remove_all(out);

    CHECK(hjb_run_conjugate(p, (out / "conj").string().c_str()) == HJB_OK);
    CHECK(fs::exists(out / "conj" / "conjugate_slices.csv"));
    CHECK(fs::exists(out / "conj" / "conjugate_domain.csv"));

    CHECK(hjb_run_represent(p, (out / "rep").string().c_str()) == HJB_OK);
    CHECK(fs::exists(out / "rep" / "selection.csv"));
    CHECK(fs::exists(out / "rep" / "eta.csv"));

    CHECK(hjb_run_verify(p, (out / "verify").string().c_str(), 1.0) == HJB_OK);
    CHECK(fs::exists(out / "verify" / "verify.json"));
    CHECK(slurp(out / "verify" / "verify.json").find("\"pass\": true") != std::string::npos);

    hjb_solve_options opt{};
    opt.tol_scale = 1.0;
    CHECK(hjb_run_solve(p, (out / "solve").string().c_str(), &opt) == HJB_OK);
    CHECK(fs::exists(out / "solve" / "value.csv"));
    CHECK(fs::exists(out / "solve" / "velocity_value.csv"));
    CHECK(slurp(out / "solve" / "solve.json").find("cross_gap") != std::string::npos);

    hjb_problem_free(p);
    fs::remove_all(out);
}

TEST_CASE("collar pipeline separates the shipped positive and negative cases") {
    fs::path out = "capi_opc";
    fs::remove_all(out);

    hjb_problem* pos = nullptr;
    REQUIRE(hjb_problem_load_file(cfg_path("eikonal-constant-cost.json").c_str(), &pos) ==
            HJB_OK);
    CHECK(hjb_run_check_opc(pos, (out / "pos").string().c_str()) == HJB_OK);
    CHECK(slurp(out / "pos" / "opc.json").find("\"pass\": true") != std::string::npos);
    hjb_problem_free(pos);

    hjb_problem* neg = nullptr;
    REQUIRE(hjb_problem_load_file(cfg_path("opc-failure.json").c_str(), &neg) == HJB_OK);
    CHECK(hjb_run_check_opc(neg, (out / "neg").string().c_str()) == HJB_ERR_VERIFICATION);
    CHECK(slurp(out / "neg" / "opc.json").find("\"pass\": false") != std::string::npos);
    CHECK(!std::string(hjb_last_error()).empty());
    hjb_problem_free(neg);

    fs::remove_all(out);
}

TEST_CASE("equivalence pipeline reports assumption refusals") {
    const char* bare = R"js({
        "name": "bare",
        "state_dim": 1,
        "hamiltonian": { "family": "scaled-eikonal", "a": "1", "b": ["0"], "c": "exp(-t)" },
        "domain": { "box": [[-2.0, 2.0]] },
        "time": { "horizon": 8.0, "nodes": 81 },
        "state_nodes": [41]
    })js";
    hjb_problem* p = nullptr;
    REQUIRE(hjb_problem_parse(bare, &p) == HJB_OK);
    fs::path out = "capi_equiv_refused";
    fs::remove_all(out);
    CHECK(hjb_run_equivalence(p, out.string().c_str(), nullptr) == HJB_ERR_ASSUMPTION);
    CHECK(slurp(out / "equivalence.json").find("error") != std::string::npos);
    hjb_problem_free(p);
    fs::remove_all(out);
}
