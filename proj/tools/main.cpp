#include <chrono>
#include <cstdio>
#include <fstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "hjbrep.h"

namespace {

struct CommonArgs {
    std::string config;
    std::string out = "out";
    unsigned long long seed = 0;
    bool seed_given = false;
    double tol_scale = 1.0;
    bool no_tail_bound = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("config", a.config, "problem configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", a.out, "output directory (default: out)");
    cmd->add_option("--seed", a.seed, "override the configured Monte Carlo seed")
        ->trigger_on_parse()
        ->each([&a](const std::string&) { a.seed_given = true; });
    cmd->add_option("--tol-scale", a.tol_scale, "multiply every tolerance by this factor");
    cmd->add_flag("--no-tail-bound", a.no_tail_bound,
                  "allow solving without declared decay envelopes (tail bound 0)");
}

int run_command(const std::string& name, const CommonArgs& a) {
    auto t0 = std::chrono::steady_clock::now();
    hjb_problem* prob = nullptr;
    hjb_status st = hjb_problem_load_file(a.config.c_str(), &prob);
    if (st == HJB_OK && a.seed_given) st = hjb_problem_set_seed(prob, a.seed);

    hjb_solve_options opts{};
    opts.no_tail_bound = a.no_tail_bound ? 1 : 0;
    opts.threads = 0;
    opts.tol_scale = a.tol_scale;

    if (st == HJB_OK) {
        if (name == "conjugate")
            st = hjb_run_conjugate(prob, a.out.c_str());
        else if (name == "represent")
            st = hjb_run_represent(prob, a.out.c_str());
        else if (name == "verify")
            st = hjb_run_verify(prob, a.out.c_str(), a.tol_scale);
        else if (name == "solve")
            st = hjb_run_solve(prob, a.out.c_str(), &opts);
        else if (name == "check-opc")
            st = hjb_run_check_opc(prob, a.out.c_str());
        else if (name == "equivalence")
            st = hjb_run_equivalence(prob, a.out.c_str(), &opts);
    }
    std::string err = hjb_last_error();
    hjb_problem_free(prob);
    auto t1 = std::chrono::steady_clock::now();

    nlohmann::json manifest;
    manifest["command"] = name;
    manifest["config"] = a.config;
    if (a.seed_given)
        manifest["seed"] = a.seed;
    else
        manifest["seed"] = nullptr; /* configured value used */
    manifest["tol_scale"] = a.tol_scale;
    manifest["no_tail_bound"] = a.no_tail_bound;
    manifest["out"] = a.out;
    manifest["status"] = (int)st;
    manifest["seconds"] = std::chrono::duration<double>(t1 - t0).count();
    manifest["version"] = hjb_version();
    std::ofstream mf(a.out + "/manifest.json");
    if (mf) mf << manifest.dump(2) << "\n";

    if (st != HJB_OK) std::fprintf(stderr, "error: %s\n", err.c_str());
    return (int)st;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"conjugate representations and constrained value functions"};
    app.require_subcommand(1);

    const char* names[] = {"conjugate", "represent", "verify", "solve", "check-opc",
                           "equivalence"};
    const char* blurbs[] = {
        "tabulate the conjugate fibers: slices, domains, offsets",
        "sample the selected dynamics and running cost to CSV",
        "run every representation check and write verify.json",
        "solve both dynamic programs and write the value tables",
        "test the outward-pointing boundary condition",
        "run the full weak-solution equivalence experiment"};

    CommonArgs args[6];
    for (int i = 0; i < 6; ++i) add_common(app.add_subcommand(names[i], blurbs[i]), args[i]);

    CLI11_PARSE(app, argc, argv);

    for (int i = 0; i < 6; ++i)
        if (app.get_subcommand(names[i])->parsed()) return run_command(names[i], args[i]);
    return 1;
}
