#ifndef HJBREP_H
#define HJBREP_H

/* C interface to the representation and solver library. Handles are opaque;
 * every call that can fail returns a status code and leaves a thread-local
 * message readable through hjb_last_error(). */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hjb_status {
    HJB_OK = 0,
    HJB_ERR_CONFIG = 1,      /* bad input, schema, grids, parameters */
    HJB_ERR_ASSUMPTION = 2,  /* a structural assumption check failed */
    HJB_ERR_VERIFICATION = 3 /* a verification or numeric check failed */
} hjb_status;

typedef struct hjb_problem hjb_problem;
typedef struct hjb_representation hjb_representation;
typedef struct hjb_value hjb_value;

const char* hjb_version(void);
/* message from the most recent failing call on this thread; empty string
 * after a success */
const char* hjb_last_error(void);

/* ---- problem handles ---- */
hjb_status hjb_problem_load_file(const char* path, hjb_problem** out);
hjb_status hjb_problem_parse(const char* json_text, hjb_problem** out);
void hjb_problem_free(hjb_problem* p);

int hjb_problem_dim(const hjb_problem* p); /* state dimension, 1 or 2 */
hjb_status hjb_problem_set_seed(hjb_problem* p, unsigned long long seed);

/* H(t, x, p); x has dim entries, p likewise */
hjb_status hjb_eval_hamiltonian(const hjb_problem* p, double t, const double* x,
                                const double* pvec, double* out);

/* ---- representation handles ---- */
/* eta_mode: "graph" (default when NULL), "growth", or "growth_cr" */
hjb_status hjb_representation_create(const hjb_problem* p, const char* eta_mode,
                                     hjb_representation** out);
void hjb_representation_free(hjb_representation* r);

hjb_status hjb_representation_eta(const hjb_representation* r, double t, const double* x,
                                  double* out);
/* u has dim+1 entries in the closed unit ball; writes dim entries of the
 * velocity into f_out and the running cost into l_out */
hjb_status hjb_representation_eval(const hjb_representation* r, double t, const double* x,
                                   const double* u, double* f_out, double* l_out);

/* ---- value functions ---- */
typedef struct hjb_solve_options {
    int no_tail_bound; /* nonzero: skip the decay-envelope requirement */
    int threads;       /* 0 = hardware concurrency */
    double tol_scale;  /* <= 0 means 1.0 */
} hjb_solve_options;

/* dynamic programming through the selection (f, l) */
hjb_status hjb_solve_value(const hjb_problem* p, const hjb_representation* r,
                           const hjb_solve_options* opt, hjb_value** out);
/* the velocity-side twin: conjugate-domain samples with conjugate cost */
hjb_status hjb_solve_velocity_value(const hjb_problem* p, const hjb_representation* r,
                                    const hjb_solve_options* opt, hjb_value** out);
void hjb_value_free(hjb_value* v);

/* interpolated value; +inf marks infeasible or out-of-domain points */
hjb_status hjb_value_at(const hjb_value* v, double t, const double* x, double* out);
double hjb_value_tail_bound(const hjb_value* v);
hjb_status hjb_value_write_csv(const hjb_value* v, const char* path);

/* ---- report pipelines ----
 * Each writes its CSV/JSON reports into out_dir (created when missing) and
 * returns HJB_OK only when every asserted property holds. */
hjb_status hjb_run_conjugate(const hjb_problem* p, const char* out_dir);
hjb_status hjb_run_represent(const hjb_problem* p, const char* out_dir);
hjb_status hjb_run_verify(const hjb_problem* p, const char* out_dir, double tol_scale);
hjb_status hjb_run_solve(const hjb_problem* p, const char* out_dir,
                         const hjb_solve_options* opt);
hjb_status hjb_run_check_opc(const hjb_problem* p, const char* out_dir);
hjb_status hjb_run_equivalence(const hjb_problem* p, const char* out_dir,
                               const hjb_solve_options* opt);

#ifdef __cplusplus
}
#endif

#endif /* HJBREP_H */
