#ifndef BFA_LPBOX_HPP
#define BFA_LPBOX_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bfa/bitrep.hpp"
#include "bfa/errors.hpp"

namespace bfa {

struct RhoTriple {
    double r1 = 0, r2 = 0, r3 = 0;
};

// min lambda1*L1 + lambda2*L2  s.t.  b_hat in {0,1}^V, d_H(b, b_hat) <= k,
// with the binary set replaced by box /\ l2-sphere and the cardinality bound
// turned into an equality via a non-negative slack.
struct AdmmConfig {
    double lambda1 = 1.0;
    double lambda2 = 100.0;
    int k = 5;
    double eta = 0.01;   // step size for b_hat
    double zeta = 1.0;   // step size for the trigger pattern q
    double zeta_late = 0.1;
    int zeta_switch_iter = 1000;  // iterations before zeta drops to zeta_late
    int inner_steps = 5;
    RhoTriple rho_init{1e-4, 1e-4, 1e-5};
    double rho_growth = 1.01;
    RhoTriple rho_max{50, 50, 5};
    int max_iter = 2000;
    double tol = 1e-4;

    void validate() const;

    static AdmmConfig ssa_defaults();
    static AdmmConfig tsa_defaults();
};

struct SolverState {
    Eigen::VectorXd b_hat;
    std::optional<Eigen::VectorXd> q;
    Eigen::VectorXd u1, u2;
    double u3 = 0;
    Eigen::VectorXd z1, z2;
    double z3 = 0;
    RhoTriple rho;
    int iter = 0;
};

// Loss callbacks close over the problem data; q is null for problems without
// a continuous side variable. Gradients must be exact for the evaluations.
struct LossCallbacks {
    using Eval = std::function<double(const Eigen::VectorXd& b_hat, const Eigen::VectorXd* q)>;
    using Grad = std::function<Eigen::VectorXd(const Eigen::VectorXd& b_hat, const Eigen::VectorXd* q)>;

    Eval eval_l1;
    Eval eval_l2;
    Grad grad_l1_b;
    Grad grad_l2_b;
    Grad grad_l1_q;  // empty when there is no trigger variable
};

struct TraceRecord {
    int iter = 0;
    double res_u1 = 0;       // ||b_hat - u1||^2
    double res_u2 = 0;       // ||b_hat - u2||^2
    double weighted_loss = 0;  // lambda1*L1 + lambda2*L2
    RhoTriple rho;
};

struct SolveResult {
    BitVector bits;
    int n_flip = 0;
    bool converged = false;
    std::vector<TraceRecord> trace;
    std::optional<Eigen::VectorXd> q_final;
    int iterations = 0;
};

// Thrown when an iterate goes non-finite; carries the trace up to that point.
struct solver_numeric_error : numeric_error {
    solver_numeric_error(const std::string& what, std::vector<TraceRecord> trace_so_far)
        : numeric_error(what), trace(std::move(trace_so_far)) {}
    std::vector<TraceRecord> trace;
};

// Projections of Eq.-(13) form.
Eigen::VectorXd project_box(const Eigen::VectorXd& a);
Eigen::VectorXd project_sphere(const Eigen::VectorXd& a);
double project_nonneg(double a);

// One parallel auxiliary update: u1, u2, u3 all computed from the pre-update
// b_hat. b is the original binary vector, k the flip budget.
void update_auxiliaries(SolverState& state, const Eigen::VectorXd& b, const AdmmConfig& cfg);

// Gradient of the augmented Lagrangian w.r.t. b_hat at the current state.
Eigen::VectorXd grad_augmented_lagrangian_b(const SolverState& state, const Eigen::VectorXd& b,
                                            const AdmmConfig& cfg, const LossCallbacks& cb);

// Nearest-bit rounding (ties keep the original bit) followed by top-k
// deviation trimming so that d_H(b, result) <= k always holds.
BitVector finalize_bits(const Eigen::VectorXd& b_hat, const BitVector& b, int k);

SolveResult admm_solve(const BitVector& b, const std::optional<Eigen::VectorXd>& q0,
                       const AdmmConfig& cfg, const LossCallbacks& cb);

// JSON array of {iter, res_u1, res_u2, weighted_loss} records.
std::string trace_to_json(const std::vector<TraceRecord>& trace);

}  // namespace bfa

#endif
