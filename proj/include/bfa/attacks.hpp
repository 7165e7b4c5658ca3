#ifndef BFA_ATTACKS_HPP
#define BFA_ATTACKS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bfa/lpbox.hpp"
#include "bfa/netcore.hpp"

namespace bfa {

// Single sample attack: drive one sample x from its source class s into the
// target class t by flipping bits in output rows s and t only (V = 2CQ,
// slot 0 = s, slot 1 = t).
struct SsaProblem {
    const Network* net = nullptr;
    Eigen::VectorXd x;
    int source = 0;
    int target = 0;
    double tau = 0;    // max original logit over classes != s, fixed up front
    double delta = 10.0;
    const Dataset* aux = nullptr;  // D2, stealthiness
    BitVector b0;

    // caches
    Eigen::VectorXd g_x;               // C
    Eigen::MatrixXd aux_features;      // N x C
    Eigen::MatrixXd aux_base_logits;   // N x K, stored-bit logits incl. bias
    std::vector<int> aux_labels;
    Eigen::VectorXd wgrad;             // Q
};

// Triggered samples attack: learn a trigger pattern and bit flips over the
// whole output layer (V = KCQ) so that any triggered sample lands in class t.
struct TsaProblem {
    const Network* net = nullptr;
    int target = 0;
    TriggerSpec trigger;           // mask fixed, pattern is the q0 initializer
    const Dataset* aux = nullptr;  // D = D1 = D2
    BitVector b0;

    // caches
    Eigen::MatrixXd inputs;         // d x N, clean
    Eigen::MatrixXd clean_features; // N x C
    std::vector<int> labels;
    Eigen::VectorXd wgrad;
};

struct SearchPolicy {
    int k_init = 5;
    int k_max_searches = 4;
    double lambda_init = 100.0;  // lambda2 for SSA, lambda1 for TSA
    int lambda_max_searches = 8;
    double asr_threshold = 98.0;  // TSA success bar on the auxiliary set, percent
    double delta = 10.0;          // SSA slack
    bool delta_escalation = false;
    double delta_escalated = 10.0;

    void validate() const;
    static SearchPolicy ssa_defaults();
    static SearchPolicy tsa_defaults();
};

struct AttackReport {
    std::string attack_type;  // "ssa" | "tsa"
    int target_class = -1;
    std::optional<int> source_class;
    bool success = false;
    int n_flip = 0;
    std::vector<BitVector::Location> flipped_bits;
    double asr = 0;      // percent; filled by evaluate_attack (aux ASR for TSA search)
    double aux_asr = 0;  // TSA: ASR on the auxiliary set that drove the k search
    double pa_acc = 0;   // percent; filled by evaluate_attack
    bool converged = false;
    int iterations = 0;
    double lambda_used = 0;
    int k_used = 0;
    std::optional<TriggerSpec> trigger;

    // carried for evaluation and diagnostics, not part of the JSON schema
    BitVector original_bits;
    BitVector final_bits;
    std::vector<TraceRecord> trace;
    std::vector<int> searched_k;
};

double compute_margin_tau(const Network& net, const Eigen::VectorXd& x, int source);

SsaProblem make_ssa_problem(const Network& net, const Eigen::VectorXd& x, int source, int target,
                            const Dataset& aux, double delta = 10.0);

// L1 for SSA: max(tau - p_t + delta, 0) + max(p_s - tau + delta, 0) on the
// relaxed logits.
double ssa_effectiveness_loss(const SsaProblem& prob, const Eigen::VectorXd& b_hat);

// L2: sum of cross entropies over aux with the candidate bits substituted
// into the given rows. Uncached reference form; the attack callbacks use the
// problem caches.
double stealthiness_loss(const Network& net, const Dataset& aux, const Eigen::VectorXd& b_hat,
                         std::span<const int> rows);

// (grad L1, grad L2) w.r.t. b_hat. Hinge blocks vanish when inactive.
std::pair<Eigen::VectorXd, Eigen::VectorXd> ssa_gradients(const SsaProblem& prob,
                                                          const Eigen::VectorXd& b_hat);

TsaProblem make_tsa_problem(const Network& net, int target, TriggerSpec trigger,
                            const Dataset& aux);

double tsa_effectiveness_loss(const TsaProblem& prob, const Eigen::VectorXd& b_hat,
                              const Eigen::VectorXd& q);

struct TsaGradients {
    Eigen::VectorXd l1_b;
    Eigen::VectorXd l2_b;
    Eigen::VectorXd l1_q;
};
TsaGradients tsa_gradients(const TsaProblem& prob, const Eigen::VectorXd& b_hat,
                           const Eigen::VectorXd& q);

LossCallbacks ssa_callbacks(const SsaProblem& prob);
LossCallbacks tsa_callbacks(const TsaProblem& prob);

enum class Corner { top_left, top_right, bottom_left, bottom_right };

// Binary square-patch mask for side x side images; pattern starts at zero.
TriggerSpec make_patch_mask(int image_side, int patch_side, Corner corner);

// Uniform [0,1] pattern on the masked coordinates, zero elsewhere.
Eigen::VectorXd random_trigger_pattern(const Eigen::VectorXd& mask, std::uint64_t seed);

Network apply_bit_flips(const Network& net, const BitVector& bits);

// Joint lambda2/k search around admm_solve; lambda1 pinned to 1.
AttackReport run_ssa(const Network& net, const Eigen::VectorXd& x, int source, int target,
                     const Dataset& aux, const SearchPolicy& policy, const AdmmConfig& cfg);

// k-doubling search with lambda2 pinned to 1 and lambda1 = policy.lambda_init;
// succeeds when the auxiliary triggered ASR reaches policy.asr_threshold.
AttackReport run_tsa(const Network& net, int target, const Eigen::VectorXd& mask,
                     const Dataset& aux, const SearchPolicy& policy, const AdmmConfig& cfg,
                     std::uint64_t trigger_seed = 1);

}  // namespace bfa

#endif
