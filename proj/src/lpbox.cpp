#include "bfa/lpbox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace bfa {

void AdmmConfig::validate() const {
    if (!(lambda1 >= 0) || !(lambda2 >= 0)) throw input_error("lambda must be non-negative");
    if (k < 0) throw input_error("flip budget k must be non-negative");
    if (!(eta > 0) || !(zeta > 0) || !(zeta_late > 0)) throw input_error("step sizes must be positive");
    if (inner_steps < 1) throw input_error("inner_steps must be at least 1");
    if (!(rho_init.r1 > 0) || !(rho_init.r2 > 0) || !(rho_init.r3 > 0)) {
        throw input_error("rho_init must be positive");
    }
    if (!(rho_growth > 0)) throw input_error("rho_growth must be positive");
    if (!(rho_max.r1 > 0) || !(rho_max.r2 > 0) || !(rho_max.r3 > 0)) {
        throw input_error("rho_max must be positive");
    }
    if (max_iter < 1) throw input_error("max_iter must be at least 1");
    if (!(tol > 0)) throw input_error("tol must be positive");
}

AdmmConfig AdmmConfig::ssa_defaults() {
    AdmmConfig cfg;
    cfg.lambda1 = 1.0;
    cfg.lambda2 = 100.0;
    cfg.k = 5;
    cfg.eta = 0.01;
    cfg.inner_steps = 5;
    cfg.rho_init = {1e-4, 1e-4, 1e-5};
    cfg.rho_growth = 1.01;
    cfg.rho_max = {50, 50, 5};
    cfg.max_iter = 2000;
    cfg.tol = 1e-4;
    return cfg;
}

AdmmConfig AdmmConfig::tsa_defaults() {
    AdmmConfig cfg;
    cfg.lambda1 = 100.0;
    cfg.lambda2 = 1.0;
    cfg.k = 5;
    cfg.eta = 0.001;
    cfg.zeta = 1.0;
    cfg.zeta_late = 0.1;
    cfg.zeta_switch_iter = 1000;
    cfg.inner_steps = 5;
    cfg.rho_init = {1e-4, 1e-4, 1e-5};
    cfg.rho_growth = 1.01;
    cfg.rho_max = {100, 100, 10};
    cfg.max_iter = 3000;
    cfg.tol = 1e-4;
    return cfg;
}

Eigen::VectorXd project_box(const Eigen::VectorXd& a) {
    return a.cwiseMax(0.0).cwiseMin(1.0);
}

Eigen::VectorXd project_sphere(const Eigen::VectorXd& a) {
    const auto n = a.size();
    const double radius = std::sqrt(static_cast<double>(n)) / 2.0;
    Eigen::VectorXd centered = a.array() - 0.5;
    const double norm = centered.norm();
    if (norm < 1e-12) {
        // degenerate center: project along the normalized all-ones direction
        centered = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
        return Eigen::VectorXd::Constant(n, 0.5) + radius * centered;
    }
    return Eigen::VectorXd::Constant(n, 0.5) + (radius / norm) * centered;
}

double project_nonneg(double a) { return std::max(0.0, a); }

void update_auxiliaries(SolverState& state, const Eigen::VectorXd& b, const AdmmConfig& cfg) {
    const Eigen::VectorXd& bh = state.b_hat;
    state.u1 = project_box(bh + state.z1 / state.rho.r1);
    state.u2 = project_sphere(bh + state.z2 / state.rho.r2);
    const double dist = (b - bh).squaredNorm();
    state.u3 = project_nonneg(-dist + cfg.k - state.z3 / state.rho.r3);
}

Eigen::VectorXd grad_augmented_lagrangian_b(const SolverState& state, const Eigen::VectorXd& b,
                                            const AdmmConfig& cfg, const LossCallbacks& cb) {
    const Eigen::VectorXd& bh = state.b_hat;
    const Eigen::VectorXd* q = state.q ? &*state.q : nullptr;

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(bh.size());
    if (cfg.lambda1 != 0 && cb.grad_l1_b) grad += cfg.lambda1 * cb.grad_l1_b(bh, q);
    if (cfg.lambda2 != 0 && cb.grad_l2_b) grad += cfg.lambda2 * cb.grad_l2_b(bh, q);
    grad += state.z1 + state.z2;
    grad += state.rho.r1 * (bh - state.u1) + state.rho.r2 * (bh - state.u2);
    const double card = (bh - b).squaredNorm() - cfg.k + state.u3;
    grad += 2.0 * (state.z3 + state.rho.r3 * card) * (bh - b);
    if (!grad.allFinite()) throw numeric_error("non-finite loss gradient");
    return grad;
}

BitVector finalize_bits(const Eigen::VectorXd& b_hat, const BitVector& b, int k) {
    if (b_hat.size() != static_cast<Eigen::Index>(b.size())) {
        throw input_error("relaxed vector length does not match the bit vector");
    }
    const std::size_t v = b.size();
    std::vector<std::uint8_t> rounded(v);
    std::vector<std::size_t> flips;
    for (std::size_t i = 0; i < v; ++i) {
        const double x = b_hat[static_cast<Eigen::Index>(i)];
        std::uint8_t bit;
        if (x > 0.5) {
            bit = 1;
        } else if (x < 0.5) {
            bit = 0;
        } else {
            bit = b[i];  // tie keeps the original bit
        }
        rounded[i] = bit;
        if (bit != b[i]) flips.push_back(i);
    }
    if (static_cast<long>(flips.size()) > k) {
        // retain the k flips with the largest |b_hat - b|, ties to lowest index
        std::stable_sort(flips.begin(), flips.end(), [&](std::size_t lhs, std::size_t rhs) {
            const double dl = std::abs(b_hat[static_cast<Eigen::Index>(lhs)] - b[lhs]);
            const double dr = std::abs(b_hat[static_cast<Eigen::Index>(rhs)] - b[rhs]);
            return dl > dr;
        });
        for (std::size_t j = static_cast<std::size_t>(k); j < flips.size(); ++j) {
            rounded[flips[j]] = b[flips[j]];
        }
    }
    return BitVector(std::move(rounded), b.covered_rows(), b.cols(), b.qbits());
}

SolveResult admm_solve(const BitVector& b, const std::optional<Eigen::VectorXd>& q0,
                       const AdmmConfig& cfg, const LossCallbacks& cb) {
    cfg.validate();
    if (!cb.eval_l1 || !cb.eval_l2 || !cb.grad_l1_b || !cb.grad_l2_b) {
        throw input_error("loss callbacks are required");
    }

    const Eigen::VectorXd b_real = b.to_real();

    SolverState state;
    state.b_hat = b_real;
    state.q = q0;
    state.u1 = b_real;
    state.u2 = b_real;
    state.u3 = 0;
    state.z1 = Eigen::VectorXd::Zero(b_real.size());
    state.z2 = Eigen::VectorXd::Zero(b_real.size());
    state.z3 = 0;
    state.rho = cfg.rho_init;

    std::vector<TraceRecord> trace;
    trace.reserve(static_cast<std::size_t>(cfg.max_iter));
    bool converged = false;

    const bool update_q = cb.grad_l1_q && state.q.has_value();

    for (state.iter = 0; state.iter < cfg.max_iter;) {
        update_auxiliaries(state, b_real, cfg);

        const double step_q = state.iter < cfg.zeta_switch_iter ? cfg.zeta : cfg.zeta_late;
        for (int s = 0; s < cfg.inner_steps; ++s) {
            Eigen::VectorXd grad;
            try {
                grad = grad_augmented_lagrangian_b(state, b_real, cfg, cb);
            } catch (const numeric_error& e) {
                throw solver_numeric_error(e.what(), std::move(trace));
            }
            state.b_hat -= cfg.eta * grad;
            if (update_q) {
                const Eigen::VectorXd gq = cb.grad_l1_q(state.b_hat, &*state.q);
                *state.q -= step_q * cfg.lambda1 * gq;
            }
        }
        if (!state.b_hat.allFinite() || (state.q && !state.q->allFinite())) {
            throw solver_numeric_error("non-finite iterate at iteration " +
                                           std::to_string(state.iter),
                                       std::move(trace));
        }

        // dual ascent on the post-update iterate
        state.z1 += state.rho.r1 * (state.b_hat - state.u1);
        state.z2 += state.rho.r2 * (state.b_hat - state.u2);
        const double card = (b_real - state.b_hat).squaredNorm() - cfg.k + state.u3;
        state.z3 += state.rho.r3 * card;

        const double res_u1 = (state.b_hat - state.u1).squaredNorm();
        const double res_u2 = (state.b_hat - state.u2).squaredNorm();
        const Eigen::VectorXd* qp = state.q ? &*state.q : nullptr;
        const double weighted =
            cfg.lambda1 * cb.eval_l1(state.b_hat, qp) + cfg.lambda2 * cb.eval_l2(state.b_hat, qp);
        trace.push_back({state.iter, res_u1, res_u2, weighted, state.rho});

        state.rho.r1 = std::min(state.rho.r1 * cfg.rho_growth, cfg.rho_max.r1);
        state.rho.r2 = std::min(state.rho.r2 * cfg.rho_growth, cfg.rho_max.r2);
        state.rho.r3 = std::min(state.rho.r3 * cfg.rho_growth, cfg.rho_max.r3);

        ++state.iter;
        if (res_u1 <= cfg.tol && res_u2 <= cfg.tol) {
            converged = true;
            break;
        }
    }

    SolveResult result;
    result.bits = finalize_bits(state.b_hat, b, cfg.k);
    result.n_flip = static_cast<int>(hamming_distance(b, result.bits));
    result.converged = converged;
    result.trace = std::move(trace);
    result.q_final = state.q;
    result.iterations = state.iter;
    return result;
}

std::string trace_to_json(const std::vector<TraceRecord>& trace) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& rec : trace) {
        arr.push_back({{"iter", rec.iter},
                       {"res_u1", rec.res_u1},
                       {"res_u2", rec.res_u2},
                       {"weighted_loss", rec.weighted_loss}});
    }
    return arr.dump(2);
}

}  // namespace bfa
