#include "bfa/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <string>

namespace bfa {

namespace {

// Relaxed row weights: slice slot*C*Q of b_hat reshaped (Q x C), dotted with
// the constant bit gradient. Equals the two's-complement decode on binary bits.
Eigen::VectorXd slot_weights(const Eigen::VectorXd& b_hat, int slot, int cols,
                             const Eigen::VectorXd& wgrad) {
    const int q = static_cast<int>(wgrad.size());
    Eigen::Map<const Eigen::MatrixXd> m(b_hat.data() + static_cast<std::ptrdiff_t>(slot) * cols * q,
                                        q, cols);
    return m.transpose() * wgrad;
}

// Scatter a_j * wgrad_b into the slot's C*Q gradient block.
void add_slot_gradient(Eigen::VectorXd& grad, int slot, const Eigen::VectorXd& a,
                       const Eigen::VectorXd& wgrad, double scale = 1.0) {
    const int cols = static_cast<int>(a.size());
    const int q = static_cast<int>(wgrad.size());
    Eigen::Map<Eigen::MatrixXd> m(grad.data() + static_cast<std::ptrdiff_t>(slot) * cols * q, q,
                                  cols);
    m.noalias() += scale * (wgrad * a.transpose());
}

Eigen::MatrixXd hidden_forward(const Network& net, const Eigen::MatrixXd& x_cols) {
    Eigen::MatrixXd h = x_cols;
    for (const auto& layer : net.hidden) {
        h = (layer.weights * h).colwise() + layer.bias;
        if (layer.act == Activation::relu) h = h.cwiseMax(0.0);
    }
    return h;  // C x N
}

double cross_entropy_sum(const Eigen::MatrixXd& logit_cols, std::span<const int> labels) {
    double total = 0;
    for (Eigen::Index i = 0; i < logit_cols.cols(); ++i) {
        const auto col = logit_cols.col(i);
        const double m = col.maxCoeff();
        const double lse = std::log((col.array() - m).exp().sum()) + m;
        total += lse - col[labels[static_cast<std::size_t>(i)]];
    }
    return total;
}

Eigen::MatrixXd column_softmax(const Eigen::MatrixXd& logit_cols) {
    Eigen::MatrixXd out(logit_cols.rows(), logit_cols.cols());
    for (Eigen::Index i = 0; i < logit_cols.cols(); ++i) {
        const auto col = logit_cols.col(i);
        Eigen::VectorXd e = (col.array() - col.maxCoeff()).exp();
        out.col(i) = e / e.sum();
    }
    return out;
}

Eigen::VectorXd safe_bias(const Network& net) {
    return net.output_bias.size() ? net.output_bias : Eigen::VectorXd::Zero(net.classes());
}

// Triggered batch: blends, clamp gate (1 where the blend survived the [0,1]
// clamp), and the per-layer post-activations of the hidden forward.
struct TriggeredForward {
    Eigen::MatrixXd x_trig;  // d x N
    Eigen::MatrixXd gate;    // d x N
    std::vector<Eigen::MatrixXd> acts;  // acts[0] = x_trig, last = features C x N
};

TriggeredForward triggered_forward(const TsaProblem& prob, const Eigen::VectorXd& q) {
    const Eigen::VectorXd& m = prob.trigger.mask;
    if (q.size() != m.size()) throw input_error("trigger pattern dimension mismatch");
    const Eigen::Index n = prob.inputs.cols();

    TriggeredForward fwd;
    Eigen::ArrayXXd blend = prob.inputs.array().colwise() * (1.0 - m.array());
    blend.colwise() += m.array() * q.array();
    fwd.x_trig = blend.cwiseMax(0.0).cwiseMin(1.0).matrix();
    fwd.gate = ((blend >= 0.0) && (blend <= 1.0)).cast<double>().matrix();

    fwd.acts.reserve(prob.net->hidden.size() + 1);
    fwd.acts.push_back(fwd.x_trig);
    for (const auto& layer : prob.net->hidden) {
        Eigen::MatrixXd h = (layer.weights * fwd.acts.back()).colwise() + layer.bias;
        if (layer.act == Activation::relu) h = h.cwiseMax(0.0);
        fwd.acts.push_back(std::move(h));
    }
    if (fwd.acts.back().rows() != prob.net->feature_dim() || fwd.acts.back().cols() != n) {
        throw input_error("triggered forward produced wrong feature shape");
    }
    return fwd;
}

// K x C relaxed output weights for a full-layer decision vector.
Eigen::MatrixXd full_layer_weights(const Eigen::VectorXd& b_hat, int classes, int cols,
                                   const Eigen::VectorXd& wgrad) {
    Eigen::MatrixXd w(classes, cols);
    for (int r = 0; r < classes; ++r) w.row(r) = slot_weights(b_hat, r, cols, wgrad).transpose();
    return w;
}

Eigen::VectorXd clamp01(const Eigen::VectorXd& v) { return v.cwiseMax(0.0).cwiseMin(1.0); }

struct TsaCache {
    bool valid = false;
    Eigen::VectorXd q_key;
    TriggeredForward fwd;
};

const TriggeredForward& cached_forward(const std::shared_ptr<TsaCache>& cache,
                                       const TsaProblem& prob, const Eigen::VectorXd& q) {
    const bool hit = cache->valid && cache->q_key.size() == q.size() &&
                     (cache->q_key.array() == q.array()).all();
    if (!hit) {
        cache->fwd = triggered_forward(prob, q);
        cache->q_key = q;
        cache->valid = true;
    }
    return cache->fwd;
}

}  // namespace

void SearchPolicy::validate() const {
    if (k_init < 0) throw input_error("k_init must be non-negative");
    if (k_max_searches < 1 || lambda_max_searches < 1) {
        throw input_error("search counts must be at least 1");
    }
    if (!(lambda_init > 0)) throw input_error("lambda_init must be positive");
}

SearchPolicy SearchPolicy::ssa_defaults() {
    SearchPolicy p;
    p.k_init = 5;
    p.k_max_searches = 4;
    p.lambda_init = 100.0;
    p.lambda_max_searches = 8;
    p.delta = 10.0;
    return p;
}

SearchPolicy SearchPolicy::tsa_defaults() {
    SearchPolicy p;
    p.k_init = 5;
    p.k_max_searches = 4;
    p.lambda_init = 100.0;
    p.lambda_max_searches = 1;
    p.asr_threshold = 98.0;
    return p;
}

double compute_margin_tau(const Network& net, const Eigen::VectorXd& x, int source) {
    if (net.classes() < 2) throw input_error("margin needs at least two classes");
    if (source < 0 || source >= net.classes()) throw input_error("source class out of range");
    const Eigen::VectorXd g = forward_features(net, x);
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < net.classes(); ++i) {
        if (i == source) continue;
        best = std::max(best, class_logit_from_features(net, g, i));
    }
    return best;
}

SsaProblem make_ssa_problem(const Network& net, const Eigen::VectorXd& x, int source, int target,
                            const Dataset& aux, double delta) {
    if (source == target) throw input_error("source and target classes must differ");
    if (source < 0 || source >= net.classes() || target < 0 || target >= net.classes()) {
        throw input_error("class index out of range");
    }
    if (!(delta > 0)) throw input_error("slack delta must be positive");
    if (aux.empty()) throw input_error("auxiliary set is empty");

    SsaProblem prob;
    prob.net = &net;
    prob.x = x;
    prob.source = source;
    prob.target = target;
    prob.delta = delta;
    prob.aux = &aux;
    const int rows[2] = {source, target};
    prob.b0 = BitVector::from_layer_rows(net.output, rows);
    prob.g_x = forward_features(net, x);
    prob.tau = compute_margin_tau(net, x, source);
    prob.wgrad = weight_gradient_vector(net.output.qbits, net.output.delta);

    const Eigen::Index n = static_cast<Eigen::Index>(aux.size());
    Eigen::MatrixXd inputs(net.input_dim(), n);
    prob.aux_labels.resize(aux.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const Sample& s = aux.samples[static_cast<std::size_t>(i)];
        if (s.x.size() != net.input_dim()) throw input_error("aux sample dimension mismatch");
        inputs.col(i) = s.x;
        prob.aux_labels[static_cast<std::size_t>(i)] = s.label;
    }
    prob.aux_features = hidden_forward(net, inputs);  // C x N
    const Eigen::MatrixXd w0 = net.output.decode();
    prob.aux_base_logits = (w0 * prob.aux_features).colwise() + safe_bias(net);  // K x N
    return prob;
}

double ssa_effectiveness_loss(const SsaProblem& prob, const Eigen::VectorXd& b_hat) {
    const int c = prob.net->feature_dim();
    if (b_hat.size() != static_cast<Eigen::Index>(2) * c * prob.wgrad.size()) {
        throw input_error("SSA decision vector must have length 2*C*Q");
    }
    const double p_s = slot_weights(b_hat, 0, c, prob.wgrad).dot(prob.g_x);
    const double p_t = slot_weights(b_hat, 1, c, prob.wgrad).dot(prob.g_x);
    return std::max(prob.tau - p_t + prob.delta, 0.0) + std::max(p_s - prob.tau + prob.delta, 0.0);
}

namespace {

// Shared by the cached SSA callbacks and the reference stealthiness_loss:
// candidate logits with the slot rows overridden by the relaxed weights.
Eigen::MatrixXd ssa_candidate_logits(const SsaProblem& prob, const Eigen::VectorXd& b_hat) {
    const int c = prob.net->feature_dim();
    Eigen::MatrixXd logit_cols = prob.aux_base_logits;
    const Eigen::VectorXd w_s = slot_weights(b_hat, 0, c, prob.wgrad);
    const Eigen::VectorXd w_t = slot_weights(b_hat, 1, c, prob.wgrad);
    const double bias_s = prob.net->output_bias.size() ? prob.net->output_bias[prob.source] : 0.0;
    const double bias_t = prob.net->output_bias.size() ? prob.net->output_bias[prob.target] : 0.0;
    logit_cols.row(prob.source) =
        (w_s.transpose() * prob.aux_features).array() + bias_s;
    logit_cols.row(prob.target) =
        (w_t.transpose() * prob.aux_features).array() + bias_t;
    return logit_cols;
}

}  // namespace

double stealthiness_loss(const Network& net, const Dataset& aux, const Eigen::VectorXd& b_hat,
                         std::span<const int> rows) {
    if (aux.empty()) throw input_error("auxiliary set is empty");
    const int c = net.feature_dim();
    const int q = net.output.qbits;
    if (b_hat.size() != static_cast<Eigen::Index>(rows.size()) * c * q) {
        throw input_error("decision vector length does not match the row layout");
    }
    const Eigen::VectorXd wgrad = weight_gradient_vector(q, net.output.delta);

    Eigen::MatrixXd inputs(net.input_dim(), static_cast<Eigen::Index>(aux.size()));
    std::vector<int> labels(aux.size());
    for (std::size_t i = 0; i < aux.size(); ++i) {
        inputs.col(static_cast<Eigen::Index>(i)) = aux.samples[i].x;
        labels[i] = aux.samples[i].label;
    }
    const Eigen::MatrixXd features = hidden_forward(net, inputs);
    const Eigen::VectorXd bias = safe_bias(net);
    Eigen::MatrixXd logit_cols = (net.output.decode() * features).colwise() + bias;
    for (std::size_t slot = 0; slot < rows.size(); ++slot) {
        const int row = rows[slot];
        if (row < 0 || row >= net.classes()) throw input_error("row index out of range");
        const Eigen::VectorXd w = slot_weights(b_hat, static_cast<int>(slot), c, wgrad);
        logit_cols.row(row) = (w.transpose() * features).array() + bias[row];
    }
    return cross_entropy_sum(logit_cols, labels);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> ssa_gradients(const SsaProblem& prob,
                                                          const Eigen::VectorXd& b_hat) {
    const int c = prob.net->feature_dim();
    Eigen::VectorXd grad_l1 = Eigen::VectorXd::Zero(b_hat.size());
    const double p_s = slot_weights(b_hat, 0, c, prob.wgrad).dot(prob.g_x);
    const double p_t = slot_weights(b_hat, 1, c, prob.wgrad).dot(prob.g_x);
    if (p_s > prob.tau - prob.delta) add_slot_gradient(grad_l1, 0, prob.g_x, prob.wgrad, 1.0);
    if (p_t < prob.tau + prob.delta) add_slot_gradient(grad_l1, 1, prob.g_x, prob.wgrad, -1.0);

    const Eigen::MatrixXd logit_cols = ssa_candidate_logits(prob, b_hat);
    const Eigen::MatrixXd probs = column_softmax(logit_cols);
    const Eigen::Index n = probs.cols();
    Eigen::VectorXd coef_s(n), coef_t(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = prob.aux_labels[static_cast<std::size_t>(i)];
        coef_s[i] = probs(prob.source, i) - (y == prob.source ? 1.0 : 0.0);
        coef_t[i] = probs(prob.target, i) - (y == prob.target ? 1.0 : 0.0);
    }
    Eigen::VectorXd grad_l2 = Eigen::VectorXd::Zero(b_hat.size());
    add_slot_gradient(grad_l2, 0, prob.aux_features * coef_s, prob.wgrad);
    add_slot_gradient(grad_l2, 1, prob.aux_features * coef_t, prob.wgrad);
    return {std::move(grad_l1), std::move(grad_l2)};
}

TsaProblem make_tsa_problem(const Network& net, int target, TriggerSpec trigger,
                            const Dataset& aux) {
    if (target < 0 || target >= net.classes()) throw input_error("target class out of range");
    if (aux.empty()) throw input_error("auxiliary set is empty");
    if (trigger.mask.size() != net.input_dim()) throw input_error("mask dimension mismatch");
    if ((trigger.mask.array() < 0.0).any() || (trigger.mask.array() > 1.0).any()) {
        throw input_error("mask entries must lie in [0,1]");
    }
    if (trigger.pattern.size() == 0) trigger.pattern = Eigen::VectorXd::Zero(trigger.mask.size());
    if (trigger.pattern.size() != trigger.mask.size()) {
        throw input_error("trigger pattern dimension mismatch");
    }

    TsaProblem prob;
    prob.net = &net;
    prob.target = target;
    prob.trigger = std::move(trigger);
    prob.aux = &aux;
    prob.b0 = BitVector::from_layer(net.output);
    prob.wgrad = weight_gradient_vector(net.output.qbits, net.output.delta);

    const Eigen::Index n = static_cast<Eigen::Index>(aux.size());
    prob.inputs.resize(net.input_dim(), n);
    prob.labels.resize(aux.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const Sample& s = aux.samples[static_cast<std::size_t>(i)];
        if (s.x.size() != net.input_dim()) throw input_error("aux sample dimension mismatch");
        prob.inputs.col(i) = s.x;
        prob.labels[static_cast<std::size_t>(i)] = s.label;
    }
    prob.clean_features = hidden_forward(net, prob.inputs);  // C x N
    return prob;
}

double tsa_effectiveness_loss(const TsaProblem& prob, const Eigen::VectorXd& b_hat,
                              const Eigen::VectorXd& q) {
    const Network& net = *prob.net;
    const Eigen::MatrixXd w = full_layer_weights(b_hat, net.classes(), net.feature_dim(), prob.wgrad);
    const TriggeredForward fwd = triggered_forward(prob, q);
    Eigen::MatrixXd logit_cols = (w * fwd.acts.back()).colwise() + safe_bias(net);
    std::vector<int> target_labels(static_cast<std::size_t>(logit_cols.cols()), prob.target);
    return cross_entropy_sum(logit_cols, target_labels);
}

namespace {

// Bit gradient of a summed cross entropy given features and (softmax - onehot)
// coefficients, both with one column per sample.
Eigen::VectorXd bits_gradient_from_coef(const Eigen::MatrixXd& coef_cols,
                                        const Eigen::MatrixXd& feature_cols,
                                        const Eigen::VectorXd& wgrad) {
    const int classes = static_cast<int>(coef_cols.rows());
    const int c = static_cast<int>(feature_cols.rows());
    Eigen::VectorXd grad =
        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(classes) * c * wgrad.size());
    const Eigen::MatrixXd a = coef_cols * feature_cols.transpose();  // K x C
    for (int r = 0; r < classes; ++r) {
        add_slot_gradient(grad, r, a.row(r).transpose(), wgrad);
    }
    return grad;
}

Eigen::MatrixXd tsa_l1_coef(const TsaProblem& prob, const Eigen::MatrixXd& logit_cols) {
    Eigen::MatrixXd coef = column_softmax(logit_cols);
    coef.row(prob.target).array() -= 1.0;
    return coef;
}

}  // namespace

TsaGradients tsa_gradients(const TsaProblem& prob, const Eigen::VectorXd& b_hat,
                           const Eigen::VectorXd& q) {
    const Network& net = *prob.net;
    const int classes = net.classes();
    const int c = net.feature_dim();
    const Eigen::MatrixXd w = full_layer_weights(b_hat, classes, c, prob.wgrad);

    TsaGradients out;

    // L1: triggered samples toward the target class
    const TriggeredForward fwd = triggered_forward(prob, q);
    const Eigen::MatrixXd& g_trig = fwd.acts.back();
    Eigen::MatrixXd trig_logits = (w * g_trig).colwise() + safe_bias(net);
    const Eigen::MatrixXd coef1 = tsa_l1_coef(prob, trig_logits);
    out.l1_b = bits_gradient_from_coef(coef1, g_trig, prob.wgrad);

    // L1 w.r.t. q: backprop to the input, gated by the clamp, masked
    Eigen::MatrixXd delta = w.transpose() * coef1;  // C x N
    for (std::size_t li = net.hidden.size(); li-- > 0;) {
        if (net.hidden[li].act == Activation::relu) {
            delta = delta.cwiseProduct((fwd.acts[li + 1].array() > 0.0).cast<double>().matrix());
        }
        delta = net.hidden[li].weights.transpose() * delta;  // d_li x N
    }
    delta = delta.cwiseProduct(fwd.gate);
    out.l1_q = delta.rowwise().sum().cwiseProduct(prob.trigger.mask);

    // L2: clean samples keep their labels
    Eigen::MatrixXd clean_logits = (w * prob.clean_features).colwise() + safe_bias(net);
    Eigen::MatrixXd coef2 = column_softmax(clean_logits);
    for (Eigen::Index i = 0; i < coef2.cols(); ++i) {
        coef2(prob.labels[static_cast<std::size_t>(i)], i) -= 1.0;
    }
    out.l2_b = bits_gradient_from_coef(coef2, prob.clean_features, prob.wgrad);
    return out;
}

LossCallbacks ssa_callbacks(const SsaProblem& prob) {
    const SsaProblem* p = &prob;
    LossCallbacks cb;
    cb.eval_l1 = [p](const Eigen::VectorXd& b_hat, const Eigen::VectorXd*) {
        return ssa_effectiveness_loss(*p, b_hat);
    };
    cb.eval_l2 = [p](const Eigen::VectorXd& b_hat, const Eigen::VectorXd*) {
        return cross_entropy_sum(ssa_candidate_logits(*p, b_hat), p->aux_labels);
    };
    cb.grad_l1_b = [p](const Eigen::VectorXd& b_hat, const Eigen::VectorXd*) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(b_hat.size());
        const int c = p->net->feature_dim();
        const double p_s = slot_weights(b_hat, 0, c, p->wgrad).dot(p->g_x);
        const double p_t = slot_weights(b_hat, 1, c, p->wgrad).dot(p->g_x);
        if (p_s > p->tau - p->delta) add_slot_gradient(grad, 0, p->g_x, p->wgrad, 1.0);
        if (p_t < p->tau + p->delta) add_slot_gradient(grad, 1, p->g_x, p->wgrad, -1.0);
        return grad;
    };
    cb.grad_l2_b = [p](const Eigen::VectorXd& b_hat, const Eigen::VectorXd*) {
        const Eigen::MatrixXd probs = column_softmax(ssa_candidate_logits(*p, b_hat));
        const Eigen::Index n = probs.cols();
        Eigen::VectorXd coef_s(n), coef_t(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int y = p->aux_labels[static_cast<std::size_t>(i)];
            coef_s[i] = probs(p->source, i) - (y == p->source ? 1.0 : 0.0);
            coef_t[i] = probs(p->target, i) - (y == p->target ? 1.0 : 0.0);
        }
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(b_hat.size());
        add_slot_gradient(grad, 0, p->aux_features * coef_s, p->wgrad);
        add_slot_gradient(grad, 1, p->aux_features * coef_t, p->wgrad);
        return grad;
    };
    return cb;
}

LossCallbacks tsa_callbacks(const TsaProblem& prob) {
    const TsaProblem* p = &prob;
    auto cache = std::make_shared<TsaCache>();
    LossCallbacks cb;
    cb.eval_l1 = [p, cache](const Eigen::VectorXd& b_hat, const Eigen::VectorXd* q) {
        if (!q) throw input_error("TSA requires the trigger variable");
        const TriggeredForward& fwd = cached_forward(cache, *p, *q);
        const Eigen::MatrixXd w =
            full_layer_weights(b_hat, p->net->classes(), p->net->feature_dim(), p->wgrad);
        Eigen::MatrixXd logit_cols = (w * fwd.acts.back()).colwise() + safe_bias(*p->net);
        std::vector<int> targets(static_cast<std::size_t>(logit_cols.cols()), p->target);
        return cross_entropy_sum(logit_cols, targets);
    };
    cb.eval_l2 = [p](const Eigen::VectorXd& b_hat, const Eigen::VectorXd*) {
        const Eigen::MatrixXd w =
            full_layer_weights(b_hat, p->net->classes(), p->net->feature_dim(), p->wgrad);
        Eigen::MatrixXd logit_cols = (w * p->clean_features).colwise() + safe_bias(*p->net);
        return cross_entropy_sum(logit_cols, p->labels);
    };
    cb.grad_l1_b = [p, cache](const Eigen::VectorXd& b_hat, const Eigen::VectorXd* q) {
        if (!q) throw input_error("TSA requires the trigger variable");
        const TriggeredForward& fwd = cached_forward(cache, *p, *q);
        const Eigen::MatrixXd w =
            full_layer_weights(b_hat, p->net->classes(), p->net->feature_dim(), p->wgrad);
        Eigen::MatrixXd trig_logits = (w * fwd.acts.back()).colwise() + safe_bias(*p->net);
        return bits_gradient_from_coef(tsa_l1_coef(*p, trig_logits), fwd.acts.back(), p->wgrad);
    };
    cb.grad_l2_b = [p](const Eigen::VectorXd& b_hat, const Eigen::VectorXd*) {
        const Eigen::MatrixXd w =
            full_layer_weights(b_hat, p->net->classes(), p->net->feature_dim(), p->wgrad);
        Eigen::MatrixXd clean_logits = (w * p->clean_features).colwise() + safe_bias(*p->net);
        Eigen::MatrixXd coef = column_softmax(clean_logits);
        for (Eigen::Index i = 0; i < coef.cols(); ++i) {
            coef(p->labels[static_cast<std::size_t>(i)], i) -= 1.0;
        }
        return bits_gradient_from_coef(coef, p->clean_features, p->wgrad);
    };
    cb.grad_l1_q = [p, cache](const Eigen::VectorXd& b_hat, const Eigen::VectorXd* q) {
        if (!q) throw input_error("TSA requires the trigger variable");
        const TriggeredForward& fwd = cached_forward(cache, *p, *q);
        const Network& net = *p->net;
        const Eigen::MatrixXd w =
            full_layer_weights(b_hat, net.classes(), net.feature_dim(), p->wgrad);
        Eigen::MatrixXd trig_logits = (w * fwd.acts.back()).colwise() + safe_bias(net);
        Eigen::MatrixXd delta = w.transpose() * tsa_l1_coef(*p, trig_logits);
        for (std::size_t li = net.hidden.size(); li-- > 0;) {
            if (net.hidden[li].act == Activation::relu) {
                delta =
                    delta.cwiseProduct((fwd.acts[li + 1].array() > 0.0).cast<double>().matrix());
            }
            delta = net.hidden[li].weights.transpose() * delta;
        }
        delta = delta.cwiseProduct(fwd.gate);
        Eigen::VectorXd grad = delta.rowwise().sum().cwiseProduct(p->trigger.mask);
        return grad;
    };
    return cb;
}

TriggerSpec make_patch_mask(int image_side, int patch_side, Corner corner) {
    if (image_side < 1 || patch_side < 1 || patch_side > image_side) {
        throw input_error("bad patch geometry");
    }
    const int d = image_side * image_side;
    Eigen::VectorXd mask = Eigen::VectorXd::Zero(d);
    const int r0 = (corner == Corner::top_left || corner == Corner::top_right)
                       ? 0
                       : image_side - patch_side;
    const int c0 = (corner == Corner::top_left || corner == Corner::bottom_left)
                       ? 0
                       : image_side - patch_side;
    for (int r = r0; r < r0 + patch_side; ++r) {
        for (int c = c0; c < c0 + patch_side; ++c) mask[r * image_side + c] = 1.0;
    }
    return {mask, Eigen::VectorXd::Zero(d)};
}

Eigen::VectorXd random_trigger_pattern(const Eigen::VectorXd& mask, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd q = Eigen::VectorXd::Zero(mask.size());
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        if (mask[i] > 0) q[i] = u(rng);
    }
    return q;
}

Network apply_bit_flips(const Network& net, const BitVector& bits) {
    Network flipped = net;
    bits.store_into(flipped.output);
    return flipped;
}

namespace {

void fill_report_from_solve(AttackReport& report, const BitVector& b0, const SolveResult& res) {
    report.original_bits = b0;
    report.final_bits = res.bits;
    report.n_flip = res.n_flip;
    report.converged = res.converged;
    report.iterations = res.iterations;
    report.trace = res.trace;
    report.flipped_bits.clear();
    for (std::size_t i = 0; i < b0.size(); ++i) {
        if (b0[i] != res.bits[i]) report.flipped_bits.push_back(b0.locate(i));
    }
}

}  // namespace

AttackReport run_ssa(const Network& net, const Eigen::VectorXd& x, int source, int target,
                     const Dataset& aux, const SearchPolicy& policy, const AdmmConfig& cfg) {
    policy.validate();
    AttackReport report;
    report.attack_type = "ssa";
    report.target_class = target;
    report.source_class = source;

    std::vector<double> deltas{policy.delta};
    if (policy.delta_escalation && policy.delta_escalated != policy.delta) {
        deltas.push_back(policy.delta_escalated);
    }

    for (double delta : deltas) {
        const SsaProblem prob = make_ssa_problem(net, x, source, target, aux, delta);
        const LossCallbacks cb = ssa_callbacks(prob);
        if (report.original_bits.size() == 0) {
            report.original_bits = prob.b0;
            report.final_bits = prob.b0;
        }
        int k = policy.k_init;
        for (int ks = 0; ks < policy.k_max_searches; ++ks, k *= 2) {
            report.searched_k.push_back(k);
            double lambda2 = policy.lambda_init;
            for (int ls = 0; ls < policy.lambda_max_searches; ++ls, lambda2 /= 2) {
                AdmmConfig solve_cfg = cfg;
                solve_cfg.lambda1 = 1.0;  // fixed for SSA
                solve_cfg.lambda2 = lambda2;
                solve_cfg.k = k;
                SolveResult res;
                try {
                    res = admm_solve(prob.b0, std::nullopt, solve_cfg, cb);
                } catch (const solver_numeric_error&) {
                    // a diverged solve is just an unsuccessful (lambda2, k) trial
                    report.k_used = k;
                    report.lambda_used = lambda2;
                    continue;
                }
                fill_report_from_solve(report, prob.b0, res);
                report.k_used = k;
                report.lambda_used = lambda2;
                const Network flipped = apply_bit_flips(net, res.bits);
                if (predict(flipped, x) == target) {
                    report.success = true;
                    report.asr = 100.0;
                    return report;
                }
            }
        }
    }
    report.success = false;
    report.asr = 0.0;
    return report;
}

AttackReport run_tsa(const Network& net, int target, const Eigen::VectorXd& mask,
                     const Dataset& aux, const SearchPolicy& policy, const AdmmConfig& cfg,
                     std::uint64_t trigger_seed) {
    policy.validate();
    if (mask.size() == 0 || mask.cwiseAbs().maxCoeff() == 0.0) {
        throw input_error("TSA needs a non-empty trigger mask");
    }
    AttackReport report;
    report.attack_type = "tsa";
    report.target_class = target;

    TriggerSpec trig{mask, random_trigger_pattern(mask, trigger_seed)};
    const TsaProblem prob = make_tsa_problem(net, target, trig, aux);
    const LossCallbacks cb = tsa_callbacks(prob);
    report.original_bits = prob.b0;
    report.final_bits = prob.b0;
    report.trigger = trig;

    int k = policy.k_init;
    for (int ks = 0; ks < policy.k_max_searches; ++ks, k *= 2) {
        report.searched_k.push_back(k);
        AdmmConfig solve_cfg = cfg;
        solve_cfg.lambda1 = policy.lambda_init;
        solve_cfg.lambda2 = 1.0;  // fixed for TSA
        solve_cfg.k = k;
        SolveResult res;
        try {
            res = admm_solve(prob.b0, trig.pattern, solve_cfg, cb);
        } catch (const solver_numeric_error&) {
            report.k_used = k;
            report.lambda_used = policy.lambda_init;
            continue;
        }
        fill_report_from_solve(report, prob.b0, res);
        report.k_used = k;
        report.lambda_used = policy.lambda_init;

        const Eigen::VectorXd q_learned = clamp01(res.q_final.value_or(trig.pattern));
        report.trigger = TriggerSpec{mask, q_learned};
        const Network flipped = apply_bit_flips(net, res.bits);
        std::size_t hits = 0;
        for (const auto& s : aux.samples) {
            const Eigen::VectorXd xt = apply_trigger(s.x, *report.trigger);
            if (predict(flipped, xt) == target) ++hits;
        }
        const double aux_asr = 100.0 * static_cast<double>(hits) / static_cast<double>(aux.size());
        report.asr = aux_asr;
        report.aux_asr = aux_asr;
        if (aux_asr >= policy.asr_threshold) {
            report.success = true;
            return report;
        }
    }
    report.success = false;
    return report;
}

}  // namespace bfa
