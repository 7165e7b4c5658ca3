#include "bfa/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace bfa {

namespace {

Eigen::VectorXd apply_activation(Eigen::VectorXd v, Activation act) {
    if (act == Activation::relu) v = v.cwiseMax(0.0);
    return v;
}

Eigen::VectorXd full_forward(const FullNetwork& net, const Eigen::VectorXd& x) {
    Eigen::VectorXd h = x;
    for (const auto& layer : net.layers) {
        h = apply_activation(layer.weights * h + layer.bias, layer.act);
    }
    return h;
}

}  // namespace

int Network::input_dim() const {
    return hidden.empty() ? output.cols : static_cast<int>(hidden.front().weights.cols());
}

Eigen::VectorXd forward_features(const Network& net, const Eigen::VectorXd& x) {
    if (x.size() != net.input_dim()) throw input_error("input dimension mismatch");
    Eigen::VectorXd h = x;
    for (const auto& layer : net.hidden) {
        if (layer.weights.cols() != h.size()) throw input_error("layer dimension mismatch");
        h = apply_activation(layer.weights * h + layer.bias, layer.act);
    }
    if (h.size() != net.feature_dim()) throw input_error("feature dimension mismatch");
    return h;
}

double class_logit_from_features(const Network& net, const Eigen::VectorXd& features, int row,
                                 std::span<const double> override_bits) {
    if (row < 0 || row >= net.classes()) throw input_error("class row out of range");
    if (features.size() != net.feature_dim()) throw input_error("feature dimension mismatch");
    const int c = net.output.cols;
    const int q = net.output.qbits;
    if (override_bits.empty()) {
        double acc = 0;
        for (int j = 0; j < c; ++j) acc += net.output.weight(row, j) * features[j];
        return acc;
    }
    if (static_cast<int>(override_bits.size()) != c * q) {
        throw input_error("override slice must have length C*Q");
    }
    const Eigen::VectorXd wgrad = weight_gradient_vector(q, net.output.delta);
    double acc = 0;
    for (int j = 0; j < c; ++j) {
        double w = 0;
        for (int b = 0; b < q; ++b) w += wgrad[b] * override_bits[static_cast<std::size_t>(j) * q + b];
        acc += w * features[j];
    }
    return acc;
}

double class_logit(const Network& net, const Eigen::VectorXd& x, int row,
                   std::span<const double> override_bits) {
    return class_logit_from_features(net, forward_features(net, x), row, override_bits);
}

Eigen::VectorXd logits(const Network& net, const Eigen::VectorXd& x) {
    const Eigen::VectorXd g = forward_features(net, x);
    Eigen::VectorXd out = net.output.decode() * g;
    if (net.output_bias.size() > 0) out += net.output_bias;
    return out;
}

int predict(const Network& net, const Eigen::VectorXd& x) {
    const Eigen::VectorXd out = logits(net, x);
    int best = 0;
    for (int i = 1; i < out.size(); ++i) {
        if (out[i] > out[best]) best = i;
    }
    return best;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
    const double m = z.maxCoeff();
    Eigen::VectorXd e = (z.array() - m).exp();
    return e / e.sum();
}

double softmax_cross_entropy(const Eigen::VectorXd& z, int label) {
    if (label < 0 || label >= z.size()) throw input_error("label out of range");
    if (!z.allFinite()) throw input_error("logits must be finite");
    const double m = z.maxCoeff();
    const double lse = std::log((z.array() - m).exp().sum()) + m;
    return lse - z[label];
}

Eigen::VectorXd apply_trigger(const Eigen::VectorXd& x, const TriggerSpec& trig) {
    if (x.size() != trig.mask.size() || x.size() != trig.pattern.size()) {
        throw input_error("trigger dimension mismatch");
    }
    Eigen::VectorXd blended =
        (1.0 - trig.mask.array()) * x.array() + trig.mask.array() * trig.pattern.array();
    return blended.cwiseMax(0.0).cwiseMin(1.0);
}

Eigen::VectorXd grad_logit_wrt_bits(const Network& net, const Eigen::VectorXd& x, int row) {
    if (row < 0 || row >= net.classes()) throw input_error("class row out of range");
    const Eigen::VectorXd g = forward_features(net, x);
    const int c = net.output.cols;
    const int q = net.output.qbits;
    const Eigen::VectorXd wgrad = weight_gradient_vector(q, net.output.delta);
    Eigen::VectorXd out(static_cast<Eigen::Index>(c) * q);
    for (int j = 0; j < c; ++j) out.segment(static_cast<Eigen::Index>(j) * q, q) = g[j] * wgrad;
    return out;
}

Eigen::VectorXd grad_loss_wrt_input(const Network& net, const Eigen::VectorXd& x, int label,
                                    const Eigen::MatrixXd* output_override) {
    if (x.size() != net.input_dim()) throw input_error("input dimension mismatch");
    if (label < 0 || label >= net.classes()) throw input_error("label out of range");

    // forward, keeping post-activation values per hidden layer
    std::vector<Eigen::VectorXd> acts;
    acts.reserve(net.hidden.size() + 1);
    acts.push_back(x);
    for (const auto& layer : net.hidden) {
        acts.push_back(apply_activation(layer.weights * acts.back() + layer.bias, layer.act));
    }

    const Eigen::MatrixXd w_out = output_override ? *output_override : net.output.decode();
    Eigen::VectorXd z = w_out * acts.back();
    if (net.output_bias.size() > 0) z += net.output_bias;

    Eigen::VectorXd delta = softmax(z);
    delta[label] -= 1.0;

    Eigen::VectorXd grad = w_out.transpose() * delta;
    for (auto it = net.hidden.rbegin(); it != net.hidden.rend(); ++it) {
        const std::size_t li = static_cast<std::size_t>(net.hidden.rend() - it);  // 1-based from input
        if (it->act == Activation::relu) {
            grad = grad.cwiseProduct((acts[li].array() > 0.0).cast<double>().matrix());
        }
        grad = it->weights.transpose() * grad;
    }
    return grad;
}

FullNetwork init_network(const MlpSpec& spec, std::uint64_t seed) {
    if (spec.input_dim <= 0 || spec.classes <= 0) throw input_error("bad architecture spec");
    std::mt19937_64 rng(seed);
    std::vector<int> dims;
    dims.push_back(spec.input_dim);
    dims.insert(dims.end(), spec.hidden_widths.begin(), spec.hidden_widths.end());
    dims.push_back(spec.classes);

    FullNetwork net;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const int in = dims[i], out = dims[i + 1];
        if (in <= 0 || out <= 0) throw input_error("bad architecture spec");
        const bool last = i + 2 == dims.size();
        DenseLayer layer;
        layer.weights.resize(out, in);
        layer.bias = Eigen::VectorXd::Zero(out);
        if (last) {
            // zero head: initial logits are zero, so the untrained loss is ln K
            layer.weights.setZero();
        } else {
            // He-scaled uniform weights; biases spread the relu thresholds so
            // activation patterns differ between nearby inputs
            const double bound = std::sqrt(6.0 / in);
            std::uniform_real_distribution<double> u(-bound, bound);
            for (int r = 0; r < out; ++r)
                for (int col = 0; col < in; ++col) layer.weights(r, col) = u(rng);
        }
        layer.act = last ? Activation::identity : Activation::relu;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

double mean_cross_entropy(const FullNetwork& net, const Dataset& data) {
    if (data.empty()) throw input_error("dataset is empty");
    double total = 0;
    for (const auto& s : data.samples) {
        total += softmax_cross_entropy(full_forward(net, s.x), s.label);
    }
    return total / static_cast<double>(data.size());
}

namespace {

// Place every hidden unit's threshold on the pre-activation of a randomly
// chosen training sample. Nearby inputs then differ in their relu patterns,
// which keeps the learned feature map locally varied instead of collapsing
// each cluster onto one linear piece.
void seed_biases_from_data(FullNetwork& net, const Dataset& train, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
    const std::size_t probe_count = std::min<std::size_t>(train.size(), 128);
    std::vector<Eigen::VectorXd> probes;
    probes.reserve(probe_count);
    for (std::size_t i = 0; i < probe_count; ++i) probes.push_back(train.samples[pick(rng)].x);

    for (std::size_t li = 0; li + 1 < net.layers.size(); ++li) {
        DenseLayer& layer = net.layers[li];
        std::uniform_int_distribution<std::size_t> pick_probe(0, probes.size() - 1);
        std::uniform_real_distribution<double> shift(li + 2 == net.layers.size() ? 0.2 : 0.0, li + 2 == net.layers.size() ? 0.8 : 0.4);
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
            const double pre = layer.weights.row(r).dot(probes[pick_probe(rng)]);
            // the extra negative shift keeps units selective: each one stays
            // silent on part of the data, so activation supports vary
            layer.bias[r] = -pre - shift(rng) * std::abs(pre);
        }
        for (auto& probe : probes) {
            probe = apply_activation(layer.weights * probe + layer.bias, layer.act);
        }
    }
}

}  // namespace

FullNetwork train_model(const Dataset& train, const MlpSpec& spec, const TrainConfig& cfg) {
    if (train.empty()) throw input_error("training set is empty");
    for (const auto& s : train.samples) {
        if (s.label < 0 || s.label >= spec.classes) throw input_error("label out of range");
        if (!s.x.allFinite()) throw input_error("non-finite training sample");
    }

    FullNetwork net = init_network(spec, cfg.seed);
    {
        std::mt19937_64 bias_rng(cfg.seed ^ 0xda3e39cb94b95bdbULL);
        seed_biases_from_data(net, train, bias_rng);
    }
    std::vector<Eigen::MatrixXd> vel_w;
    std::vector<Eigen::VectorXd> vel_b;
    for (const auto& layer : net.layers) {
        vel_w.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
        vel_b.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    }

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    const int batch = std::max(1, cfg.batch_size);
    const std::size_t n_layers = net.layers.size();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t stop = std::min(order.size(), start + batch);

            std::vector<Eigen::MatrixXd> grad_w;
            std::vector<Eigen::VectorXd> grad_b;
            for (const auto& layer : net.layers) {
                grad_w.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
                grad_b.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
            }

            for (std::size_t bi = start; bi < stop; ++bi) {
                const Sample& s = train.samples[order[bi]];
                std::vector<Eigen::VectorXd> acts{s.x};
                for (const auto& layer : net.layers) {
                    acts.push_back(apply_activation(layer.weights * acts.back() + layer.bias,
                                                    layer.act));
                }
                Eigen::VectorXd delta = softmax(acts.back());
                delta[s.label] -= 1.0;
                for (std::size_t li = n_layers; li-- > 0;) {
                    grad_w[li] += delta * acts[li].transpose();
                    grad_b[li] += delta;
                    if (li > 0) {
                        delta = net.layers[li].weights.transpose() * delta;
                        if (net.layers[li - 1].act == Activation::relu) {
                            delta = delta.cwiseProduct(
                                (acts[li].array() > 0.0).cast<double>().matrix());
                        }
                    }
                }
            }

            const double scale = 1.0 / static_cast<double>(stop - start);
            for (std::size_t li = 0; li < n_layers; ++li) {
                vel_w[li] = cfg.momentum * vel_w[li] - cfg.learning_rate * scale * grad_w[li];
                vel_b[li] = cfg.momentum * vel_b[li] - cfg.learning_rate * scale * grad_b[li];
                net.layers[li].weights += vel_w[li];
                net.layers[li].bias += vel_b[li];
            }
        }

        const double loss = mean_cross_entropy(net, train);
        if (!std::isfinite(loss)) {
            throw numeric_error("training diverged at epoch " + std::to_string(epoch));
        }
    }
    return net;
}

Network quantize_network(const FullNetwork& full, int qbits) {
    if (full.layers.empty()) throw input_error("cannot quantize an empty network");
    Network net;
    net.hidden.assign(full.layers.begin(), full.layers.end() - 1);
    const DenseLayer& last = full.layers.back();
    net.output = quantize_layer(last.weights, qbits);
    net.output_bias = last.bias;
    return net;
}

double accuracy(const Network& net, const Dataset& data) {
    if (data.empty()) throw input_error("dataset is empty");
    std::size_t hits = 0;
    for (const auto& s : data.samples) hits += predict(net, s.x) == s.label;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace bfa
