#ifndef BFA_NETCORE_HPP
#define BFA_NETCORE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bfa/bitrep.hpp"
#include "bfa/errors.hpp"

namespace bfa {

enum class Activation { relu, identity };

struct DenseLayer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd bias;     // out
    Activation act = Activation::relu;
};

// Feedforward classifier: fixed full-precision hidden layers plus a quantized
// output layer whose bias stays full precision and is not attackable.
struct Network {
    std::vector<DenseLayer> hidden;
    QuantLayer output;
    Eigen::VectorXd output_bias;

    int input_dim() const;
    int classes() const { return output.rows; }
    int feature_dim() const { return output.cols; }
};

// Full-precision network as produced by training; the last layer is linear.
struct FullNetwork {
    std::vector<DenseLayer> layers;
};

struct TriggerSpec {
    Eigen::VectorXd mask;     // in [0,1]^d, binary for patch masks
    Eigen::VectorXd pattern;  // q in R^d
};

struct Sample {
    Eigen::VectorXd x;
    int label = 0;
};

enum class DatasetRole { effectiveness, stealthiness, validation, unspecified };

struct Dataset {
    std::vector<Sample> samples;
    DatasetRole role = DatasetRole::unspecified;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

struct MlpSpec {
    int input_dim = 2;
    std::vector<int> hidden_widths = {32, 32, 32};
    int classes = 4;
};

struct TrainConfig {
    int epochs = 150;
    double learning_rate = 0.05;
    double momentum = 0.9;
    int batch_size = 32;
    std::uint64_t seed = 1;
};

// Inputs, outputs

// g(x; Theta): activations feeding the quantized output layer.
Eigen::VectorXd forward_features(const Network& net, const Eigen::VectorXd& x);

// Logit of one class: decoded row weights dotted with g(x;Theta). No bias term;
// override_bits, when given, is a length C*Q slice (binary or relaxed) used in
// place of the stored row bits.
double class_logit(const Network& net, const Eigen::VectorXd& x, int row,
                   std::span<const double> override_bits = {});
double class_logit_from_features(const Network& net, const Eigen::VectorXd& features, int row,
                                 std::span<const double> override_bits = {});

// Full output logits including the frozen output bias; classification argmax
// breaks ties toward the lowest class index.
Eigen::VectorXd logits(const Network& net, const Eigen::VectorXd& x);
int predict(const Network& net, const Eigen::VectorXd& x);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
double softmax_cross_entropy(const Eigen::VectorXd& logits, int label);

// (1-m) (*) x + m (*) q, clamped to the [0,1] input range.
Eigen::VectorXd apply_trigger(const Eigen::VectorXd& x, const TriggerSpec& trig);

// d p_row / d bits, length C*Q: block j equals g_j(x) * weight_gradient_vector.
Eigen::VectorXd grad_logit_wrt_bits(const Network& net, const Eigen::VectorXd& x, int row);

// Exact gradient of softmax_cross_entropy(logits(x), label) w.r.t. x, reverse
// mode through the hidden layers. output_override, when given, replaces the
// decoded output weight matrix (used with relaxed candidate bits).
Eigen::VectorXd grad_loss_wrt_input(const Network& net, const Eigen::VectorXd& x, int label,
                                    const Eigen::MatrixXd* output_override = nullptr);

// Training + quantization

FullNetwork init_network(const MlpSpec& spec, std::uint64_t seed);
FullNetwork train_model(const Dataset& train, const MlpSpec& spec, const TrainConfig& cfg);
Network quantize_network(const FullNetwork& full, int qbits);

double mean_cross_entropy(const FullNetwork& net, const Dataset& data);
double accuracy(const Network& net, const Dataset& data);  // fraction in [0,1]

}  // namespace bfa

#endif
