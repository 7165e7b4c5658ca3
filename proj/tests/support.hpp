#ifndef BFA_TESTS_SUPPORT_HPP
#define BFA_TESTS_SUPPORT_HPP

#include <functional>
#include <random>

#include <Eigen/Dense>

#include "bfa/bitrep.hpp"
#include "bfa/netcore.hpp"

namespace bfa::testing {

// Central finite differences of a scalar function, step 1e-4 by default.
inline Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                         const Eigen::VectorXd& x, double step = 1e-4) {
    Eigen::VectorXd grad(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + step;
        const double hi = f(probe);
        probe[i] = x[i] - step;
        const double lo = f(probe);
        probe[i] = x[i];
        grad[i] = (hi - lo) / (2 * step);
    }
    return grad;
}

inline double relative_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
    return (got - want).norm() / std::max(1.0, want.norm());
}

// Random quantized network with identity or relu hidden layers.
inline Network random_network(std::mt19937_64& rng, int input_dim, int hidden_width, int classes,
                              int qbits, int hidden_layers = 2) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    FullNetwork full;
    int prev = input_dim;
    for (int l = 0; l < hidden_layers; ++l) {
        DenseLayer layer;
        layer.weights.resize(hidden_width, prev);
        for (int r = 0; r < hidden_width; ++r)
            for (int c = 0; c < prev; ++c) layer.weights(r, c) = u(rng);
        layer.bias.resize(hidden_width);
        for (int r = 0; r < hidden_width; ++r) layer.bias[r] = 0.1 * u(rng);
        layer.act = Activation::relu;
        full.layers.push_back(std::move(layer));
        prev = hidden_width;
    }
    DenseLayer out;
    out.weights.resize(classes, prev);
    for (int r = 0; r < classes; ++r)
        for (int c = 0; c < prev; ++c) out.weights(r, c) = u(rng);
    out.bias.resize(classes);
    for (int r = 0; r < classes; ++r) out.bias[r] = 0.1 * u(rng);
    out.act = Activation::identity;
    full.layers.push_back(std::move(out));
    return quantize_network(full, qbits);
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double lo = -1.0,
                                     double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = u(rng);
    return v;
}

inline Dataset random_dataset(std::mt19937_64& rng, int n, int dim, int classes, double lo = -1.0,
                              double hi = 1.0) {
    std::uniform_int_distribution<int> lab(0, classes - 1);
    Dataset data;
    for (int i = 0; i < n; ++i) data.samples.push_back({random_vector(rng, dim, lo, hi), lab(rng)});
    return data;
}

// A quant layer with the given integers and delta, bypassing quantize_layer.
inline QuantLayer layer_from_ints(const std::vector<std::vector<long>>& ints, double delta,
                                  int qbits) {
    QuantLayer layer;
    layer.rows = static_cast<int>(ints.size());
    layer.cols = static_cast<int>(ints.at(0).size());
    layer.qbits = qbits;
    layer.delta = delta;
    for (const auto& row : ints)
        for (long v : row) layer.words.push_back(encode_twos_complement(v, qbits));
    return layer;
}

}  // namespace bfa::testing

#endif
