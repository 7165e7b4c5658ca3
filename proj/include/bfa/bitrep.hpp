#ifndef BFA_BITREP_HPP
#define BFA_BITREP_HPP

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bfa/errors.hpp"

namespace bfa {

// One Q-bit two's-complement weight. Bits are stored LSB first:
// bits[0] = v_1, ..., bits[Q-2] = v_{Q-1}, bits[Q-1] = v_Q (sign bit).
class BitWord {
public:
    explicit BitWord(int qbits);
    static BitWord from_bits(std::vector<std::uint8_t> bits);

    int qbits() const { return static_cast<int>(bits_.size()); }
    std::uint8_t bit(int pos) const { return bits_[static_cast<std::size_t>(pos)]; }
    void set_bit(int pos, std::uint8_t value);
    void flip_bit(int pos);
    std::span<const std::uint8_t> bits() const { return bits_; }

    bool operator==(const BitWord&) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

// Quantized K x C weight matrix with a shared step size delta, row-major words.
struct QuantLayer {
    int rows = 0;   // output classes K
    int cols = 0;   // input features C
    int qbits = 0;  // Q
    double delta = 1.0;
    std::vector<BitWord> words;  // rows*cols, row-major

    const BitWord& word(int r, int c) const { return words[static_cast<std::size_t>(r) * cols + c]; }
    BitWord& word(int r, int c) { return words[static_cast<std::size_t>(r) * cols + c]; }
    double weight(int r, int c) const;
    Eigen::MatrixXd decode() const;  // K x C real weights
};

// Flattened binary decision variable over a set of class rows of a QuantLayer.
// Index layout: ((row_slot * C) + col) * Q + bit, i.e. the Q bits of one weight
// are contiguous LSB first, columns vary next, covered rows last.
class BitVector {
public:
    BitVector() = default;
    BitVector(std::vector<std::uint8_t> values, std::vector<int> rows, int cols, int qbits);

    // Flatten the given class rows of a layer, in the order given.
    static BitVector from_layer_rows(const QuantLayer& layer, std::span<const int> rows);
    // Flatten every row of the layer.
    static BitVector from_layer(const QuantLayer& layer);

    std::size_t size() const { return values_.size(); }
    std::uint8_t operator[](std::size_t i) const { return values_[i]; }
    void set(std::size_t i, std::uint8_t v);
    void flip(std::size_t i);

    struct Location {
        int row = 0;  // class row in the layer
        int col = 0;
        int bit = 0;
        bool operator==(const Location&) const = default;
    };
    Location locate(std::size_t flat_index) const;
    std::size_t index_of(int row, int col, int bit) const;  // row = actual layer row

    const std::vector<int>& covered_rows() const { return rows_; }
    int cols() const { return cols_; }
    int qbits() const { return qbits_; }
    const std::vector<std::uint8_t>& values() const { return values_; }

    Eigen::VectorXd to_real() const;
    // Write the covered rows back into the layer (inverse of from_layer_rows).
    void store_into(QuantLayer& layer) const;

    bool operator==(const BitVector&) const = default;

private:
    std::vector<std::uint8_t> values_;
    std::vector<int> rows_;
    int cols_ = 0;
    int qbits_ = 0;
};

// Two's-complement encoding of an integer in [-2^{Q-1}, 2^{Q-1}-1].
BitWord encode_twos_complement(long value, int qbits);

// h(v): decoded real weight of a word, Eq-style signed two's-complement scale.
double decode_weight(const BitWord& word, double delta);

// Integer value of a word (decode with delta = 1, exact).
long decode_int(const BitWord& word);

// Constant gradient of h(.) w.r.t. the bits, ordered (v_1,...,v_{Q-1},v_Q):
// [2^0, 2^1, ..., 2^{Q-2}, -2^{Q-1}] * delta.
Eigen::VectorXd weight_gradient_vector(int qbits, double delta);

// Layer-wise symmetric uniform quantization: delta = max|w| / (2^{Q-1}-1)
// (1 if all weights are zero), rounding half away from zero, clamped to range.
QuantLayer quantize_layer(const Eigen::MatrixXd& weights, int qbits);

long hamming_distance(const BitVector& a, const BitVector& b);
long hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

}  // namespace bfa

#endif
