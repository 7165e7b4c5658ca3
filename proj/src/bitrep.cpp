#include "bfa/bitrep.hpp"

#include <cmath>
#include <string>

namespace bfa {

namespace {

void check_qbits(int qbits) {
    if (qbits < 2 || qbits > 16) {
        throw input_error("bit width must be in [2,16], got " + std::to_string(qbits));
    }
}

}  // namespace

BitWord::BitWord(int qbits) {
    check_qbits(qbits);
    bits_.assign(static_cast<std::size_t>(qbits), 0);
}

BitWord BitWord::from_bits(std::vector<std::uint8_t> bits) {
    check_qbits(static_cast<int>(bits.size()));
    for (auto b : bits) {
        if (b > 1) throw input_error("bit values must be 0 or 1");
    }
    BitWord w(static_cast<int>(bits.size()));
    w.bits_ = std::move(bits);
    return w;
}

void BitWord::set_bit(int pos, std::uint8_t value) {
    if (value > 1) throw input_error("bit values must be 0 or 1");
    bits_[static_cast<std::size_t>(pos)] = value;
}

void BitWord::flip_bit(int pos) {
    bits_[static_cast<std::size_t>(pos)] ^= 1;
}

double QuantLayer::weight(int r, int c) const {
    return decode_weight(word(r, c), delta);
}

Eigen::MatrixXd QuantLayer::decode() const {
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) w(r, c) = weight(r, c);
    return w;
}

BitVector::BitVector(std::vector<std::uint8_t> values, std::vector<int> rows, int cols, int qbits)
    : values_(std::move(values)), rows_(std::move(rows)), cols_(cols), qbits_(qbits) {
    if (values_.size() != rows_.size() * static_cast<std::size_t>(cols_) * qbits_) {
        throw input_error("bit vector length does not match its layout");
    }
    for (auto v : values_) {
        if (v > 1) throw input_error("bit values must be 0 or 1");
    }
}

BitVector BitVector::from_layer_rows(const QuantLayer& layer, std::span<const int> rows) {
    std::vector<std::uint8_t> values;
    values.reserve(rows.size() * static_cast<std::size_t>(layer.cols) * layer.qbits);
    for (int r : rows) {
        if (r < 0 || r >= layer.rows) throw input_error("row index out of range");
        for (int c = 0; c < layer.cols; ++c) {
            auto bits = layer.word(r, c).bits();
            values.insert(values.end(), bits.begin(), bits.end());
        }
    }
    return BitVector(std::move(values), std::vector<int>(rows.begin(), rows.end()),
                     layer.cols, layer.qbits);
}

BitVector BitVector::from_layer(const QuantLayer& layer) {
    std::vector<int> rows(static_cast<std::size_t>(layer.rows));
    for (int r = 0; r < layer.rows; ++r) rows[static_cast<std::size_t>(r)] = r;
    return from_layer_rows(layer, rows);
}

void BitVector::set(std::size_t i, std::uint8_t v) {
    if (v > 1) throw input_error("bit values must be 0 or 1");
    values_[i] = v;
}

void BitVector::flip(std::size_t i) { values_[i] ^= 1; }

BitVector::Location BitVector::locate(std::size_t flat_index) const {
    if (flat_index >= values_.size()) throw input_error("bit index out of range");
    const auto per_row = static_cast<std::size_t>(cols_) * qbits_;
    const auto slot = flat_index / per_row;
    const auto rest = flat_index % per_row;
    return {rows_[slot], static_cast<int>(rest / qbits_), static_cast<int>(rest % qbits_)};
}

std::size_t BitVector::index_of(int row, int col, int bit) const {
    for (std::size_t slot = 0; slot < rows_.size(); ++slot) {
        if (rows_[slot] == row) {
            return (slot * cols_ + static_cast<std::size_t>(col)) * qbits_ + bit;
        }
    }
    throw input_error("row " + std::to_string(row) + " is not covered by this bit vector");
}

Eigen::VectorXd BitVector::to_real() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(values_.size()));
    for (std::size_t i = 0; i < values_.size(); ++i) v[static_cast<Eigen::Index>(i)] = values_[i];
    return v;
}

void BitVector::store_into(QuantLayer& layer) const {
    if (cols_ != layer.cols || qbits_ != layer.qbits) {
        throw input_error("bit vector layout does not match the layer");
    }
    std::size_t i = 0;
    for (int r : rows_) {
        for (int c = 0; c < layer.cols; ++c) {
            BitWord& w = layer.word(r, c);
            for (int b = 0; b < qbits_; ++b) w.set_bit(b, values_[i++]);
        }
    }
}

BitWord encode_twos_complement(long value, int qbits) {
    check_qbits(qbits);
    const long lo = -(1L << (qbits - 1));
    const long hi = (1L << (qbits - 1)) - 1;
    if (value < lo || value > hi) {
        throw input_error("value " + std::to_string(value) + " not representable in " +
                          std::to_string(qbits) + " bits");
    }
    const unsigned long pattern =
        static_cast<unsigned long>(value) & ((1UL << qbits) - 1);
    BitWord w(qbits);
    for (int i = 0; i < qbits; ++i) w.set_bit(i, static_cast<std::uint8_t>((pattern >> i) & 1));
    return w;
}

double decode_weight(const BitWord& word, double delta) {
    if (!(delta > 0)) throw input_error("delta must be positive");
    return static_cast<double>(decode_int(word)) * delta;
}

long decode_int(const BitWord& word) {
    const int q = word.qbits();
    long acc = -(static_cast<long>(word.bit(q - 1)) << (q - 1));
    for (int i = 0; i < q - 1; ++i) acc += static_cast<long>(word.bit(i)) << i;
    return acc;
}

Eigen::VectorXd weight_gradient_vector(int qbits, double delta) {
    check_qbits(qbits);
    if (!(delta > 0)) throw input_error("delta must be positive");
    Eigen::VectorXd g(qbits);
    for (int i = 0; i < qbits - 1; ++i) g[i] = std::ldexp(delta, i);
    g[qbits - 1] = -std::ldexp(delta, qbits - 1);
    return g;
}

QuantLayer quantize_layer(const Eigen::MatrixXd& weights, int qbits) {
    check_qbits(qbits);
    if (!weights.allFinite()) throw input_error("weights must be finite");

    const double wmax = weights.cwiseAbs().maxCoeff();
    const long hi = (1L << (qbits - 1)) - 1;
    const long lo = -(1L << (qbits - 1));
    const double delta = wmax > 0 ? wmax / static_cast<double>(hi) : 1.0;

    QuantLayer layer;
    layer.rows = static_cast<int>(weights.rows());
    layer.cols = static_cast<int>(weights.cols());
    layer.qbits = qbits;
    layer.delta = delta;
    layer.words.reserve(static_cast<std::size_t>(layer.rows) * layer.cols);
    for (int r = 0; r < layer.rows; ++r) {
        for (int c = 0; c < layer.cols; ++c) {
            // round half away from zero, then clamp to the representable range
            const double scaled = weights(r, c) / delta;
            long q = static_cast<long>(scaled >= 0 ? std::floor(scaled + 0.5)
                                                   : std::ceil(scaled - 0.5));
            q = std::min(hi, std::max(lo, q));
            layer.words.push_back(encode_twos_complement(q, qbits));
        }
    }
    return layer;
}

long hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) throw input_error("hamming distance needs equal lengths");
    long d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

long hamming_distance(const BitVector& a, const BitVector& b) {
    return hamming_distance(std::span<const std::uint8_t>(a.values()),
                            std::span<const std::uint8_t>(b.values()));
}

}  // namespace bfa
