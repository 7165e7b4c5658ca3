#include "bfa/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace bfa {

void BlobSpec::validate() const {
    if (classes < 1) throw input_error("blob spec needs at least one class");
    if (!(stddev >= 0)) throw input_error("blob std must be non-negative");
    if (per_class < 1) throw input_error("per_class must be at least 1");
    const auto centers_eff = effective_centers();
    if (static_cast<int>(centers_eff.size()) != classes) {
        throw input_error("need one center per class");
    }
    for (std::size_t i = 0; i < centers_eff.size(); ++i) {
        for (std::size_t j = i + 1; j < centers_eff.size(); ++j) {
            if (centers_eff[i] == centers_eff[j]) throw input_error("blob centers must be distinct");
        }
    }
}

std::vector<Eigen::Vector2d> BlobSpec::effective_centers() const {
    if (!centers.empty()) return centers;
    static const double corner[4][2] = {{2, 2}, {-2, 2}, {-2, -2}, {2, -2}};
    std::vector<Eigen::Vector2d> out;
    out.reserve(static_cast<std::size_t>(classes));
    for (int c = 0; c < classes; ++c) {
        // beyond four classes, spread further corners outward
        const int ring = c / 4;
        out.emplace_back(corner[c % 4][0] * (1 + ring), corner[c % 4][1] * (1 + ring));
    }
    return out;
}

Dataset generate_blobs(const BlobSpec& spec) {
    spec.validate();
    const auto centers = spec.effective_centers();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Dataset data;
    data.samples.reserve(static_cast<std::size_t>(spec.classes) * spec.per_class);
    for (int c = 0; c < spec.classes; ++c) {
        for (int i = 0; i < spec.per_class; ++i) {
            Eigen::VectorXd x(2);
            x[0] = centers[static_cast<std::size_t>(c)][0];
            x[1] = centers[static_cast<std::size_t>(c)][1];
            if (spec.stddev > 0) {
                x[0] += spec.stddev * gauss(rng);
                x[1] += spec.stddev * gauss(rng);
            }
            data.samples.push_back({std::move(x), c});
        }
    }
    return data;
}

void ImageClassSpec::validate() const {
    if (side < 2) throw input_error("image side must be at least 2");
    if (classes < 1) throw input_error("image spec needs at least one class");
    if (!(noise_std >= 0)) throw input_error("noise std must be non-negative");
    if (per_class < 1) throw input_error("per_class must be at least 1");
    const auto temps = effective_templates();
    if (static_cast<int>(temps.size()) != classes) throw input_error("need one template per class");
    for (const auto& t : temps) {
        if (t.size() != static_cast<Eigen::Index>(side) * side) {
            throw input_error("template size must be side*side");
        }
        if ((t.array() < 0.0).any() || (t.array() > 1.0).any()) {
            throw input_error("template values must lie in [0,1]");
        }
    }
}

std::vector<Eigen::VectorXd> ImageClassSpec::effective_templates() const {
    if (!templates.empty()) return templates;
    return default_patch_templates(side, classes);
}

std::vector<Eigen::VectorXd> default_patch_templates(int side, int classes) {
    if (side < 2) throw input_error("image side must be at least 2");
    const int d = side * side;
    const double span = static_cast<double>(side - 1);
    // radial gradients anchored at three corners plus the top-edge midpoint;
    // every template stays dim near the bottom-right, which keeps that region
    // class-neutral (it hosts the default trigger patch)
    const double anchors[4][2] = {
        {0.0, 0.0}, {0.0, span}, {span, 0.0}, {0.0, span / 2.0}};
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(classes));
    for (int cls = 0; cls < classes; ++cls) {
        Eigen::VectorXd t(d);
        const double ar = anchors[cls % 4][0];
        const double ac = anchors[cls % 4][1];
        const double reach = span * (1.0 + 0.15 * (cls / 4));  // distinct rings beyond 4
        const int quiet = side >= 6 ? side - 3 : side;  // class-free trigger zone
        for (int r = 0; r < side; ++r) {
            for (int c = 0; c < side; ++c) {
                const double dist = std::hypot(r - ar, c - ac);
                const bool quiet_zone = r >= quiet && c >= quiet;
                t[r * side + c] = quiet_zone ? 0.0 : std::max(0.0, 1.0 - dist / reach);
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

Dataset generate_patch_classes(const ImageClassSpec& spec) {
    spec.validate();
    const auto temps = spec.effective_templates();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Dataset data;
    data.samples.reserve(static_cast<std::size_t>(spec.classes) * spec.per_class);
    for (int c = 0; c < spec.classes; ++c) {
        for (int i = 0; i < spec.per_class; ++i) {
            Eigen::VectorXd x = temps[static_cast<std::size_t>(c)];
            if (spec.noise_std > 0) {
                for (Eigen::Index j = 0; j < x.size(); ++j) x[j] += spec.noise_std * gauss(rng);
            }
            x = x.cwiseMax(0.0).cwiseMin(1.0);
            data.samples.push_back({std::move(x), c});
        }
    }
    return data;
}

Dataset load_csv_dataset(const std::string& path, int dim, int classes) {
    if (dim < 1 || classes < 1) throw input_error("bad dataset dimensions");
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);

    Dataset data;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> fields;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t consumed = 0;
                const double v = std::stod(cell, &consumed);
                while (consumed < cell.size() &&
                       std::isspace(static_cast<unsigned char>(cell[consumed]))) {
                    ++consumed;
                }
                if (consumed != cell.size()) throw std::invalid_argument(cell);
                fields.push_back(v);
            } catch (const std::exception&) {
                throw input_error(path + ":" + std::to_string(line_no) + ": bad number '" + cell +
                                  "'");
            }
        }
        if (static_cast<int>(fields.size()) != dim + 1) {
            throw input_error(path + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(dim + 1) + " columns, got " +
                              std::to_string(fields.size()));
        }
        const double label_raw = fields.back();
        const int label = static_cast<int>(label_raw);
        if (label != label_raw || label < 0 || label >= classes) {
            throw input_error(path + ":" + std::to_string(line_no) + ": label out of range");
        }
        Eigen::VectorXd x(dim);
        for (int j = 0; j < dim; ++j) {
            if (!std::isfinite(fields[static_cast<std::size_t>(j)])) {
                throw input_error(path + ":" + std::to_string(line_no) + ": non-finite feature");
            }
            x[j] = fields[static_cast<std::size_t>(j)];
        }
        data.samples.push_back({std::move(x), label});
    }
    if (data.empty()) throw input_error(path + ": empty dataset");
    return data;
}

void save_csv_dataset(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out.precision(17);
    for (const auto& s : data.samples) {
        for (Eigen::Index j = 0; j < s.x.size(); ++j) out << s.x[j] << ',';
        out << s.label << '\n';
    }
    if (!out) throw io_error("failed writing " + path);
}

DatasetSplit split_dataset(const Dataset& data, double train_frac, double aux_frac,
                           std::uint64_t seed) {
    if (data.empty()) throw input_error("cannot split an empty dataset");
    if (!(train_frac >= 0) || !(aux_frac >= 0) || train_frac + aux_frac > 1.0) {
        throw input_error("split fractions must be non-negative and sum to at most 1");
    }
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const auto n = data.size();
    const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
    const auto n_aux = static_cast<std::size_t>(std::llround(aux_frac * static_cast<double>(n)));

    DatasetSplit split;
    split.train.role = DatasetRole::unspecified;
    split.aux.role = DatasetRole::stealthiness;
    split.validation.role = DatasetRole::validation;
    for (std::size_t i = 0; i < n; ++i) {
        const Sample& s = data.samples[order[i]];
        if (i < n_train) {
            split.train.samples.push_back(s);
        } else if (i < n_train + n_aux) {
            split.aux.samples.push_back(s);
        } else {
            split.validation.samples.push_back(s);
        }
    }
    return split;
}

}  // namespace bfa
