#ifndef BFA_DATAGEN_HPP
#define BFA_DATAGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bfa/netcore.hpp"

namespace bfa {

// 2-D Gaussian blobs, one cluster per class. Default geometry: 4 classes at
// (+-2, +-2), std 0.5, 200 samples each.
struct BlobSpec {
    int classes = 4;
    std::vector<Eigen::Vector2d> centers;  // empty selects the default corners
    double stddev = 0.5;
    int per_class = 200;
    std::uint64_t seed = 7;

    void validate() const;
    std::vector<Eigen::Vector2d> effective_centers() const;
};

Dataset generate_blobs(const BlobSpec& spec);

// Low-resolution grayscale "images": per-class template plus Gaussian noise,
// clamped to [0,1].
struct ImageClassSpec {
    int side = 8;
    int classes = 4;
    std::vector<Eigen::VectorXd> templates;  // empty selects gradient defaults
    double noise_std = 0.1;
    int per_class = 150;
    std::uint64_t seed = 11;

    void validate() const;
    std::vector<Eigen::VectorXd> effective_templates() const;
};

Dataset generate_patch_classes(const ImageClassSpec& spec);

// Distinct edge/corner gradient templates in [0,1]^(side*side).
std::vector<Eigen::VectorXd> default_patch_templates(int side, int classes);

// CSV rows: d feature columns then an integer label column.
Dataset load_csv_dataset(const std::string& path, int dim, int classes);
void save_csv_dataset(const Dataset& data, const std::string& path);

struct DatasetSplit {
    Dataset train;
    Dataset aux;
    Dataset validation;
};

// Disjoint partition by shuffled indices; remaining samples go to validation.
DatasetSplit split_dataset(const Dataset& data, double train_frac, double aux_frac,
                           std::uint64_t seed);

}  // namespace bfa

#endif
