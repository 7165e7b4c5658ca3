#ifndef BFA_MODEL_IO_HPP
#define BFA_MODEL_IO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bfa/attacks.hpp"
#include "bfa/datagen.hpp"
#include "bfa/lpbox.hpp"
#include "bfa/netcore.hpp"

namespace bfa {

// Model manifest: {version, input_dim, class_count,
//   hidden:[{rows, cols, activation, weights, bias}],
//   output:{Q, delta, ints, bias}}.
// Hidden weights are row-major flat arrays; output ints are K rows of C
// signed integers.
nlohmann::json model_to_json(const Network& net);
Network model_from_json(const nlohmann::json& j);
void save_model(const Network& net, const std::string& path);
Network load_model(const std::string& path);

struct DatasetConfig {
    std::string type = "blobs";  // blobs | patch_images | csv
    int classes = 4;
    int per_class = 200;
    double stddev = 0.5;     // blobs
    double noise_std = 0.1;  // patch images
    int side = 8;            // patch images
    int input_dim = 2;       // csv
    std::string csv_path;
    double train_frac = 0.7;
    double aux_frac = 0.15;
    std::uint64_t seed = 7;
    std::optional<std::uint64_t> split_seed;  // defaults to a mix of seed

    Dataset generate() const;
    int dim() const;
    std::uint64_t effective_split_seed() const;
};

struct TrainSection {
    std::vector<int> hidden_widths = {32, 32, 32};
    int epochs = 150;
    double learning_rate = 0.05;
    double momentum = 0.9;
    int batch_size = 32;
    int qbits = 8;
    std::uint64_t seed = 1;
};

struct AttackSection {
    std::string mode = "ssa";  // ssa | tsa
    int sample_index = 0;      // SSA: index into the validation split
    std::optional<int> source;
    int target = 1;
    int trigger_side = 2;
    std::string trigger_corner = "bottom_right";
};

struct CampaignSection {
    int per_target = 10;
    std::vector<int> targets;  // empty means every class
    int jobs = 1;
};

struct OracleSection {
    int v = 12;
    int k = 2;
    std::string objective = "linear";  // linear | quadratic
    std::uint64_t seed = 3;
};

// Strict run configuration: unknown keys are rejected with their name. The
// admm section is overlaid onto the per-mode defaults at use time.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    DatasetConfig dataset;
    TrainSection train;
    nlohmann::json admm_overrides = nlohmann::json::object();
    nlohmann::json search_overrides = nlohmann::json::object();
    AttackSection attack;
    CampaignSection campaign;
    OracleSection oracle;

    AdmmConfig admm_for(const std::string& mode) const;
    SearchPolicy policy_for(const std::string& mode) const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

Corner corner_from_string(const std::string& name);

}  // namespace bfa

#endif
