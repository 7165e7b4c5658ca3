#include "bfa/model_io.hpp"

#include <fstream>
#include <set>

namespace bfa {

namespace {

constexpr int kModelVersion = 1;

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                         const std::string& where) {
    if (!j.is_object()) throw input_error(where + " must be a JSON object");
    for (const auto& item : j.items()) {
        if (!known.contains(item.key())) {
            throw input_error("unknown key \"" + item.key() + "\" in " + where);
        }
    }
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw input_error(std::string("bad value for key \"") + key + "\"");
        }
    }
}

std::string activation_name(Activation act) {
    return act == Activation::relu ? "relu" : "identity";
}

Activation activation_from(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "identity") return Activation::identity;
    throw input_error("unknown activation \"" + name + "\"");
}

std::vector<double> to_flat(const Eigen::MatrixXd& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    return flat;
}

}  // namespace

nlohmann::json model_to_json(const Network& net) {
    nlohmann::json hidden = nlohmann::json::array();
    for (const auto& layer : net.hidden) {
        hidden.push_back({{"rows", layer.weights.rows()},
                          {"cols", layer.weights.cols()},
                          {"activation", activation_name(layer.act)},
                          {"weights", to_flat(layer.weights)},
                          {"bias", std::vector<double>(layer.bias.data(),
                                                       layer.bias.data() + layer.bias.size())}});
    }

    nlohmann::json ints = nlohmann::json::array();
    for (int r = 0; r < net.output.rows; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < net.output.cols; ++c) row.push_back(decode_int(net.output.word(r, c)));
        ints.push_back(std::move(row));
    }
    const Eigen::VectorXd& ob = net.output_bias;

    return nlohmann::json{
        {"version", kModelVersion},
        {"input_dim", net.input_dim()},
        {"class_count", net.classes()},
        {"hidden", std::move(hidden)},
        {"output",
         {{"Q", net.output.qbits},
          {"delta", net.output.delta},
          {"ints", std::move(ints)},
          {"bias", std::vector<double>(ob.data(), ob.data() + ob.size())}}}};
}

Network model_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, {"version", "input_dim", "class_count", "hidden", "output"},
                        "model file");
    for (const char* key : {"version", "input_dim", "class_count", "hidden", "output"}) {
        if (!j.contains(key)) throw input_error(std::string("model file is missing \"") + key + "\"");
    }
    if (j.at("version").get<int>() != kModelVersion) {
        throw input_error("unsupported model version");
    }
    const int input_dim = j.at("input_dim").get<int>();
    const int class_count = j.at("class_count").get<int>();
    if (input_dim < 1 || class_count < 1) throw input_error("bad model dimensions");

    Network net;
    int prev = input_dim;
    for (const auto& lj : j.at("hidden")) {
        reject_unknown_keys(lj, {"rows", "cols", "activation", "weights", "bias"}, "hidden layer");
        const int rows = lj.at("rows").get<int>();
        const int cols = lj.at("cols").get<int>();
        if (rows < 1 || cols != prev) {
            throw input_error("hidden layer dimensions do not chain (cols=" + std::to_string(cols) +
                              ", expected " + std::to_string(prev) + ")");
        }
        const auto weights = lj.at("weights").get<std::vector<double>>();
        const auto bias = lj.at("bias").get<std::vector<double>>();
        if (weights.size() != static_cast<std::size_t>(rows) * cols) {
            throw input_error("hidden layer \"weights\" has wrong length");
        }
        if (bias.size() != static_cast<std::size_t>(rows)) {
            throw input_error("hidden layer \"bias\" has wrong length");
        }
        DenseLayer layer;
        layer.weights.resize(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                layer.weights(r, c) = weights[static_cast<std::size_t>(r) * cols + c];
        layer.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), rows);
        layer.act = activation_from(lj.at("activation").get<std::string>());
        net.hidden.push_back(std::move(layer));
        prev = rows;
    }

    const nlohmann::json& oj = j.at("output");
    reject_unknown_keys(oj, {"Q", "delta", "ints", "bias"}, "model \"output\"");
    const int qbits = oj.at("Q").get<int>();
    const double delta = oj.at("delta").get<double>();
    if (qbits < 2 || qbits > 16) throw input_error("model \"Q\" out of range");
    if (!(delta > 0)) throw input_error("model \"delta\" must be positive");

    const auto& ints = oj.at("ints");
    if (!ints.is_array() || ints.empty()) throw input_error("model \"ints\" must be a K-row array");
    const int rows = static_cast<int>(ints.size());
    const int cols = static_cast<int>(ints.at(0).size());
    if (rows != class_count) throw input_error("model \"ints\" row count must equal class_count");
    if (cols != prev) throw input_error("model \"ints\" column count must equal the last width");

    QuantLayer layer;
    layer.rows = rows;
    layer.cols = cols;
    layer.qbits = qbits;
    layer.delta = delta;
    const long lo = -(1L << (qbits - 1));
    const long hi = (1L << (qbits - 1)) - 1;
    for (int r = 0; r < rows; ++r) {
        const auto& row = ints.at(static_cast<std::size_t>(r));
        if (static_cast<int>(row.size()) != cols) throw input_error("ragged \"ints\" rows");
        for (int c = 0; c < cols; ++c) {
            const long value = row.at(static_cast<std::size_t>(c)).get<long>();
            if (value < lo || value > hi) {
                throw input_error("output int " + std::to_string(value) +
                                  " out of range for Q=" + std::to_string(qbits));
            }
            layer.words.push_back(encode_twos_complement(value, qbits));
        }
    }
    net.output = std::move(layer);

    const auto bias = oj.at("bias").get<std::vector<double>>();
    if (bias.size() != static_cast<std::size_t>(class_count)) {
        throw input_error("output \"bias\" has wrong length");
    }
    net.output_bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), class_count);

    if (net.input_dim() != input_dim) throw input_error("model \"input_dim\" is inconsistent");
    return net;
}

void save_model(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << model_to_json(net).dump(2) << '\n';
    if (!out) throw io_error("failed writing " + path);
}

Network load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw input_error(path + ": " + e.what());
    }
    return model_from_json(j);
}

Dataset DatasetConfig::generate() const {
    if (type == "blobs") {
        BlobSpec spec;
        spec.classes = classes;
        spec.stddev = stddev;
        spec.per_class = per_class;
        spec.seed = seed;
        return generate_blobs(spec);
    }
    if (type == "patch_images") {
        ImageClassSpec spec;
        spec.side = side;
        spec.classes = classes;
        spec.noise_std = noise_std;
        spec.per_class = per_class;
        spec.seed = seed;
        return generate_patch_classes(spec);
    }
    if (type == "csv") {
        return load_csv_dataset(csv_path, input_dim, classes);
    }
    throw input_error("unknown dataset type \"" + type + "\"");
}

int DatasetConfig::dim() const {
    if (type == "blobs") return 2;
    if (type == "patch_images") return side * side;
    return input_dim;
}

std::uint64_t DatasetConfig::effective_split_seed() const {
    return split_seed ? *split_seed : (seed ^ 0x5851f42d4c957f2dULL);
}

AdmmConfig RunConfig::admm_for(const std::string& mode) const {
    AdmmConfig cfg = mode == "tsa" ? AdmmConfig::tsa_defaults() : AdmmConfig::ssa_defaults();
    const nlohmann::json& j = admm_overrides;
    reject_unknown_keys(j,
                        {"lambda1", "lambda2", "k", "eta", "zeta", "zeta_late", "zeta_switch_iter",
                         "inner_steps", "rho_init", "rho_growth", "rho_max", "max_iter", "tol"},
                        "\"admm\"");
    read_if(j, "lambda1", cfg.lambda1);
    read_if(j, "lambda2", cfg.lambda2);
    read_if(j, "k", cfg.k);
    read_if(j, "eta", cfg.eta);
    read_if(j, "zeta", cfg.zeta);
    read_if(j, "zeta_late", cfg.zeta_late);
    read_if(j, "zeta_switch_iter", cfg.zeta_switch_iter);
    read_if(j, "inner_steps", cfg.inner_steps);
    read_if(j, "rho_growth", cfg.rho_growth);
    read_if(j, "max_iter", cfg.max_iter);
    read_if(j, "tol", cfg.tol);
    if (j.contains("rho_init")) {
        const auto v = j.at("rho_init").get<std::vector<double>>();
        if (v.size() != 3) throw input_error("\"rho_init\" must have three entries");
        cfg.rho_init = {v[0], v[1], v[2]};
    }
    if (j.contains("rho_max")) {
        const auto v = j.at("rho_max").get<std::vector<double>>();
        if (v.size() != 3) throw input_error("\"rho_max\" must have three entries");
        cfg.rho_max = {v[0], v[1], v[2]};
    }
    cfg.validate();
    return cfg;
}

SearchPolicy RunConfig::policy_for(const std::string& mode) const {
    SearchPolicy policy =
        mode == "tsa" ? SearchPolicy::tsa_defaults() : SearchPolicy::ssa_defaults();
    const nlohmann::json& j = search_overrides;
    reject_unknown_keys(j,
                        {"k_init", "k_max_searches", "lambda_init", "lambda_max_searches",
                         "asr_threshold", "delta", "delta_escalation", "delta_escalated"},
                        "\"search\"");
    read_if(j, "k_init", policy.k_init);
    read_if(j, "k_max_searches", policy.k_max_searches);
    read_if(j, "lambda_init", policy.lambda_init);
    read_if(j, "lambda_max_searches", policy.lambda_max_searches);
    read_if(j, "asr_threshold", policy.asr_threshold);
    read_if(j, "delta", policy.delta);
    read_if(j, "delta_escalation", policy.delta_escalation);
    read_if(j, "delta_escalated", policy.delta_escalated);
    policy.validate();
    return policy;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    reject_unknown_keys(
        j, {"seed", "out_dir", "dataset", "train", "admm", "search", "attack", "campaign", "oracle"},
        "run config");

    RunConfig cfg;
    read_if(j, "seed", cfg.seed);
    read_if(j, "out_dir", cfg.out_dir);

    if (j.contains("dataset")) {
        const auto& dj = j.at("dataset");
        reject_unknown_keys(dj,
                            {"type", "classes", "per_class", "stddev", "noise_std", "side",
                             "input_dim", "csv_path", "train_frac", "aux_frac", "seed",
                             "split_seed"},
                            "\"dataset\"");
        read_if(dj, "type", cfg.dataset.type);
        read_if(dj, "classes", cfg.dataset.classes);
        read_if(dj, "per_class", cfg.dataset.per_class);
        read_if(dj, "stddev", cfg.dataset.stddev);
        read_if(dj, "noise_std", cfg.dataset.noise_std);
        read_if(dj, "side", cfg.dataset.side);
        read_if(dj, "input_dim", cfg.dataset.input_dim);
        read_if(dj, "csv_path", cfg.dataset.csv_path);
        read_if(dj, "train_frac", cfg.dataset.train_frac);
        read_if(dj, "aux_frac", cfg.dataset.aux_frac);
        read_if(dj, "seed", cfg.dataset.seed);
        if (dj.contains("split_seed")) cfg.dataset.split_seed = dj.at("split_seed").get<std::uint64_t>();
        if (cfg.dataset.type == "csv" && cfg.dataset.csv_path.empty()) {
            throw input_error("\"dataset.csv_path\" is required for csv datasets");
        }
    }

    if (j.contains("train")) {
        const auto& tj = j.at("train");
        reject_unknown_keys(
            tj, {"hidden", "epochs", "learning_rate", "momentum", "batch_size", "qbits", "seed"},
            "\"train\"");
        read_if(tj, "hidden", cfg.train.hidden_widths);
        read_if(tj, "epochs", cfg.train.epochs);
        read_if(tj, "learning_rate", cfg.train.learning_rate);
        read_if(tj, "momentum", cfg.train.momentum);
        read_if(tj, "batch_size", cfg.train.batch_size);
        read_if(tj, "qbits", cfg.train.qbits);
        read_if(tj, "seed", cfg.train.seed);
    }

    if (j.contains("admm")) cfg.admm_overrides = j.at("admm");
    if (j.contains("search")) cfg.search_overrides = j.at("search");

    if (j.contains("attack")) {
        const auto& aj = j.at("attack");
        reject_unknown_keys(
            aj, {"mode", "sample_index", "source", "target", "trigger_side", "trigger_corner"},
            "\"attack\"");
        read_if(aj, "mode", cfg.attack.mode);
        read_if(aj, "sample_index", cfg.attack.sample_index);
        if (aj.contains("source")) cfg.attack.source = aj.at("source").get<int>();
        read_if(aj, "target", cfg.attack.target);
        read_if(aj, "trigger_side", cfg.attack.trigger_side);
        read_if(aj, "trigger_corner", cfg.attack.trigger_corner);
        if (cfg.attack.mode != "ssa" && cfg.attack.mode != "tsa") {
            throw input_error("\"attack.mode\" must be \"ssa\" or \"tsa\"");
        }
    }

    if (j.contains("campaign")) {
        const auto& cj = j.at("campaign");
        reject_unknown_keys(cj, {"per_target", "targets", "jobs"}, "\"campaign\"");
        read_if(cj, "per_target", cfg.campaign.per_target);
        read_if(cj, "targets", cfg.campaign.targets);
        read_if(cj, "jobs", cfg.campaign.jobs);
    }

    if (j.contains("oracle")) {
        const auto& oj = j.at("oracle");
        reject_unknown_keys(oj, {"v", "k", "objective", "seed"}, "\"oracle\"");
        read_if(oj, "v", cfg.oracle.v);
        read_if(oj, "k", cfg.oracle.k);
        read_if(oj, "objective", cfg.oracle.objective);
        read_if(oj, "seed", cfg.oracle.seed);
    }

    // validate the overlay sections eagerly so config errors surface up front
    cfg.admm_for(cfg.attack.mode);
    cfg.policy_for(cfg.attack.mode);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw input_error(path + ": " + e.what());
    }
    return run_config_from_json(j);
}

Corner corner_from_string(const std::string& name) {
    if (name == "top_left") return Corner::top_left;
    if (name == "top_right") return Corner::top_right;
    if (name == "bottom_left") return Corner::bottom_left;
    if (name == "bottom_right") return Corner::bottom_right;
    throw input_error("unknown trigger corner \"" + name + "\"");
}

}  // namespace bfa
