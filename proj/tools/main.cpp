#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "bfa/datagen.hpp"
#include "bfa/evalharness.hpp"
#include "bfa/model_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAttackFailed = 2;
constexpr int kExitInvalidInput = 3;
constexpr int kExitNumericError = 4;

struct CommonOpts {
    std::string config_path;
    std::string model_path;
    std::string out_override;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> jobs_override;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_model) {
    cmd->add_option("--config", opts.config_path, "run configuration JSON");
    if (needs_model) cmd->add_option("--model", opts.model_path, "model file path");
    cmd->add_option("--out", opts.out_override, "output directory");
    cmd->add_option("--seed", opts.seed_override, "override the config seed");
    cmd->add_option("--jobs", opts.jobs_override, "worker threads for campaigns");
}

bfa::RunConfig load_config(const CommonOpts& opts) {
    bfa::RunConfig cfg =
        opts.config_path.empty() ? bfa::RunConfig{} : bfa::load_run_config(opts.config_path);
    if (opts.seed_override) cfg.seed = *opts.seed_override;
    if (opts.jobs_override) cfg.campaign.jobs = *opts.jobs_override;
    return cfg;
}

fs::path resolve_out_dir(const bfa::RunConfig& cfg, const CommonOpts& opts) {
    fs::path dir;
    if (!opts.out_override.empty()) {
        dir = opts.out_override;
    } else if (const char* env = std::getenv("BFA_OUT_DIR"); env && *env) {
        dir = env;
    } else {
        dir = cfg.out_dir;
    }
    fs::create_directories(dir);
    return dir;
}

struct Splits {
    bfa::Dataset train, aux, validation;
};

Splits make_splits(const bfa::RunConfig& cfg) {
    const bfa::Dataset full = cfg.dataset.generate();
    auto split = bfa::split_dataset(full, cfg.dataset.train_frac, cfg.dataset.aux_frac,
                                    cfg.dataset.effective_split_seed());
    return {std::move(split.train), std::move(split.aux), std::move(split.validation)};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw bfa::io_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw bfa::io_error("failed writing " + path.string());
}

int cmd_train(const CommonOpts& opts) {
    const bfa::RunConfig cfg = load_config(opts);
    const fs::path out_dir = resolve_out_dir(cfg, opts);
    const Splits data = make_splits(cfg);

    bfa::MlpSpec spec;
    spec.input_dim = cfg.dataset.dim();
    spec.hidden_widths = cfg.train.hidden_widths;
    spec.classes = cfg.dataset.classes;

    bfa::TrainConfig tc;
    tc.epochs = cfg.train.epochs;
    tc.learning_rate = cfg.train.learning_rate;
    tc.momentum = cfg.train.momentum;
    tc.batch_size = cfg.train.batch_size;
    tc.seed = cfg.train.seed;

    const bfa::FullNetwork full = bfa::train_model(data.train, spec, tc);
    const bfa::Network net = bfa::quantize_network(full, cfg.train.qbits);

    const fs::path model_path =
        opts.model_path.empty() ? out_dir / "model.json" : fs::path(opts.model_path);
    bfa::save_model(net, model_path.string());

    const double acc = 100.0 * bfa::accuracy(net, data.validation);
    std::cout << "model: " << model_path.string() << "\n";
    std::cout << "ACC: " << acc << "%\n";
    return kExitOk;
}

int cmd_gen_data(const CommonOpts& opts) {
    const bfa::RunConfig cfg = load_config(opts);
    const fs::path out_dir = resolve_out_dir(cfg, opts);
    const Splits data = make_splits(cfg);
    bfa::save_csv_dataset(data.train, (out_dir / "train.csv").string());
    bfa::save_csv_dataset(data.aux, (out_dir / "aux.csv").string());
    bfa::save_csv_dataset(data.validation, (out_dir / "validation.csv").string());
    std::cout << "wrote " << (out_dir / "train.csv").string() << " (+aux, +validation)\n";
    return kExitOk;
}

int cmd_attack(const std::string& mode, const CommonOpts& opts) {
    const bfa::RunConfig cfg = load_config(opts);
    const fs::path out_dir = resolve_out_dir(cfg, opts);
    if (opts.model_path.empty()) throw bfa::input_error("attack requires --model");
    const bfa::Network net = bfa::load_model(opts.model_path);
    const Splits data = make_splits(cfg);

    const bfa::AdmmConfig admm = cfg.admm_for(mode);
    const bfa::SearchPolicy policy = cfg.policy_for(mode);

    bfa::AttackReport report;
    if (mode == "ssa") {
        const auto idx = static_cast<std::size_t>(cfg.attack.sample_index);
        if (idx >= data.validation.size()) {
            throw bfa::input_error("attack.sample_index is outside the validation split");
        }
        const bfa::Sample& sample = data.validation.samples[idx];
        const int source = cfg.attack.source.value_or(sample.label);
        report = bfa::run_ssa(net, sample.x, source, cfg.attack.target, data.aux, policy, admm);
        const bfa::Network flipped = bfa::apply_bit_flips(net, report.final_bits);
        const bfa::AttackMetrics m =
            bfa::evaluate_attack(flipped, report, data.validation, {sample.x});
        report.asr = m.asr;
        report.pa_acc = m.pa_acc;
    } else {
        const bfa::TriggerSpec patch = bfa::make_patch_mask(
            cfg.dataset.side, cfg.attack.trigger_side, bfa::corner_from_string(cfg.attack.trigger_corner));
        report = bfa::run_tsa(net, cfg.attack.target, patch.mask, data.aux, policy, admm, cfg.seed);
        const bfa::Network flipped = bfa::apply_bit_flips(net, report.final_bits);
        const auto attacked = bfa::apply_trigger_all(data.validation, *report.trigger);
        const bfa::AttackMetrics m =
            bfa::evaluate_attack(flipped, report, data.validation, attacked);
        report.asr = m.asr;
        report.pa_acc = m.pa_acc;
    }

    write_text(out_dir / "report.json", bfa::attack_report_to_json(report).dump(2) + "\n");
    write_text(out_dir / "trace.json", bfa::trace_to_json(report.trace) + "\n");
    std::cout << (report.success ? "attack succeeded" : "attack failed") << ": n_flip="
              << report.n_flip << " asr=" << report.asr << "% pa_acc=" << report.pa_acc
              << "% k=" << report.k_used << " iterations=" << report.iterations << "\n";
    std::cout << "report: " << (out_dir / "report.json").string() << "\n";
    return report.success ? kExitOk : kExitAttackFailed;
}

int cmd_eval(const std::string& flips_path, const CommonOpts& opts) {
    const bfa::RunConfig cfg = load_config(opts);
    const fs::path out_dir = resolve_out_dir(cfg, opts);
    if (opts.model_path.empty()) throw bfa::input_error("eval requires --model");
    const bfa::Network net = bfa::load_model(opts.model_path);
    const Splits data = make_splits(cfg);

    json spec;
    {
        std::ifstream in(flips_path);
        if (!in) throw bfa::io_error("cannot open " + flips_path);
        try {
            in >> spec;
        } catch (const json::exception& e) {
            throw bfa::input_error(flips_path + ": " + std::string(e.what()));
        }
    }
    const json flips = spec.is_array() ? spec : spec.value("flipped_bits", json::array());

    bfa::BitVector bits = bfa::BitVector::from_layer(net.output);
    std::set<std::size_t> seen;
    for (const auto& f : flips) {
        if (!f.contains("row") || !f.contains("col") || !f.contains("bit")) {
            throw bfa::input_error("flip entries need row/col/bit");
        }
        const int row = f.at("row").get<int>();
        const int col = f.at("col").get<int>();
        const int bit = f.at("bit").get<int>();
        if (row < 0 || row >= net.output.rows || col < 0 || col >= net.output.cols || bit < 0 ||
            bit >= net.output.qbits) {
            throw bfa::input_error("flip index out of range");
        }
        const std::size_t idx = bits.index_of(row, col, bit);
        if (!seen.insert(idx).second) throw bfa::input_error("duplicate flip index");
        bits.flip(idx);
    }

    const bfa::Network flipped = bfa::apply_bit_flips(net, bits);
    const double acc = 100.0 * bfa::accuracy(net, data.validation);
    const double pa_acc = 100.0 * bfa::accuracy(flipped, data.validation);

    json out{{"acc", acc}, {"pa_acc", pa_acc}, {"n_flip", flips.size()}};
    if (spec.is_object() && spec.contains("target_class")) {
        const int target = spec.at("target_class").get<int>();
        if (spec.contains("trigger")) {
            const auto mask_v = spec.at("trigger").at("mask_spec").at("mask").get<std::vector<double>>();
            const auto pat_v = spec.at("trigger").at("pattern").get<std::vector<double>>();
            bfa::TriggerSpec trig{Eigen::Map<const Eigen::VectorXd>(mask_v.data(), mask_v.size()),
                                  Eigen::Map<const Eigen::VectorXd>(pat_v.data(), pat_v.size())};
            std::size_t hits = 0;
            for (const auto& s : data.validation.samples) {
                hits += bfa::predict(flipped, bfa::apply_trigger(s.x, trig)) == target;
            }
            out["asr"] = 100.0 * static_cast<double>(hits) /
                         static_cast<double>(data.validation.size());
        } else {
            const auto idx = static_cast<std::size_t>(cfg.attack.sample_index);
            if (idx < data.validation.size()) {
                const bfa::Sample& sample = data.validation.samples[idx];
                out["asr"] = bfa::predict(flipped, sample.x) == target ? 100.0 : 0.0;
            }
        }
    }

    write_text(out_dir / "eval.json", out.dump(2) + "\n");
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

int cmd_oracle(const CommonOpts& opts) {
    const bfa::RunConfig cfg = load_config(opts);
    const fs::path out_dir = resolve_out_dir(cfg, opts);
    const int v = cfg.oracle.v;
    const int k = cfg.oracle.k;

    std::mt19937_64 rng(cfg.oracle.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd c(v);
    for (int i = 0; i < v; ++i) c[i] = gauss(rng);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(v, v);
    if (cfg.oracle.objective == "quadratic") {
        Eigen::MatrixXd m(v, v);
        for (int r = 0; r < v; ++r)
            for (int col = 0; col < v; ++col) m(r, col) = 0.3 * gauss(rng);
        a = 0.5 * (m + m.transpose());
    } else if (cfg.oracle.objective != "linear") {
        throw bfa::input_error("oracle objective must be \"linear\" or \"quadratic\"");
    }

    auto objective = [&](const Eigen::VectorXd& x) { return x.dot(a * x) + c.dot(x); };

    const bfa::BitVector b(std::vector<std::uint8_t>(static_cast<std::size_t>(v), 0), {0}, v, 1);
    const bfa::OracleResult oracle = bfa::brute_force_oracle(b, k, objective);

    bfa::LossCallbacks cb;
    cb.eval_l1 = [&](const Eigen::VectorXd& x, const Eigen::VectorXd*) { return objective(x); };
    cb.eval_l2 = [](const Eigen::VectorXd&, const Eigen::VectorXd*) { return 0.0; };
    cb.grad_l1_b = [&](const Eigen::VectorXd& x, const Eigen::VectorXd*) {
        return Eigen::VectorXd(2.0 * a * x + c);
    };
    cb.grad_l2_b = [](const Eigen::VectorXd& x, const Eigen::VectorXd*) {
        return Eigen::VectorXd(Eigen::VectorXd::Zero(x.size()));
    };
    bfa::AdmmConfig admm = cfg.admm_for("ssa");
    admm.lambda1 = 1.0;
    admm.lambda2 = 0.0;
    admm.k = k;
    const bfa::SolveResult res = bfa::admm_solve(b, std::nullopt, admm, cb);
    const double admm_value = objective(res.bits.to_real());

    json out{{"oracle_value", oracle.best_value},
             {"admm_value", admm_value},
             {"gap", admm_value - oracle.best_value},
             {"admm_feasible", res.n_flip <= k}};
    write_text(out_dir / "oracle.json", out.dump(2) + "\n");
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

int cmd_campaign(const CommonOpts& opts) {
    const bfa::RunConfig cfg = load_config(opts);
    const fs::path out_dir = resolve_out_dir(cfg, opts);
    if (opts.model_path.empty()) throw bfa::input_error("campaign requires --model");
    const bfa::Network net = bfa::load_model(opts.model_path);
    const Splits data = make_splits(cfg);

    const std::string mode = cfg.attack.mode;
    bfa::CampaignSpec spec;
    spec.attack_type = mode;
    spec.aux = &data.aux;
    spec.validation = &data.validation;
    spec.policy = cfg.policy_for(mode);
    spec.admm = cfg.admm_for(mode);
    spec.jobs = cfg.campaign.jobs;
    spec.seed = cfg.seed;

    std::vector<int> targets = cfg.campaign.targets;
    if (targets.empty()) {
        for (int t = 0; t < net.classes(); ++t) targets.push_back(t);
    }

    if (mode == "ssa") {
        std::mt19937_64 rng(cfg.seed);
        for (int target : targets) {
            std::vector<std::size_t> candidates;
            for (std::size_t i = 0; i < data.validation.size(); ++i) {
                if (data.validation.samples[i].label != target) candidates.push_back(i);
            }
            if (candidates.empty()) throw bfa::input_error("no candidate samples for a target");
            std::shuffle(candidates.begin(), candidates.end(), rng);
            const int n = std::min<int>(cfg.campaign.per_target,
                                        static_cast<int>(candidates.size()));
            for (int i = 0; i < n; ++i) {
                const bfa::Sample& s = data.validation.samples[candidates[static_cast<std::size_t>(i)]];
                spec.ssa_tasks.push_back({s.x, s.label, target});
            }
        }
    } else {
        spec.tsa_targets = targets;
        const bfa::TriggerSpec patch = bfa::make_patch_mask(
            cfg.dataset.side, cfg.attack.trigger_side,
            bfa::corner_from_string(cfg.attack.trigger_corner));
        spec.tsa_mask = patch.mask;
    }

    const bfa::CampaignSummary summary = bfa::run_campaign(net, spec);
    bfa::emit_report(summary, (out_dir / "summary.json").string(),
                     (out_dir / "summary.csv").string());
    std::cout << "ACC: " << summary.acc << "%  ASR: " << summary.asr
              << "%  PA-ACC: " << summary.pa_acc_mean << "+-" << summary.pa_acc_std
              << "%  N_flip: " << summary.n_flip_mean << "+-" << summary.n_flip_std << "\n";
    std::cout << "summary: " << (out_dir / "summary.json").string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bit-flip weight attack toolkit for quantized feedforward classifiers"};
    app.require_subcommand(1);

    CommonOpts train_opts, attack_opts, eval_opts, oracle_opts, campaign_opts, gen_opts;
    std::string attack_mode;
    std::string flips_path;

    CLI::App* train = app.add_subcommand("train", "train and quantize a model");
    add_common(train, train_opts, true);

    CLI::App* attack = app.add_subcommand("attack", "run a bit-flip attack");
    attack->add_option("mode", attack_mode, "ssa or tsa")->required()
        ->check(CLI::IsMember({"ssa", "tsa"}));
    add_common(attack, attack_opts, true);

    CLI::App* eval = app.add_subcommand("eval", "evaluate a flip list without re-solving");
    eval->add_option("--flips", flips_path, "attack report or flip list JSON")->required();
    add_common(eval, eval_opts, true);

    CLI::App* oracle = app.add_subcommand("oracle", "compare the solver to brute force");
    add_common(oracle, oracle_opts, false);

    CLI::App* campaign = app.add_subcommand("campaign", "run a batch of attacks");
    add_common(campaign, campaign_opts, true);

    CLI::App* gen = app.add_subcommand("gen-data", "write dataset splits as CSV");
    add_common(gen, gen_opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitInvalidInput;
    }

    try {
        if (train->parsed()) return cmd_train(train_opts);
        if (attack->parsed()) return cmd_attack(attack_mode, attack_opts);
        if (eval->parsed()) return cmd_eval(flips_path, eval_opts);
        if (oracle->parsed()) return cmd_oracle(oracle_opts);
        if (campaign->parsed()) return cmd_campaign(campaign_opts);
        if (gen->parsed()) return cmd_gen_data(gen_opts);
    } catch (const bfa::numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumericError;
    } catch (const bfa::size_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidInput;
    } catch (const bfa::input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidInput;
    } catch (const bfa::io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitInvalidInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidInput;
    }
    return kExitOk;
}
