#include "bfa/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace bfa {

AttackMetrics evaluate_attack(const Network& net_flipped, const AttackReport& report,
                              const Dataset& validation,
                              const std::vector<Eigen::VectorXd>& attacked) {
    if (validation.empty()) throw input_error("validation set is empty");
    AttackMetrics m;
    m.n_flip = static_cast<int>(hamming_distance(report.original_bits, report.final_bits));

    std::size_t hits = 0;
    for (const auto& x : attacked) {
        if (predict(net_flipped, x) == report.target_class) ++hits;
    }
    m.asr = attacked.empty()
                ? 0.0
                : 100.0 * static_cast<double>(hits) / static_cast<double>(attacked.size());
    m.pa_acc = 100.0 * accuracy(net_flipped, validation);
    return m;
}

std::vector<Eigen::VectorXd> apply_trigger_all(const Dataset& data, const TriggerSpec& trigger) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(data.size());
    for (const auto& s : data.samples) out.push_back(apply_trigger(s.x, trigger));
    return out;
}

OracleResult brute_force_oracle(const BitVector& b, int k,
                                const std::function<double(const Eigen::VectorXd&)>& objective) {
    if (!objective) throw input_error("oracle objective is required");
    const int v = static_cast<int>(b.size());
    if (k < 0) throw input_error("flip budget must be non-negative");
    if (v > 24) throw size_error("oracle guard: V must be at most 24, got " + std::to_string(v));
    const int k_eff = std::min(k, v);
    double candidates = 0;
    {
        double binom = 1;
        for (int j = 0; j <= k_eff; ++j) {
            if (j > 0) binom = binom * (v - j + 1) / j;
            candidates += binom;
        }
    }
    if (candidates > 2e6) {
        throw size_error("oracle guard: too many candidates (" + std::to_string(candidates) +
                         "); reduce V or k");
    }

    const Eigen::VectorXd base = b.to_real();
    Eigen::VectorXd best_vec = base;
    double best_value = objective(base);
    std::vector<int> best_flips;  // empty set

    std::vector<int> flips;
    Eigen::VectorXd current = base;

    // lexicographic combinations of each size; ties keep the lowest flip set
    auto consider = [&] {
        const double value = objective(current);
        const bool better =
            value < best_value ||
            (value == best_value &&
             std::lexicographical_compare(flips.begin(), flips.end(), best_flips.begin(),
                                          best_flips.end()));
        if (better) {
            best_value = value;
            best_vec = current;
            best_flips = flips;
        }
    };

    std::function<void(int, int)> recurse = [&](int start, int remaining) {
        if (remaining == 0) return;
        for (int i = start; i < v; ++i) {
            flips.push_back(i);
            current[i] = 1.0 - current[i];
            consider();
            recurse(i + 1, remaining - 1);
            current[i] = 1.0 - current[i];
            flips.pop_back();
        }
    };
    recurse(0, k_eff);

    std::vector<std::uint8_t> bits(b.values());
    for (int i : best_flips) bits[static_cast<std::size_t>(i)] ^= 1;
    return {BitVector(std::move(bits), b.covered_rows(), b.cols(), b.qbits()), best_value};
}

void CampaignSpec::validate() const {
    if (attack_type != "ssa" && attack_type != "tsa") {
        throw input_error("attack_type must be \"ssa\" or \"tsa\"");
    }
    if (attack_type == "ssa" && ssa_tasks.empty()) throw input_error("empty SSA work list");
    if (attack_type == "tsa" && tsa_targets.empty()) throw input_error("empty TSA work list");
    if (!aux || aux->empty()) throw input_error("campaign needs a non-empty auxiliary set");
    if (!validation || validation->empty()) throw input_error("campaign needs a validation set");
    if (jobs < 1) throw input_error("jobs must be at least 1");
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& values) {
    if (values.empty()) return {0.0, 0.0};
    const double n = static_cast<double>(values.size());
    double mean = 0;
    for (double x : values) mean += x;
    mean /= n;
    double var = 0;
    for (double x : values) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / n)};
}

}  // namespace

CampaignSummary run_campaign(const Network& net, const CampaignSpec& spec) {
    spec.validate();
    const bool ssa = spec.attack_type == "ssa";
    const std::size_t n_tasks = ssa ? spec.ssa_tasks.size() : spec.tsa_targets.size();
    const Dataset& heldout = spec.heldout ? *spec.heldout : *spec.validation;

    std::vector<AttackReport> reports(n_tasks);
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_tasks) break;
            try {
                AttackReport report;
                if (ssa) {
                    const SsaTask& task = spec.ssa_tasks[i];
                    report = run_ssa(net, task.x, task.source, task.target, *spec.aux, spec.policy,
                                     spec.admm);
                    const Network flipped = apply_bit_flips(net, report.final_bits);
                    const std::vector<Eigen::VectorXd> attacked{task.x};
                    const AttackMetrics m =
                        evaluate_attack(flipped, report, *spec.validation, attacked);
                    report.asr = m.asr;
                    report.pa_acc = m.pa_acc;
                } else {
                    const int target = spec.tsa_targets[i];
                    report = run_tsa(net, target, spec.tsa_mask, *spec.aux, spec.policy, spec.admm,
                                     spec.seed + i);
                    const Network flipped = apply_bit_flips(net, report.final_bits);
                    const auto attacked = apply_trigger_all(heldout, *report.trigger);
                    const AttackMetrics m =
                        evaluate_attack(flipped, report, *spec.validation, attacked);
                    report.asr = m.asr;  // held-out ASR; the aux-set ASR drove the search
                    report.pa_acc = m.pa_acc;
                }
                reports[i] = std::move(report);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };

    const int jobs = std::max(1, std::min<int>(spec.jobs, static_cast<int>(n_tasks)));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    CampaignSummary summary;
    summary.attacks = std::move(reports);
    summary.acc = 100.0 * accuracy(net, *spec.validation);

    std::vector<double> pa_accs, n_flips;
    double asr_sum = 0;
    for (const auto& r : summary.attacks) {
        asr_sum += r.asr;
        if (r.success) {
            pa_accs.push_back(r.pa_acc);
            n_flips.push_back(static_cast<double>(r.n_flip));
        }
    }
    summary.asr = asr_sum / static_cast<double>(summary.attacks.size());
    std::tie(summary.pa_acc_mean, summary.pa_acc_std) = mean_std(pa_accs);
    std::tie(summary.n_flip_mean, summary.n_flip_std) = mean_std(n_flips);
    return summary;
}

nlohmann::json attack_report_to_json(const AttackReport& report) {
    nlohmann::json j{{"attack_type", report.attack_type},
                     {"target_class", report.target_class},
                     {"success", report.success},
                     {"n_flip", report.n_flip},
                     {"asr", report.asr},
                     {"pa_acc", report.pa_acc},
                     {"converged", report.converged},
                     {"iterations", report.iterations},
                     {"lambda_used", report.lambda_used},
                     {"k_used", report.k_used}};
    if (report.source_class) j["source_class"] = *report.source_class;
    nlohmann::json flips = nlohmann::json::array();
    for (const auto& loc : report.flipped_bits) {
        flips.push_back({{"row", loc.row}, {"col", loc.col}, {"bit", loc.bit}});
    }
    j["flipped_bits"] = std::move(flips);
    if (report.trigger) {
        nlohmann::json trig;
        trig["mask_spec"] = {{"type", "custom"},
                             {"mask", std::vector<double>(report.trigger->mask.data(),
                                                          report.trigger->mask.data() +
                                                              report.trigger->mask.size())}};
        trig["pattern"] = std::vector<double>(
            report.trigger->pattern.data(),
            report.trigger->pattern.data() + report.trigger->pattern.size());
        j["trigger"] = std::move(trig);
    }
    return j;
}

nlohmann::json summary_to_json(const CampaignSummary& summary) {
    nlohmann::json attacks = nlohmann::json::array();
    for (const auto& r : summary.attacks) attacks.push_back(attack_report_to_json(r));
    return nlohmann::json{{"acc", summary.acc},
                          {"asr", summary.asr},
                          {"pa_acc_mean", summary.pa_acc_mean},
                          {"pa_acc_std", summary.pa_acc_std},
                          {"n_flip_mean", summary.n_flip_mean},
                          {"n_flip_std", summary.n_flip_std},
                          {"attacks", std::move(attacks)}};
}

nlohmann::json summary_from_json(const nlohmann::json& j) {
    static const char* keys[] = {"acc",         "asr",         "pa_acc_mean", "pa_acc_std",
                                 "n_flip_mean", "n_flip_std",  "attacks"};
    for (const char* key : keys) {
        if (!j.contains(key)) throw input_error(std::string("summary is missing key ") + key);
    }
    return j;
}

std::string summary_to_csv(const CampaignSummary& summary) {
    std::ostringstream out;
    out << "attack_id,target,source,success,n_flip,pa_acc,iterations,converged\n";
    for (std::size_t i = 0; i < summary.attacks.size(); ++i) {
        const AttackReport& r = summary.attacks[i];
        out << i << ',' << r.target_class << ','
            << (r.source_class ? std::to_string(*r.source_class) : "") << ','
            << (r.success ? 1 : 0) << ',' << r.n_flip << ',' << r.pa_acc << ',' << r.iterations
            << ',' << (r.converged ? 1 : 0) << '\n';
    }
    return out.str();
}

void emit_report(const CampaignSummary& summary, const std::string& json_path,
                 const std::optional<std::string>& csv_path) {
    {
        std::ofstream out(json_path);
        if (!out) throw io_error("cannot open " + json_path + " for writing");
        out << summary_to_json(summary).dump(2) << '\n';
        if (!out) throw io_error("failed writing " + json_path);
    }
    if (csv_path) {
        std::ofstream out(*csv_path);
        if (!out) throw io_error("cannot open " + *csv_path + " for writing");
        out << summary_to_csv(summary);
        if (!out) throw io_error("failed writing " + *csv_path);
    }
}

}  // namespace bfa
