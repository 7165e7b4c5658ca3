#ifndef BFA_EVALHARNESS_HPP
#define BFA_EVALHARNESS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bfa/attacks.hpp"
#include "bfa/netcore.hpp"

namespace bfa {

struct AttackMetrics {
    double asr = 0;     // percent of attacked inputs classified as the target
    double pa_acc = 0;  // percent clean accuracy of the flipped model
    int n_flip = 0;
};

// attacked: the evaluation inputs (the single sample for SSA; held-out samples
// with the trigger already applied for TSA).
AttackMetrics evaluate_attack(const Network& net_flipped, const AttackReport& report,
                              const Dataset& validation,
                              const std::vector<Eigen::VectorXd>& attacked);

std::vector<Eigen::VectorXd> apply_trigger_all(const Dataset& data, const TriggerSpec& trigger);

struct OracleResult {
    BitVector best_bits;
    double best_value = 0;
};

// Exhaustive search over every vector within Hamming distance <= k of b.
// Ties go to the lexicographically lowest flip-index set. Guarded against
// combinatorial blow-up (V <= 24, <= 2e6 candidates).
OracleResult brute_force_oracle(const BitVector& b, int k,
                                const std::function<double(const Eigen::VectorXd&)>& objective);

struct SsaTask {
    Eigen::VectorXd x;
    int source = 0;
    int target = 0;
};

struct CampaignSpec {
    std::string attack_type;  // "ssa" | "tsa"
    std::vector<SsaTask> ssa_tasks;
    std::vector<int> tsa_targets;
    Eigen::VectorXd tsa_mask;
    const Dataset* aux = nullptr;
    const Dataset* validation = nullptr;
    const Dataset* heldout = nullptr;  // TSA attacked set; defaults to validation
    SearchPolicy policy;
    AdmmConfig admm;
    int jobs = 1;
    std::uint64_t seed = 1;

    void validate() const;
};

struct CampaignSummary {
    double acc = 0;  // clean accuracy of the unattacked model, percent
    double asr = 0;
    double pa_acc_mean = 0, pa_acc_std = 0;
    double n_flip_mean = 0, n_flip_std = 0;
    std::vector<AttackReport> attacks;
};

CampaignSummary run_campaign(const Network& net, const CampaignSpec& spec);

nlohmann::json attack_report_to_json(const AttackReport& report);
nlohmann::json summary_to_json(const CampaignSummary& summary);
nlohmann::json summary_from_json(const nlohmann::json& j);  // schema fields round trip
std::string summary_to_csv(const CampaignSummary& summary);

void emit_report(const CampaignSummary& summary, const std::string& json_path,
                 const std::optional<std::string>& csv_path = std::nullopt);

}  // namespace bfa

#endif
