#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "meshadv/attack.hpp"
#include "meshadv/dataset.hpp"
#include "meshadv/defense.hpp"

namespace meshadv {

/// Version string baked in at configure time; embedded in every artifact.
const char* version_string();

enum class AttackMethod { Mesh, Point };

/// Test-split instances the model classifies correctly on a fixed-seed cloud,
/// in manifest order, at most `count` of them. Attacking an instance the
/// model already gets wrong would make untargeted "success" meaningless.
std::vector<const DatasetInstance*> select_attack_instances(const Dataset& dataset,
                                                            const ClassifierModel& model,
                                                            int count, int num_points,
                                                            std::uint64_t seed);

struct InstanceOutcome {
    std::uint64_t run_seed = 0;
    double strength = 0.1;
    const DatasetInstance* instance = nullptr;
    AttackReport report;
    PointCloud adv_cloud;  // baseline point attack only
};

struct BatchStats {
    std::uint64_t run_seed = 0;
    double strength = 0.1;
    double attack_asr = 0.0;
    double pseudo_physical_asr = 0.0;
    int instances = 0;
};

struct AttackBatchResult {
    AttackMethod method = AttackMethod::Mesh;
    std::vector<InstanceOutcome> outcomes;  // ordered by (seed, strength, instance)
    std::vector<BatchStats> stats;          // one row per (seed, strength)
};

/// Runs the attack over instances x seeds x strengths in a dynamic parallel
/// pool. Results are merged in deterministic order regardless of scheduling.
/// In targeted mode with target_label < 0, each instance gets a random target
/// (never its true class) derived from the run seed.
AttackBatchResult run_attack_batch(const std::vector<const DatasetInstance*>& instances,
                                   const ClassifierModel& model, const AttackConfig& base_config,
                                   AttackMethod method, const std::vector<std::uint64_t>& seeds,
                                   const std::vector<double>& strengths, int jobs);

/// Mean and population variance of per-seed ASR at one strength.
struct SeedAggregate {
    double strength = 0.1;
    double attack_asr_mean = 0.0;
    double attack_asr_var = 0.0;
    double pseudo_physical_asr_mean = 0.0;
    double pseudo_physical_asr_var = 0.0;
    int seeds = 0;
    int instances = 0;
};

std::vector<SeedAggregate> aggregate_stats(const AttackBatchResult& result);

/// Fresh fixed-seed clouds from the instances' clean meshes.
std::vector<LabeledCloud> make_clean_clouds(const std::vector<const DatasetInstance*>& instances,
                                            int num_points, std::uint64_t seed);

/// Fresh clouds resampled from each outcome's adversarial mesh (the
/// pseudo-physical clouds the defenses see).
std::vector<LabeledCloud> make_adv_resampled_clouds(const std::vector<InstanceOutcome>& outcomes,
                                                    int num_points, std::uint64_t seed);

/// The baseline attack's optimization clouds as labeled inputs.
std::vector<LabeledCloud> make_point_attack_clouds(const std::vector<InstanceOutcome>& outcomes);

// --- artifact writers -------------------------------------------------------

nlohmann::json config_to_json(const AttackConfig& config);

void write_instances_csv(const std::string& path, const AttackBatchResult& result,
                         const nlohmann::json& config_echo);
void write_aggregate_csv(const std::string& path, const AttackBatchResult& result,
                         const nlohmann::json& config_echo);
void write_summary_json(const std::string& path, const AttackBatchResult& result,
                        const nlohmann::json& config_echo);
void write_report_json(const std::string& path, const InstanceOutcome& outcome);

/// Per-iteration LossBreakdown records, one JSON object per line.
void write_trace_jsonl(const std::string& path, const AttackReport& report);
void write_defense_csv(const std::string& path, const std::vector<DefenseRow>& rows,
                       const nlohmann::json& config_echo);

/// Timing lines (kept out of the deterministic artifacts).
void write_timing_log(const std::string& path, const AttackBatchResult& result);

}  // namespace meshadv
