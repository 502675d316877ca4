#include "meshadv/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "meshadv/rng.hpp"

namespace meshadv {

const char* version_string() {
#ifdef MESHADV_VERSION
    return MESHADV_VERSION;
#else
    return "0.0.0-dev";
#endif
}

namespace {

std::uint64_t fnv1a64_str(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

int resolve_target(const AttackConfig& config, const DatasetInstance& inst, int num_classes,
                   std::uint64_t run_seed) {
    if (config.mode != AttackMode::Targeted || config.target_label >= 0) {
        return config.target_label;
    }
    // Random target, never the true class.
    Rng rng = Rng::derive(run_seed, {0x54474554ULL, fnv1a64_str(inst.id)});
    const int target =
        static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(num_classes - 1)));
    return target >= inst.label ? target + 1 : target;
}

}  // namespace

std::vector<const DatasetInstance*> select_attack_instances(const Dataset& dataset,
                                                            const ClassifierModel& model,
                                                            int count, int num_points,
                                                            std::uint64_t seed) {
    std::vector<const DatasetInstance*> candidates;
    for (const DatasetInstance& inst : dataset.instances) {
        if (inst.is_test) candidates.push_back(&inst);
    }
    const std::int64_t n = static_cast<std::int64_t>(candidates.size());
    std::vector<char> keep(candidates.size(), 0);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        const DatasetInstance* inst = candidates[static_cast<std::size_t>(i)];
        Rng rng = Rng::derive(seed, {0x53454c43ULL, fnv1a64_str(inst->id)});
        const FaceSampler sampler(inst->mesh);
        const SampleMap map = draw_sample_map(sampler, num_points, rng);
        const PointCloud cloud = apply_sample_map(inst->mesh, map);
        keep[static_cast<std::size_t>(i)] =
            predict(model, cloud.points, Execution::Serial) == inst->label ? 1 : 0;
    }
    std::vector<const DatasetInstance*> selected;
    for (std::size_t i = 0; i < candidates.size() && static_cast<int>(selected.size()) < count; ++i) {
        if (keep[i]) selected.push_back(candidates[i]);
    }
    return selected;
}

AttackBatchResult run_attack_batch(const std::vector<const DatasetInstance*>& instances,
                                   const ClassifierModel& model, const AttackConfig& base_config,
                                   AttackMethod method, const std::vector<std::uint64_t>& seeds,
                                   const std::vector<double>& strengths, int jobs) {
    AttackBatchResult result;
    result.method = method;

    struct Task {
        std::uint64_t seed;
        double strength;
        const DatasetInstance* instance;
    };
    std::vector<Task> tasks;
    for (const std::uint64_t seed : seeds) {
        for (const double strength : strengths) {
            for (const DatasetInstance* inst : instances) tasks.push_back({seed, strength, inst});
        }
    }
    result.outcomes.resize(tasks.size());

#ifdef _OPENMP
    const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#else
    const int threads = 1;
    (void)jobs;
#endif
    const std::int64_t n = static_cast<std::int64_t>(tasks.size());
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::int64_t t = 0; t < n; ++t) {
        const Task& task = tasks[static_cast<std::size_t>(t)];
        AttackConfig config = base_config;
        config.seed = task.seed;
        config.strength = task.strength;
        config.exec = Execution::Serial;  // the pool owns the parallelism
        config.target_label = resolve_target(config, *task.instance, model.num_classes(), task.seed);

        InstanceOutcome& outcome = result.outcomes[static_cast<std::size_t>(t)];
        outcome.run_seed = task.seed;
        outcome.strength = task.strength;
        outcome.instance = task.instance;
        if (method == AttackMethod::Mesh) {
            outcome.report =
                run_attack(task.instance->mesh, task.instance->label, model, config,
                           task.instance->id);
        } else {
            PointAttackResult pr = baseline_point_attack(task.instance->mesh, task.instance->label,
                                                         model, config, task.instance->id);
            outcome.report = std::move(pr.report);
            outcome.adv_cloud = std::move(pr.adv_cloud);
        }
    }

    for (const std::uint64_t seed : seeds) {
        for (const double strength : strengths) {
            BatchStats stats;
            stats.run_seed = seed;
            stats.strength = strength;
            for (const InstanceOutcome& o : result.outcomes) {
                if (o.run_seed != seed || o.strength != strength) continue;
                ++stats.instances;
                stats.attack_asr += o.report.success ? 1.0 : 0.0;
                if (!o.report.resample_success.empty()) {
                    double hits = 0.0;
                    for (const bool b : o.report.resample_success) hits += b ? 1.0 : 0.0;
                    stats.pseudo_physical_asr +=
                        hits / static_cast<double>(o.report.resample_success.size());
                }
            }
            if (stats.instances > 0) {
                stats.attack_asr /= stats.instances;
                stats.pseudo_physical_asr /= stats.instances;
            }
            result.stats.push_back(stats);
        }
    }
    return result;
}

std::vector<SeedAggregate> aggregate_stats(const AttackBatchResult& result) {
    std::vector<double> strengths;
    for (const BatchStats& s : result.stats) {
        if (std::find(strengths.begin(), strengths.end(), s.strength) == strengths.end()) {
            strengths.push_back(s.strength);
        }
    }
    std::vector<SeedAggregate> aggregates;
    for (const double strength : strengths) {
        SeedAggregate agg;
        agg.strength = strength;
        std::vector<double> asr, pp;
        for (const BatchStats& s : result.stats) {
            if (s.strength != strength) continue;
            asr.push_back(s.attack_asr);
            pp.push_back(s.pseudo_physical_asr);
            agg.instances = s.instances;
        }
        agg.seeds = static_cast<int>(asr.size());
        auto mean_var = [](const std::vector<double>& xs) {
            double mean = 0.0;
            for (const double x : xs) mean += x;
            mean /= static_cast<double>(xs.size());
            double var = 0.0;
            for (const double x : xs) var += (x - mean) * (x - mean);
            var /= static_cast<double>(xs.size());
            return std::make_pair(mean, var);
        };
        if (!asr.empty()) {
            std::tie(agg.attack_asr_mean, agg.attack_asr_var) = mean_var(asr);
            std::tie(agg.pseudo_physical_asr_mean, agg.pseudo_physical_asr_var) = mean_var(pp);
        }
        aggregates.push_back(agg);
    }
    return aggregates;
}

std::vector<LabeledCloud> make_clean_clouds(const std::vector<const DatasetInstance*>& instances,
                                            int num_points, std::uint64_t seed) {
    std::vector<LabeledCloud> clouds(instances.size());
    const std::int64_t n = static_cast<std::int64_t>(instances.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        const DatasetInstance* inst = instances[static_cast<std::size_t>(i)];
        Rng rng = Rng::derive(seed, {0x434c4f55ULL, fnv1a64_str(inst->id)});
        const FaceSampler sampler(inst->mesh);
        const SampleMap map = draw_sample_map(sampler, num_points, rng);
        LabeledCloud& lc = clouds[static_cast<std::size_t>(i)];
        lc.id = inst->id;
        lc.label = inst->label;
        lc.cloud = apply_sample_map(inst->mesh, map);
    }
    return clouds;
}

std::vector<LabeledCloud> make_adv_resampled_clouds(const std::vector<InstanceOutcome>& outcomes,
                                                    int num_points, std::uint64_t seed) {
    std::vector<LabeledCloud> clouds(outcomes.size());
    const std::int64_t n = static_cast<std::int64_t>(outcomes.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        const InstanceOutcome& o = outcomes[static_cast<std::size_t>(i)];
        const Mesh adv = adversarial_mesh(o.instance->mesh, o.report);
        Rng rng = Rng::derive(seed, {0x41445643ULL, fnv1a64_str(o.instance->id), o.run_seed});
        const FaceSampler sampler(adv);
        const SampleMap map = draw_sample_map(sampler, num_points, rng);
        LabeledCloud& lc = clouds[static_cast<std::size_t>(i)];
        lc.id = o.instance->id;
        lc.label = o.instance->label;
        lc.cloud = apply_sample_map(adv, map);
        lc.cloud.sample_map.reset();
    }
    return clouds;
}

std::vector<LabeledCloud> make_point_attack_clouds(const std::vector<InstanceOutcome>& outcomes) {
    std::vector<LabeledCloud> clouds;
    clouds.reserve(outcomes.size());
    for (const InstanceOutcome& o : outcomes) {
        LabeledCloud lc;
        lc.id = o.instance->id;
        lc.label = o.instance->label;
        lc.cloud.points = o.adv_cloud.points;
        clouds.push_back(std::move(lc));
    }
    return clouds;
}

nlohmann::json config_to_json(const AttackConfig& config) {
    nlohmann::json j;
    j["mode"] = config.mode == AttackMode::Targeted ? "targeted" : "untargeted";
    j["target_label"] = config.target_label;
    j["strength"] = config.strength;
    j["lambda_chamfer"] = config.weights[0];
    j["lambda_laplacian"] = config.weights[1];
    j["lambda_edge"] = config.weights[2];
    j["binary_search_steps"] = config.binary_search_steps;
    j["c_lower"] = config.c_lower;
    j["c_upper"] = config.c_upper;
    j["iters_per_step"] = config.iters_per_step;
    j["num_points"] = config.num_points;
    j["adam_lr"] = config.adam.lr;
    j["adam_beta1"] = config.adam.beta1;
    j["adam_beta2"] = config.adam.beta2;
    j["adam_eps"] = config.adam.eps;
    j["seed"] = config.seed;
    j["resamples"] = config.resamples;
    j["freeze_samples"] = config.freeze_samples;
    j["early_exit"] = config.early_exit;
    j["early_exit_window"] = config.early_exit_window;
    j["allow_nonmanifold"] = config.allow_nonmanifold;
    j["normalization"] = "unit-sphere(max-radius-1)";
    j["face_probabilities"] = "original-mesh-areas";
    j["version"] = version_string();
    return j;
}

namespace {

void write_config_comment(std::ofstream& out, const nlohmann::json& config_echo) {
    out << "# version=" << version_string() << '\n';
    out << "# config=" << config_echo.dump() << '\n';
}

}  // namespace

void write_instances_csv(const std::string& path, const AttackBatchResult& result,
                         const nlohmann::json& config_echo) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    write_config_comment(out, config_echo);
    out << "seed,strength,instance,true_label,clean_label,target_label,success,final_c,"
           "best_regularizer,attack_time_label,iterations,resample_successes,resamples\n";
    for (const InstanceOutcome& o : result.outcomes) {
        int hits = 0;
        for (const bool b : o.report.resample_success) hits += b ? 1 : 0;
        out << o.run_seed << ',' << format_double(o.strength) << ',' << o.report.instance_id << ','
            << o.report.true_label << ',' << o.report.clean_label << ',' << o.report.target_label
            << ',' << (o.report.success ? 1 : 0) << ',' << format_double(o.report.final_c) << ','
            << format_double(o.report.best_regularizer) << ',' << o.report.attack_time_label << ','
            << o.report.iterations_run << ',' << hits << ',' << o.report.resample_success.size()
            << '\n';
    }
    out.flush();
    if (!out) throw std::runtime_error(path + ": write failure");
}

void write_aggregate_csv(const std::string& path, const AttackBatchResult& result,
                         const nlohmann::json& config_echo) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    write_config_comment(out, config_echo);
    out << "row,seed,strength,attack_asr,pseudo_physical_asr,instances\n";
    for (const BatchStats& s : result.stats) {
        out << "seed," << s.run_seed << ',' << format_double(s.strength) << ','
            << format_double(s.attack_asr) << ',' << format_double(s.pseudo_physical_asr) << ','
            << s.instances << '\n';
    }
    for (const SeedAggregate& a : aggregate_stats(result)) {
        out << "mean,all," << format_double(a.strength) << ',' << format_double(a.attack_asr_mean)
            << ',' << format_double(a.pseudo_physical_asr_mean) << ',' << a.instances << '\n';
        out << "variance,all," << format_double(a.strength) << ','
            << format_double(a.attack_asr_var) << ',' << format_double(a.pseudo_physical_asr_var)
            << ',' << a.instances << '\n';
    }
    out.flush();
    if (!out) throw std::runtime_error(path + ": write failure");
}

void write_summary_json(const std::string& path, const AttackBatchResult& result,
                        const nlohmann::json& config_echo) {
    nlohmann::json j;
    j["version"] = version_string();
    j["config"] = config_echo;
    j["method"] = result.method == AttackMethod::Mesh ? "mesh" : "point";
    nlohmann::json stats = nlohmann::json::array();
    for (const BatchStats& s : result.stats) {
        stats.push_back({{"seed", s.run_seed},
                         {"strength", s.strength},
                         {"attack_asr", s.attack_asr},
                         {"pseudo_physical_asr", s.pseudo_physical_asr},
                         {"instances", s.instances}});
    }
    j["per_seed"] = std::move(stats);
    nlohmann::json aggregates = nlohmann::json::array();
    for (const SeedAggregate& a : aggregate_stats(result)) {
        aggregates.push_back({{"strength", a.strength},
                              {"attack_asr_mean", a.attack_asr_mean},
                              {"attack_asr_var", a.attack_asr_var},
                              {"pseudo_physical_asr_mean", a.pseudo_physical_asr_mean},
                              {"pseudo_physical_asr_var", a.pseudo_physical_asr_var},
                              {"seeds", a.seeds},
                              {"instances", a.instances}});
    }
    j["aggregate"] = std::move(aggregates);
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << j.dump(2) << '\n';
}

void write_report_json(const std::string& path, const InstanceOutcome& outcome) {
    const AttackReport& r = outcome.report;
    nlohmann::json j;
    j["version"] = version_string();
    j["instance_id"] = r.instance_id;
    j["seed"] = outcome.run_seed;
    j["strength"] = outcome.strength;
    j["true_label"] = r.true_label;
    j["target_label"] = r.target_label;
    j["clean_label"] = r.clean_label;
    j["success"] = r.success;
    j["final_c"] = r.final_c;
    j["best_regularizer"] = r.best_regularizer;
    j["attack_time_label"] = r.attack_time_label;
    j["iterations"] = r.iterations_run;
    j["resample_labels"] = r.resample_labels;
    std::vector<int> verdicts;
    for (const bool b : r.resample_success) verdicts.push_back(b ? 1 : 0);
    j["resample_success"] = verdicts;
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << j.dump(2) << '\n';
}

void write_trace_jsonl(const std::string& path, const AttackReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    for (const LossBreakdown& b : report.trace) {
        const nlohmann::json j = {{"mis", b.mis},         {"chamfer", b.chamfer},
                                  {"laplacian", b.laplacian}, {"edge", b.edge},
                                  {"regularizer", b.regularizer}, {"total", b.total},
                                  {"c", b.c}};
        out << j.dump() << '\n';
    }
}

void write_defense_csv(const std::string& path, const std::vector<DefenseRow>& rows,
                       const nlohmann::json& config_echo) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    write_config_comment(out, config_echo);
    out << "defense,attack_source,accuracy,sample_count,seed\n";
    for (const DefenseRow& row : rows) {
        out << row.defense << ',' << row.attack_source << ',' << format_double(row.accuracy) << ','
            << row.sample_count << ',' << row.seed << '\n';
    }
    out.flush();
    if (!out) throw std::runtime_error(path + ": write failure");
}

void write_timing_log(const std::string& path, const AttackBatchResult& result) {
    std::ofstream out(path);
    if (!out) return;  // timing log is best effort
    for (const InstanceOutcome& o : result.outcomes) {
        out << o.run_seed << ' ' << o.report.instance_id << ' ' << format_double(o.strength) << ' '
            << format_double(o.report.seconds) << "s " << o.report.iterations_run << " iters\n";
    }
}

}  // namespace meshadv
