// Command-line driver: dataset generation, victim training, mesh/point
// attacks, defense evaluation, and report/plot-data emission.
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure,
// 3 acceptance-threshold failure (for CI gating via --min-asr).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "meshadv/experiment.hpp"

using namespace meshadv;
namespace fs = std::filesystem;

namespace {

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (!token.empty()) out.push_back(std::stod(token));
    }
    if (out.empty()) throw CLI::ValidationError("expected a comma-separated list of numbers");
    return out;
}

std::vector<TrainInstance> as_train_instances(const Dataset& dataset) {
    std::vector<TrainInstance> out;
    out.reserve(dataset.instances.size());
    for (const DatasetInstance& inst : dataset.instances) {
        out.push_back({&inst.mesh, inst.label, inst.id});
    }
    return out;
}

int run_gen(const std::string& out_dir, int per_class, int faces, std::uint64_t seed) {
    const Dataset dataset = generate_dataset(default_shape_specs(faces), per_class, seed);
    write_dataset(dataset, out_dir);
    int train_n = 0, test_n = 0;
    for (const DatasetInstance& inst : dataset.instances) (inst.is_test ? test_n : train_n)++;
    std::printf("wrote %zu meshes (%d train / %d test) to %s\n", dataset.instances.size(),
                train_n, test_n, out_dir.c_str());
    return 0;
}

int run_train(const std::string& data_dir, const std::string& model_path, TrainConfig config,
              bool verbose) {
    const Dataset dataset = load_dataset(data_dir);
    config.num_classes = static_cast<int>(dataset.class_names.size());
    config.class_names = dataset.class_names;
    config.verbose = verbose;
    const ClassifierModel model = train(as_train_instances(dataset), config);
    save_model(model, model_path);
    std::printf("trained %d epochs: train acc %.4f, test acc %.4f -> %s\n", config.epochs,
                model.metadata.train_accuracy, model.metadata.test_accuracy, model_path.c_str());
    return 0;
}

struct AttackCli {
    std::string data_dir, model_path, out_dir;
    std::string mode = "untargeted";
    std::string method = "mesh";
    std::string strengths = "0.1";
    int target = -1;
    int instances = 100;
    int seeds = 3;
    int jobs = 0;
    std::uint64_t seed = 1;
    double min_asr = -1.0;
    bool trace = false;
    bool freeze_samples = false;
    bool no_early_exit = false;
    bool allow_nonmanifold = false;
    bool write_meshes = true;
    bool write_clouds = false;
    AttackConfig config;
};

int run_attack_cmd(const AttackCli& cli) {
    const Dataset dataset = load_dataset(cli.data_dir);
    const ClassifierModel model = load_model(cli.model_path);

    AttackConfig config = cli.config;
    config.mode = cli.mode == "targeted" ? AttackMode::Targeted : AttackMode::Untargeted;
    config.target_label = cli.target;
    config.record_trace = cli.trace;
    config.freeze_samples = cli.freeze_samples;
    config.early_exit = !cli.no_early_exit;
    config.allow_nonmanifold = cli.allow_nonmanifold;
    const std::vector<double> strengths = parse_double_list(cli.strengths);
    for (const double s : strengths) {
        if (!(s > 0.0)) throw std::invalid_argument("strength values must be > 0");
    }
    if (config.mode != AttackMode::Targeted || cli.target >= 0) {
        AttackConfig check = config;
        check.strength = strengths.front();
        check.validate();
    }  // otherwise targets are drawn per instance inside the batch runner
    std::vector<std::uint64_t> seeds;
    for (int s = 0; s < cli.seeds; ++s) seeds.push_back(cli.seed + static_cast<std::uint64_t>(s));

    const auto selected =
        select_attack_instances(dataset, model, cli.instances, config.num_points, cli.seed);
    if (selected.empty()) {
        std::fprintf(stderr, "no correctly-classified test instances to attack\n");
        return 2;
    }
    std::printf("attacking %zu instances x %zu seeds x %zu strengths (%s method)\n",
                selected.size(), seeds.size(), strengths.size(), cli.method.c_str());

    const AttackMethod method = cli.method == "point" ? AttackMethod::Point : AttackMethod::Mesh;
    const AttackBatchResult result =
        run_attack_batch(selected, model, config, method, seeds, strengths, cli.jobs);

    fs::create_directories(cli.out_dir);
    nlohmann::json echo = config_to_json(config);
    echo["instances"] = static_cast<int>(selected.size());
    echo["seeds"] = cli.seeds;
    echo["method"] = cli.method;
    echo["strengths"] = strengths;
    echo["data_dir"] = cli.data_dir;

    write_instances_csv((fs::path(cli.out_dir) / "instances.csv").string(), result, echo);
    write_aggregate_csv((fs::path(cli.out_dir) / "aggregate.csv").string(), result, echo);
    write_summary_json((fs::path(cli.out_dir) / "summary.json").string(), result, echo);
    write_timing_log((fs::path(cli.out_dir) / "run.log").string(), result);

    fs::create_directories(fs::path(cli.out_dir) / "reports");
    for (const InstanceOutcome& o : result.outcomes) {
        const std::string stem = std::to_string(o.run_seed) + "_" + o.report.instance_id +
                                 (strengths.size() > 1 ? "_s" + std::to_string(o.strength) : "");
        write_report_json((fs::path(cli.out_dir) / "reports" / (stem + ".json")).string(), o);
        if (cli.trace) {
            write_trace_jsonl(
                (fs::path(cli.out_dir) / "reports" / (stem + ".trace.jsonl")).string(), o.report);
        }
        if (method == AttackMethod::Mesh && cli.write_meshes) {
            fs::create_directories(fs::path(cli.out_dir) / "meshes");
            save_mesh(adversarial_mesh(o.instance->mesh, o.report),
                      (fs::path(cli.out_dir) / "meshes" / (stem + "_adv.off")).string(),
                      MeshFormat::OFF);
        }
        if (method == AttackMethod::Point) {
            fs::create_directories(fs::path(cli.out_dir) / "clouds");
            save_xyz(o.adv_cloud, (fs::path(cli.out_dir) / "clouds" / (stem + "_adv.xyz")).string());
        } else if (cli.write_clouds) {
            fs::create_directories(fs::path(cli.out_dir) / "clouds");
            const Mesh adv = adversarial_mesh(o.instance->mesh, o.report);
            Rng rng = Rng::derive(o.run_seed, {0x434c4455ULL});
            const FaceSampler sampler(adv);
            const PointCloud cloud =
                apply_sample_map(adv, draw_sample_map(sampler, config.num_points, rng));
            save_xyz(cloud, (fs::path(cli.out_dir) / "clouds" / (stem + "_adv.xyz")).string());
        }
    }

    double worst_attack_asr = 1.0;
    for (const SeedAggregate& agg : aggregate_stats(result)) {
        std::printf("strength %.3g: attack ASR %.4f (var %.6f), pseudo-physical ASR %.4f (var %.6f)\n",
                    agg.strength, agg.attack_asr_mean, agg.attack_asr_var,
                    agg.pseudo_physical_asr_mean, agg.pseudo_physical_asr_var);
        worst_attack_asr = std::min(worst_attack_asr, agg.attack_asr_mean);
    }
    // Soft monotonicity check over a strength sweep (warn only).
    const auto aggs = aggregate_stats(result);
    for (std::size_t i = 1; i < aggs.size(); ++i) {
        if (aggs[i].strength > aggs[i - 1].strength &&
            aggs[i].attack_asr_mean < aggs[i - 1].attack_asr_mean) {
            std::fprintf(stderr,
                         "warning: attack ASR decreased from strength %.3g (%.4f) to %.3g (%.4f)\n",
                         aggs[i - 1].strength, aggs[i - 1].attack_asr_mean, aggs[i].strength,
                         aggs[i].attack_asr_mean);
        }
    }
    if (cli.min_asr >= 0.0 && worst_attack_asr < cli.min_asr) {
        std::fprintf(stderr, "attack ASR %.4f below required %.4f\n", worst_attack_asr,
                     cli.min_asr);
        return 3;
    }
    return 0;
}

struct DefendCli {
    std::string data_dir, model_path, out_csv;
    std::string attack_dir;    // mesh attack output (meshes/ + summary.json)
    std::string baseline_dir;  // point attack output (clouds/)
    std::string defenses = "none,srs,sor";
    DefenseConfig config;
    int num_points = 1024;
    std::uint64_t seed = 1;
};

int run_defend(const DefendCli& cli) {
    const Dataset dataset = load_dataset(cli.data_dir);
    const ClassifierModel model = load_model(cli.model_path);

    std::vector<DefenseKind> kinds;
    {
        std::stringstream ss(cli.defenses);
        std::string token;
        while (std::getline(ss, token, ',')) {
            if (token == "none") kinds.push_back(DefenseKind::None);
            else if (token == "srs") kinds.push_back(DefenseKind::SRS);
            else if (token == "sor") kinds.push_back(DefenseKind::SOR);
            else throw CLI::ValidationError("unknown defense '" + token + "'");
        }
    }
    DefenseConfig config = cli.config;
    config.seed = cli.seed;
    config.validate();

    std::map<std::string, const DatasetInstance*> by_id;
    for (const DatasetInstance& inst : dataset.instances) by_id[inst.id] = &inst;

    std::vector<DefenseRow> rows;

    {  // Clean clouds over the test split.
        std::vector<const DatasetInstance*> test_instances;
        for (const DatasetInstance& inst : dataset.instances) {
            if (inst.is_test) test_instances.push_back(&inst);
        }
        const auto clouds = make_clean_clouds(test_instances, cli.num_points, cli.seed);
        const auto clean_rows = evaluate_under_defense(model, clouds, kinds, config, "clean");
        rows.insert(rows.end(), clean_rows.begin(), clean_rows.end());
    }

    if (!cli.attack_dir.empty()) {  // Resampled clouds from adversarial meshes.
        std::vector<LabeledCloud> clouds;
        const fs::path mesh_dir = fs::path(cli.attack_dir) / "meshes";
        if (!fs::exists(mesh_dir)) {
            std::fprintf(stderr, "missing adversarial meshes under %s\n", mesh_dir.c_str());
            return 1;
        }
        for (const auto& entry : fs::directory_iterator(mesh_dir)) {
            const std::string name = entry.path().filename().string();
            // "<seed>_<instance>_adv.off"
            const auto first = name.find('_');
            const auto adv = name.rfind("_adv.off");
            if (first == std::string::npos || adv == std::string::npos) continue;
            const std::string id = name.substr(first + 1, adv - first - 1);
            const auto it = by_id.find(id);
            if (it == by_id.end()) continue;
            const Mesh mesh = load_mesh(entry.path().string(), MeshFormat::OFF);
            Rng rng = Rng::derive(cli.seed, {0x44454652ULL, static_cast<std::uint64_t>(clouds.size())});
            const FaceSampler sampler(mesh);
            LabeledCloud lc;
            lc.id = id;
            lc.label = it->second->label;
            lc.cloud = apply_sample_map(mesh, draw_sample_map(sampler, cli.num_points, rng));
            lc.cloud.sample_map.reset();
            clouds.push_back(std::move(lc));
        }
        std::sort(clouds.begin(), clouds.end(),
                  [](const LabeledCloud& a, const LabeledCloud& b) { return a.id < b.id; });
        const auto mesh_rows = evaluate_under_defense(model, clouds, kinds, config, "mesh_attack");
        rows.insert(rows.end(), mesh_rows.begin(), mesh_rows.end());
    }

    if (!cli.baseline_dir.empty()) {  // The baseline's optimization clouds.
        std::vector<LabeledCloud> clouds;
        const fs::path cloud_dir = fs::path(cli.baseline_dir) / "clouds";
        if (!fs::exists(cloud_dir)) {
            std::fprintf(stderr, "missing baseline clouds under %s\n", cloud_dir.c_str());
            return 1;
        }
        for (const auto& entry : fs::directory_iterator(cloud_dir)) {
            const std::string name = entry.path().filename().string();
            const auto first = name.find('_');
            const auto adv = name.rfind("_adv.xyz");
            if (first == std::string::npos || adv == std::string::npos) continue;
            const std::string id = name.substr(first + 1, adv - first - 1);
            const auto it = by_id.find(id);
            if (it == by_id.end()) continue;
            LabeledCloud lc;
            lc.id = id;
            lc.label = it->second->label;
            lc.cloud = load_xyz(entry.path().string());
            clouds.push_back(std::move(lc));
        }
        std::sort(clouds.begin(), clouds.end(),
                  [](const LabeledCloud& a, const LabeledCloud& b) { return a.id < b.id; });
        const auto point_rows = evaluate_under_defense(model, clouds, kinds, config, "point_attack");
        rows.insert(rows.end(), point_rows.begin(), point_rows.end());
    }

    nlohmann::json echo;
    echo["srs_keep"] = config.srs_keep;
    echo["sor_k"] = config.sor_k;
    echo["sor_alpha"] = config.sor_alpha;
    echo["seed"] = config.seed;
    echo["num_points"] = cli.num_points;
    echo["version"] = version_string();
    write_defense_csv(cli.out_csv, rows, echo);
    for (const DefenseRow& row : rows) {
        std::printf("%-12s %-14s accuracy %.4f (n=%d)\n", row.defense.c_str(),
                    row.attack_source.c_str(), row.accuracy, row.sample_count);
    }
    return 0;
}

int run_report(const std::vector<std::string>& attack_dirs, const std::string& out_dir) {
    struct Row {
        double strength;
        int num_points;
        int faces;
        std::array<double, 3> weights;
        std::string method;
        double attack_asr;
        double pp_asr;
        int instances;
    };
    std::vector<Row> rows;
    nlohmann::json merged = nlohmann::json::array();
    for (const std::string& dir : attack_dirs) {
        const fs::path summary_path = fs::path(dir) / "summary.json";
        std::ifstream in(summary_path);
        if (!in) {
            std::fprintf(stderr, "missing attack summary: %s\n", summary_path.c_str());
            return 1;
        }
        nlohmann::json summary;
        in >> summary;
        merged.push_back(summary);
        const auto& config = summary.at("config");
        for (const auto& agg : summary.at("aggregate")) {
            Row row;
            row.strength = agg.at("strength").get<double>();
            row.num_points = config.value("num_points", 0);
            row.faces = 0;
            if (config.contains("data_dir")) {
                // Face target comes from the dataset manifest when reachable.
                const fs::path manifest = fs::path(config["data_dir"].get<std::string>()) / "manifest.json";
                std::ifstream m(manifest);
                if (m) {
                    nlohmann::json mj;
                    m >> mj;
                    row.faces = mj.value("target_faces", 0);
                }
            }
            row.weights = {config.value("lambda_chamfer", 1.0),
                           config.value("lambda_laplacian", 0.5),
                           config.value("lambda_edge", 0.2)};
            row.method = summary.value("method", "mesh");
            row.attack_asr = agg.at("attack_asr_mean").get<double>();
            row.pp_asr = agg.at("pseudo_physical_asr_mean").get<double>();
            row.instances = agg.at("instances").get<int>();
            rows.push_back(row);
        }
    }

    fs::create_directories(fs::path(out_dir) / "plots");
    auto write_axis = [&](const std::string& name, auto key_of, const std::string& key_header) {
        std::ofstream out(fs::path(out_dir) / "plots" / name);
        out << "# version=" << version_string() << '\n';
        out << key_header << ",method,attack_asr,pseudo_physical_asr,instances\n";
        std::vector<Row> sorted = rows;
        std::stable_sort(sorted.begin(), sorted.end(), [&](const Row& a, const Row& b) {
            return key_of(a) < key_of(b);
        });
        for (const Row& row : sorted) {
            out << key_of(row) << ',' << row.method << ',' << row.attack_asr << ',' << row.pp_asr
                << ',' << row.instances << '\n';
        }
    };
    write_axis("asr_by_strength.csv", [](const Row& r) { return r.strength; }, "strength");
    write_axis("asr_by_points.csv", [](const Row& r) { return r.num_points; }, "num_points");
    write_axis("asr_by_faces.csv", [](const Row& r) { return r.faces; }, "faces");
    {
        std::ofstream out(fs::path(out_dir) / "plots" / "asr_by_losses.csv");
        out << "# version=" << version_string() << '\n';
        out << "lambda_chamfer,lambda_laplacian,lambda_edge,method,attack_asr,pseudo_physical_asr,instances\n";
        for (const Row& row : rows) {
            out << row.weights[0] << ',' << row.weights[1] << ',' << row.weights[2] << ','
                << row.method << ',' << row.attack_asr << ',' << row.pp_asr << ','
                << row.instances << '\n';
        }
    }
    nlohmann::json out_summary;
    out_summary["version"] = version_string();
    out_summary["runs"] = std::move(merged);
    std::ofstream out(fs::path(out_dir) / "summary.json");
    out << out_summary.dump(2) << '\n';
    std::printf("report written to %s (%zu aggregate rows)\n", out_dir.c_str(), rows.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial mesh attack pipeline"};
    app.require_subcommand(1);

    // gen ---------------------------------------------------------------
    std::string gen_out = "data";
    int gen_per_class = 200;
    int gen_faces = 2000;
    std::uint64_t gen_seed = 1;
    auto* gen = app.add_subcommand("gen", "generate the synthetic mesh dataset");
    gen->add_option("--out", gen_out, "output dataset directory")->capture_default_str();
    gen->add_option("--per-class", gen_per_class, "meshes per class")->capture_default_str();
    gen->add_option("--faces", gen_faces, "target faces per mesh")->capture_default_str();
    gen->add_option("--seed", gen_seed, "dataset seed")->capture_default_str();

    // train -------------------------------------------------------------
    std::string train_data = "data", train_out = "model.bin";
    TrainConfig train_config;
    bool train_verbose = false;
    auto* tr = app.add_subcommand("train", "train the point-cloud victim classifier");
    tr->add_option("--data", train_data, "dataset directory")->capture_default_str();
    tr->add_option("--out", train_out, "model output path")->capture_default_str();
    tr->add_option("--epochs", train_config.epochs)->capture_default_str();
    tr->add_option("--batch", train_config.batch_size)->capture_default_str();
    tr->add_option("--lr", train_config.adam.lr)->capture_default_str();
    tr->add_option("--points", train_config.points_per_cloud)->capture_default_str();
    tr->add_option("--seed", train_config.seed)->capture_default_str();
    tr->add_flag("--verbose", train_verbose, "per-epoch progress on stderr");

    // attack ------------------------------------------------------------
    AttackCli atk;
    auto* at = app.add_subcommand("attack", "run the mesh attack (or the point baseline)");
    at->add_option("--data", atk.data_dir, "dataset directory")->required();
    at->add_option("--model", atk.model_path, "trained model file")->required();
    at->add_option("--out", atk.out_dir, "output directory")->required();
    at->add_option("--mode", atk.mode, "untargeted|targeted")->capture_default_str();
    at->add_option("--target", atk.target, "target class (targeted mode; -1 = random per instance)")
        ->capture_default_str();
    at->add_option("--method", atk.method, "mesh|point")->capture_default_str();
    at->add_option("--instances", atk.instances, "instances to attack")->capture_default_str();
    at->add_option("--strength", atk.strengths, "perturbation strength(s), comma separated")
        ->capture_default_str();
    at->add_option("--lambda-chamfer", atk.config.weights[0])->capture_default_str();
    at->add_option("--lambda-laplacian", atk.config.weights[1])->capture_default_str();
    at->add_option("--lambda-edge", atk.config.weights[2])->capture_default_str();
    at->add_option("--c-lower", atk.config.c_lower)->capture_default_str();
    at->add_option("--c-upper", atk.config.c_upper)->capture_default_str();
    at->add_option("--bs-steps", atk.config.binary_search_steps)->capture_default_str();
    at->add_option("--iters", atk.config.iters_per_step)->capture_default_str();
    at->add_option("--points", atk.config.num_points)->capture_default_str();
    at->add_option("--lr", atk.config.adam.lr)->capture_default_str();
    at->add_option("--seeds", atk.seeds, "independent runs with consecutive seeds")
        ->capture_default_str();
    at->add_option("--resamples", atk.config.resamples)->capture_default_str();
    at->add_option("--seed", atk.seed, "base seed")->capture_default_str();
    at->add_option("--jobs", atk.jobs, "parallel attack instances (0 = all cores)")
        ->capture_default_str();
    at->add_option("--early-exit-window", atk.config.early_exit_window)->capture_default_str();
    at->add_option("--min-asr", atk.min_asr, "exit 3 if attack ASR falls below this")
        ->capture_default_str();
    at->add_flag("--trace", atk.trace, "record per-iteration loss breakdowns");
    at->add_flag("--freeze-samples", atk.freeze_samples, "reuse the clean sample map every iteration");
    at->add_flag("--keep-lowest-reg", atk.config.keep_lowest_regularizer,
                 "keep the lowest-regularizer success instead of the longest-streak one");
    at->add_flag("--no-early-exit", atk.no_early_exit, "always run the full iteration budget");
    at->add_flag("--allow-nonmanifold", atk.allow_nonmanifold, "attack non-manifold meshes anyway");
    at->add_flag("!--no-meshes", atk.write_meshes, "skip writing adversarial meshes");
    at->add_flag("--write-clouds", atk.write_clouds, "also export per-instance clouds");

    // defend --------------------------------------------------------------
    DefendCli def;
    auto* de = app.add_subcommand("defend", "evaluate defenses over clean/adversarial clouds");
    de->add_option("--data", def.data_dir, "dataset directory")->required();
    de->add_option("--model", def.model_path, "trained model file")->required();
    de->add_option("--out", def.out_csv, "output CSV path")->required();
    de->add_option("--attack-dir", def.attack_dir, "mesh attack output directory");
    de->add_option("--baseline-dir", def.baseline_dir, "point attack output directory");
    de->add_option("--defenses", def.defenses, "comma list of none,srs,sor")->capture_default_str();
    de->add_option("--srs-keep", def.config.srs_keep)->capture_default_str();
    de->add_option("--sor-k", def.config.sor_k)->capture_default_str();
    de->add_option("--sor-alpha", def.config.sor_alpha)->capture_default_str();
    de->add_option("--points", def.num_points)->capture_default_str();
    de->add_option("--seed", def.seed)->capture_default_str();

    // report --------------------------------------------------------------
    std::vector<std::string> report_dirs;
    std::string report_out = "report";
    auto* re = app.add_subcommand("report", "merge attack outputs into plot-ready CSVs");
    re->add_option("--in", report_dirs, "attack output directories")->required()->expected(-1);
    re->add_option("--out", report_out, "report output directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return run_gen(gen_out, gen_per_class, gen_faces, gen_seed);
        if (tr->parsed()) return run_train(train_data, train_out, train_config, train_verbose);
        if (at->parsed()) return run_attack_cmd(atk);
        if (de->parsed()) return run_defend(def);
        if (re->parsed()) return run_report(report_dirs, report_out);
    } catch (const CLI::Error& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
