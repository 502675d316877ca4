// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fail. The heavy criteria share one dataset and one trained victim model.
//
// Runtime on a 2-core container is roughly 20-25 minutes, dominated by
// victim training and the 100-instance attack runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "meshadv/attack.hpp"
#include "meshadv/classifier.hpp"
#include "meshadv/dataset.hpp"
#include "meshadv/defense.hpp"
#include "meshadv/experiment.hpp"
#include "meshadv/losses.hpp"
#include "support.hpp"

using namespace meshadv;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
    std::printf("%s  [%d] %-34s %s (%.1fs)\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
                detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

// Closed 30-vertex solid (2 poles + 4 rings of 7) for the gradient suite.
Mesh gradient_mesh(Rng& rng) {
    std::vector<std::array<double, 2>> profile;
    profile.push_back({0.0, -1.0});
    for (int i = 1; i <= 4; ++i) {
        const double a = -0.5 * 3.14159265358979 + 3.14159265358979 * i / 5.0;
        profile.push_back({0.8 * std::cos(a), std::sin(a)});
    }
    profile.push_back({0.0, 1.0});
    Mesh mesh = make_revolved(profile, 7);
    for (Vec3& v : mesh.vertices) v *= 1.0 + rng.uniform(-0.08, 0.08);
    return normalize_mesh(mesh).first;
}

double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric) {
    return testing::gradient_relative_error(analytic, numeric);
}

// ---------------------------------------------------------------------------

void criterion1_gradients() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::string worst_name = "none";
    auto track = [&](const char* name, double err) {
        if (err > worst) {
            worst = err;
            worst_name = name;
        }
    };

    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        const Mesh mesh = gradient_mesh(rng);
        const Adjacency adj = build_adjacency(mesh);
        const ClassifierModel model = ClassifierModel::initialize(4, 900 + seed);
        const FaceSampler sampler(mesh);
        Rng draw(40 + seed);
        const SampleMap map = draw_sample_map(sampler, 64, draw);
        const PointCloud cloud = apply_sample_map(mesh, map);

        {  // chamfer w.r.t. the second cloud
            std::vector<Vec3> ref(48);
            for (Vec3& p : ref) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
            const ChamferResult ch = chamfer_loss(ref, cloud.points);
            const auto numeric = testing::central_differences(
                [&](const std::vector<double>& flat) {
                    return chamfer_loss(ref, testing::unflatten(flat)).loss;
                },
                testing::flatten(cloud.points));
            track("chamfer", max_rel_err(testing::flatten(ch.grad_s2), numeric));
        }
        {  // laplacian
            const VertexGradLoss lap = laplacian_loss(mesh, adj);
            const auto numeric = testing::central_differences(
                [&](const std::vector<double>& flat) {
                    Mesh m = mesh;
                    m.vertices = testing::unflatten(flat);
                    return laplacian_loss(m, adj).loss;
                },
                testing::flatten(mesh.vertices));
            track("laplacian", max_rel_err(testing::flatten(lap.grad_vertices), numeric));
        }
        {  // edge
            const EdgeLossResult edge = edge_loss(mesh, adj);
            const auto numeric = testing::central_differences(
                [&](const std::vector<double>& flat) {
                    Mesh m = mesh;
                    m.vertices = testing::unflatten(flat);
                    return edge_loss(m, adj).loss;
                },
                testing::flatten(mesh.vertices));
            track("edge", max_rel_err(testing::flatten(edge.grad_vertices), numeric));
        }
        {  // misclassification w.r.t. logits
            std::vector<double> logits(4);
            for (double& z : logits) z = rng.uniform(-2, 2);
            const LogitsLoss mis = misclassification_loss(logits, 1, AttackMode::Untargeted);
            const auto numeric = testing::central_differences(
                [&](const std::vector<double>& z) {
                    return misclassification_loss(z, 1, AttackMode::Untargeted).loss;
                },
                logits);
            track("misclassification", max_rel_err(mis.grad_logits, numeric));
        }
        {  // classifier input gradient
            std::vector<double> grad_logits(4);
            for (double& g : grad_logits) g = rng.uniform(-1, 1);
            ForwardTape tape;
            forward(model, cloud.points, &tape);
            const std::vector<Vec3> input_grad = backward_to_input(model, tape, grad_logits);
            const auto numeric = testing::central_differences(
                [&](const std::vector<double>& flat) {
                    const std::vector<double> logits = forward(model, testing::unflatten(flat));
                    double s = 0.0;
                    for (std::size_t c = 0; c < logits.size(); ++c) s += logits[c] * grad_logits[c];
                    return s;
                },
                testing::flatten(cloud.points));
            track("classifier-input", max_rel_err(testing::flatten(input_grad), numeric));
        }
        {  // full chain: vertices -> sampled points -> logits -> loss
            const int label = 2;
            ForwardTape tape;
            forward(model, cloud.points, &tape);
            const LogitsLoss mis = misclassification_loss(tape.logits, label, AttackMode::Untargeted);
            const std::vector<Vec3> point_grad = backward_to_input(model, tape, mis.grad_logits);
            const std::vector<Vec3> vertex_grad = backprop_sample(mesh, map, point_grad);
            const auto numeric = testing::central_differences(
                [&](const std::vector<double>& flat) {
                    Mesh m = mesh;
                    m.vertices = testing::unflatten(flat);
                    const PointCloud c = apply_sample_map(m, map);
                    const std::vector<double> logits = forward(model, c.points);
                    return misclassification_loss(logits, label, AttackMode::Untargeted).loss;
                },
                testing::flatten(mesh.vertices));
            track("full-chain", max_rel_err(testing::flatten(vertex_grad), numeric));
        }
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    report(1, "gradient correctness suite",
           worst < 1e-4 && secs < 60.0,
           fmt("worst rel err %.3g (%s), bound 1e-4", worst, worst_name.c_str()), secs);
}

void criterion2_analytic_oracles() {
    const auto t0 = Clock::now();
    bool pass = true;
    std::string detail = "all analytic values hit";

    Rng rng(7);
    std::vector<Vec3> cloud(25);
    for (Vec3& p : cloud) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    if (chamfer_loss(cloud, cloud).loss != 0.0) {
        pass = false;
        detail = "chamfer(S,S) != 0";
    }
    const std::vector<Vec3> origin = {{0, 0, 0}};
    const std::vector<Vec3> e1 = {{1, 0, 0}};
    if (std::abs(chamfer_loss(origin, e1).loss - 2.0) > 1e-15) {
        pass = false;
        detail = "chamfer({0},{e1}) != 2";
    }
    {
        Mesh flat;
        flat.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, 1, 0}, {0.5, -1, 0}};
        flat.faces = {{0, 1, 2}, {1, 0, 3}};
        const Adjacency adj = build_adjacency(flat);
        if (std::abs(edge_loss(flat, adj).loss) > 1e-9) {
            pass = false;
            detail = "coplanar edge loss != 0";
        }
    }
    {
        const double s = 1.0 / std::sqrt(3.0);
        Mesh tetra;
        tetra.vertices = {{s, s, s}, {s, -s, -s}, {-s, s, -s}, {-s, -s, s}};
        tetra.faces = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
        const Adjacency adj = build_adjacency(tetra);
        if (std::abs(laplacian_loss(tetra, adj).loss - 64.0 / 9.0) > 1e-9) {
            pass = false;
            detail = "tetrahedron laplacian != 64/9";
        }
    }
    report(2, "analytic loss oracles", pass, detail,
           std::chrono::duration<double>(Clock::now() - t0).count());
}

void criterion3_sampler_uniformity() {
    const auto t0 = Clock::now();
    Mesh square;
    square.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    square.faces = {{0, 1, 2}, {0, 2, 3}};
    const int n = 100000;
    const SampleMap map = draw_sample_map(square, n, 20240817);
    const PointCloud cloud = apply_sample_map(square, map);

    int face0 = 0;
    for (const int f : map.face_index) face0 += f == 0 ? 1 : 0;
    const double sigma = std::sqrt(n * 0.25);
    const bool faces_ok = std::abs(face0 - n / 2.0) <= 3.0 * sigma;

    int bins[16] = {0};
    for (const Vec3& p : cloud.points) {
        const int bx = std::min(3, static_cast<int>(p.x * 4.0));
        const int by = std::min(3, static_cast<int>(p.y * 4.0));
        ++bins[4 * by + bx];
    }
    double chi2 = 0.0;
    const double expected = n / 16.0;
    for (const int b : bins) chi2 += (b - expected) * (b - expected) / expected;
    const bool chi_ok = chi2 < 30.5779;  // p > 0.01 at 15 dof

    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    report(3, "sampler uniformity", faces_ok && chi_ok && secs < 10.0,
           fmt("chi2 %.2f < 30.578, face split %d/%d", chi2, face0, n - face0), secs);
}

// Shared experiment state built by criterion 4 and reused afterwards.
struct DeskState {
    Dataset dataset;
    ClassifierModel model;
    std::vector<const DatasetInstance*> attack_set;
    AttackBatchResult mesh_result;
    AttackBatchResult point_result;
    double clean_error_rate = 0.0;
};

void criterion4_training(DeskState& state) {
    const auto t_gen = Clock::now();
    state.dataset = generate_dataset(default_shape_specs(2000), 200, 42);
    const auto t0 = Clock::now();
    std::vector<TrainInstance> instances;
    for (const DatasetInstance& inst : state.dataset.instances) {
        instances.push_back({&inst.mesh, inst.label, inst.id});
    }
    TrainConfig config;
    config.num_classes = static_cast<int>(state.dataset.class_names.size());
    config.class_names = state.dataset.class_names;
    config.epochs = 60;
    config.batch_size = 32;
    config.points_per_cloud = 1024;
    config.adam.lr = 1e-3;
    config.seed = 7;
    state.model = train(instances, config);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const double acc = state.model.metadata.test_accuracy;
    report(4, "victim training",
           acc >= 0.90 && secs <= 600.0,
           fmt("held-out accuracy %.4f (>= 0.90), train %.4f; dataset %.0fs + train %.0fs", acc,
               state.model.metadata.train_accuracy,
               std::chrono::duration<double>(t0 - t_gen).count(), secs),
           secs);
}

AttackConfig desk_attack_config() {
    AttackConfig config;
    config.mode = AttackMode::Untargeted;
    config.strength = 0.1;
    config.binary_search_steps = 10;
    config.iters_per_step = 500;  // early exit keeps succeeding rounds short
    config.num_points = 1024;
    config.resamples = 5;
    config.seed = 1;
    return config;
}

void criterion5_attack_efficacy(DeskState& state) {
    const auto t0 = Clock::now();
    state.attack_set = select_attack_instances(state.dataset, state.model, 100, 1024, 7);
    const AttackConfig config = desk_attack_config();
    state.mesh_result = run_attack_batch(state.attack_set, state.model, config, AttackMethod::Mesh,
                                         {config.seed}, {config.strength}, 0);
    const BatchStats& stats = state.mesh_result.stats.front();
    const double gap = std::abs(stats.attack_asr - stats.pseudo_physical_asr);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    report(5, "mesh attack efficacy",
           static_cast<int>(state.attack_set.size()) == 100 && stats.attack_asr >= 0.80 &&
               gap <= 0.20 && secs <= 1800.0,
           fmt("attack ASR %.3f (>= 0.80), pseudo-physical ASR %.3f, gap %.3f (<= 0.20), n=%zu",
               stats.attack_asr, stats.pseudo_physical_asr, gap, state.attack_set.size()),
           secs);
}

void criterion6_pseudo_physical_contrast(DeskState& state) {
    const auto t0 = Clock::now();
    const AttackConfig config = desk_attack_config();
    state.point_result = run_attack_batch(state.attack_set, state.model, config,
                                          AttackMethod::Point, {config.seed}, {config.strength}, 0);

    {  // Clean error rate over the attack set, independent sampling stream.
        const auto clouds = make_clean_clouds(state.attack_set, 1024, 999);
        int wrong = 0;
        for (const LabeledCloud& lc : clouds) {
            if (predict(state.model, lc.cloud.points) != lc.label) ++wrong;
        }
        state.clean_error_rate = static_cast<double>(wrong) / static_cast<double>(clouds.size());
    }

    const BatchStats& point_stats = state.point_result.stats.front();
    const BatchStats& mesh_stats = state.mesh_result.stats.front();
    const double margin = mesh_stats.pseudo_physical_asr - point_stats.pseudo_physical_asr;
    const bool pass = point_stats.attack_asr >= 0.80 &&
                      point_stats.pseudo_physical_asr <= state.clean_error_rate + 0.05 &&
                      margin >= 0.40;
    report(6, "pseudo-physical contrast", pass,
           fmt("point ASR %.3f (>= 0.80), point resampled %.3f <= clean err %.3f + 0.05, "
               "mesh-point margin %.3f (>= 0.40)",
               point_stats.attack_asr, point_stats.pseudo_physical_asr, state.clean_error_rate,
               margin),
           std::chrono::duration<double>(Clock::now() - t0).count());
}

void criterion7_defense_analog(DeskState& state) {
    const auto t0 = Clock::now();
    DefenseConfig config;
    config.seed = 5;
    const std::vector<DefenseKind> kinds = {DefenseKind::None, DefenseKind::SRS, DefenseKind::SOR};

    const auto mesh_clouds = make_adv_resampled_clouds(state.mesh_result.outcomes, 1024, 31);
    const auto mesh_rows = evaluate_under_defense(state.model, mesh_clouds, kinds, config, "mesh");
    const double mesh_none = mesh_rows[0].accuracy;
    const double mesh_srs_recovery = mesh_rows[1].accuracy - mesh_none;
    const double mesh_sor_recovery = mesh_rows[2].accuracy - mesh_none;

    const auto point_clouds = make_point_attack_clouds(state.point_result.outcomes);
    const auto point_rows =
        evaluate_under_defense(state.model, point_clouds, kinds, config, "point");
    const double point_sor_recovery = point_rows[2].accuracy - point_rows[0].accuracy;

    const bool pass = mesh_srs_recovery <= 0.10 && mesh_sor_recovery <= 0.10 &&
                      point_sor_recovery >= 0.25;
    report(7, "defense robustness analog", pass,
           fmt("mesh recovery: srs %+.3f, sor %+.3f (<= 0.10); point sor recovery %+.3f (>= 0.25)",
               mesh_srs_recovery, mesh_sor_recovery, point_sor_recovery),
           std::chrono::duration<double>(Clock::now() - t0).count());
}

void criterion8_strength_ablation(DeskState& state) {
    const auto t0 = Clock::now();
    const std::vector<const DatasetInstance*> subset(
        state.attack_set.begin(),
        state.attack_set.begin() + std::min<std::size_t>(state.attack_set.size(), 60));
    AttackConfig config = desk_attack_config();
    config.iters_per_step = 250;
    config.resamples = 0;
    const std::vector<double> strengths = {0.02, 0.04, 0.06, 0.08, 0.1};
    const AttackBatchResult sweep = run_attack_batch(subset, state.model, config,
                                                     AttackMethod::Mesh, {config.seed}, strengths, 0);
    std::string curve;
    bool monotone = true;
    double prev = -1.0;
    for (const BatchStats& s : sweep.stats) {
        if (s.attack_asr < prev) monotone = false;
        prev = s.attack_asr;
        curve += fmt("%.2f:%.3f ", s.strength, s.attack_asr);
    }
    report(8, "strength ablation trend", monotone, "ASR by strength: " + curve,
           std::chrono::duration<double>(Clock::now() - t0).count());
}

void criterion9_invariants(DeskState& state) {
    const auto t0 = Clock::now();
    bool clip_ok = true, topo_ok = true;
    for (const InstanceOutcome& o : state.mesh_result.outcomes) {
        if (o.report.best_delta) {
            for (const Vec3& d : o.report.best_delta->delta) {
                if (norm(d) > o.strength * (1.0 + 1e-12)) clip_ok = false;
            }
        }
        const Mesh adv = adversarial_mesh(o.instance->mesh, o.report);
        if (face_topology_hash(adv) != face_topology_hash(o.instance->mesh)) topo_ok = false;
    }

    // Byte-identical determinism of the aggregate CSV over a 10-instance rerun.
    const std::vector<const DatasetInstance*> subset(
        state.attack_set.begin(),
        state.attack_set.begin() + std::min<std::size_t>(state.attack_set.size(), 10));
    AttackConfig config = desk_attack_config();
    config.iters_per_step = 120;
    const auto run_once = [&](const std::string& path) {
        const AttackBatchResult result = run_attack_batch(subset, state.model, config,
                                                          AttackMethod::Mesh, {config.seed},
                                                          {config.strength}, 0);
        write_aggregate_csv(path, result, config_to_json(config));
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::string csv_a = run_once("/tmp/meshadv_acceptance_a.csv");
    const std::string csv_b = run_once("/tmp/meshadv_acceptance_b.csv");
    const bool deterministic = !csv_a.empty() && csv_a == csv_b;

    report(9, "invariant suite", clip_ok && topo_ok && deterministic,
           fmt("clip %s, topology %s, byte-identical reruns %s", clip_ok ? "ok" : "violated",
               topo_ok ? "ok" : "violated", deterministic ? "ok" : "violated"),
           std::chrono::duration<double>(Clock::now() - t0).count());
}

void invariant_monotone_sanity(DeskState& state) {
    // Pure misclassification descent (all regularizer weights zero) is at
    // least as successful at attack time as the fully regularized attack.
    const auto t0 = Clock::now();
    AttackConfig config = desk_attack_config();
    config.weights = {0.0, 0.0, 0.0};
    config.binary_search_steps = 1;  // c has no effect with zero weights
    const AttackBatchResult pure = run_attack_batch(state.attack_set, state.model, config,
                                                    AttackMethod::Mesh, {config.seed},
                                                    {config.strength}, 0);
    const double pure_asr = pure.stats.front().attack_asr;
    const double full_asr = state.mesh_result.stats.front().attack_asr;
    report(0, "monotone sanity (invariant)", pure_asr >= full_asr,
           fmt("pure-mis ASR %.3f >= full ASR %.3f", pure_asr, full_asr),
           std::chrono::duration<double>(Clock::now() - t0).count());
}

}  // namespace

int main() {
    std::printf("acceptance suite (version %s)\n", version_string());
    std::fflush(stdout);
    const auto t0 = Clock::now();

    criterion1_gradients();
    criterion2_analytic_oracles();
    criterion3_sampler_uniformity();

    DeskState state;
    criterion4_training(state);
    criterion5_attack_efficacy(state);
    criterion6_pseudo_physical_contrast(state);
    criterion7_defense_analog(state);
    criterion8_strength_ablation(state);
    criterion9_invariants(state);
    invariant_monotone_sanity(state);

    std::printf("total %.1fs, %d failure(s)\n",
                std::chrono::duration<double>(Clock::now() - t0).count(), g_failures);
    return g_failures == 0 ? 0 : 1;
}
