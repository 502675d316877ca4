// Regenerates the committed test fixtures: the probe classifier with its
// recorded logits, and the golden single-attack-step loss breakdown. Run from
// the repository root after any intentional change to the numerics, then
// re-run the unit suite.

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "meshadv/attack.hpp"
#include "meshadv/classifier.hpp"
#include "meshadv/dataset.hpp"

using namespace meshadv;

namespace {

Mesh small_attack_mesh(std::uint64_t seed) {
    Rng rng(seed);
    Mesh mesh = make_icosphere(1);
    for (Vec3& v : mesh.vertices) v *= 1.0 + rng.uniform(-0.1, 0.1);
    return normalize_mesh(mesh).first;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string out_dir = argc > 1 ? argv[1] : "tests/fixtures";

    {  // Probe model + logits on a fixed cloud.
        const std::vector<ShapeSpec> all = default_shape_specs(320);
        std::vector<ShapeSpec> two = {all[0], all[1]};
        two[0].class_id = 0;
        two[1].class_id = 1;
        const Dataset dataset = generate_dataset(two, 10, 7);
        std::vector<TrainInstance> instances;
        for (const DatasetInstance& inst : dataset.instances) {
            instances.push_back({&inst.mesh, inst.label, inst.id});
        }
        TrainConfig config;
        config.num_classes = 2;
        config.epochs = 2;
        config.batch_size = 4;
        config.points_per_cloud = 128;
        config.seed = 11;
        config.class_names = {dataset.class_names[0], dataset.class_names[1]};
        const ClassifierModel model = train(instances, config);
        save_model(model, out_dir + "/probe_model.bin");

        Rng rng(424242);
        std::vector<Vec3> probe(8);
        for (Vec3& p : probe) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const std::vector<double> logits = forward(model, probe);
        std::ofstream out(out_dir + "/probe_logits.txt");
        for (const double v : logits) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g\n", v);
            out << buf;
        }
        std::printf("probe model: %zu params, logits[0]=%.12f\n", model.parameter_count(),
                    logits[0]);
    }

    {  // Golden attack step (must mirror the unit test's setup exactly).
        const Mesh mesh = small_attack_mesh(3);
        const Adjacency adjacency = build_adjacency(mesh);
        const FaceSampler sampler(mesh);
        const ClassifierModel model = ClassifierModel::initialize(4, 21);

        AttackConfig config;
        config.binary_search_steps = 4;
        config.iters_per_step = 6;
        config.num_points = 48;
        config.resamples = 3;
        config.early_exit_window = 3;
        config.record_trace = true;
        AttackProblem problem;
        problem.mesh = &mesh;
        problem.adjacency = &adjacency;
        problem.model = &model;
        problem.sampler = &sampler;
        problem.true_label = 2;
        problem.clean_seed = Rng::derive_seed(11, {5, 6});
        {
            Rng clean_rng(problem.clean_seed);
            problem.clean_points =
                apply_sample_map(mesh, draw_sample_map(sampler, config.num_points, clean_rng))
                    .points;
        }
        Perturbation delta;
        delta.delta.assign(mesh.vertices.size(), Vec3{});
        AdamVecState adam(mesh.vertices.size());
        const StepOutcome outcome = attack_step(problem, delta, adam, 12.5, config, 987654321ULL);

        nlohmann::json golden;
        golden["mis"] = outcome.breakdown.mis;
        golden["chamfer"] = outcome.breakdown.chamfer;
        golden["laplacian"] = outcome.breakdown.laplacian;
        golden["edge"] = outcome.breakdown.edge;
        golden["regularizer"] = outcome.breakdown.regularizer;
        golden["total"] = outcome.breakdown.total;
        golden["predicted"] = outcome.predicted;
        std::ofstream out(out_dir + "/golden_step.json");
        out << golden.dump(2) << '\n';
        std::printf("golden step: total=%.12f predicted=%d\n", outcome.breakdown.total,
                    outcome.predicted);
    }
    return 0;
}
