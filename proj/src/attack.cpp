#include "meshadv/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "meshadv/rng.hpp"

namespace meshadv {

namespace {

std::uint64_t id_hash(const std::string& id) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : id) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t kCleanTag = 0x434c4541ULL;     // clean reference cloud
constexpr std::uint64_t kIterTag = 0x49544552ULL;      // per-iteration sample
constexpr std::uint64_t kResampleTag = 0x52455341ULL;  // pseudo-physical resamples

bool goal_met(int predicted, int true_label, const AttackConfig& config) {
    return config.mode == AttackMode::Targeted ? predicted == config.target_label
                                               : predicted != true_label;
}

int attack_label(const AttackConfig& config, int true_label) {
    return config.mode == AttackMode::Targeted ? config.target_label : true_label;
}

double max_delta_norm(const Perturbation& p) {
    double mx = 0.0;
    for (const Vec3& d : p.delta) mx = std::max(mx, norm(d));
    return mx;
}

}  // namespace

void AttackConfig::validate() const {
    if (!(strength > 0.0)) throw std::invalid_argument("attack: strength must be > 0");
    if (!(c_lower < c_upper)) throw std::invalid_argument("attack: need cLower < cUpper");
    if (iters_per_step < 0) throw std::invalid_argument("attack: itersPerStep must be >= 0");
    if (binary_search_steps < 1) throw std::invalid_argument("attack: need >= 1 binary search step");
    if (num_points < 1) throw std::invalid_argument("attack: need >= 1 sample point");
    if (resamples < 0) throw std::invalid_argument("attack: resamples must be >= 0");
    if (mode == AttackMode::Targeted && target_label < 0) {
        throw std::invalid_argument("attack: targeted mode needs a target label");
    }
    for (const double w : weights) {
        if (w < 0.0) throw std::invalid_argument("attack: regularizer weights must be >= 0");
    }
}

void clip_strength(Perturbation& perturbation, double strength) {
    if (!(strength > 0.0)) throw std::invalid_argument("clip_strength: strength must be > 0");
    for (Vec3& d : perturbation.delta) {
        const double n = norm(d);
        if (n > strength) d *= strength / n;
    }
}

void adam_step(AdamVecState& state, std::vector<Vec3>& params, const std::vector<Vec3>& grad,
               const AdamParams& adam) {
    if (params.size() != grad.size() || state.m.size() != grad.size()) {
        throw std::invalid_argument("adam_step: dimension mismatch");
    }
    for (const Vec3& g : grad) {
        if (!is_finite(g)) throw AttackError("adam_step: non-finite gradient");
    }
    ++state.t;
    const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (std::size_t k = 0; k < 3; ++k) {
            const double g = grad[i][k];
            state.m[i][k] = adam.beta1 * state.m[i][k] + (1.0 - adam.beta1) * g;
            state.v[i][k] = adam.beta2 * state.v[i][k] + (1.0 - adam.beta2) * g * g;
            const double mhat = state.m[i][k] / bc1;
            const double vhat = state.v[i][k] / bc2;
            params[i][k] -= adam.lr * mhat / (std::sqrt(vhat) + adam.eps);
        }
    }
}

StepOutcome attack_step(const AttackProblem& problem, Perturbation& delta, AdamVecState& adam,
                        double c, const AttackConfig& config, std::uint64_t iter_seed) {
    const Mesh& mesh = *problem.mesh;
    Mesh adv;
    adv.faces = mesh.faces;
    adv.vertices.resize(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        adv.vertices[i] = mesh.vertices[i] + delta.delta[i];
    }

    Rng rng(iter_seed);
    const SampleMap map = draw_sample_map(*problem.sampler, config.num_points, rng);
    const PointCloud adv_cloud = apply_sample_map(adv, map);

    ForwardTape tape;
    const std::vector<double> logits = forward(*problem.model, adv_cloud.points, &tape, config.exec);
    const LogitsLoss mis =
        misclassification_loss(logits, attack_label(config, problem.true_label), config.mode);

    const std::vector<Vec3> point_grads = backward_to_input(*problem.model, tape, mis.grad_logits);
    std::vector<Vec3> total_grad = backprop_sample(adv, map, point_grads);

    // Components with zero weight contribute nothing to the objective or the
    // gradient, so they are only evaluated when a trace wants their values.
    const bool want_all = config.record_trace;
    const std::array<double, 3>& w = config.weights;
    double chamfer_val = 0.0, laplacian_val = 0.0, edge_val = 0.0;
    if (w[0] != 0.0 || want_all) {
        const ChamferResult ch = chamfer_loss(problem.clean_points, adv_cloud.points,
                                              config.exec, NearestNeighborPolicy::Grid);
        chamfer_val = ch.loss;
        if (w[0] != 0.0) {
            const std::vector<Vec3> routed = backprop_sample(adv, map, ch.grad_s2);
            const double k = c * w[0];
            for (std::size_t i = 0; i < total_grad.size(); ++i) total_grad[i] += k * routed[i];
        }
    }
    if (w[1] != 0.0 || want_all) {
        const VertexGradLoss lap = laplacian_loss(adv, *problem.adjacency);
        laplacian_val = lap.loss;
        if (w[1] != 0.0) {
            const double k = c * w[1];
            for (std::size_t i = 0; i < total_grad.size(); ++i)
                total_grad[i] += k * lap.grad_vertices[i];
        }
    }
    if ((w[2] != 0.0 || want_all) && problem.adjacency->has_interior_edges()) {
        const EdgeLossResult edge = edge_loss(adv, *problem.adjacency);
        edge_val = edge.loss;
        if (w[2] != 0.0) {
            const double k = c * w[2];
            for (std::size_t i = 0; i < total_grad.size(); ++i)
                total_grad[i] += k * edge.grad_vertices[i];
        }
    }

    StepOutcome outcome;
    outcome.breakdown = make_breakdown(mis.loss, chamfer_val, laplacian_val, edge_val,
                                       config.weights, c);
    outcome.logits = logits;
    outcome.predicted =
        static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (!std::isfinite(outcome.breakdown.total)) {
        throw AttackError("attack_step: non-finite loss (mis=" + std::to_string(mis.loss) +
                          ", reg=" + std::to_string(outcome.breakdown.regularizer) + ")");
    }

    adam_step(adam, delta.delta, total_grad, config.adam);
    clip_strength(delta, config.strength);
    return outcome;
}

namespace {

struct RoundBest {
    bool success = false;
    Perturbation delta;
    double regularizer = 0.0;
    int predicted = -1;
    int streak = 0;  // consecutive successes ending at this candidate

    // Records iterate (delta, breakdown) as the round candidate when it beats
    // the current one under the configured selection rule.
    void consider(const Perturbation& candidate, double reg, int predicted_label, int streak_len,
                  bool keep_lowest_regularizer) {
        const bool better = !success ||
                            (keep_lowest_regularizer ? reg < regularizer
                                                     : streak_len > streak ||
                                                           (streak_len == streak && reg < regularizer));
        if (better) {
            success = true;
            delta = candidate;
            regularizer = reg;
            predicted = predicted_label;
            streak = streak_len;
        }
    }
};

}  // namespace

AttackReport run_attack(const Mesh& mesh, int true_label, const ClassifierModel& model,
                        const AttackConfig& config, const std::string& instance_id) {
    config.validate();
    if (true_label < 0 || true_label >= model.num_classes()) {
        throw std::invalid_argument("run_attack: true label out of range");
    }
    const auto t0 = std::chrono::steady_clock::now();

    const Adjacency adjacency = build_adjacency(mesh);
    if (!config.allow_nonmanifold &&
        (!adjacency.closed_manifold() || !adjacency.consistently_oriented)) {
        throw AttackError("run_attack: mesh is not a consistently oriented closed manifold "
                          "(pass allow_nonmanifold to override)");
    }
    double max_radius = 0.0;
    for (const Vec3& v : mesh.vertices) max_radius = std::max(max_radius, norm(v));
    if (max_radius > 1.0 + 1e-6) {
        throw AttackError("run_attack: mesh is not normalized (max vertex radius " +
                          std::to_string(max_radius) + ")");
    }
    const std::uint64_t topo_hash = face_topology_hash(mesh);

    const FaceSampler sampler(mesh);
    const std::uint64_t inst = id_hash(instance_id);

    AttackProblem problem;
    problem.mesh = &mesh;
    problem.adjacency = &adjacency;
    problem.model = &model;
    problem.sampler = &sampler;
    problem.true_label = true_label;
    problem.clean_seed = Rng::derive_seed(config.seed, {inst, kCleanTag});
    {
        Rng clean_rng(problem.clean_seed);
        const SampleMap clean_map = draw_sample_map(sampler, config.num_points, clean_rng);
        problem.clean_points = apply_sample_map(mesh, clean_map).points;
    }

    AttackReport report;
    report.instance_id = instance_id;
    report.true_label = true_label;
    report.target_label = config.mode == AttackMode::Targeted ? config.target_label : -1;
    report.clean_label = predict(model, problem.clean_points, config.exec);

    double lo = config.c_lower;
    double hi = config.c_upper;
    RoundBest best;
    double best_c = 0.0;
    int last_predicted = report.clean_label;
    std::uint64_t iteration = 0;

    for (int round = 0; round < config.binary_search_steps; ++round) {
        const double c = 0.5 * (lo + hi);
        Perturbation delta;
        delta.delta.assign(mesh.vertices.size(), Vec3{});
        AdamVecState adam(mesh.vertices.size());

        RoundBest round_best;
        int streak = 0;
        for (int iter = 0; iter < config.iters_per_step; ++iter, ++iteration) {
            const std::uint64_t iter_seed =
                config.freeze_samples
                    ? problem.clean_seed
                    : Rng::derive_seed(config.seed, {inst, kIterTag, iteration});
            const Perturbation evaluated = delta;  // attack_step advances delta afterwards
            const StepOutcome outcome = attack_step(problem, delta, adam, c, config, iter_seed);
            ++report.iterations_run;
            last_predicted = outcome.predicted;
            if (config.record_trace) report.trace.push_back(outcome.breakdown);

            const double worst = max_delta_norm(delta);
            if (worst > config.strength * (1.0 + 1e-12)) {
                throw AttackError("run_attack: clip invariant violated (norm " +
                                  std::to_string(worst) + ")");
            }

            if (goal_met(outcome.predicted, true_label, config)) {
                ++streak;
                round_best.consider(evaluated, outcome.breakdown.regularizer, outcome.predicted,
                                    streak, config.keep_lowest_regularizer);
                if (config.early_exit && streak >= config.early_exit_window) break;
            } else {
                streak = 0;
            }
        }

        if (round_best.success) {
            // Cross-round preference mirrors the within-round rule; ties go
            // to the larger c (the more regularized success).
            const bool better =
                !best.success ||
                (config.keep_lowest_regularizer
                     ? round_best.regularizer < best.regularizer ||
                           (round_best.regularizer == best.regularizer && c > best_c)
                     : round_best.streak > best.streak ||
                           (round_best.streak == best.streak &&
                            (round_best.regularizer < best.regularizer ||
                             (round_best.regularizer == best.regularizer && c > best_c))));
            if (better) {
                best = std::move(round_best);
                best_c = c;
            }
            lo = c;
        } else {
            hi = c;
        }
    }

    report.success = best.success;
    report.final_c = report.success ? best_c : 0.5 * (lo + hi);
    report.best_regularizer = best.success ? best.regularizer : 0.0;
    report.attack_time_label = best.success ? best.predicted : last_predicted;
    if (best.success) report.best_delta = std::move(best.delta);

    // Pseudo-physical check: fresh clouds drawn from the adversarial surface
    // itself (its own face areas; this is an independent sampling process).
    const Mesh adv = adversarial_mesh(mesh, report);
    if (face_topology_hash(adv) != topo_hash) {
        throw AttackError("run_attack: face topology changed during attack");
    }
    const FaceSampler adv_sampler(adv);
    for (int j = 0; j < config.resamples; ++j) {
        Rng rng = Rng::derive(config.seed, {inst, kResampleTag, static_cast<std::uint64_t>(j)});
        const SampleMap map = draw_sample_map(adv_sampler, config.num_points, rng);
        const PointCloud cloud = apply_sample_map(adv, map);
        const int label = predict(model, cloud.points, config.exec);
        report.resample_labels.push_back(label);
        report.resample_success.push_back(goal_met(label, true_label, config));
    }

    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

Mesh adversarial_mesh(const Mesh& mesh, const AttackReport& report) {
    Mesh adv;
    adv.faces = mesh.faces;
    adv.vertices = mesh.vertices;
    if (report.best_delta) {
        const auto& delta = report.best_delta->delta;
        if (delta.size() != adv.vertices.size()) {
            throw std::invalid_argument("adversarial_mesh: perturbation size mismatch");
        }
        for (std::size_t i = 0; i < adv.vertices.size(); ++i) adv.vertices[i] += delta[i];
    }
    return adv;
}

PointAttackResult baseline_point_attack(const Mesh& source_mesh, int true_label,
                                        const ClassifierModel& model, const AttackConfig& config,
                                        const std::string& instance_id) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t inst = id_hash(instance_id);

    const FaceSampler sampler(source_mesh);
    std::vector<Vec3> clean_points;
    {
        Rng clean_rng = Rng::derive(config.seed, {inst, kCleanTag});
        const SampleMap map = draw_sample_map(sampler, config.num_points, clean_rng);
        clean_points = apply_sample_map(source_mesh, map).points;
    }

    AttackReport report;
    report.instance_id = instance_id;
    report.true_label = true_label;
    report.target_label = config.mode == AttackMode::Targeted ? config.target_label : -1;
    report.clean_label = predict(model, clean_points, config.exec);

    const std::size_t n = clean_points.size();
    double lo = config.c_lower;
    double hi = config.c_upper;
    double best_reg = std::numeric_limits<double>::infinity();
    double best_c = 0.0;
    std::optional<Perturbation> best_delta;
    int best_predicted = -1;
    int last_predicted = report.clean_label;

    for (int round = 0; round < config.binary_search_steps; ++round) {
        const double c = 0.5 * (lo + hi);
        Perturbation delta;
        delta.delta.assign(n, Vec3{});
        AdamVecState adam(n);

        RoundBest round_best;
        int streak = 0;
        for (int iter = 0; iter < config.iters_per_step; ++iter) {
            std::vector<Vec3> adv(n);
            for (std::size_t i = 0; i < n; ++i) adv[i] = clean_points[i] + delta.delta[i];

            ForwardTape tape;
            const std::vector<double> logits = forward(model, adv, &tape, config.exec);
            const LogitsLoss mis =
                misclassification_loss(logits, attack_label(config, true_label), config.mode);
            std::vector<Vec3> grad = backward_to_input(model, tape, mis.grad_logits);

            const ChamferResult ch = chamfer_loss(clean_points, adv, config.exec,
                                                  NearestNeighborPolicy::Grid);
            const double reg = config.weights[0] * ch.loss;
            if (config.weights[0] != 0.0) {
                const double k = c * config.weights[0];
                for (std::size_t i = 0; i < n; ++i) grad[i] += k * ch.grad_s2[i];
            }
            if (!std::isfinite(mis.loss + c * reg)) {
                throw AttackError("baseline_point_attack: non-finite loss");
            }

            const int predicted =
                static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
            ++report.iterations_run;
            last_predicted = predicted;
            if (goal_met(predicted, true_label, config)) {
                ++streak;
                if (!round_best.success || reg < round_best.regularizer) {
                    round_best.success = true;
                    round_best.delta = delta;
                    round_best.regularizer = reg;
                    round_best.predicted = predicted;
                }
                if (config.early_exit && streak >= config.early_exit_window) {
                    adam_step(adam, delta.delta, grad, config.adam);
                    clip_strength(delta, config.strength);
                    break;
                }
            } else {
                streak = 0;
            }

            adam_step(adam, delta.delta, grad, config.adam);
            clip_strength(delta, config.strength);
        }

        if (round_best.success) {
            if (round_best.regularizer < best_reg ||
                (round_best.regularizer == best_reg && c > best_c)) {
                best_reg = round_best.regularizer;
                best_c = c;
                best_delta = std::move(round_best.delta);
                best_predicted = round_best.predicted;
            }
            lo = c;
        } else {
            hi = c;
        }
    }

    report.success = best_delta.has_value();
    report.final_c = report.success ? best_c : 0.5 * (lo + hi);
    report.best_regularizer = report.success ? best_reg : 0.0;
    report.attack_time_label = report.success ? best_predicted : last_predicted;

    PointAttackResult result;
    result.clean_cloud.points = clean_points;
    result.adv_cloud.points = clean_points;
    if (best_delta) {
        for (std::size_t i = 0; i < n; ++i) result.adv_cloud.points[i] += best_delta->delta[i];
    }
    report.best_delta = std::move(best_delta);

    // The attack never touched the source mesh, so pseudo-physical resampling
    // just measures the classifier on fresh clean clouds.
    for (int j = 0; j < config.resamples; ++j) {
        Rng rng = Rng::derive(config.seed, {inst, kResampleTag, static_cast<std::uint64_t>(j)});
        const SampleMap map = draw_sample_map(sampler, config.num_points, rng);
        const PointCloud cloud = apply_sample_map(source_mesh, map);
        const int label = predict(model, cloud.points, config.exec);
        report.resample_labels.push_back(label);
        report.resample_success.push_back(goal_met(label, true_label, config));
    }

    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.report = std::move(report);
    return result;
}

}  // namespace meshadv
