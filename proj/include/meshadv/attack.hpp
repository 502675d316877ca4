#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "meshadv/adam.hpp"
#include "meshadv/classifier.hpp"
#include "meshadv/losses.hpp"
#include "meshadv/mesh.hpp"
#include "meshadv/sampler.hpp"

namespace meshadv {

class AttackError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AttackConfig {
    AttackMode mode = AttackMode::Untargeted;
    int target_label = -1;  // required for targeted mode
    double strength = 0.1;
    std::array<double, 3> weights{1.0, 0.5, 0.2};
    int binary_search_steps = 10;
    double c_lower = 0.0;
    double c_upper = 80.0;
    int iters_per_step = 1500;
    int num_points = 1024;
    AdamParams adam{0.01, 0.9, 0.999, 1e-8};
    std::uint64_t seed = 0;
    int resamples = 5;
    bool freeze_samples = false;   // reuse the clean cloud's sample map every iteration
    bool early_exit = true;        // leave a round once the goal held this many times in a row
    int early_exit_window = 50;
    // Candidate kept from each round. Default: the iterate closing the
    // round's longest success streak, i.e. a delta whose neighborhood fooled
    // the model on many consecutive fresh surface samples. The alternative
    // keeps the lowest-regularizer success, which reads better perceptually
    // but can pick a barely-adversarial iterate that one lucky cloud flagged.
    bool keep_lowest_regularizer = false;
    bool allow_nonmanifold = false;
    bool record_trace = false;
    Execution exec = Execution::Serial;  // instances usually run in an outer parallel pool

    void validate() const;
};

/// Per-vertex displacement of the mesh vertices.
struct Perturbation {
    std::vector<Vec3> delta;
};

/// Rescales any per-vertex displacement whose Euclidean norm exceeds the
/// strength back onto the sphere of that radius; direction preserved.
void clip_strength(Perturbation& perturbation, double strength);

struct AdamVecState {
    std::vector<Vec3> m, v;
    std::int64_t t = 0;

    explicit AdamVecState(std::size_t n) : m(n), v(n) {}
};

/// One bias-corrected Adam update over an array of 3-vectors. Throws
/// AttackError on non-finite gradients.
void adam_step(AdamVecState& state, std::vector<Vec3>& params, const std::vector<Vec3>& grad,
               const AdamParams& adam);

/// Immutable per-instance attack inputs. The face sampler is built from the
/// unperturbed mesh, so face-selection probabilities are never differentiated
/// through (perturbations are small enough that the area shift is negligible).
struct AttackProblem {
    const Mesh* mesh = nullptr;
    const Adjacency* adjacency = nullptr;
    const ClassifierModel* model = nullptr;
    const FaceSampler* sampler = nullptr;
    std::vector<Vec3> clean_points;
    int true_label = -1;
    std::uint64_t clean_seed = 0;  // stream that produced clean_points
};

struct StepOutcome {
    LossBreakdown breakdown;
    std::vector<double> logits;
    int predicted = -1;
};

/// One optimization iteration: sample the perturbed surface, run the
/// classifier, assemble the total loss, push gradients back to the vertices,
/// Adam-update delta and clip it. Evaluates the incoming delta; the update
/// happens after evaluation.
StepOutcome attack_step(const AttackProblem& problem, Perturbation& delta, AdamVecState& adam,
                        double c, const AttackConfig& config, std::uint64_t iter_seed);

struct AttackReport {
    std::string instance_id;
    int true_label = -1;
    int target_label = -1;  // -1 for untargeted
    bool success = false;
    double final_c = 0.0;
    std::optional<Perturbation> best_delta;
    double best_regularizer = 0.0;
    int attack_time_label = -1;
    int clean_label = -1;
    int iterations_run = 0;
    std::vector<int> resample_labels;
    std::vector<bool> resample_success;
    std::vector<LossBreakdown> trace;
    double seconds = 0.0;  // logged separately, never serialized into the report
};

/// Full single-instance attack: binary search over c (success moves the
/// search toward larger c, i.e. stronger regularization), fresh surface
/// sample each iteration, per-vertex clipping, and K fresh-seed resample
/// verdicts from the resulting adversarial mesh.
AttackReport run_attack(const Mesh& mesh, int true_label, const ClassifierModel& model,
                        const AttackConfig& config, const std::string& instance_id);

/// Applies the best perturbation of a report to its mesh (identity when the
/// attack failed). Face topology is shared with the input by construction.
Mesh adversarial_mesh(const Mesh& mesh, const AttackReport& report);

struct PointAttackResult {
    PointCloud clean_cloud;
    PointCloud adv_cloud;
    AttackReport report;
};

/// C&W baseline operating directly on point coordinates: same loop, same
/// clipping rule per point, regularized by chamfer to the clean cloud only.
/// Resample verdicts come from the unchanged source mesh.
PointAttackResult baseline_point_attack(const Mesh& source_mesh, int true_label,
                                        const ClassifierModel& model, const AttackConfig& config,
                                        const std::string& instance_id);

}  // namespace meshadv
