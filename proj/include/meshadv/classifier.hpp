#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "meshadv/adam.hpp"
#include "meshadv/execution.hpp"
#include "meshadv/mesh.hpp"
#include "meshadv/vec3.hpp"

namespace meshadv {

struct DenseLayer {
    int in = 0, out = 0;
    std::vector<double> W;  // input-major [in][out]: row i holds the fan-out of input i
    std::vector<double> b;  // [out]
};

struct ModelMetadata {
    std::uint64_t training_seed = 0;
    std::string dataset_hash;
    int epochs = 0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::vector<std::string> class_names;
};

/// Point-cloud classifier: shared per-point MLP 3->32->64->128 with ReLU,
/// channel-wise max pool over points, head 128->64->C. No alignment nets, no
/// batch norm; permutation-invariant by construction and deterministic to
/// backpropagate by hand.
struct ClassifierModel {
    std::vector<DenseLayer> point_layers;
    std::vector<DenseLayer> head_layers;
    ModelMetadata metadata;

    int num_classes() const { return head_layers.back().out; }
    int feature_dim() const { return point_layers.back().out; }
    std::size_t parameter_count() const;

    static ClassifierModel initialize(int num_classes, std::uint64_t seed);
};

/// Everything the backward pass needs from a forward call: input points,
/// pre-activations of every layer, and which point won each pooled channel
/// (ties to the lowest point index).
struct ForwardTape {
    std::vector<Vec3> input;
    std::vector<std::vector<double>> point_pre;  // per point layer, [N * out]
    std::vector<double> pooled;                  // [feature_dim]
    std::vector<int> argmax;                     // [feature_dim]
    std::vector<std::vector<double>> head_pre;   // per head layer, [out]
    std::vector<double> logits;
};

/// Raw logits (softmax lives in the loss). Throws on empty or non-finite
/// input. Pass a tape to capture state for the backward pass.
std::vector<double> forward(const ClassifierModel& model, const std::vector<Vec3>& points,
                            ForwardTape* tape = nullptr, Execution exec = Execution::Parallel);

int predict(const ClassifierModel& model, const std::vector<Vec3>& points,
            Execution exec = Execution::Parallel);

/// Exact gradient of <logits, grad_logits> with respect to the input points.
/// Points that won no pooled channel get zero gradient.
std::vector<Vec3> backward_to_input(const ClassifierModel& model, const ForwardTape& tape,
                                    std::span<const double> grad_logits);

/// Parameter gradients of <logits, grad_logits>, accumulated (+=) into a
/// same-shaped buffer. Used by the trainer.
struct GradBuffer {
    std::vector<DenseLayer> point_layers;
    std::vector<DenseLayer> head_layers;

    static GradBuffer zeros_like(const ClassifierModel& model);
    void accumulate(const GradBuffer& other);
    void scale(double s);
};

void backward_params(const ClassifierModel& model, const ForwardTape& tape,
                     std::span<const double> grad_logits, GradBuffer& accum);

struct TrainInstance {
    const Mesh* mesh = nullptr;
    int label = -1;
    std::string id;
};

struct TrainConfig {
    int num_classes = 0;
    int epochs = 60;
    int batch_size = 32;
    int points_per_cloud = 1024;
    AdamParams adam{1e-3, 0.9, 0.999, 1e-8};
    std::uint64_t seed = 0;
    std::vector<std::string> class_names;
    bool verbose = false;
};

/// 80/20 split by hash of the instance id; every consumer of the split uses
/// this predicate so dataset manifests and the trainer always agree.
bool instance_hash_is_test(const std::string& id);

/// Trains with Adam on cross-entropy. A fresh surface cloud is drawn from
/// every mesh each epoch. Deterministic given the seed.
ClassifierModel train(const std::vector<TrainInstance>& instances, const TrainConfig& config);

/// Held-out accuracy with deterministic per-instance sample seeds.
double evaluate_accuracy(const ClassifierModel& model, const std::vector<TrainInstance>& instances,
                         int points_per_cloud, std::uint64_t seed);

/// Binary model file: 8-byte magic, JSON header (dims, metadata, checksum),
/// little-endian float64 weight blob. Round-trips bitwise.
void save_model(const ClassifierModel& model, const std::string& path);
ClassifierModel load_model(const std::string& path);

}  // namespace meshadv
