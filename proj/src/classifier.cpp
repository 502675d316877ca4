#include "meshadv/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "meshadv/losses.hpp"
#include "meshadv/rng.hpp"
#include "meshadv/sampler.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts are not supported");

namespace meshadv {

namespace {

constexpr char kMagic[8] = {'M', 'A', 'D', 'V', 'N', 'E', 'T', '1'};
constexpr int kPointDims[] = {3, 32, 64, 128};
constexpr int kHeadHidden = 64;

std::uint64_t fnv1a64(const unsigned char* data, std::size_t len) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(reinterpret_cast<const unsigned char*>(s.data()), s.size());
}

DenseLayer make_layer(int in, int out, Rng& rng) {
    DenseLayer layer;
    layer.in = in;
    layer.out = out;
    layer.W.resize(static_cast<std::size_t>(in) * static_cast<std::size_t>(out));
    layer.b.assign(static_cast<std::size_t>(out), 0.0);
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    for (double& w : layer.W) w = scale * rng.normal();
    return layer;
}

// y = W x + b. Rank-1 updates over contiguous fan-out rows: no floating-point
// reduction chain, so the loop vectorizes without changing the result.
inline void dense(const DenseLayer& layer, const double* x, double* y) {
    std::memcpy(y, layer.b.data(), static_cast<std::size_t>(layer.out) * sizeof(double));
    for (int i = 0; i < layer.in; ++i) {
        const double* row = layer.W.data() + static_cast<std::size_t>(i) * layer.out;
        const double xi = x[i];
        for (int o = 0; o < layer.out; ++o) y[o] += xi * row[o];
    }
}

// x_grad = W^T y_grad (x_grad overwritten).
inline void dense_backward_input(const DenseLayer& layer, const double* y_grad, double* x_grad) {
    for (int i = 0; i < layer.in; ++i) {
        const double* row = layer.W.data() + static_cast<std::size_t>(i) * layer.out;
        double acc = 0.0;
        for (int o = 0; o < layer.out; ++o) acc += row[o] * y_grad[o];
        x_grad[i] = acc;
    }
}

inline void dense_backward_params(DenseLayer& grad, const double* y_grad, const double* x) {
    for (int i = 0; i < grad.in; ++i) {
        double* row = grad.W.data() + static_cast<std::size_t>(i) * grad.out;
        const double xi = x[i];
        for (int o = 0; o < grad.out; ++o) row[o] += xi * y_grad[o];
    }
    for (int o = 0; o < grad.out; ++o) grad.b[static_cast<std::size_t>(o)] += y_grad[o];
}

inline void relu(const double* z, double* h, int n) {
    for (int i = 0; i < n; ++i) h[i] = z[i] > 0.0 ? z[i] : 0.0;
}

inline void relu_mask(const double* z, double* g, int n) {
    for (int i = 0; i < n; ++i)
        if (z[i] <= 0.0) g[i] = 0.0;
}

// Shared backward pass; either output may be null.
void backward_impl(const ClassifierModel& model, const ForwardTape& tape,
                   std::span<const double> grad_logits, GradBuffer* params,
                   std::vector<Vec3>* input_grads) {
    const int feat = model.feature_dim();
    const int num_points = static_cast<int>(tape.input.size());
    if (static_cast<int>(grad_logits.size()) != model.num_classes()) {
        throw std::invalid_argument("grad_logits size does not match class count");
    }
    if (tape.pooled.size() != static_cast<std::size_t>(feat) ||
        tape.point_pre.size() != model.point_layers.size()) {
        throw std::invalid_argument("tape does not match model");
    }

    const DenseLayer& head0 = model.head_layers[0];
    const DenseLayer& head1 = model.head_layers[1];
    std::vector<double> dz1(grad_logits.begin(), grad_logits.end());
    std::vector<double> h4(static_cast<std::size_t>(head0.out));
    relu(tape.head_pre[0].data(), h4.data(), head0.out);
    if (params) dense_backward_params(params->head_layers[1], dz1.data(), h4.data());

    std::vector<double> dh4(static_cast<std::size_t>(head0.out));
    dense_backward_input(head1, dz1.data(), dh4.data());
    relu_mask(tape.head_pre[0].data(), dh4.data(), head0.out);
    if (params) dense_backward_params(params->head_layers[0], dh4.data(), tape.pooled.data());

    std::vector<double> dpool(static_cast<std::size_t>(feat));
    dense_backward_input(head0, dh4.data(), dpool.data());

    // Pooled gradient flows only to the winning point of each channel.
    std::map<int, std::vector<int>> winners;  // point -> channels, ascending point order
    for (int ch = 0; ch < feat; ++ch) winners[tape.argmax[static_cast<std::size_t>(ch)]].push_back(ch);

    if (input_grads) input_grads->assign(static_cast<std::size_t>(num_points), Vec3{});

    std::vector<double> dh(static_cast<std::size_t>(feat));
    std::vector<double> dprev(static_cast<std::size_t>(feat));
    std::vector<double> hbuf(static_cast<std::size_t>(feat));
    for (const auto& [point, channels] : winners) {
        const std::size_t p = static_cast<std::size_t>(point);
        std::fill(dh.begin(), dh.end(), 0.0);
        for (const int ch : channels) dh[static_cast<std::size_t>(ch)] = dpool[static_cast<std::size_t>(ch)];
        // Walk the point MLP backwards.
        for (int l = static_cast<int>(model.point_layers.size()) - 1; l >= 0; --l) {
            const DenseLayer& layer = model.point_layers[static_cast<std::size_t>(l)];
            const double* z = tape.point_pre[static_cast<std::size_t>(l)].data() +
                              p * static_cast<std::size_t>(layer.out);
            relu_mask(z, dh.data(), layer.out);
            if (params) {
                if (l > 0) {
                    const DenseLayer& prev = model.point_layers[static_cast<std::size_t>(l - 1)];
                    const double* zprev = tape.point_pre[static_cast<std::size_t>(l - 1)].data() +
                                          p * static_cast<std::size_t>(prev.out);
                    relu(zprev, hbuf.data(), prev.out);
                    dense_backward_params(params->point_layers[static_cast<std::size_t>(l)],
                                          dh.data(), hbuf.data());
                } else {
                    const double in[3] = {tape.input[p].x, tape.input[p].y, tape.input[p].z};
                    dense_backward_params(params->point_layers[0], dh.data(), in);
                }
            }
            dense_backward_input(layer, dh.data(), dprev.data());
            std::swap(dh, dprev);
        }
        if (input_grads) (*input_grads)[p] = Vec3{dh[0], dh[1], dh[2]};
    }
}

std::string serialize_metadata(const ModelMetadata& meta) {
    nlohmann::json j;
    j["training_seed"] = meta.training_seed;
    j["dataset_hash"] = meta.dataset_hash;
    j["epochs"] = meta.epochs;
    j["train_accuracy"] = meta.train_accuracy;
    j["test_accuracy"] = meta.test_accuracy;
    j["class_names"] = meta.class_names;
    return j.dump();
}

ModelMetadata parse_metadata(const nlohmann::json& j) {
    ModelMetadata meta;
    meta.training_seed = j.value("training_seed", 0ULL);
    meta.dataset_hash = j.value("dataset_hash", std::string{});
    meta.epochs = j.value("epochs", 0);
    meta.train_accuracy = j.value("train_accuracy", 0.0);
    meta.test_accuracy = j.value("test_accuracy", 0.0);
    meta.class_names = j.value("class_names", std::vector<std::string>{});
    return meta;
}

}  // namespace

std::size_t ClassifierModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : point_layers) n += l.W.size() + l.b.size();
    for (const auto& l : head_layers) n += l.W.size() + l.b.size();
    return n;
}

ClassifierModel ClassifierModel::initialize(int num_classes, std::uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("need at least 2 classes");
    Rng rng = Rng::derive(seed, {0x494e4954ULL});  // "INIT"
    ClassifierModel model;
    for (int l = 0; l + 1 < static_cast<int>(std::size(kPointDims)); ++l) {
        model.point_layers.push_back(make_layer(kPointDims[l], kPointDims[l + 1], rng));
    }
    model.head_layers.push_back(make_layer(kPointDims[std::size(kPointDims) - 1], kHeadHidden, rng));
    model.head_layers.push_back(make_layer(kHeadHidden, num_classes, rng));
    model.metadata.training_seed = seed;
    return model;
}

std::vector<double> forward(const ClassifierModel& model, const std::vector<Vec3>& points,
                            ForwardTape* tape, Execution exec) {
    if (points.empty()) throw std::invalid_argument("forward: empty point cloud");
    const int num_points = static_cast<int>(points.size());
    const int feat = model.feature_dim();

    std::vector<std::vector<double>> pre(model.point_layers.size());
    for (std::size_t l = 0; l < model.point_layers.size(); ++l) {
        pre[l].resize(static_cast<std::size_t>(num_points) *
                      static_cast<std::size_t>(model.point_layers[l].out));
    }
    std::vector<double> features(static_cast<std::size_t>(num_points) *
                                 static_cast<std::size_t>(feat));

    bool nonfinite = false;
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
    for (int p = 0; p < num_points; ++p) {
        const std::size_t sp = static_cast<std::size_t>(p);
        if (!is_finite(points[sp])) {
            nonfinite = true;
            continue;
        }
        double buf_a[128], buf_b[128];
        buf_a[0] = points[sp].x;
        buf_a[1] = points[sp].y;
        buf_a[2] = points[sp].z;
        double* cur = buf_a;
        double* nxt = buf_b;
        for (std::size_t l = 0; l < model.point_layers.size(); ++l) {
            const DenseLayer& layer = model.point_layers[l];
            dense(layer, cur, nxt);
            std::memcpy(pre[l].data() + sp * static_cast<std::size_t>(layer.out), nxt,
                        static_cast<std::size_t>(layer.out) * sizeof(double));
            relu(nxt, cur, layer.out);
        }
        std::memcpy(features.data() + sp * static_cast<std::size_t>(feat), cur,
                    static_cast<std::size_t>(feat) * sizeof(double));
    }
    if (nonfinite) throw std::invalid_argument("forward: non-finite point coordinates");

    // Channel-wise max over points, ties to the lowest point index.
    std::vector<double> pooled(static_cast<std::size_t>(feat),
                               -std::numeric_limits<double>::infinity());
    std::vector<int> argmax(static_cast<std::size_t>(feat), -1);
    for (int p = 0; p < num_points; ++p) {
        const double* row = features.data() + static_cast<std::size_t>(p) * feat;
        for (int ch = 0; ch < feat; ++ch) {
            if (row[ch] > pooled[static_cast<std::size_t>(ch)]) {
                pooled[static_cast<std::size_t>(ch)] = row[ch];
                argmax[static_cast<std::size_t>(ch)] = p;
            }
        }
    }

    const DenseLayer& head0 = model.head_layers[0];
    const DenseLayer& head1 = model.head_layers[1];
    std::vector<double> z4(static_cast<std::size_t>(head0.out));
    std::vector<double> h4(static_cast<std::size_t>(head0.out));
    dense(head0, pooled.data(), z4.data());
    relu(z4.data(), h4.data(), head0.out);
    std::vector<double> logits(static_cast<std::size_t>(head1.out));
    dense(head1, h4.data(), logits.data());

    if (tape) {
        tape->input = points;
        tape->point_pre = std::move(pre);
        tape->pooled = std::move(pooled);
        tape->argmax = std::move(argmax);
        tape->head_pre = {std::move(z4)};
        tape->logits = logits;
    }
    return logits;
}

int predict(const ClassifierModel& model, const std::vector<Vec3>& points, Execution exec) {
    const std::vector<double> logits = forward(model, points, nullptr, exec);
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::vector<Vec3> backward_to_input(const ClassifierModel& model, const ForwardTape& tape,
                                    std::span<const double> grad_logits) {
    std::vector<Vec3> grads;
    backward_impl(model, tape, grad_logits, nullptr, &grads);
    return grads;
}

GradBuffer GradBuffer::zeros_like(const ClassifierModel& model) {
    GradBuffer g;
    auto zero_layers = [](const std::vector<DenseLayer>& src) {
        std::vector<DenseLayer> out;
        out.reserve(src.size());
        for (const DenseLayer& l : src) {
            DenseLayer z;
            z.in = l.in;
            z.out = l.out;
            z.W.assign(l.W.size(), 0.0);
            z.b.assign(l.b.size(), 0.0);
            out.push_back(std::move(z));
        }
        return out;
    };
    g.point_layers = zero_layers(model.point_layers);
    g.head_layers = zero_layers(model.head_layers);
    return g;
}

void GradBuffer::accumulate(const GradBuffer& other) {
    auto add = [](std::vector<DenseLayer>& dst, const std::vector<DenseLayer>& src) {
        for (std::size_t l = 0; l < dst.size(); ++l) {
            for (std::size_t i = 0; i < dst[l].W.size(); ++i) dst[l].W[i] += src[l].W[i];
            for (std::size_t i = 0; i < dst[l].b.size(); ++i) dst[l].b[i] += src[l].b[i];
        }
    };
    add(point_layers, other.point_layers);
    add(head_layers, other.head_layers);
}

void GradBuffer::scale(double s) {
    for (auto& l : point_layers) {
        for (double& w : l.W) w *= s;
        for (double& b : l.b) b *= s;
    }
    for (auto& l : head_layers) {
        for (double& w : l.W) w *= s;
        for (double& b : l.b) b *= s;
    }
}

void backward_params(const ClassifierModel& model, const ForwardTape& tape,
                     std::span<const double> grad_logits, GradBuffer& accum) {
    backward_impl(model, tape, grad_logits, &accum, nullptr);
}

bool instance_hash_is_test(const std::string& id) { return fnv1a64(id) % 5 == 0; }

namespace {

// Flat views over all parameters, in serialization order.
void for_each_layer(ClassifierModel& model, const std::function<void(DenseLayer&)>& fn) {
    for (auto& l : model.point_layers) fn(l);
    for (auto& l : model.head_layers) fn(l);
}

std::vector<double> flatten_params(const ClassifierModel& model) {
    std::vector<double> flat;
    flat.reserve(model.parameter_count());
    for (const auto& l : model.point_layers) {
        flat.insert(flat.end(), l.W.begin(), l.W.end());
        flat.insert(flat.end(), l.b.begin(), l.b.end());
    }
    for (const auto& l : model.head_layers) {
        flat.insert(flat.end(), l.W.begin(), l.W.end());
        flat.insert(flat.end(), l.b.begin(), l.b.end());
    }
    return flat;
}

void unflatten_params(ClassifierModel& model, std::span<const double> flat) {
    std::size_t pos = 0;
    for_each_layer(model, [&](DenseLayer& l) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.W.size(), l.W.begin());
        pos += l.W.size();
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.b.size(), l.b.begin());
        pos += l.b.size();
    });
}

std::vector<double> flatten_grads(const GradBuffer& g) {
    std::vector<double> flat;
    for (const auto& l : g.point_layers) {
        flat.insert(flat.end(), l.W.begin(), l.W.end());
        flat.insert(flat.end(), l.b.begin(), l.b.end());
    }
    for (const auto& l : g.head_layers) {
        flat.insert(flat.end(), l.W.begin(), l.W.end());
        flat.insert(flat.end(), l.b.begin(), l.b.end());
    }
    return flat;
}

}  // namespace

ClassifierModel train(const std::vector<TrainInstance>& instances, const TrainConfig& config) {
    if (config.num_classes < 2) throw std::invalid_argument("train: need at least 2 classes");

    std::vector<int> train_idx, test_idx;
    std::vector<std::size_t> per_class(static_cast<std::size_t>(config.num_classes), 0);
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const TrainInstance& inst = instances[i];
        if (inst.label < 0 || inst.label >= config.num_classes) {
            throw std::invalid_argument("train: label out of range for instance " + inst.id);
        }
        ++per_class[static_cast<std::size_t>(inst.label)];
        (instance_hash_is_test(inst.id) ? test_idx : train_idx).push_back(static_cast<int>(i));
    }
    for (int c = 0; c < config.num_classes; ++c) {
        if (per_class[static_cast<std::size_t>(c)] == 0) {
            throw std::invalid_argument("train: class " + std::to_string(c) + " is empty");
        }
    }

    ClassifierModel model = ClassifierModel::initialize(config.num_classes, config.seed);
    model.metadata.class_names = config.class_names;
    {
        std::string digest;
        for (const auto& inst : instances) digest += inst.id + ":" + std::to_string(inst.label) + ";";
        std::ostringstream hex;
        hex << std::hex << fnv1a64(digest);
        model.metadata.dataset_hash = hex.str();
    }

    AdamOptimizer optimizer(model.parameter_count(), config.adam);
    std::vector<double> theta = flatten_params(model);

    double last_train_acc = 0.0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<int> order = train_idx;
        Rng shuffle_rng = Rng::derive(config.seed, {0x53485546ULL, static_cast<std::uint64_t>(epoch)});
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
        }

        int correct = 0;
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const int batch_n = static_cast<int>(end - start);
            std::vector<GradBuffer> grads(static_cast<std::size_t>(batch_n));
            std::vector<double> losses(static_cast<std::size_t>(batch_n), 0.0);
            std::vector<int> preds(static_cast<std::size_t>(batch_n), -1);

            bool bad = false;
#pragma omp parallel for schedule(dynamic)
            for (int bi = 0; bi < batch_n; ++bi) {
                const TrainInstance& inst = instances[static_cast<std::size_t>(order[start + static_cast<std::size_t>(bi)])];
                Rng srng = Rng::derive(config.seed,
                                       {0x53414d50ULL, static_cast<std::uint64_t>(epoch),
                                        static_cast<std::uint64_t>(order[start + static_cast<std::size_t>(bi)])});
                const FaceSampler sampler(*inst.mesh);
                const SampleMap map = draw_sample_map(sampler, config.points_per_cloud, srng);
                const PointCloud cloud = apply_sample_map(*inst.mesh, map);

                ForwardTape tape;
                const std::vector<double> logits = forward(model, cloud.points, &tape, Execution::Serial);
                const LogitsLoss mis = misclassification_loss(logits, inst.label, AttackMode::Targeted);
                if (!std::isfinite(mis.loss)) {
                    bad = true;
                    continue;
                }
                losses[static_cast<std::size_t>(bi)] = mis.loss;
                preds[static_cast<std::size_t>(bi)] = static_cast<int>(
                    std::max_element(logits.begin(), logits.end()) - logits.begin());
                grads[static_cast<std::size_t>(bi)] = GradBuffer::zeros_like(model);
                backward_params(model, tape, mis.grad_logits, grads[static_cast<std::size_t>(bi)]);
            }
            if (bad) {
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(start / static_cast<std::size_t>(config.batch_size)));
            }

            GradBuffer total = GradBuffer::zeros_like(model);
            for (int bi = 0; bi < batch_n; ++bi) {
                total.accumulate(grads[static_cast<std::size_t>(bi)]);
                epoch_loss += losses[static_cast<std::size_t>(bi)];
                const TrainInstance& inst = instances[static_cast<std::size_t>(order[start + static_cast<std::size_t>(bi)])];
                if (preds[static_cast<std::size_t>(bi)] == inst.label) ++correct;
            }
            total.scale(1.0 / static_cast<double>(batch_n));
            const std::vector<double> flat_grad = flatten_grads(total);
            optimizer.step(theta, flat_grad);
            unflatten_params(model, theta);
        }
        last_train_acc = train_idx.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(train_idx.size());
        if (config.verbose) {
            std::fprintf(stderr, "epoch %3d  loss %.4f  train acc %.4f\n", epoch,
                         epoch_loss / std::max<std::size_t>(1, train_idx.size()), last_train_acc);
        }
    }

    model.metadata.epochs = config.epochs;
    model.metadata.train_accuracy = last_train_acc;
    {
        std::vector<TrainInstance> test_set;
        for (const int i : test_idx) test_set.push_back(instances[static_cast<std::size_t>(i)]);
        model.metadata.test_accuracy =
            test_set.empty() ? 0.0
                             : evaluate_accuracy(model, test_set, config.points_per_cloud, config.seed);
    }
    return model;
}

double evaluate_accuracy(const ClassifierModel& model, const std::vector<TrainInstance>& instances,
                         int points_per_cloud, std::uint64_t seed) {
    if (instances.empty()) return 0.0;
    const std::int64_t n = static_cast<std::int64_t>(instances.size());
    std::vector<int> correct(instances.size(), 0);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        const TrainInstance& inst = instances[static_cast<std::size_t>(i)];
        Rng rng = Rng::derive(seed, {0x54455354ULL, fnv1a64(inst.id)});
        const FaceSampler sampler(*inst.mesh);
        const SampleMap map = draw_sample_map(sampler, points_per_cloud, rng);
        const PointCloud cloud = apply_sample_map(*inst.mesh, map);
        correct[static_cast<std::size_t>(i)] =
            predict(model, cloud.points, Execution::Serial) == inst.label ? 1 : 0;
    }
    return static_cast<double>(std::accumulate(correct.begin(), correct.end(), 0)) /
           static_cast<double>(instances.size());
}

void save_model(const ClassifierModel& model, const std::string& path) {
    const std::vector<double> flat = flatten_params(model);
    const auto* blob = reinterpret_cast<const unsigned char*>(flat.data());
    const std::size_t blob_len = flat.size() * sizeof(double);

    nlohmann::json header;
    header["point_dims"] = std::vector<int>(std::begin(kPointDims), std::end(kPointDims));
    header["head_dims"] = std::vector<int>{model.head_layers[0].in, model.head_layers[0].out,
                                           model.head_layers[1].out};
    header["num_classes"] = model.num_classes();
    header["weight_count"] = flat.size();
    {
        std::ostringstream hex;
        hex << std::hex << fnv1a64(blob, blob_len);
        header["checksum"] = hex.str();
    }
    header["metadata"] = nlohmann::json::parse(serialize_metadata(model.metadata));
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open file for writing");
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t header_len = header_str.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    out.write(reinterpret_cast<const char*>(blob), static_cast<std::streamsize>(blob_len));
    out.flush();
    if (!out) throw std::runtime_error(path + ": write failure");
}

ClassifierModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open file");
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw std::runtime_error(path + ": not a model file or unsupported version");
    }
    std::uint64_t header_len = 0;
    if (!in.read(reinterpret_cast<char*>(&header_len), sizeof header_len)) {
        throw std::runtime_error(path + ": truncated header");
    }
    std::string header_str(header_len, '\0');
    if (!in.read(header_str.data(), static_cast<std::streamsize>(header_len))) {
        throw std::runtime_error(path + ": truncated header");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": corrupt header: " + e.what());
    }

    const int num_classes = header.at("num_classes").get<int>();
    ClassifierModel model = ClassifierModel::initialize(num_classes, 0);
    model.metadata = parse_metadata(header.at("metadata"));

    const std::size_t weight_count = header.at("weight_count").get<std::size_t>();
    if (weight_count != model.parameter_count()) {
        throw std::runtime_error(path + ": weight count does not match architecture");
    }
    std::vector<double> flat(weight_count);
    if (!in.read(reinterpret_cast<char*>(flat.data()),
                 static_cast<std::streamsize>(weight_count * sizeof(double)))) {
        throw std::runtime_error(path + ": truncated weight blob");
    }
    {
        std::ostringstream hex;
        hex << std::hex
            << fnv1a64(reinterpret_cast<const unsigned char*>(flat.data()),
                       weight_count * sizeof(double));
        if (hex.str() != header.at("checksum").get<std::string>()) {
            throw std::runtime_error(path + ": checksum mismatch (corrupt or truncated file)");
        }
    }
    unflatten_params(model, flat);
    return model;
}

}  // namespace meshadv
