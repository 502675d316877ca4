#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meshadv/classifier.hpp"
#include "meshadv/execution.hpp"
#include "meshadv/sampler.hpp"

namespace meshadv {

struct DefenseConfig {
    int srs_keep = 512;
    int sor_k = 2;         // DUP-Net's published SOR settings
    double sor_alpha = 1.1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Simple random sampling: keeps a uniform subset without replacement, in
/// canonical (ascending original index) order. keep == N is the identity.
PointCloud srs(const PointCloud& cloud, int keep, std::uint64_t seed);

/// Statistical outlier removal: drops points whose mean distance to their k
/// nearest neighbors exceeds mean + alpha * stddev of that statistic over the
/// cloud. Returns the kept points in original order.
PointCloud sor(const PointCloud& cloud, int k, double alpha,
               Execution exec = Execution::Parallel);

/// Mean k-nearest-neighbor distance per point (the SOR statistic).
std::vector<double> mean_knn_distances(const std::vector<Vec3>& points, int k,
                                       Execution exec = Execution::Parallel);

enum class DefenseKind { None, SRS, SOR };

std::string defense_name(DefenseKind kind);

PointCloud apply_defense(const PointCloud& cloud, DefenseKind kind, const DefenseConfig& config);

struct LabeledCloud {
    std::string id;
    int label = -1;
    PointCloud cloud;
};

struct DefenseRow {
    std::string defense;
    std::string attack_source;
    double accuracy = 0.0;
    int sample_count = 0;
    std::uint64_t seed = 0;
};

/// Classification accuracy of the model over the labeled set after each
/// defense; one row per defense, mirroring the defense-matrix layout.
std::vector<DefenseRow> evaluate_under_defense(const ClassifierModel& model,
                                               const std::vector<LabeledCloud>& clouds,
                                               const std::vector<DefenseKind>& defenses,
                                               const DefenseConfig& config,
                                               const std::string& attack_source);

}  // namespace meshadv
