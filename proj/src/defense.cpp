#include "meshadv/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "meshadv/rng.hpp"

namespace meshadv {

void DefenseConfig::validate() const {
    if (srs_keep < 1) throw std::invalid_argument("defense: srsKeep must be >= 1");
    if (sor_k < 1) throw std::invalid_argument("defense: sorK must be >= 1");
    if (!(sor_alpha > 0.0)) throw std::invalid_argument("defense: sorAlpha must be > 0");
}

PointCloud srs(const PointCloud& cloud, int keep, std::uint64_t seed) {
    const int n = cloud.point_count();
    if (keep < 1 || keep > n) {
        throw std::invalid_argument("srs: keep " + std::to_string(keep) +
                                    " out of range [1, " + std::to_string(n) + "]");
    }
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (int i = 0; i < keep; ++i) {
        const std::size_t j =
            static_cast<std::size_t>(i) +
            rng.uniform_index(static_cast<std::uint64_t>(n - i));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(keep));
    std::sort(idx.begin(), idx.end());

    PointCloud out;
    out.points.reserve(idx.size());
    for (const int i : idx) out.points.push_back(cloud.points[static_cast<std::size_t>(i)]);
    return out;
}

std::vector<double> mean_knn_distances(const std::vector<Vec3>& points, int k, Execution exec) {
    const int n = static_cast<int>(points.size());
    if (k >= n) throw std::invalid_argument("mean_knn_distances: need more points than k");
    std::vector<double> d(static_cast<std::size_t>(n), 0.0);
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
    for (int i = 0; i < n; ++i) {
        // Track the k smallest squared distances (k is tiny; insertion keeps it simple).
        std::vector<double> best(static_cast<std::size_t>(k),
                                 std::numeric_limits<double>::infinity());
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dist = squared_distance(points[static_cast<std::size_t>(i)],
                                                 points[static_cast<std::size_t>(j)]);
            if (dist < best.back()) {
                best.back() = dist;
                for (std::size_t m = best.size() - 1; m > 0 && best[m] < best[m - 1]; --m) {
                    std::swap(best[m], best[m - 1]);
                }
            }
        }
        double sum = 0.0;
        for (const double b : best) sum += std::sqrt(b);
        d[static_cast<std::size_t>(i)] = sum / static_cast<double>(k);
    }
    return d;
}

PointCloud sor(const PointCloud& cloud, int k, double alpha, Execution exec) {
    const int n = cloud.point_count();
    if (n <= k) throw std::invalid_argument("sor: need more points than k");
    const std::vector<double> d = mean_knn_distances(cloud.points, k, exec);

    double mean = 0.0;
    for (const double v : d) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const double v : d) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double threshold = mean + alpha * std::sqrt(var);

    PointCloud out;
    out.points.reserve(cloud.points.size());
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        if (d[i] <= threshold) out.points.push_back(cloud.points[i]);
    }
    return out;
}

std::string defense_name(DefenseKind kind) {
    switch (kind) {
        case DefenseKind::None: return "none";
        case DefenseKind::SRS: return "srs";
        case DefenseKind::SOR: return "sor";
    }
    return "unknown";
}

PointCloud apply_defense(const PointCloud& cloud, DefenseKind kind, const DefenseConfig& config) {
    switch (kind) {
        case DefenseKind::None: {
            PointCloud out;
            out.points = cloud.points;
            return out;
        }
        case DefenseKind::SRS:
            return srs(cloud, std::min(config.srs_keep, cloud.point_count()), config.seed);
        case DefenseKind::SOR:
            return sor(cloud, config.sor_k, config.sor_alpha);
    }
    throw std::invalid_argument("apply_defense: unknown defense");
}

std::vector<DefenseRow> evaluate_under_defense(const ClassifierModel& model,
                                               const std::vector<LabeledCloud>& clouds,
                                               const std::vector<DefenseKind>& defenses,
                                               const DefenseConfig& config,
                                               const std::string& attack_source) {
    config.validate();
    std::vector<DefenseRow> rows;
    for (const DefenseKind kind : defenses) {
        const std::int64_t n = static_cast<std::int64_t>(clouds.size());
        std::vector<int> correct(clouds.size(), 0);
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t i = 0; i < n; ++i) {
            const LabeledCloud& lc = clouds[static_cast<std::size_t>(i)];
            const PointCloud defended = apply_defense(lc.cloud, kind, config);
            if (defended.points.empty()) continue;
            correct[static_cast<std::size_t>(i)] =
                predict(model, defended.points, Execution::Serial) == lc.label ? 1 : 0;
        }
        DefenseRow row;
        row.defense = defense_name(kind);
        row.attack_source = attack_source;
        row.sample_count = static_cast<int>(clouds.size());
        row.seed = config.seed;
        row.accuracy = clouds.empty() ? 0.0
                                      : static_cast<double>(std::accumulate(correct.begin(),
                                                                            correct.end(), 0)) /
                                            static_cast<double>(clouds.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace meshadv
