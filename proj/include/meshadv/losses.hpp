#pragma once

#include <array>
#include <span>
#include <vector>

#include "meshadv/execution.hpp"
#include "meshadv/mesh.hpp"
#include "meshadv/sampler.hpp"
#include "meshadv/vec3.hpp"

namespace meshadv {

enum class AttackMode { Untargeted, Targeted };

/// Per-iteration loss diagnostics. regularizer and total are derived from the
/// components, the weights and the trade-off c.
struct LossBreakdown {
    double mis = 0.0;
    double chamfer = 0.0;
    double laplacian = 0.0;
    double edge = 0.0;
    double regularizer = 0.0;
    double total = 0.0;
    std::array<double, 3> weights{1.0, 0.5, 0.2};
    double c = 0.0;
};

LossBreakdown make_breakdown(double mis, double chamfer, double laplacian, double edge,
                             const std::array<double, 3>& weights, double c);

struct LogitsLoss {
    double loss = 0.0;
    std::vector<double> grad_logits;
};

/// Cross-entropy attack loss on raw logits.
///
/// Targeted: cross-entropy against the target label, minimized to pull the
/// prediction toward the target. Untargeted: negated cross-entropy against
/// the true label, so minimizing pushes the prediction away from the truth.
LogitsLoss misclassification_loss(std::span<const double> logits, int label, AttackMode mode);

std::vector<double> softmax(std::span<const double> logits);

enum class NearestNeighborPolicy { Auto, BruteForce, Grid };

/// Nearest neighbor in `targets` for every query point; ties broken by the
/// lowest target index. BruteForce below 4096 points, Grid above (Auto).
/// Both paths return identical indices.
std::vector<int> nearest_neighbors(const std::vector<Vec3>& queries,
                                   const std::vector<Vec3>& targets,
                                   Execution exec = Execution::Parallel,
                                   NearestNeighborPolicy policy = NearestNeighborPolicy::Auto);

struct ChamferResult {
    double loss = 0.0;
    std::vector<Vec3> grad_s2;
};

/// Symmetric sum of mean squared nearest-neighbor distances between two
/// clouds. The gradient is taken with respect to s2 (the adversarial cloud),
/// holding the nearest-neighbor assignment fixed.
ChamferResult chamfer_loss(const std::vector<Vec3>& s1, const std::vector<Vec3>& s2,
                           Execution exec = Execution::Parallel,
                           NearestNeighborPolicy policy = NearestNeighborPolicy::Auto);

struct VertexGradLoss {
    double loss = 0.0;
    std::vector<Vec3> grad_vertices;
};

/// Sum over vertices of the squared Laplacian coordinate: the offset of each
/// vertex from the centroid of its one-ring neighbors (uniform weights).
/// Throws if any vertex has no neighbors.
VertexGradLoss laplacian_loss(const Mesh& mesh, const Adjacency& adjacency);

/// Sum over interior edges of (cos theta + 1)^2 where theta is the interior
/// dihedral angle (pi for coplanar faces, so flat regions cost nothing).
/// Computed as cos theta = -(n_a . n_b) with consistently oriented normals.
/// Edges touching a zero-area face are skipped; the count is reported.
struct EdgeLossResult {
    double loss = 0.0;
    std::vector<Vec3> grad_vertices;
    int skipped_edges = 0;
};

EdgeLossResult edge_loss(const Mesh& mesh, const Adjacency& adjacency);

/// Weighted combination of chamfer / laplacian / edge on the adversarial
/// mesh, with the chamfer gradient routed through the sample map back to the
/// vertices. adv_cloud must carry its SampleMap.
struct RegularizerResult {
    double loss = 0.0;
    double chamfer = 0.0;
    double laplacian = 0.0;
    double edge = 0.0;
    std::vector<Vec3> grad_vertices;
};

RegularizerResult regularizer(const Mesh& mesh_adv, const Adjacency& adjacency,
                              const std::vector<Vec3>& clean_points, const PointCloud& adv_cloud,
                              const std::array<double, 3>& weights,
                              Execution exec = Execution::Parallel);

}  // namespace meshadv
