#include "meshadv/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace meshadv {

LossBreakdown make_breakdown(double mis, double chamfer, double laplacian, double edge,
                             const std::array<double, 3>& weights, double c) {
    LossBreakdown b;
    b.mis = mis;
    b.chamfer = chamfer;
    b.laplacian = laplacian;
    b.edge = edge;
    b.weights = weights;
    b.c = c;
    b.regularizer = weights[0] * chamfer + weights[1] * laplacian + weights[2] * edge;
    b.total = mis + c * b.regularizer;
    return b;
}

std::vector<double> softmax(std::span<const double> logits) {
    const double zmax = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - zmax);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

LogitsLoss misclassification_loss(std::span<const double> logits, int label, AttackMode mode) {
    const int num_classes = static_cast<int>(logits.size());
    if (num_classes < 2) throw std::invalid_argument("need at least 2 classes");
    if (label < 0 || label >= num_classes) {
        throw std::out_of_range("label " + std::to_string(label) + " out of range [0, " +
                                std::to_string(num_classes) + ")");
    }
    const std::vector<double> p = softmax(logits);
    // log p_label computed from logits directly for accuracy.
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (const double z : logits) sum += std::exp(z - zmax);
    const double log_p = logits[static_cast<std::size_t>(label)] - zmax - std::log(sum);

    LogitsLoss out;
    out.grad_logits.resize(logits.size());
    if (mode == AttackMode::Targeted) {
        out.loss = -log_p;
        for (std::size_t i = 0; i < p.size(); ++i) out.grad_logits[i] = p[i];
        out.grad_logits[static_cast<std::size_t>(label)] -= 1.0;
    } else {
        out.loss = log_p;
        for (std::size_t i = 0; i < p.size(); ++i) out.grad_logits[i] = -p[i];
        out.grad_logits[static_cast<std::size_t>(label)] += 1.0;
    }
    return out;
}

namespace {

// Better of (best_d, best_i) and (d, i) with ties to the lowest index, so the
// winner is independent of scan order.
inline void consider(double d, int i, double& best_d, int& best_i) {
    if (d < best_d || (d == best_d && i < best_i)) {
        best_d = d;
        best_i = i;
    }
}

void nn_brute_force(const std::vector<Vec3>& queries, const std::vector<Vec3>& targets,
                    std::vector<int>& out, Execution exec) {
    const std::int64_t n = static_cast<std::int64_t>(queries.size());
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
    for (std::int64_t q = 0; q < n; ++q) {
        double best_d = std::numeric_limits<double>::infinity();
        int best_i = -1;
        for (std::size_t t = 0; t < targets.size(); ++t) {
            consider(squared_distance(queries[static_cast<std::size_t>(q)], targets[t]),
                     static_cast<int>(t), best_d, best_i);
        }
        out[static_cast<std::size_t>(q)] = best_i;
    }
}

// Uniform voxel grid over the target cloud. Queries expand outward in
// Chebyshev rings; any cell in an unvisited ring r+1 is at least r*cell away,
// which gives the termination bound.
struct VoxelGrid {
    Vec3 origin;
    double cell = 1.0;
    int nx = 1, ny = 1, nz = 1;
    std::vector<std::vector<int>> cells;  // target indices, ascending

    explicit VoxelGrid(const std::vector<Vec3>& targets) {
        Vec3 lo = targets[0], hi = targets[0];
        for (const Vec3& p : targets) {
            lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
            hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
        }
        origin = lo;
        const Vec3 extent = hi - lo;
        const double max_extent = std::max({extent.x, extent.y, extent.z, 1e-12});
        const int divisions = std::max(
            1, static_cast<int>(std::cbrt(static_cast<double>(targets.size()) / 2.0)));
        cell = max_extent / divisions;
        nx = std::max(1, static_cast<int>(extent.x / cell) + 1);
        ny = std::max(1, static_cast<int>(extent.y / cell) + 1);
        nz = std::max(1, static_cast<int>(extent.z / cell) + 1);
        cells.resize(static_cast<std::size_t>(nx) * ny * nz);
        for (std::size_t i = 0; i < targets.size(); ++i) {
            cells[cell_of(targets[i])].push_back(static_cast<int>(i));
        }
    }

    int clamp_coord(double v, int n) const {
        return std::clamp(static_cast<int>(v), 0, n - 1);
    }

    std::size_t cell_of(const Vec3& p) const {
        const int ix = clamp_coord((p.x - origin.x) / cell, nx);
        const int iy = clamp_coord((p.y - origin.y) / cell, ny);
        const int iz = clamp_coord((p.z - origin.z) / cell, nz);
        return index(ix, iy, iz);
    }

    std::size_t index(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(iz) * static_cast<std::size_t>(ny) +
                static_cast<std::size_t>(iy)) *
                   static_cast<std::size_t>(nx) +
               static_cast<std::size_t>(ix);
    }
};

void nn_grid(const std::vector<Vec3>& queries, const std::vector<Vec3>& targets,
             std::vector<int>& out, Execution exec) {
    const VoxelGrid grid(targets);
    const int max_ring = std::max({grid.nx, grid.ny, grid.nz});
    const std::int64_t n = static_cast<std::int64_t>(queries.size());
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
    for (std::int64_t qi = 0; qi < n; ++qi) {
        const Vec3& q = queries[static_cast<std::size_t>(qi)];
        const int cx = grid.clamp_coord((q.x - grid.origin.x) / grid.cell, grid.nx);
        const int cy = grid.clamp_coord((q.y - grid.origin.y) / grid.cell, grid.ny);
        const int cz = grid.clamp_coord((q.z - grid.origin.z) / grid.cell, grid.nz);
        double best_d = std::numeric_limits<double>::infinity();
        int best_i = -1;
        for (int r = 0; r <= max_ring; ++r) {
            if (best_i >= 0) {
                const double safe = static_cast<double>(r - 1) * grid.cell;
                if (r >= 1 && best_d <= safe * safe) break;
            }
            const int x0 = std::max(0, cx - r), x1 = std::min(grid.nx - 1, cx + r);
            const int y0 = std::max(0, cy - r), y1 = std::min(grid.ny - 1, cy + r);
            const int z0 = std::max(0, cz - r), z1 = std::min(grid.nz - 1, cz + r);
            for (int iz = z0; iz <= z1; ++iz) {
                for (int iy = y0; iy <= y1; ++iy) {
                    for (int ix = x0; ix <= x1; ++ix) {
                        // Only the shell of the ring; inner cells were visited.
                        if (r > 0 && ix != cx - r && ix != cx + r && iy != cy - r &&
                            iy != cy + r && iz != cz - r && iz != cz + r) {
                            continue;
                        }
                        for (const int t : grid.cells[grid.index(ix, iy, iz)]) {
                            consider(squared_distance(q, targets[static_cast<std::size_t>(t)]), t,
                                     best_d, best_i);
                        }
                    }
                }
            }
        }
        out[static_cast<std::size_t>(qi)] = best_i;
    }
}

}  // namespace

std::vector<int> nearest_neighbors(const std::vector<Vec3>& queries,
                                   const std::vector<Vec3>& targets, Execution exec,
                                   NearestNeighborPolicy policy) {
    if (targets.empty()) throw std::invalid_argument("nearest_neighbors: empty target cloud");
    std::vector<int> out(queries.size(), -1);
    if (policy == NearestNeighborPolicy::Auto) {
        policy = std::max(queries.size(), targets.size()) <= 4096
                     ? NearestNeighborPolicy::BruteForce
                     : NearestNeighborPolicy::Grid;
    }
    if (policy == NearestNeighborPolicy::BruteForce) {
        nn_brute_force(queries, targets, out, exec);
    } else {
        nn_grid(queries, targets, out, exec);
    }
    return out;
}

ChamferResult chamfer_loss(const std::vector<Vec3>& s1, const std::vector<Vec3>& s2,
                           Execution exec, NearestNeighborPolicy policy) {
    if (s1.empty() || s2.empty()) throw std::invalid_argument("chamfer_loss: empty point cloud");
    const std::vector<int> nn12 = nearest_neighbors(s1, s2, exec, policy);
    const std::vector<int> nn21 = nearest_neighbors(s2, s1, exec, policy);

    ChamferResult result;
    result.grad_s2.assign(s2.size(), Vec3{});
    const double inv1 = 1.0 / static_cast<double>(s1.size());
    const double inv2 = 1.0 / static_cast<double>(s2.size());
    double term1 = 0.0, term2 = 0.0;
    for (std::size_t i = 0; i < s1.size(); ++i) {
        const Vec3& y = s2[static_cast<std::size_t>(nn12[i])];
        term1 += squared_distance(s1[i], y);
        result.grad_s2[static_cast<std::size_t>(nn12[i])] += (2.0 * inv1) * (y - s1[i]);
    }
    for (std::size_t j = 0; j < s2.size(); ++j) {
        const Vec3& x = s1[static_cast<std::size_t>(nn21[j])];
        term2 += squared_distance(s2[j], x);
        result.grad_s2[j] += (2.0 * inv2) * (s2[j] - x);
    }
    result.loss = term1 * inv1 + term2 * inv2;
    return result;
}

VertexGradLoss laplacian_loss(const Mesh& mesh, const Adjacency& adjacency) {
    const std::size_t nv = mesh.vertices.size();
    if (adjacency.vertex_neighbors.size() != nv) {
        throw std::invalid_argument("adjacency does not match mesh vertex count");
    }
    std::vector<Vec3> delta(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        const auto& nbrs = adjacency.vertex_neighbors[i];
        if (nbrs.empty()) {
            throw std::invalid_argument("vertex " + std::to_string(i) +
                                        " has no neighbors; Laplacian undefined");
        }
        Vec3 centroid;
        for (const int k : nbrs) centroid += mesh.vertices[static_cast<std::size_t>(k)];
        delta[i] = mesh.vertices[i] - centroid / static_cast<double>(nbrs.size());
    }

    VertexGradLoss out;
    out.grad_vertices.assign(nv, Vec3{});
    for (std::size_t i = 0; i < nv; ++i) {
        out.loss += squared_norm(delta[i]);
        out.grad_vertices[i] += 2.0 * delta[i];
        const double w = -2.0 / static_cast<double>(adjacency.vertex_neighbors[i].size());
        for (const int k : adjacency.vertex_neighbors[i]) {
            out.grad_vertices[static_cast<std::size_t>(k)] += w * delta[i];
        }
    }
    return out;
}

EdgeLossResult edge_loss(const Mesh& mesh, const Adjacency& adjacency) {
    const std::size_t nf = mesh.faces.size();
    // Unnormalized face cross products and their norms.
    std::vector<Vec3> cross_vec(nf);
    std::vector<double> cross_len(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        const auto& tri = mesh.faces[f];
        const Vec3& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
        const Vec3& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
        const Vec3& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
        cross_vec[f] = cross(b - a, c - a);
        cross_len[f] = norm(cross_vec[f]);
    }

    EdgeLossResult out;
    out.grad_vertices.assign(mesh.vertices.size(), Vec3{});
    std::vector<Vec3> grad_normal(nf);  // dLoss/d(unit normal), accumulated over edges
    bool any_interior = false;
    for (const EdgeRecord& e : adjacency.edges) {
        if (e.face1 < 0) continue;  // boundary edges contribute nothing
        any_interior = true;
        const std::size_t fa = static_cast<std::size_t>(e.face0);
        const std::size_t fb = static_cast<std::size_t>(e.face1);
        if (cross_len[fa] <= 0.0 || cross_len[fb] <= 0.0) {
            ++out.skipped_edges;
            continue;
        }
        const Vec3 na = cross_vec[fa] / cross_len[fa];
        const Vec3 nb = cross_vec[fb] / cross_len[fb];
        const double cos_theta = -dot(na, nb);
        const double term = cos_theta + 1.0;
        out.loss += term * term;
        // d/dn_a [ (1 - na.nb)^2 ] = -2 (1 - na.nb) nb
        grad_normal[fa] += (-2.0 * term) * nb;
        grad_normal[fb] += (-2.0 * term) * na;
    }
    if (!any_interior) throw std::invalid_argument("edge_loss: mesh has no interior edges");

    for (std::size_t f = 0; f < nf; ++f) {
        if (cross_len[f] <= 0.0) continue;
        const Vec3& gn = grad_normal[f];
        if (gn == Vec3{}) continue;
        const Vec3 n = cross_vec[f] / cross_len[f];
        // Through the normalization: dL/dc = (g - (g.n) n) / |c|.
        const Vec3 gc = (gn - dot(gn, n) * n) / cross_len[f];
        const auto& tri = mesh.faces[f];
        const Vec3& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
        const Vec3& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
        const Vec3& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
        const Vec3 e1 = b - a;
        const Vec3 e2 = c - a;
        const Vec3 gb = cross(e2, gc);
        const Vec3 gcv = cross(gc, e1);
        out.grad_vertices[static_cast<std::size_t>(tri[1])] += gb;
        out.grad_vertices[static_cast<std::size_t>(tri[2])] += gcv;
        out.grad_vertices[static_cast<std::size_t>(tri[0])] -= gb + gcv;
    }
    return out;
}

RegularizerResult regularizer(const Mesh& mesh_adv, const Adjacency& adjacency,
                              const std::vector<Vec3>& clean_points, const PointCloud& adv_cloud,
                              const std::array<double, 3>& weights, Execution exec) {
    if (!adv_cloud.sample_map) {
        throw std::invalid_argument("regularizer: adversarial cloud has no sample map");
    }
    const ChamferResult ch = chamfer_loss(clean_points, adv_cloud.points, exec);
    const VertexGradLoss lap = laplacian_loss(mesh_adv, adjacency);
    const EdgeLossResult edge = edge_loss(mesh_adv, adjacency);

    RegularizerResult out;
    out.chamfer = ch.loss;
    out.laplacian = lap.loss;
    out.edge = edge.loss;
    out.loss = weights[0] * ch.loss + weights[1] * lap.loss + weights[2] * edge.loss;

    const std::vector<Vec3> chamfer_vertex_grad =
        backprop_sample(mesh_adv, *adv_cloud.sample_map, ch.grad_s2);
    out.grad_vertices.resize(mesh_adv.vertices.size());
    for (std::size_t i = 0; i < out.grad_vertices.size(); ++i) {
        out.grad_vertices[i] = weights[0] * chamfer_vertex_grad[i] +
                               weights[1] * lap.grad_vertices[i] +
                               weights[2] * edge.grad_vertices[i];
    }
    return out;
}

}  // namespace meshadv
