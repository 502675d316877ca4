#pragma once

#include <optional>
#include <string>
#include <vector>

#include "meshadv/mesh.hpp"
#include "meshadv/rng.hpp"
#include "meshadv/vec3.hpp"

namespace meshadv {

/// Links each sampled point to its source face and barycentric weights.
/// The weights are non-negative and sum to 1 per point; holding the map
/// fixed while vertices move is what makes surface sampling differentiable.
struct SampleMap {
    std::vector<int> face_index;
    std::vector<std::array<double, 3>> lambdas;

    int point_count() const { return static_cast<int>(face_index.size()); }
};

struct PointCloud {
    std::vector<Vec3> points;
    std::optional<SampleMap> sample_map;

    int point_count() const { return static_cast<int>(points.size()); }
};

/// Cumulative-area table for multinomial face selection. Selection
/// probability is proportional to face area, which makes the sampled point
/// density uniform over the surface.
class FaceSampler {
public:
    explicit FaceSampler(const Mesh& mesh);

    /// Lowest face whose cumulative area exceeds u * total_area.
    int pick(double u) const;

    double total_area() const { return total_area_; }

private:
    std::vector<double> cumulative_;
    double total_area_ = 0.0;
};

/// Draws faces by area-weighted multinomial sampling and barycentric weights
/// uniform over each triangle (square-root reparameterization).
SampleMap draw_sample_map(const FaceSampler& sampler, int num_points, Rng& rng);
SampleMap draw_sample_map(const Mesh& mesh, int num_points, std::uint64_t seed);

/// points[i] = l1*v_a + l2*v_b + l3*v_c for face (a, b, c). Re-applying the
/// same map after vertices move yields points on the moved surface.
PointCloud apply_sample_map(const Mesh& mesh, const SampleMap& map);

/// Adjoint of apply_sample_map: routes per-point gradients back to vertices,
/// each point contributing lambda_k * grad to vertex k of its face. Vertices
/// no sample touches receive zero.
std::vector<Vec3> backprop_sample(const Mesh& mesh, const SampleMap& map,
                                  const std::vector<Vec3>& point_grads);

/// One "x y z" line per point, 9 significant digits.
void save_xyz(const PointCloud& cloud, const std::string& path);
PointCloud load_xyz(const std::string& path);

}  // namespace meshadv
