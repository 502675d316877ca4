#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "meshadv/mesh.hpp"
#include "meshadv/rng.hpp"

namespace meshadv {

enum class ShapeKind { Icosphere, Box, Cylinder, Cone, Torus, Ellipsoid, Capsule, Pyramid };

/// One shape class: resolution target plus the parameter and jitter ranges
/// drawn per instance. Ranges are tuned so the eight classes stay
/// geometrically separable after jitter (an icosphere squashed hard enough
/// would otherwise be an ellipsoid).
struct ShapeSpec {
    int class_id = 0;
    std::string name;
    ShapeKind kind = ShapeKind::Icosphere;
    int target_faces = 2000;
    std::array<double, 2> scale_jitter{0.6, 1.4};  // per-axis uniform scale
    double vertex_noise = 0.01;                    // along vertex normals, uniform +-
    bool random_rotation = true;
    std::array<double, 2> param{0.5, 1.0};   // primary shape parameter range (per kind)
    std::array<double, 2> param2{0.0, 0.0};  // secondary parameter range (per kind)
};

/// The eight default classes at a face-count target.
std::vector<ShapeSpec> default_shape_specs(int target_faces = 2000);

/// Base solids (closed, consistently oriented, outward-facing). Exposed for
/// tests; generate_dataset drives them through jitter and normalization.
Mesh make_icosphere(int subdivisions);
Mesh make_box(int cells_per_side);
Mesh make_torus(int major_segments, int minor_segments, double minor_radius);
Mesh make_revolved(const std::vector<std::array<double, 2>>& profile, int segments);
Mesh make_pyramid(int cells_per_side, double height);

/// One jittered instance of a spec (built, scaled, rotated, noised,
/// normalized). Deterministic given the rng state.
Mesh generate_shape(const ShapeSpec& spec, Rng& rng);

struct DatasetInstance {
    std::string id;
    int label = -1;
    std::string class_name;
    bool is_test = false;
    Mesh mesh;
};

struct Dataset {
    std::vector<std::string> class_names;
    std::vector<DatasetInstance> instances;
    std::uint64_t seed = 0;
    int per_class = 0;
    int target_faces = 2000;
};

/// per_class instances for every spec, deterministic given the seed, each
/// validated as a closed manifold (degenerate draws are retried a bounded
/// number of times).
Dataset generate_dataset(const std::vector<ShapeSpec>& specs, int per_class, std::uint64_t seed);

/// Writes <root>/<class>/<id>.off plus manifest.json (labels, split, seeds).
void write_dataset(const Dataset& dataset, const std::string& root);

Dataset load_dataset(const std::string& root);

}  // namespace meshadv
