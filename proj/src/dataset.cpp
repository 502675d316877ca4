#include "meshadv/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "meshadv/classifier.hpp"

namespace meshadv {

namespace {

constexpr double kPi = std::numbers::pi;

// Merges vertices closer than tol (cell hash plus neighbor-cell probe, so a
// pair straddling a cell boundary is still found).
void weld_vertices(std::vector<Vec3>& vertices, std::vector<std::array<int, 3>>& faces,
                   double tol = 1e-9) {
    const double cell = tol * 4.0;
    std::map<std::array<long long, 3>, std::vector<int>> grid;
    std::vector<int> remap(vertices.size(), -1);
    std::vector<Vec3> unique;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        const Vec3& p = vertices[i];
        const std::array<long long, 3> key = {static_cast<long long>(std::floor(p.x / cell)),
                                              static_cast<long long>(std::floor(p.y / cell)),
                                              static_cast<long long>(std::floor(p.z / cell))};
        int found = -1;
        for (long long dx = -1; dx <= 1 && found < 0; ++dx) {
            for (long long dy = -1; dy <= 1 && found < 0; ++dy) {
                for (long long dz = -1; dz <= 1 && found < 0; ++dz) {
                    const auto it = grid.find({key[0] + dx, key[1] + dy, key[2] + dz});
                    if (it == grid.end()) continue;
                    for (const int u : it->second) {
                        if (squared_distance(unique[static_cast<std::size_t>(u)], p) <= tol * tol) {
                            found = u;
                            break;
                        }
                    }
                }
            }
        }
        if (found < 0) {
            found = static_cast<int>(unique.size());
            unique.push_back(p);
            grid[key].push_back(found);
        }
        remap[i] = found;
    }
    vertices = std::move(unique);
    std::vector<std::array<int, 3>> kept;
    kept.reserve(faces.size());
    for (const auto& f : faces) {
        const std::array<int, 3> g = {remap[static_cast<std::size_t>(f[0])],
                                      remap[static_cast<std::size_t>(f[1])],
                                      remap[static_cast<std::size_t>(f[2])]};
        if (g[0] != g[1] && g[1] != g[2] && g[0] != g[2]) kept.push_back(g);
    }
    faces = std::move(kept);
}

double signed_volume(const Mesh& mesh) {
    double vol = 0.0;
    for (const auto& f : mesh.faces) {
        const Vec3& a = mesh.vertices[static_cast<std::size_t>(f[0])];
        const Vec3& b = mesh.vertices[static_cast<std::size_t>(f[1])];
        const Vec3& c = mesh.vertices[static_cast<std::size_t>(f[2])];
        vol += dot(a, cross(b, c));
    }
    return vol / 6.0;
}

}  // namespace

Mesh make_icosphere(int subdivisions) {
    if (subdivisions < 0 || subdivisions > 7) {
        throw std::invalid_argument("icosphere: subdivision level out of range");
    }
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    Mesh mesh;
    mesh.vertices = {{-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
                     {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
                     {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
    for (Vec3& v : mesh.vertices) v = normalized(v);
    mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                  {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                  {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                  {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::make_pair(std::min(a, b), std::max(a, b));
            const auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const Vec3 m = normalized((mesh.vertices[static_cast<std::size_t>(a)] +
                                       mesh.vertices[static_cast<std::size_t>(b)]) *
                                      0.5);
            const int idx = mesh.vertex_count();
            mesh.vertices.push_back(m);
            midpoint[key] = idx;
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(mesh.faces.size() * 4);
        for (const auto& f : mesh.faces) {
            const int ab = mid(f[0], f[1]);
            const int bc = mid(f[1], f[2]);
            const int ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        mesh.faces = std::move(next);
    }
    return mesh;
}

Mesh make_box(int cells_per_side) {
    if (cells_per_side < 1) throw std::invalid_argument("box: need >= 1 cell per side");
    const int k = cells_per_side;
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    // Index vertices by integer lattice coordinate so shared edges weld exactly.
    std::map<std::array<int, 3>, int> lattice;
    auto vertex_at = [&](int i, int j, int l) {
        const std::array<int, 3> key = {i, j, l};
        const auto it = lattice.find(key);
        if (it != lattice.end()) return it->second;
        const int idx = static_cast<int>(vertices.size());
        vertices.push_back({-1.0 + 2.0 * i / k, -1.0 + 2.0 * j / k, -1.0 + 2.0 * l / k});
        lattice[key] = idx;
        return idx;
    };
    // axis = fixed coordinate of the side; sign = -1 or +1 side; (u, v) walk the face.
    auto emit_side = [&](int axis, int sign) {
        for (int u = 0; u < k; ++u) {
            for (int v = 0; v < k; ++v) {
                auto corner = [&](int du, int dv) {
                    int coords[3];
                    coords[axis] = sign > 0 ? k : 0;
                    coords[(axis + 1) % 3] = u + du;
                    coords[(axis + 2) % 3] = v + dv;
                    return vertex_at(coords[0], coords[1], coords[2]);
                };
                const int a = corner(0, 0), b = corner(1, 0), c = corner(1, 1), d = corner(0, 1);
                if (sign > 0) {
                    faces.push_back({a, b, c});
                    faces.push_back({a, c, d});
                } else {
                    faces.push_back({a, c, b});
                    faces.push_back({a, d, c});
                }
            }
        }
    };
    for (int axis = 0; axis < 3; ++axis) {
        emit_side(axis, +1);
        emit_side(axis, -1);
    }
    Mesh mesh;
    mesh.vertices = std::move(vertices);
    mesh.faces = std::move(faces);
    return mesh;
}

Mesh make_torus(int major_segments, int minor_segments, double minor_radius) {
    if (major_segments < 3 || minor_segments < 3) {
        throw std::invalid_argument("torus: need >= 3 segments each way");
    }
    if (!(minor_radius > 0.0 && minor_radius < 1.0)) {
        throw std::invalid_argument("torus: minor radius must be in (0, 1)");
    }
    Mesh mesh;
    for (int i = 0; i < major_segments; ++i) {
        const double a = 2.0 * kPi * i / major_segments;
        for (int j = 0; j < minor_segments; ++j) {
            const double b = 2.0 * kPi * j / minor_segments;
            const double r = 1.0 + minor_radius * std::cos(b);
            mesh.vertices.push_back(
                {r * std::cos(a), r * std::sin(a), minor_radius * std::sin(b)});
        }
    }
    auto at = [&](int i, int j) {
        return ((i % major_segments) * minor_segments) + (j % minor_segments);
    };
    for (int i = 0; i < major_segments; ++i) {
        for (int j = 0; j < minor_segments; ++j) {
            const int a = at(i, j), b = at(i + 1, j), c = at(i + 1, j + 1), d = at(i, j + 1);
            mesh.faces.push_back({a, b, c});
            mesh.faces.push_back({a, c, d});
        }
    }
    return mesh;
}

Mesh make_revolved(const std::vector<std::array<double, 2>>& profile, int segments) {
    if (profile.size() < 3) throw std::invalid_argument("revolve: profile too short");
    if (segments < 3) throw std::invalid_argument("revolve: need >= 3 segments");
    if (profile.front()[0] != 0.0 || profile.back()[0] != 0.0) {
        throw std::invalid_argument("revolve: profile must start and end on the axis");
    }
    const int last = static_cast<int>(profile.size()) - 1;
    Mesh mesh;
    mesh.vertices.push_back({0.0, 0.0, profile.front()[1]});  // bottom pole
    std::vector<int> ring_start(profile.size(), -1);
    for (int p = 1; p < last; ++p) {
        ring_start[static_cast<std::size_t>(p)] = mesh.vertex_count();
        for (int s = 0; s < segments; ++s) {
            const double a = 2.0 * kPi * s / segments;
            mesh.vertices.push_back({profile[static_cast<std::size_t>(p)][0] * std::cos(a),
                                     profile[static_cast<std::size_t>(p)][0] * std::sin(a),
                                     profile[static_cast<std::size_t>(p)][1]});
        }
    }
    const int top_pole = mesh.vertex_count();
    mesh.vertices.push_back({0.0, 0.0, profile.back()[1]});

    auto ring_at = [&](int p, int s) {
        return ring_start[static_cast<std::size_t>(p)] + (s % segments);
    };
    // Bottom fan (outward = facing -z side).
    for (int s = 0; s < segments; ++s) {
        mesh.faces.push_back({0, ring_at(1, s + 1), ring_at(1, s)});
    }
    // Bands between consecutive rings.
    for (int p = 1; p + 1 < last; ++p) {
        for (int s = 0; s < segments; ++s) {
            const int a = ring_at(p, s), b = ring_at(p, s + 1);
            const int c = ring_at(p + 1, s + 1), d = ring_at(p + 1, s);
            mesh.faces.push_back({a, b, c});
            mesh.faces.push_back({a, c, d});
        }
    }
    // Top fan.
    for (int s = 0; s < segments; ++s) {
        mesh.faces.push_back({top_pole, ring_at(last - 1, s), ring_at(last - 1, s + 1)});
    }
    return mesh;
}

Mesh make_pyramid(int cells_per_side, double height) {
    if (cells_per_side < 1) throw std::invalid_argument("pyramid: need >= 1 cell per side");
    if (!(height > 0.0)) throw std::invalid_argument("pyramid: height must be > 0");
    const int n = cells_per_side;
    const Vec3 apex{0.0, 0.0, height};
    const Vec3 corners[4] = {{-1, -1, 0}, {1, -1, 0}, {1, 1, 0}, {-1, 1, 0}};

    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    // Base grid, facing -z (outward is down).
    auto base_at = [&](int i, int j) {
        return Vec3{-1.0 + 2.0 * i / n, -1.0 + 2.0 * j / n, 0.0};
    };
    const int base_start = 0;
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) vertices.push_back(base_at(i, j));
    }
    auto base_idx = [&](int i, int j) { return base_start + j * (n + 1) + i; };
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            faces.push_back({base_idx(i, j), base_idx(i, j + 1), base_idx(i + 1, j)});
            faces.push_back({base_idx(i + 1, j), base_idx(i, j + 1), base_idx(i + 1, j + 1)});
        }
    }
    // Four triangular sides subdivided barycentrically; seams weld afterwards.
    for (int side = 0; side < 4; ++side) {
        const Vec3& ca = corners[side];
        const Vec3& cb = corners[(side + 1) % 4];
        const int start = static_cast<int>(vertices.size());
        std::vector<int> row_offset;
        for (int i = 0; i <= n; ++i) {
            row_offset.push_back(static_cast<int>(vertices.size()) - start);
            for (int j = 0; j <= i; ++j) {
                const double wa = static_cast<double>(i - j) / n;
                const double wb = static_cast<double>(j) / n;
                const double wapex = 1.0 - static_cast<double>(i) / n;
                vertices.push_back(wapex * apex + wa * ca + wb * cb);
            }
        }
        auto tri_idx = [&](int i, int j) { return start + row_offset[static_cast<std::size_t>(i)] + j; };
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j <= i; ++j) {
                faces.push_back({tri_idx(i, j), tri_idx(i + 1, j), tri_idx(i + 1, j + 1)});
                if (j < i) {
                    faces.push_back({tri_idx(i, j), tri_idx(i + 1, j + 1), tri_idx(i, j + 1)});
                }
            }
        }
    }
    weld_vertices(vertices, faces);
    Mesh mesh;
    mesh.vertices = std::move(vertices);
    mesh.faces = std::move(faces);
    return mesh;
}

std::vector<ShapeSpec> default_shape_specs(int target_faces) {
    std::vector<ShapeSpec> specs(8);
    auto& ico = specs[0];
    ico.name = "icosphere";
    ico.kind = ShapeKind::Icosphere;
    ico.scale_jitter = {0.9, 1.1};  // stays round; ellipsoid owns the stretched regime
    auto& box = specs[1];
    box.name = "box";
    box.kind = ShapeKind::Box;
    box.scale_jitter = {0.6, 1.4};
    auto& cyl = specs[2];
    cyl.name = "cylinder";
    cyl.kind = ShapeKind::Cylinder;
    cyl.param = {0.35, 0.8};  // radius, height fixed at 2 before jitter
    cyl.scale_jitter = {0.8, 1.25};
    auto& cone = specs[3];
    cone.name = "cone";
    cone.kind = ShapeKind::Cone;
    cone.param = {0.45, 0.95};  // base radius
    cone.scale_jitter = {0.8, 1.25};
    auto& torus = specs[4];
    torus.name = "torus";
    torus.kind = ShapeKind::Torus;
    torus.param = {0.18, 0.42};  // minor radius (major is 1)
    torus.scale_jitter = {0.8, 1.25};
    auto& ell = specs[5];
    ell.name = "ellipsoid";
    ell.kind = ShapeKind::Ellipsoid;
    ell.param = {0.5, 0.65};    // second semiaxis
    ell.param2 = {0.3, 0.45};   // third semiaxis: clearly elongated vs icosphere
    ell.scale_jitter = {0.9, 1.1};
    auto& cap = specs[6];
    cap.name = "capsule";
    cap.kind = ShapeKind::Capsule;
    cap.param = {0.5, 1.5};  // cylindrical section half-height (cap radius 0.5)
    cap.scale_jitter = {0.85, 1.2};
    auto& pyr = specs[7];
    pyr.name = "pyramid";
    pyr.kind = ShapeKind::Pyramid;
    pyr.param = {0.8, 1.8};  // apex height over a 2x2 base
    pyr.scale_jitter = {0.6, 1.4};
    for (int i = 0; i < 8; ++i) {
        specs[static_cast<std::size_t>(i)].class_id = i;
        specs[static_cast<std::size_t>(i)].target_faces = target_faces;
    }
    return specs;
}

namespace {

int icosphere_level_for(int target_faces) {
    int best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (int level = 0; level <= 6; ++level) {
        const double count = 20.0 * std::pow(4.0, level);
        const double err = std::abs(std::log(count / target_faces));
        if (err < best_err) {
            best_err = err;
            best = level;
        }
    }
    return best;
}

std::vector<std::array<double, 2>> linspace_profile(const std::vector<std::array<double, 2>>& knots,
                                                    const std::vector<int>& bands) {
    std::vector<std::array<double, 2>> profile;
    profile.push_back(knots.front());
    for (std::size_t seg = 0; seg + 1 < knots.size(); ++seg) {
        const int b = bands[seg];
        for (int i = 1; i <= b; ++i) {
            const double t = static_cast<double>(i) / b;
            profile.push_back({knots[seg][0] + t * (knots[seg + 1][0] - knots[seg][0]),
                               knots[seg][1] + t * (knots[seg + 1][1] - knots[seg][1])});
        }
    }
    return profile;
}

// faces = 2 * segments * (profile_points - 2); pick segments ~ sqrt(target).
int revolve_segments_for(int target_faces) {
    return std::max(8, static_cast<int>(std::lround(std::sqrt(static_cast<double>(target_faces)))));
}

Mesh build_base_shape(const ShapeSpec& spec, Rng& rng) {
    switch (spec.kind) {
        case ShapeKind::Icosphere:
            return make_icosphere(icosphere_level_for(spec.target_faces));
        case ShapeKind::Ellipsoid: {
            Mesh mesh = make_icosphere(icosphere_level_for(spec.target_faces));
            const double b = rng.uniform(spec.param[0], spec.param[1]);
            const double c = rng.uniform(spec.param2[0], spec.param2[1]);
            for (Vec3& v : mesh.vertices) {
                v.y *= b;
                v.z *= c;
            }
            return mesh;
        }
        case ShapeKind::Box:
            return make_box(std::max(1, static_cast<int>(std::lround(
                                            std::sqrt(spec.target_faces / 12.0)))));
        case ShapeKind::Cylinder: {
            const double radius = rng.uniform(spec.param[0], spec.param[1]);
            const int segments = revolve_segments_for(spec.target_faces);
            const int rings = std::max(6, spec.target_faces / (2 * segments));
            const int cap = std::max(2, rings / 4);
            const int side = std::max(2, rings - 2 * cap);
            return make_revolved(
                linspace_profile({{0.0, -1.0}, {radius, -1.0}, {radius, 1.0}, {0.0, 1.0}},
                                 {cap, side, cap}),
                segments);
        }
        case ShapeKind::Cone: {
            const double radius = rng.uniform(spec.param[0], spec.param[1]);
            const int segments = revolve_segments_for(spec.target_faces);
            const int rings = std::max(6, spec.target_faces / (2 * segments));
            const int base = std::max(2, rings / 3);
            const int slant = std::max(2, rings - base);
            return make_revolved(
                linspace_profile({{0.0, -1.0}, {radius, -1.0}, {0.0, 1.0}}, {base, slant}),
                segments);
        }
        case ShapeKind::Torus: {
            const double minor = rng.uniform(spec.param[0], spec.param[1]);
            const int major = std::max(
                8, static_cast<int>(std::lround(std::sqrt(static_cast<double>(spec.target_faces)))));
            const int minor_segs = std::max(6, spec.target_faces / (2 * major));
            return make_torus(major, minor_segs, minor);
        }
        case ShapeKind::Capsule: {
            const double half_height = rng.uniform(spec.param[0], spec.param[1]);
            const double radius = 0.5;
            const int segments = revolve_segments_for(spec.target_faces);
            const int rings = std::max(9, spec.target_faces / (2 * segments));
            const int cap = std::max(3, rings / 3);
            const int side = std::max(3, rings - 2 * cap);
            std::vector<std::array<double, 2>> profile;
            profile.push_back({0.0, -half_height - radius});
            for (int i = 1; i <= cap; ++i) {
                const double a = -0.5 * kPi + 0.5 * kPi * i / cap;
                profile.push_back({radius * std::cos(a), -half_height + radius * std::sin(a)});
            }
            for (int i = 1; i <= side; ++i) {
                profile.push_back({radius, -half_height + 2.0 * half_height * i / side});
            }
            for (int i = 1; i < cap; ++i) {
                const double a = 0.5 * kPi * i / cap;
                profile.push_back({radius * std::cos(a), half_height + radius * std::sin(a)});
            }
            profile.push_back({0.0, half_height + radius});  // exact pole
            return make_revolved(profile, segments);
        }
        case ShapeKind::Pyramid: {
            const double height = rng.uniform(spec.param[0], spec.param[1]);
            const int cells = std::max(
                2, static_cast<int>(std::lround(std::sqrt(spec.target_faces / 6.0))));
            return make_pyramid(cells, height);
        }
    }
    throw std::invalid_argument("unknown shape kind");
}

std::vector<Vec3> vertex_normals(const Mesh& mesh) {
    std::vector<Vec3> normals(mesh.vertices.size());
    for (const auto& f : mesh.faces) {
        const Vec3& a = mesh.vertices[static_cast<std::size_t>(f[0])];
        const Vec3& b = mesh.vertices[static_cast<std::size_t>(f[1])];
        const Vec3& c = mesh.vertices[static_cast<std::size_t>(f[2])];
        const Vec3 area_normal = cross(b - a, c - a);  // area-weighted
        for (int k = 0; k < 3; ++k) normals[static_cast<std::size_t>(f[static_cast<std::size_t>(k)])] += area_normal;
    }
    for (Vec3& n : normals) n = normalized(n);
    return normals;
}

void apply_random_rotation(Mesh& mesh, Rng& rng) {
    // Uniform rotation from a random unit quaternion.
    double q[4];
    double norm_sq = 0.0;
    for (double& v : q) {
        v = rng.normal();
        norm_sq += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
    const double R[3][3] = {
        {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
        {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
        {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
    for (Vec3& v : mesh.vertices) {
        const Vec3 r = {R[0][0] * v.x + R[0][1] * v.y + R[0][2] * v.z,
                        R[1][0] * v.x + R[1][1] * v.y + R[1][2] * v.z,
                        R[2][0] * v.x + R[2][1] * v.y + R[2][2] * v.z};
        v = r;
    }
}

}  // namespace

Mesh generate_shape(const ShapeSpec& spec, Rng& rng) {
    Mesh mesh = build_base_shape(spec, rng);
    const double sx = rng.uniform(spec.scale_jitter[0], spec.scale_jitter[1]);
    const double sy = rng.uniform(spec.scale_jitter[0], spec.scale_jitter[1]);
    const double sz = rng.uniform(spec.scale_jitter[0], spec.scale_jitter[1]);
    for (Vec3& v : mesh.vertices) {
        v.x *= sx;
        v.y *= sy;
        v.z *= sz;
    }
    if (spec.random_rotation) apply_random_rotation(mesh, rng);
    if (spec.vertex_noise > 0.0) {
        const std::vector<Vec3> normals = vertex_normals(mesh);
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            mesh.vertices[i] += normals[i] * rng.uniform(-spec.vertex_noise, spec.vertex_noise);
        }
    }
    return normalize_mesh(mesh).first;
}

Dataset generate_dataset(const std::vector<ShapeSpec>& specs, int per_class, std::uint64_t seed) {
    if (specs.size() < 2) throw std::invalid_argument("generate_dataset: need >= 2 classes");
    if (per_class < 1) throw std::invalid_argument("generate_dataset: need >= 1 mesh per class");

    Dataset dataset;
    dataset.seed = seed;
    dataset.per_class = per_class;
    dataset.target_faces = specs.front().target_faces;
    for (const ShapeSpec& spec : specs) dataset.class_names.push_back(spec.name);

    for (const ShapeSpec& spec : specs) {
        for (int i = 0; i < per_class; ++i) {
            constexpr int kMaxRetries = 5;
            Mesh mesh;
            bool ok = false;
            for (int attempt = 0; attempt < kMaxRetries && !ok; ++attempt) {
                Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(spec.class_id),
                                             static_cast<std::uint64_t>(i),
                                             static_cast<std::uint64_t>(attempt)});
                try {
                    mesh = generate_shape(spec, rng);
                } catch (const MeshError&) {
                    continue;  // degenerate draw; retry with the next sub-stream
                }
                const Adjacency adj = build_adjacency(mesh);
                const int genus_chi = spec.kind == ShapeKind::Torus ? 0 : 2;
                ok = adj.closed_manifold() && adj.consistently_oriented &&
                     euler_characteristic(mesh, adj) == genus_chi && signed_volume(mesh) > 0.0;
                if (!ok) {
                    std::fprintf(stderr, "dataset: retry %d for %s_%04d (validation failed)\n",
                                 attempt + 1, spec.name.c_str(), i);
                }
            }
            if (!ok) {
                throw MeshError("dataset: failed to generate a valid " + spec.name +
                                " instance after retries");
            }
            char idbuf[64];
            std::snprintf(idbuf, sizeof idbuf, "%s_%04d", spec.name.c_str(), i);
            DatasetInstance inst;
            inst.id = idbuf;
            inst.label = spec.class_id;
            inst.class_name = spec.name;
            inst.is_test = instance_hash_is_test(inst.id);
            inst.mesh = std::move(mesh);
            dataset.instances.push_back(std::move(inst));
        }
    }
    return dataset;
}

void write_dataset(const Dataset& dataset, const std::string& root) {
    namespace fs = std::filesystem;
    fs::create_directories(root);
    nlohmann::json manifest;
    manifest["generator_version"] = 1;
    manifest["seed"] = dataset.seed;
    manifest["per_class"] = dataset.per_class;
    manifest["target_faces"] = dataset.target_faces;
    manifest["classes"] = dataset.class_names;
    nlohmann::json instances = nlohmann::json::array();
    for (const DatasetInstance& inst : dataset.instances) {
        const fs::path dir = fs::path(root) / inst.class_name;
        fs::create_directories(dir);
        const std::string file = inst.class_name + "/" + inst.id + ".off";
        save_mesh(inst.mesh, (fs::path(root) / file).string(), MeshFormat::OFF);
        instances.push_back({{"id", inst.id},
                             {"class", inst.class_name},
                             {"label", inst.label},
                             {"file", file},
                             {"split", inst.is_test ? "test" : "train"}});
    }
    manifest["instances"] = std::move(instances);
    std::ofstream out(fs::path(root) / "manifest.json");
    if (!out) throw std::runtime_error(root + ": cannot write manifest.json");
    out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::string& root) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(root) / "manifest.json");
    if (!in) throw std::runtime_error(root + ": missing manifest.json");
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(root + ": corrupt manifest.json: " + e.what());
    }
    Dataset dataset;
    dataset.seed = manifest.value("seed", 0ULL);
    dataset.per_class = manifest.value("per_class", 0);
    dataset.target_faces = manifest.value("target_faces", 0);
    dataset.class_names = manifest.at("classes").get<std::vector<std::string>>();
    for (const auto& j : manifest.at("instances")) {
        DatasetInstance inst;
        inst.id = j.at("id").get<std::string>();
        inst.label = j.at("label").get<int>();
        inst.class_name = j.at("class").get<std::string>();
        inst.is_test = j.at("split").get<std::string>() == "test";
        inst.mesh = load_mesh((fs::path(root) / j.at("file").get<std::string>()).string(),
                              MeshFormat::OFF);
        dataset.instances.push_back(std::move(inst));
    }
    return dataset;
}

}  // namespace meshadv
