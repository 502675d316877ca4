#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "meshadv/vec3.hpp"

namespace meshadv {

/// Raised on malformed mesh files or invalid mesh structure.
class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Triangle mesh: vertex positions plus vertex-index triples, input order
/// preserved. Face indices are 0-based and validated on construction paths.
struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }
};

/// Undirected edge record. Faces are the incident face indices; face1 == -1
/// marks a boundary edge. v0 < v1 always.
struct EdgeRecord {
    int v0 = -1, v1 = -1;
    int face0 = -1, face1 = -1;
};

/// Derived connectivity. Neighbor lists ascending, edges sorted by (v0, v1),
/// so identical meshes always produce identical adjacency.
struct Adjacency {
    std::vector<std::vector<int>> vertex_neighbors;
    std::vector<EdgeRecord> edges;
    std::vector<int> boundary_edges;     // indices into edges
    std::vector<int> nonmanifold_edges;  // edges with more than two incident faces
    bool consistently_oriented = true;   // every interior edge traversed once per direction

    int edge_count() const { return static_cast<int>(edges.size()); }
    bool closed_manifold() const { return boundary_edges.empty() && nonmanifold_edges.empty(); }
    bool has_interior_edges() const {
        return static_cast<std::size_t>(edge_count()) > boundary_edges.size();
    }
};

/// Per-face areas and unit normals. Zero-area faces get area 0, a zero
/// normal, and an entry in degenerate_faces.
struct FaceGeometry {
    std::vector<double> areas;
    std::vector<Vec3> normals;
    std::vector<int> degenerate_faces;
    double total_area = 0.0;
};

/// Similarity transform recorded by normalize_mesh: v_norm = (v - center) / scale.
struct NormalizeTransform {
    Vec3 center;
    double scale = 1.0;

    Vec3 to_original(const Vec3& v) const { return v * scale + center; }
};

enum class MeshFormat { OFF, OBJ };

/// Picks the format from the file extension (.off / .obj, case-insensitive).
MeshFormat format_from_path(const std::string& path);

/// Loads an ASCII OFF or OBJ triangle mesh. OBJ face indices are converted
/// from 1-based; texture/normal slots are ignored. Binary or otherwise
/// malformed files raise MeshError naming the problem and location.
Mesh load_mesh(const std::string& path, MeshFormat format);
Mesh load_mesh(const std::string& path);

/// Writes the mesh with coordinates at 9 significant digits. Round-tripping
/// through load_mesh reproduces faces exactly and vertices to that precision.
void save_mesh(const Mesh& mesh, const std::string& path, MeshFormat format);
void save_mesh(const Mesh& mesh, const std::string& path);

/// Checks structural invariants (index ranges, no degenerate index triples).
/// Throws MeshError naming the offending face.
void validate_mesh(const Mesh& mesh);

Adjacency build_adjacency(const Mesh& mesh);

FaceGeometry face_areas_normals(const Mesh& mesh);

/// V - E + F (2 for a closed genus-0 surface, 0 for a torus).
int euler_characteristic(const Mesh& mesh, const Adjacency& adjacency);

/// Centers the bounding box at the origin and scales the max vertex radius
/// to 1. Throws MeshError if all vertices coincide.
std::pair<Mesh, NormalizeTransform> normalize_mesh(const Mesh& mesh);

/// FNV-1a over the face index array; the attack asserts this never changes.
std::uint64_t face_topology_hash(const Mesh& mesh);

}  // namespace meshadv
