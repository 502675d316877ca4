#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "meshadv/dataset.hpp"
#include "meshadv/mesh.hpp"
#include "support.hpp"

using namespace meshadv;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

Mesh tetrahedron() {
    Mesh mesh;
    mesh.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    mesh.faces = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
    return mesh;
}

}  // namespace

TEST_CASE("OFF loader handles the minimal valid file") {
    const std::string path = temp_path("minimal.off");
    write_text(path, "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
    const Mesh mesh = load_mesh(path, MeshFormat::OFF);
    CHECK(mesh.vertex_count() == 3);
    CHECK(mesh.face_count() == 1);
    CHECK(mesh.faces[0] == std::array<int, 3>{0, 1, 2});
    CHECK(mesh.vertices[1] == Vec3{1, 0, 0});
}

TEST_CASE("OFF loader accepts counts on the header line and comments") {
    const std::string path = temp_path("inline_counts.off");
    write_text(path, "OFF 3 1 0\n# comment\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
    const Mesh mesh = load_mesh(path, MeshFormat::OFF);
    CHECK(mesh.vertex_count() == 3);
}

TEST_CASE("OBJ face indices are corrected from 1-based and slots ignored") {
    const std::string path = temp_path("basic.obj");
    write_text(path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2/2/1 3/3/1\n");
    const Mesh mesh = load_mesh(path, MeshFormat::OBJ);
    CHECK(mesh.face_count() == 1);
    CHECK(mesh.faces[0] == std::array<int, 3>{0, 1, 2});
}

TEST_CASE("OFF vertex count mismatch is a parse error naming the counts") {
    const std::string path = temp_path("short.off");
    write_text(path, "OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
    CHECK_THROWS_WITH_AS(load_mesh(path, MeshFormat::OFF),
                         doctest::Contains("declared 4 vertices"), MeshError);
}

TEST_CASE("non-triangle faces are rejected with the face number") {
    const std::string path = temp_path("quad.off");
    write_text(path, "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n");
    CHECK_THROWS_WITH_AS(load_mesh(path, MeshFormat::OFF), doctest::Contains("face 0"), MeshError);
}

TEST_CASE("out-of-range and repeated indices are structural errors") {
    const std::string path = temp_path("badidx.off");
    write_text(path, "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n");
    CHECK_THROWS_AS(load_mesh(path, MeshFormat::OFF), MeshError);

    Mesh degenerate;
    degenerate.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    degenerate.faces = {{0, 1, 1}};
    CHECK_THROWS_WITH_AS(validate_mesh(degenerate), doctest::Contains("degenerate"), MeshError);
}

TEST_CASE("binary content is rejected") {
    const std::string path = temp_path("binary.off");
    std::ofstream out(path, std::ios::binary);
    const char bytes[] = {'O', 'F', 'F', '\0', '\1', '\2'};
    out.write(bytes, sizeof bytes);
    out.close();
    CHECK_THROWS_WITH_AS(load_mesh(path, MeshFormat::OFF), doctest::Contains("binary"), MeshError);
}

TEST_CASE("adjacency of a single triangle") {
    Mesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    mesh.faces = {{0, 1, 2}};
    const Adjacency adj = build_adjacency(mesh);
    CHECK(adj.vertex_neighbors[0] == std::vector<int>{1, 2});
    CHECK(adj.edge_count() == 3);
    CHECK(adj.boundary_edges.size() == 3);
    CHECK_FALSE(adj.closed_manifold());
}

TEST_CASE("adjacency of two triangles sharing an edge") {
    Mesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
    mesh.faces = {{0, 1, 2}, {2, 1, 3}};
    const Adjacency adj = build_adjacency(mesh);
    CHECK(adj.edge_count() == 5);
    CHECK(adj.boundary_edges.size() == 4);
    bool found = false;
    for (const EdgeRecord& e : adj.edges) {
        if (e.v0 == 1 && e.v1 == 2) {
            found = true;
            CHECK(e.face0 == 0);
            CHECK(e.face1 == 1);
        }
    }
    CHECK(found);
    CHECK(adj.consistently_oriented);
}

TEST_CASE("tetrahedron is a closed manifold with 6 interior edges") {
    const Mesh mesh = tetrahedron();
    const Adjacency adj = build_adjacency(mesh);
    CHECK(adj.edge_count() == 6);
    CHECK(adj.boundary_edges.empty());
    CHECK(adj.nonmanifold_edges.empty());
    CHECK(adj.closed_manifold());
    CHECK(adj.consistently_oriented);
    CHECK(euler_characteristic(mesh, adj) == 2);
}

TEST_CASE("an edge shared by three faces is flagged non-manifold") {
    Mesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, -1, 0}};
    mesh.faces = {{0, 1, 2}, {0, 1, 3}, {0, 1, 4}};
    const Adjacency adj = build_adjacency(mesh);
    CHECK(adj.nonmanifold_edges.size() == 1);
    CHECK_FALSE(adj.closed_manifold());
}

TEST_CASE("adjacency symmetry on random meshes") {
    Rng rng(2024);
    for (int trial = 0; trial < 5; ++trial) {
        const Mesh mesh = testing::random_closed_mesh(rng, 1);
        const Adjacency adj = build_adjacency(mesh);
        for (std::size_t i = 0; i < adj.vertex_neighbors.size(); ++i) {
            for (const int j : adj.vertex_neighbors[i]) {
                const auto& back = adj.vertex_neighbors[static_cast<std::size_t>(j)];
                CHECK(std::find(back.begin(), back.end(), static_cast<int>(i)) != back.end());
            }
        }
    }
}

TEST_CASE("face areas and normals") {
    Mesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    mesh.faces = {{0, 1, 2}};
    const FaceGeometry geom = face_areas_normals(mesh);
    CHECK(geom.areas[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(geom.normals[0].z == doctest::Approx(1.0).epsilon(1e-15));

    for (Vec3& v : mesh.vertices) v *= 2.0;
    CHECK(face_areas_normals(mesh).areas[0] == doctest::Approx(2.0).epsilon(1e-15));

    Mesh collinear;
    collinear.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    collinear.faces = {{0, 1, 2}};
    const FaceGeometry degenerate = face_areas_normals(collinear);
    CHECK(degenerate.areas[0] == 0.0);
    CHECK(degenerate.degenerate_faces == std::vector<int>{0});
}

TEST_CASE("total area is invariant under rotation") {
    Rng rng(7);
    Mesh mesh = testing::random_closed_mesh(rng, 1);
    const double area = face_areas_normals(mesh).total_area;
    testing::apply_random_rotation(mesh, rng);
    const double rotated = face_areas_normals(mesh).total_area;
    CHECK(std::abs(rotated - area) / area < 1e-9);
}

TEST_CASE("normalize_mesh centers the bounding box and scales to unit radius") {
    Mesh cube;
    cube.vertices = {{10, 10, 10}, {11, 10, 10}, {10, 11, 10}, {10, 10, 11},
                     {11, 11, 10}, {11, 10, 11}, {10, 11, 11}, {11, 11, 11}};
    cube.faces = {{0, 1, 2}};  // geometry only matters for the transform
    const auto [normalized, transform] = normalize_mesh(cube);
    double max_r = 0.0;
    Vec3 lo = normalized.vertices[0], hi = normalized.vertices[0];
    for (const Vec3& v : normalized.vertices) {
        max_r = std::max(max_r, norm(v));
        lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
        hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
    }
    CHECK(max_r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(norm(lo + hi) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(transform.scale == doctest::Approx(std::sqrt(3.0) / 2.0));

    SUBCASE("idempotence") {
        const auto [again, t2] = normalize_mesh(normalized);
        CHECK(std::abs(t2.scale - 1.0) < 1e-12);
        CHECK(norm(t2.center) < 1e-12);
    }
    SUBCASE("inverse transform recovers original coordinates") {
        for (std::size_t i = 0; i < cube.vertices.size(); ++i) {
            CHECK(norm(transform.to_original(normalized.vertices[i]) - cube.vertices[i]) < 1e-12);
        }
    }
}

TEST_CASE("normalize_mesh rejects coincident vertices") {
    Mesh mesh;
    mesh.vertices = {{1, 2, 3}, {1, 2, 3}, {1, 2, 3}};
    mesh.faces = {{0, 1, 2}};
    CHECK_THROWS_AS(normalize_mesh(mesh), MeshError);
}

TEST_CASE("mesh IO round-trips losslessly at 9 significant digits") {
    const Mesh mesh = tetrahedron();
    for (const MeshFormat format : {MeshFormat::OFF, MeshFormat::OBJ}) {
        const std::string path =
            temp_path(format == MeshFormat::OFF ? "roundtrip.off" : "roundtrip.obj");
        save_mesh(mesh, path, format);
        const Mesh loaded = load_mesh(path, format);
        REQUIRE(loaded.vertex_count() == mesh.vertex_count());
        REQUIRE(loaded.faces == mesh.faces);
        for (int i = 0; i < mesh.vertex_count(); ++i) {
            CHECK(norm(loaded.vertices[static_cast<std::size_t>(i)] -
                       mesh.vertices[static_cast<std::size_t>(i)]) < 1e-9);
        }
    }
}

TEST_CASE("attack-scale mesh round-trips with exact face count") {
    Rng rng(11);
    const std::vector<ShapeSpec> specs = default_shape_specs(2000);
    const Mesh mesh = generate_shape(specs[0], rng);  // icosphere-class instance
    const std::string path = temp_path("attack_scale.off");
    save_mesh(mesh, path, MeshFormat::OFF);
    const Mesh loaded = load_mesh(path, MeshFormat::OFF);
    CHECK(loaded.face_count() == mesh.face_count());
    CHECK(loaded.faces == mesh.faces);
    double worst = 0.0;
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        worst = std::max(worst, norm(loaded.vertices[static_cast<std::size_t>(i)] -
                                     mesh.vertices[static_cast<std::size_t>(i)]));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("save_mesh reports IO failure on an unwritable path") {
    const Mesh mesh = tetrahedron();
    CHECK_THROWS_AS(save_mesh(mesh, "/nonexistent-dir/out.off", MeshFormat::OFF), MeshError);
}
