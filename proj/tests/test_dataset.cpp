#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "meshadv/dataset.hpp"
#include "support.hpp"

using namespace meshadv;
namespace fs = std::filesystem;

namespace {

void check_closed(const Mesh& mesh, int expected_chi) {
    const Adjacency adj = build_adjacency(mesh);
    CHECK(adj.boundary_edges.empty());
    CHECK(adj.nonmanifold_edges.empty());
    CHECK(adj.consistently_oriented);
    CHECK(euler_characteristic(mesh, adj) == expected_chi);
}

}  // namespace

TEST_CASE("icosphere subdivision combinatorics") {
    const Mesh level3 = make_icosphere(3);
    CHECK(level3.face_count() == 1280);  // 20 * 4^3
    check_closed(level3, 2);
    const Mesh level0 = make_icosphere(0);
    CHECK(level0.face_count() == 20);
    CHECK(level0.vertex_count() == 12);
}

TEST_CASE("torus has Euler characteristic zero") {
    const Mesh torus = make_torus(24, 18, 0.3);
    CHECK(torus.face_count() == 2 * 24 * 18);
    check_closed(torus, 0);
}

TEST_CASE("box, pyramid and revolved solids are closed genus-zero meshes") {
    check_closed(make_box(5), 2);
    check_closed(make_pyramid(6, 1.2), 2);
    check_closed(make_revolved({{0, -1}, {0.7, -1}, {0.7, 1}, {0, 1}}, 16), 2);  // cylinder
    check_closed(make_revolved({{0, -1}, {0.8, -1}, {0, 1}}, 12), 2);            // cone
}

TEST_CASE("every default class generates valid normalized instances") {
    const std::vector<ShapeSpec> specs = default_shape_specs(500);
    for (const ShapeSpec& spec : specs) {
        Rng rng(1000 + static_cast<std::uint64_t>(spec.class_id));
        const Mesh mesh = generate_shape(spec, rng);
        const int chi = spec.kind == ShapeKind::Torus ? 0 : 2;
        check_closed(mesh, chi);
        double max_r = 0.0;
        for (const Vec3& v : mesh.vertices) max_r = std::max(max_r, norm(v));
        CHECK(max_r == doctest::Approx(1.0).epsilon(1e-9));
        // Face counts stay within a sane band of the target.
        CHECK(mesh.face_count() > spec.target_faces / 3);
        CHECK(mesh.face_count() < spec.target_faces * 3);
    }
}

TEST_CASE("generate_dataset is deterministic, balanced and split-stable") {
    const std::vector<ShapeSpec> specs = default_shape_specs(320);
    const Dataset a = generate_dataset(specs, 6, 31415);
    const Dataset b = generate_dataset(specs, 6, 31415);
    REQUIRE(a.instances.size() == specs.size() * 6);
    REQUIRE(a.instances.size() == b.instances.size());
    for (std::size_t i = 0; i < a.instances.size(); ++i) {
        CHECK(a.instances[i].id == b.instances[i].id);
        CHECK(a.instances[i].label == b.instances[i].label);
        CHECK(a.instances[i].is_test == b.instances[i].is_test);
        REQUIRE(a.instances[i].mesh.vertex_count() == b.instances[i].mesh.vertex_count());
        CHECK(a.instances[i].mesh.vertices == b.instances[i].mesh.vertices);
        CHECK(a.instances[i].mesh.faces == b.instances[i].mesh.faces);
    }
    std::map<int, int> per_class;
    for (const DatasetInstance& inst : a.instances) ++per_class[inst.label];
    for (const auto& [label, count] : per_class) CHECK(count == 6);
}

TEST_CASE("dataset write/load round-trips through the manifest") {
    const std::vector<ShapeSpec> specs = default_shape_specs(320);
    const Dataset dataset = generate_dataset({specs[0], specs[3]}, 4, 999);
    const std::string root = (fs::temp_directory_path() / "meshadv_dataset_test").string();
    fs::remove_all(root);
    write_dataset(dataset, root);
    REQUIRE(fs::exists(fs::path(root) / "manifest.json"));

    const Dataset loaded = load_dataset(root);
    REQUIRE(loaded.instances.size() == dataset.instances.size());
    for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
        CHECK(loaded.instances[i].id == dataset.instances[i].id);
        CHECK(loaded.instances[i].label == dataset.instances[i].label);
        CHECK(loaded.instances[i].is_test == dataset.instances[i].is_test);
        CHECK(loaded.instances[i].mesh.faces == dataset.instances[i].mesh.faces);
        double worst = 0.0;
        for (int v = 0; v < dataset.instances[i].mesh.vertex_count(); ++v) {
            worst = std::max(worst, norm(loaded.instances[i].mesh.vertices[static_cast<std::size_t>(v)] -
                                         dataset.instances[i].mesh.vertices[static_cast<std::size_t>(v)]));
        }
        CHECK(worst < 1e-9);
    }
    SUBCASE("byte-identical regeneration") {
        const std::string root2 = (fs::temp_directory_path() / "meshadv_dataset_test2").string();
        fs::remove_all(root2);
        write_dataset(generate_dataset({specs[0], specs[3]}, 4, 999), root2);
        for (const DatasetInstance& inst : dataset.instances) {
            const std::string rel = inst.class_name + "/" + inst.id + ".off";
            std::ifstream f1(fs::path(root) / rel), f2(fs::path(root2) / rel);
            std::stringstream s1, s2;
            s1 << f1.rdbuf();
            s2 << f2.rdbuf();
            CHECK(s1.str() == s2.str());
        }
        fs::remove_all(root2);
    }
    fs::remove_all(root);
}

TEST_CASE("loading a dataset without a manifest fails with the path") {
    CHECK_THROWS_WITH_AS(load_dataset("/tmp/definitely_missing_meshadv"),
                         doctest::Contains("manifest"), std::runtime_error);
}
