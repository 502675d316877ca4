#include "meshadv/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace meshadv {

FaceSampler::FaceSampler(const Mesh& mesh) {
    const FaceGeometry geom = face_areas_normals(mesh);
    cumulative_.resize(geom.areas.size());
    double running = 0.0;
    for (std::size_t i = 0; i < geom.areas.size(); ++i) {
        running += geom.areas[i];
        cumulative_[i] = running;
    }
    total_area_ = running;
    if (!(total_area_ > 0.0)) {
        throw MeshError("mesh has zero total surface area; cannot sample points");
    }
}

int FaceSampler::pick(double u) const {
    const double target = u * total_area_;
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    const std::size_t idx = std::min(static_cast<std::size_t>(it - cumulative_.begin()),
                                     cumulative_.size() - 1);
    return static_cast<int>(idx);
}

SampleMap draw_sample_map(const FaceSampler& sampler, int num_points, Rng& rng) {
    if (num_points < 1) throw std::invalid_argument("num_points must be >= 1");
    SampleMap map;
    map.face_index.resize(static_cast<std::size_t>(num_points));
    map.lambdas.resize(static_cast<std::size_t>(num_points));
    for (int i = 0; i < num_points; ++i) {
        map.face_index[static_cast<std::size_t>(i)] = sampler.pick(rng.uniform());
        const double u = rng.uniform();
        const double w = rng.uniform();
        const double su = std::sqrt(u);
        map.lambdas[static_cast<std::size_t>(i)] = {1.0 - su, su * (1.0 - w), su * w};
    }
    return map;
}

SampleMap draw_sample_map(const Mesh& mesh, int num_points, std::uint64_t seed) {
    const FaceSampler sampler(mesh);
    Rng rng(seed);
    return draw_sample_map(sampler, num_points, rng);
}

PointCloud apply_sample_map(const Mesh& mesh, const SampleMap& map) {
    PointCloud cloud;
    cloud.points.resize(map.face_index.size());
    const int nf = mesh.face_count();
    for (std::size_t i = 0; i < map.face_index.size(); ++i) {
        const int fi = map.face_index[i];
        if (fi < 0 || fi >= nf) {
            throw std::out_of_range("sample map face index " + std::to_string(fi) +
                                    " out of range [0, " + std::to_string(nf) + ")");
        }
        const auto& f = mesh.faces[static_cast<std::size_t>(fi)];
        const auto& l = map.lambdas[i];
        cloud.points[i] = l[0] * mesh.vertices[static_cast<std::size_t>(f[0])] +
                          l[1] * mesh.vertices[static_cast<std::size_t>(f[1])] +
                          l[2] * mesh.vertices[static_cast<std::size_t>(f[2])];
    }
    cloud.sample_map = map;
    return cloud;
}

std::vector<Vec3> backprop_sample(const Mesh& mesh, const SampleMap& map,
                                  const std::vector<Vec3>& point_grads) {
    if (point_grads.size() != map.face_index.size()) {
        throw std::invalid_argument("point gradient count " + std::to_string(point_grads.size()) +
                                    " does not match sample map size " +
                                    std::to_string(map.face_index.size()));
    }
    std::vector<Vec3> vertex_grads(mesh.vertices.size());
    const int nf = mesh.face_count();
    for (std::size_t i = 0; i < map.face_index.size(); ++i) {
        const int fi = map.face_index[i];
        if (fi < 0 || fi >= nf) {
            throw std::out_of_range("sample map face index " + std::to_string(fi) +
                                    " out of range [0, " + std::to_string(nf) + ")");
        }
        const auto& f = mesh.faces[static_cast<std::size_t>(fi)];
        const auto& l = map.lambdas[i];
        for (int k = 0; k < 3; ++k) {
            vertex_grads[static_cast<std::size_t>(f[static_cast<std::size_t>(k)])] +=
                l[static_cast<std::size_t>(k)] * point_grads[i];
        }
    }
    return vertex_grads;
}

void save_xyz(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MeshError(path + ": cannot open file for writing");
    char buf[96];
    for (const Vec3& p : cloud.points) {
        std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", p.x, p.y, p.z);
        out << buf;
    }
    out.flush();
    if (!out) throw MeshError(path + ": write failure");
}

PointCloud load_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError(path + ": cannot open file");
    PointCloud cloud;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        Vec3 p;
        if (!(ls >> p.x >> p.y >> p.z)) {
            throw MeshError(path + ": malformed point at line " + std::to_string(line_no));
        }
        cloud.points.push_back(p);
    }
    return cloud;
}

}  // namespace meshadv
