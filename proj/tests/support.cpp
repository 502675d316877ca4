#include "support.hpp"

#include "meshadv/dataset.hpp"

namespace meshadv::testing {

Mesh random_closed_mesh(Rng& rng, int subdivisions, double jitter) {
    Mesh mesh = make_icosphere(subdivisions);
    for (Vec3& v : mesh.vertices) v *= 1.0 + rng.uniform(-jitter, jitter);
    return mesh;
}

void apply_random_rotation(Mesh& mesh, Rng& rng) {
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
        v = {R[0][0] * v.x + R[0][1] * v.y + R[0][2] * v.z,
             R[1][0] * v.x + R[1][1] * v.y + R[1][2] * v.z,
             R[2][0] * v.x + R[2][1] * v.y + R[2][2] * v.z};
    }
}

}  // namespace meshadv::testing
