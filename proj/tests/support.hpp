#pragma once

// Shared oracles for the unit and acceptance suites. Everything here is
// independent of the library's analytic-gradient code paths: gradients are
// checked against central finite differences of the loss value alone.

#include <cmath>
#include <functional>
#include <vector>

#include "meshadv/mesh.hpp"
#include "meshadv/rng.hpp"
#include "meshadv/vec3.hpp"

namespace meshadv::testing {

/// Central finite differences of f at x, h = 1e-6 by default.
inline std::vector<double> central_differences(const std::function<double(const std::vector<double>&)>& f,
                                               std::vector<double> x, double h = 1e-6) {
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double fp = f(x);
        x[i] = saved - h;
        const double fm = f(x);
        x[i] = saved;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

/// Norm-wise relative error between an analytic and a numeric gradient.
inline double gradient_relative_error(const std::vector<double>& analytic,
                                      const std::vector<double>& numeric) {
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
        ref += numeric[i] * numeric[i];
    }
    return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-12);
}

inline std::vector<double> flatten(const std::vector<Vec3>& vs) {
    std::vector<double> out;
    out.reserve(vs.size() * 3);
    for (const Vec3& v : vs) {
        out.push_back(v.x);
        out.push_back(v.y);
        out.push_back(v.z);
    }
    return out;
}

inline std::vector<Vec3> unflatten(const std::vector<double>& xs) {
    std::vector<Vec3> out(xs.size() / 3);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = {xs[3 * i], xs[3 * i + 1], xs[3 * i + 2]};
    }
    return out;
}

/// Small closed random test mesh: an icosphere with radially jittered
/// vertices. subdivisions=0 gives 12 vertices / 20 faces; 1 gives 42 / 80.
Mesh random_closed_mesh(Rng& rng, int subdivisions = 0, double jitter = 0.15);

/// Uniform random rotation applied in place (lengths preserved).
void apply_random_rotation(Mesh& mesh, Rng& rng);

}  // namespace meshadv::testing
