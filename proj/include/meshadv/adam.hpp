#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace meshadv {

struct AdamParams {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias-corrected moments over a flat parameter vector.
class AdamOptimizer {
public:
    AdamOptimizer(std::size_t dim, const AdamParams& params)
        : params_(params), m_(dim, 0.0), v_(dim, 0.0) {}

    void step(std::span<double> theta, std::span<const double> grad) {
        if (theta.size() != m_.size() || grad.size() != m_.size()) {
            throw std::invalid_argument("adam: dimension mismatch");
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(params_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(params_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < m_.size(); ++i) {
            m_[i] = params_.beta1 * m_[i] + (1.0 - params_.beta1) * grad[i];
            v_[i] = params_.beta2 * v_[i] + (1.0 - params_.beta2) * grad[i] * grad[i];
            const double mhat = m_[i] / bc1;
            const double vhat = v_[i] / bc2;
            theta[i] -= params_.lr * mhat / (std::sqrt(vhat) + params_.eps);
        }
    }

    std::int64_t steps_taken() const { return t_; }

private:
    AdamParams params_;
    std::vector<double> m_, v_;
    std::int64_t t_ = 0;
};

}  // namespace meshadv
