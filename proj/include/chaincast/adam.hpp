#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace chaincast {

struct AdamParams {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// First/second-moment state for one flat parameter vector.
class AdamState {
public:
    explicit AdamState(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

    // One bias-corrected update; the step counter is shared by the caller
    // when several parameter vectors are updated together.
    void step(std::vector<double>& x, const std::vector<double>& grad, const AdamParams& p,
              long t) {
        const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < x.size(); ++i) {
            m_[i] = p.beta1 * m_[i] + (1.0 - p.beta1) * grad[i];
            v_[i] = p.beta2 * v_[i] + (1.0 - p.beta2) * grad[i] * grad[i];
            x[i] -= p.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + p.epsilon);
        }
    }

private:
    std::vector<double> m_;
    std::vector<double> v_;
};

}  // namespace chaincast
