#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hpn/tensor.hpp"

namespace hpn {

struct AdamState {
    std::int64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Bias-corrected Adam update, applied in place. Every parameter must carry a
// gradient; gradients are cleared afterwards.
inline void adam_step(std::vector<Tensor>& params, std::vector<AdamState>& states, double lr) {
    detail::require(params.size() == states.size(),
                    "adam_step: " + std::to_string(params.size()) + " parameters but " +
                        std::to_string(states.size()) + " states");
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = params[k];
        AdamState& st = states[k];
        detail::require(p.has_grad(),
                        "adam_step: parameter " + std::to_string(k) + " has no gradient");
        if (st.m.empty()) {
            st.m.assign(p.size(), 0.0);
            st.v.assign(p.size(), 0.0);
        }
        detail::require(st.m.size() == p.size(),
                        "adam_step: state " + std::to_string(k) + " sized for " +
                            std::to_string(st.m.size()) + " values, parameter has " +
                            std::to_string(p.size()));
        st.step += 1;
        const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
        const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
        double* x = p.data();
        const std::vector<double>& g = p.grad();
        for (std::size_t i = 0; i < p.size(); ++i) {
            st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g[i];
            st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g[i] * g[i];
            const double mhat = st.m[i] / c1;
            const double vhat = st.v[i] / c2;
            x[i] -= lr * mhat / (std::sqrt(vhat) + st.epsilon);
        }
        p.clear_grad();
    }
}

}  // namespace hpn
