#pragma once

#include <functional>
#include <map>
#include <string>

#include "gsmae/nn.hpp"
#include "gsmae/tensor.hpp"

namespace gsmae {

// AdamW with decoupled weight decay and bias-corrected moments.
struct AdamW {
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step_count = 0;

    struct Moments {
        std::vector<double> m, v;
    };
    std::map<std::string, Moments> state;

    explicit AdamW(double weight_decay = 0.0) : weight_decay(weight_decay) {}

    // Applies one update at learning rate lr and zeroes the gradients.
    // Throws NumericError naming the parameter when a gradient is NaN.
    void update(ParamList& params, double lr);
};

// Linear warmup to base_lr over warmup_steps, then cosine decay to ~0 at
// total_steps.
double cosine_schedule(std::int64_t step, std::int64_t total_steps, std::int64_t warmup_steps,
                       double base_lr);

// Compares the reverse-mode gradient of a scalar-valued f against central
// finite differences. Returns max over coordinates of
// |g_ad - g_fd| / max(1, |g_ad| + |g_fd|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double eps = 1e-5);

// Same check against a set of named parameters captured by f.
double grad_check_params(const std::function<Tensor()>& f, ParamList& params, double eps = 1e-5);

} // namespace gsmae
