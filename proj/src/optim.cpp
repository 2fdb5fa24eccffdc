#include "gsmae/optim.hpp"

#include <cmath>

namespace gsmae {

void AdamW::update(ParamList& params, double lr) {
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (auto& p : params) {
        auto& data = p.tensor.mutable_data();
        auto& grad = p.tensor.mutable_grad();
        auto& mom = state[p.name];
        if (mom.m.size() != data.size()) {
            mom.m.assign(data.size(), 0.0);
            mom.v.assign(data.size(), 0.0);
        }
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double g = grad[i];
            if (std::isnan(g))
                throw NumericError("adamw: NaN gradient in parameter " + p.name);
            mom.m[i] = beta1 * mom.m[i] + (1.0 - beta1) * g;
            mom.v[i] = beta2 * mom.v[i] + (1.0 - beta2) * g * g;
            const double mhat = mom.m[i] / bc1;
            const double vhat = mom.v[i] / bc2;
            data[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * data[i]);
            grad[i] = 0.0;
        }
    }
}

double cosine_schedule(std::int64_t step, std::int64_t total_steps, std::int64_t warmup_steps,
                       double base_lr) {
    if (warmup_steps >= total_steps)
        throw ConfigError("cosine_schedule: warmup_steps must be below total_steps");
    if (warmup_steps > 0 && step < warmup_steps)
        return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    const double progress = static_cast<double>(step - warmup_steps) /
                            static_cast<double>(total_steps - warmup_steps);
    return base_lr * 0.5 * (1.0 + std::cos(3.141592653589793 * std::min(progress, 1.0)));
}

namespace {

double relative_error(double ad, double fd) {
    return std::abs(ad - fd) / std::max(1.0, std::abs(ad) + std::abs(fd));
}

} // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
    Tensor probe = Tensor::from_data(x.shape(), x.data(), true);
    Tensor y = f(probe);
    if (y.numel() != 1) throw InvalidInputError("grad_check: f must be scalar-valued");
    y.backward();
    const std::vector<double> g_ad = probe.grad();

    Tensor work = Tensor::from_data(x.shape(), x.data(), false);
    double worst = 0.0;
    for (std::int64_t i = 0; i < work.numel(); ++i) {
        const double orig = work.mutable_data()[i];
        work.mutable_data()[i] = orig + eps;
        const double up = f(work).value();
        work.mutable_data()[i] = orig - eps;
        const double down = f(work).value();
        work.mutable_data()[i] = orig;
        const double fd = (up - down) / (2.0 * eps);
        worst = std::max(worst, relative_error(g_ad[i], fd));
    }
    return worst;
}

double grad_check_params(const std::function<Tensor()>& f, ParamList& params, double eps) {
    Tensor y = f();
    if (y.numel() != 1) throw InvalidInputError("grad_check_params: f must be scalar-valued");
    for (auto& p : params) p.tensor.zero_grad();
    y.backward();
    std::vector<std::vector<double>> g_ad;
    for (auto& p : params) {
        p.tensor.mutable_grad();
        g_ad.push_back(p.tensor.grad());
    }

    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& data = params[pi].tensor.mutable_data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double orig = data[i];
            data[i] = orig + eps;
            const double up = f().value();
            data[i] = orig - eps;
            const double down = f().value();
            data[i] = orig;
            const double fd = (up - down) / (2.0 * eps);
            worst = std::max(worst, relative_error(g_ad[pi][i], fd));
        }
    }
    for (auto& p : params) p.tensor.zero_grad();
    return worst;
}

} // namespace gsmae
