#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "fringeforge/autodiff.hpp"

namespace fringeforge {

struct AdamConfig {
    double lr = 0.008;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with per-parameter moment state and step count. Parameters are keyed
/// by name so optimizer state can ride along in checkpoints.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

    void step(const std::vector<Parameter*>& params) {
        for (Parameter* p : params) update(*p);
    }

    void update(Parameter& p) {
        Slot& s = slot(p);
        s.t += 1;
        double* m = s.m.mut();
        double* v = s.v.mut();
        double* val = p.value.mut();
        const double* g = p.grad.data();
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(s.t));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(s.t));
        for (std::int64_t i = 0; i < p.value.numel(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            val[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }

    /// Moment tensors and step counters, named for serialization.
    std::vector<std::pair<std::string, Tensor>> named_state() const {
        std::vector<std::pair<std::string, Tensor>> out;
        for (const auto& name : order_) {
            const Slot& s = slots_.at(name);
            out.emplace_back("adam." + name + ".m", s.m.clone());
            out.emplace_back("adam." + name + ".v", s.v.clone());
            out.emplace_back("adam." + name + ".t", Tensor::scalar(static_cast<double>(s.t)));
        }
        return out;
    }

private:
    struct Slot {
        Tensor m, v;
        std::int64_t t = 0;
    };

    Slot& slot(Parameter& p) {
        auto it = slots_.find(p.name);
        if (it != slots_.end()) {
            if (!(it->second.m.shape() == p.value.shape()))
                throw std::invalid_argument("adam: parameter shape changed for " + p.name);
            return it->second;
        }
        order_.push_back(p.name);
        auto [ins, _] = slots_.emplace(p.name, Slot{Tensor::zeros(p.value.shape()),
                                                    Tensor::zeros(p.value.shape()), 0});
        return ins->second;
    }

    AdamConfig cfg_;
    std::unordered_map<std::string, Slot> slots_;
    std::vector<std::string> order_;
};

}  // namespace fringeforge
