#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "astral/model.hpp"

namespace astral {

/// Global L2 norm over the gradients of all trainable, unpinned entries.
inline double gradient_norm(const std::vector<NamedParams>& groups) {
    double s = 0.0;
    for (const auto& g : groups) {
        for (const auto& e : g.params->entries()) {
            if (!e.trainable) continue;
            for (std::size_t i = 0; i < e.grad.size(); ++i) {
                if (e.pinned && (*e.pinned)[i] != 0.0) continue;
                s += e.grad[i] * e.grad[i];
            }
        }
    }
    return std::sqrt(s);
}

/// SGD on a momentum-smoothed gradient:  v <- m * v + (1 - m) * g;  p <- p - lr * v.
/// Gradients are first rescaled so their global norm is at most clip_norm
/// (clip_norm <= 0 disables clipping). Frozen tensors and pinned entries are
/// never changed.
class SgdMomentum {
public:
    SgdMomentum(double momentum, double clip_norm) : momentum_(momentum), clip_norm_(clip_norm) {}

    void step(Model& model, double lr) {
        auto groups = model.param_groups();
        const double norm = gradient_norm(groups);
        const double scale = (clip_norm_ > 0.0 && norm > clip_norm_) ? clip_norm_ / norm : 1.0;
        for (auto& g : groups) {
            for (auto& e : g.params->entries()) {
                if (!e.trainable) continue;
                auto& v = velocity_[g.prefix + "." + e.name];
                if (v.empty()) v.assign(e.value.size(), 0.0);
                for (std::size_t i = 0; i < e.value.size(); ++i) {
                    if (e.pinned && (*e.pinned)[i] != 0.0) continue;
                    v[i] = momentum_ * v[i] + (1.0 - momentum_) * scale * e.grad[i];
                    e.value[i] -= lr * v[i];
                }
            }
        }
    }

private:
    double momentum_;
    double clip_norm_;
    std::unordered_map<std::string, std::vector<double>> velocity_;
};

}  // namespace astral
