#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "astral/model.hpp"

namespace astral {

struct AdvConfig {
    double epsilon = 0.05;
    std::vector<std::string> targets{"E_prime", "H_prime"};
    double norm_floor = 1e-12;

    friend bool operator==(const AdvConfig&, const AdvConfig&) = default;
};

struct AdvStepRecord {
    double loss_primal = 0.0;
    double loss_adv = 0.0;
    double loss = 0.0;  // loss_primal + loss_adv
    std::map<std::string, double> r_adv_norm;
};

/// A perturbable intermediate variable, in pipeline order.
struct InjectionPoint {
    std::string name;
    std::string description;
};

inline std::vector<InjectionPoint> target_registry(const Model&) {
    return {{"E_prime", "input of the Bi-LSTM (output of Gated-CNN I)"},
            {"H_prime", "input of the CRF emission layer (output of Gated-CNN II)"}};
}

/// Throws ConfigError for an empty target list or unknown names.
inline void validate_targets(const AdvConfig& cfg, const Model& model) {
    if (!(cfg.epsilon >= 0.0) || !std::isfinite(cfg.epsilon)) throw ConfigError("epsilon must be finite and >= 0");
    if (!(cfg.norm_floor >= 0.0)) throw ConfigError("norm floor must be >= 0");
    if (cfg.targets.empty()) throw ConfigError("adversarial training enabled with no target variables");
    const auto registry = target_registry(model);
    for (const auto& t : cfg.targets) {
        const bool known = std::any_of(registry.begin(), registry.end(), [&](const auto& p) { return p.name == t; });
        if (!known) {
            std::string valid;
            for (const auto& p : registry) valid += (valid.empty() ? "" : ", ") + p.name;
            throw ConfigError("unknown adversarial target '" + t + "'; valid targets: " + valid);
        }
    }
}

/// r_adv = epsilon * X (elementwise) d / ||d||_2, with ||.|| over the whole
/// tensor. Zero when ||d|| <= delta.
inline Tensor compute_r_adv(const Tensor& x, const Tensor& d, double epsilon, double delta) {
    Tensor::require_same_shape(x, d, "compute_r_adv");
    Tensor r(x.shape());
    const double norm = l2_norm(d);
    if (norm <= delta) return r;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = epsilon * (x[i] * (d[i] / norm));
    return r;
}

namespace detail {
inline void require_finite_loss(double loss, const Sentence& s, const char* phase) {
    if (std::isfinite(loss)) return;
    std::ostringstream os;
    os << phase << " loss is " << loss << " on sentence of " << s.size() << " tokens:";
    for (const auto& t : s.tokens) os << ' ' << t;
    throw NumericError(os.str());
}
}  // namespace detail

/// One ordinary training step: forward, CRF NLL, full backward. Gradients
/// are added to whatever the model already holds.
inline double plain_step(Model& model, const Sentence& s) {
    const auto& gold = Model::gold_of(s);
    const Tensor scores = model.scores(s);
    Tensor d_scores;
    const double loss = model.crf().nll_backward(scores, gold, d_scores);
    detail::require_finite_loss(loss, s, "primal");
    model.backward_from_h_prime(model.emit_backward(d_scores));
    return loss;
}

/// Two-round adversarial step.
///
/// Round 1 runs the ordinary step, keeping X and d = dL_pri/dX at every
/// selected target. Round 2 re-enters the pipeline: E' + r(E') is pushed
/// through the Bi-LSTM and Gated-CNN II, then r(H') (from round-1 X and d)
/// is added to the fresh H'. The perturbations are constants; the round-2
/// backward adds its parameter gradients on top of round 1's, so the model
/// ends up holding grad(L_pri + L_adv).
inline AdvStepRecord adversarial_step(Model& model, const Sentence& s, const AdvConfig& cfg) {
    validate_targets(cfg, model);
    const auto selected = [&](const char* name) {
        return std::find(cfg.targets.begin(), cfg.targets.end(), name) != cfg.targets.end();
    };
    const bool at_e = selected("E_prime"), at_h = selected("H_prime");
    const auto& gold = Model::gold_of(s);
    AdvStepRecord rec;

    const Tensor e_prime = model.lower(model.embed(s));
    const Tensor h_prime = model.upper(model.context(e_prime));
    Tensor d_scores;
    rec.loss_primal = model.crf().nll_backward(model.emit(h_prime), gold, d_scores);
    detail::require_finite_loss(rec.loss_primal, s, "primal");
    const Tensor d_h_prime = model.emit_backward(d_scores);
    const Tensor d_e_prime = model.backward_from_h_prime(d_h_prime);

    Tensor h_adv = h_prime;
    if (at_e) {
        const Tensor r = compute_r_adv(e_prime, d_e_prime, cfg.epsilon, cfg.norm_floor);
        rec.r_adv_norm["E_prime"] = l2_norm(r);
        h_adv = model.upper(model.context(add(e_prime, r)));
    }
    if (at_h) {
        const Tensor r = compute_r_adv(h_prime, d_h_prime, cfg.epsilon, cfg.norm_floor);
        rec.r_adv_norm["H_prime"] = l2_norm(r);
        h_adv += r;
    }
    rec.loss_adv = model.crf().nll_backward(model.emit(h_adv), gold, d_scores);
    detail::require_finite_loss(rec.loss_adv, s, "adversarial");
    model.backward_from_h_prime(model.emit_backward(d_scores));
    rec.loss = rec.loss_primal + rec.loss_adv;
    return rec;
}

}  // namespace astral
