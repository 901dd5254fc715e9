#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "rarefx/error.hpp"

namespace rarefx::forecast {

enum class Distance { absolute, squared };
enum class WeightAdaptation { fixed, residual_inverse };

/// Weights for the temporally adaptive loss
///   L_i = w1 * sum_{rare k} eta(y_k, yhat_k) + w2 * sum_{other k} eta(y_k, yhat_k).
struct AdaptiveLossConfig {
    double w1 = 0.1;  // rare-window weight
    double w2 = 1.0;  // non-rare weight
    Distance distance = Distance::absolute;
    WeightAdaptation adaptation = WeightAdaptation::fixed;
    /// residual_inverse only: w1_i ∝ 1 / (floor + mean rare residual of sample i).
    double floor = 0.05;

    void validate() const {
        detail::require(std::isfinite(w1) && std::isfinite(w2) && w1 >= 0.0 && w2 >= 0.0,
                        "adaptive loss: weights must be finite and >= 0");
        detail::require(w1 + w2 > 0.0, "adaptive loss: w1 + w2 must be > 0");
        detail::require(floor > 0.0, "adaptive loss: floor must be > 0");
    }
};

inline double distance(Distance eta, double label, double pred) noexcept {
    const double r = pred - label;
    return eta == Distance::absolute ? std::abs(r) : r * r;
}

/// d eta / d pred. The absolute distance uses 0 at the kink.
inline double distance_grad(Distance eta, double label, double pred) noexcept {
    const double r = pred - label;
    if (eta == Distance::squared) return 2.0 * r;
    return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
}

struct LossValue {
    double loss = 0.0;
    std::vector<double> per_step;  // unweighted eta per horizon step
};

/// Loss of one sample with an explicit rare weight (per-sample adaptation).
inline LossValue adaptive_loss(std::span<const double> pred, std::span<const double> label,
                               const std::vector<bool>& mask, double w1, double w2,
                               Distance eta) {
    detail::require(pred.size() == label.size() && label.size() == mask.size(),
                    "adaptive_loss: pred, label and mask lengths differ");
    LossValue out;
    out.per_step.resize(pred.size());
    double rare = 0.0, other = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double e = distance(eta, label[k], pred[k]);
        out.per_step[k] = e;
        (mask[k] ? rare : other) += e;
    }
    out.loss = w1 * rare + w2 * other;
    return out;
}

inline LossValue adaptive_loss(std::span<const double> pred, std::span<const double> label,
                               const std::vector<bool>& mask, const AdaptiveLossConfig& cfg) {
    cfg.validate();
    return adaptive_loss(pred, label, mask, cfg.w1, cfg.w2, cfg.distance);
}

}  // namespace rarefx::forecast
