#include "tomosar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tomosar/types.hpp"

namespace tomo {

TrialOutcome match_estimates(std::span<const double> estimated, std::span<const double> truth, double gate) {
    if (estimated.size() != truth.size()) throw InvalidArgument("estimate and truth lengths differ");
    TrialOutcome out;
    out.true_elevations.assign(truth.begin(), truth.end());
    out.estimated_elevations.assign(estimated.begin(), estimated.end());
    std::sort(out.true_elevations.begin(), out.true_elevations.end());
    std::sort(out.estimated_elevations.begin(), out.estimated_elevations.end());
    out.detected = true;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!(std::abs(out.estimated_elevations[i] - out.true_elevations[i]) < gate)) out.detected = false;
    }
    return out;
}

std::optional<double> rmse(std::span<const TrialOutcome> outcomes) {
    double total = 0.0;
    std::size_t detected = 0;
    for (const auto& o : outcomes) {
        if (!o.detected) continue;
        if (o.true_elevations.size() != o.estimated_elevations.size()) {
            throw InvalidArgument("trial outcome vectors differ in length");
        }
        if (o.true_elevations.empty()) continue;
        double sq = 0.0;
        for (std::size_t i = 0; i < o.true_elevations.size(); ++i) {
            const double e = o.true_elevations[i] - o.estimated_elevations[i];
            sq += e * e;
        }
        total += sq / static_cast<double>(o.true_elevations.size());
        ++detected;
    }
    if (detected == 0) return std::nullopt;
    return std::sqrt(total / static_cast<double>(detected));
}

double crlb_single(double rho_s, double looks, double antennas, double snr_linear) {
    if (!(rho_s > 0.0) || !(looks > 0.0) || !(antennas > 0.0) || !(snr_linear > 0.0)) {
        throw InvalidArgument("CRLB inputs must be positive");
    }
    constexpr double pi2 = std::numbers::pi * std::numbers::pi;
    return 3.0 / (2.0 * pi2) * (rho_s * rho_s) / (looks * antennas * snr_linear);
}

double crlb_factor(double alpha) {
    if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
    constexpr double pi2 = std::numbers::pi * std::numbers::pi;
    return std::max(15.0 / pi2 / (alpha * alpha), 1.0);
}

double crlb_double(double rho_s, double looks, double antennas, double snr_linear, double alpha) {
    return crlb_single(rho_s, looks, antennas, snr_linear) * crlb_factor(alpha);
}

}  // namespace tomo
