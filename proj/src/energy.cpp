#include "skod/energy.hpp"

#include <algorithm>
#include <cmath>

#include "skod/errors.hpp"
#include "skod/numerics.hpp"

namespace skod {

void EnergyConfig::validate() const {
    if (epsilon <= 0.0) throw ValueError("EnergyConfig: epsilon must be positive");
    if (quantile <= 0.0 || quantile >= 1.0)
        throw ValueError("EnergyConfig: quantile must lie in (0, 1)");
    if (alpha < 0.0) throw ValueError("EnergyConfig: alpha must be nonnegative");
}

double energy_score(std::span<const double> seen_logits, double epsilon) {
    if (seen_logits.empty()) throw ValueError("energy_score: no seen-class logits");
    return -logsumexp(seen_logits, epsilon);
}

DetectorState calibrate_threshold(const std::vector<double>& training_scores,
                                  const EnergyConfig& config) {
    config.validate();
    std::size_t n = training_scores.size();
    // the q-quantile is meaningless when q*N rounds below one sample
    if (config.quantile * double(n) < 1.0)
        throw ValueError("calibrate_threshold: too few scores for this quantile");
    std::vector<double> sorted(training_scores);
    std::sort(sorted.begin(), sorted.end());
    // nearest rank: the ceil(q*N)-th smallest score
    std::size_t rank = std::size_t(std::ceil(config.quantile * double(n)));
    if (rank > n) rank = n;
    DetectorState state;
    state.tau = sorted[rank - 1];
    state.calibration_count = n;
    state.calibrated = true;
    state.config = config;
    if (!std::isfinite(state.tau))
        throw ValueError("calibrate_threshold: non-finite threshold");
    return state;
}

Detection detect(std::span<const double> logits, std::size_t seen_count,
                 const DetectorState& state) {
    if (!state.calibrated) throw StateError("detect: threshold not calibrated");
    if (seen_count == 0 || seen_count > logits.size())
        throw ValueError("detect: bad seen-class count");
    Detection d;
    d.score = -energy_score(logits.first(seen_count), state.config.epsilon);
    if (d.score < state.tau) {
        // unseen: the probability of the reserved slot is forced to 1
        d.is_ood = true;
        d.label = seen_count;
    } else {
        d.is_ood = false;
        std::size_t best = 0;
        for (std::size_t i = 1; i < seen_count; ++i)
            if (logits[i] > logits[best]) best = i;
        d.label = best;
    }
    return d;
}

double msp_score(std::span<const double> seen_logits) {
    std::vector<double> p = softmax(seen_logits);
    return *std::max_element(p.begin(), p.end());
}

std::vector<double> react_clamp(std::span<const double> features, double clamp) {
    if (clamp <= 0.0) throw ValueError("react_clamp: clamp must be positive");
    std::vector<double> out(features.begin(), features.end());
    for (double& x : out) x = std::min(x, clamp);
    return out;
}

} // namespace skod
