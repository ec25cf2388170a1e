#ifndef SKOD_ENERGY_HPP
#define SKOD_ENERGY_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace skod {

struct EnergyConfig {
    double epsilon = 1.0;  // temperature
    double quantile = 0.10; // q used for tau calibration
    double margin = -25.0;  // m_in
    double alpha = 0.1;     // energy-loss weight

    void validate() const;
};

// Calibrated detector threshold. Immutable once built.
struct DetectorState {
    double tau = 0.0;
    std::size_t calibration_count = 0;
    bool calibrated = false;
    EnergyConfig config;
};

// E(x; f) = -epsilon * log sum_i exp(f_i / epsilon) over the seen-class
// logits. The detection score is -E; higher means more ID-like.
double energy_score(std::span<const double> seen_logits, double epsilon = 1.0);

// tau = nearest-rank q-quantile of the training-set detection scores, so that
// roughly (1 - q) of them lie at or above tau.
DetectorState calibrate_threshold(const std::vector<double>& training_scores,
                                  const EnergyConfig& config);

struct Detection {
    std::size_t label = 0; // seen-class index, or seen_count for the unseen verdict
    double score = 0.0;    // -E over the seen slots
    bool is_ood = false;
};

// Scores the sample and applies the threshold rule: score < tau declares the
// sample unseen, otherwise the argmax over the seen logits wins.
Detection detect(std::span<const double> logits, std::size_t seen_count,
                 const DetectorState& state);

// max softmax probability over the seen logits.
double msp_score(std::span<const double> seen_logits);

// elementwise min(feature, clamp); the ReAct baseline transform.
std::vector<double> react_clamp(std::span<const double> features, double clamp);

} // namespace skod

#endif
