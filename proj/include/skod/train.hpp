#ifndef SKOD_TRAIN_HPP
#define SKOD_TRAIN_HPP

#include <cstdint>
#include <ostream>
#include <vector>

#include "skod/dataset.hpp"
#include "skod/energy.hpp"
#include "skod/metrics.hpp"
#include "skod/model.hpp"

namespace skod {

struct TrainConfig {
    double lr = 0.001;
    double momentum = 0.9;
    double weight_decay = 0.0004;
    std::size_t batch_size = 32;
    std::size_t epochs = 50;
    std::size_t warmup_epochs = 5; // linear ramp over the first epochs
    std::uint64_t seed = 0;
    bool energy_loss = true; // false: plain cross-entropy
    EnergyConfig energy;

    void validate() const;
};

// Linear warmup: base * (epoch+1)/warmup for epoch < warmup, base after.
double warmup_lr(double base, std::size_t epoch, std::size_t warmup_epochs);

// Nesterov momentum with decoupled-from-nothing L2: the weight-decay term is
// folded into the gradient before the velocity update.
//   g <- g + wd*w;  v <- mu*v - lr*g;  w <- w + mu*v - lr*g
struct SgdState {
    std::vector<Tensor> velocity; // one per parameter, same shapes
};

void sgd_step(ParamSet& params, SgdState& state, const std::vector<Tensor>& grads,
              double lr, double momentum, double weight_decay);

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;
    double ce = 0.0;
    double energy_term = 0.0; // alpha-weighted hinge contribution
    double mean_energy = 0.0; // mean E over the epoch's training samples
    double val_top1 = 0.0;
};

struct TrainResult {
    Model model;
    DetectorState detector;
    std::vector<std::uint32_t> class_labels; // model index -> original label
    std::vector<EpochStats> history;
};

// Trains in place on `train_set`, validates Top-1 on `val_set` each epoch and
// calibrates the detector threshold on the final training-set scores.
// Every training label must be a seen class; anything else is a protocol
// violation. When `log` is given, one JSON line per epoch is written to it.
TrainResult train(Model model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg, std::ostream* log = nullptr);

struct SampleScore {
    std::string source_id;
    double score = 0.0; // -E over the seen slots
    bool is_id = false;
    bool flagged_ood = false;
    std::size_t predicted = 0; // detector verdict: class index, seen_count for unseen
    std::size_t cls_pred = 0;  // argmax over the seen logits, threshold ignored
    std::size_t truth = 0;     // class index, seen_count for unseen truth
};

// Runs detection over every sample. `threads` > 1 parallelizes the forward
// passes only; aggregation stays sequential.
std::vector<SampleScore> score_dataset(const Model& model,
                                       const DetectorState& detector,
                                       const std::vector<std::uint32_t>& class_labels,
                                       const Dataset& data, std::size_t threads = 1);

// Aggregates per-sample scores. In mix mode the report carries the full OOD
// panel; otherwise only Top-1 over the seen-class samples.
MetricReport summarize(const std::vector<SampleScore>& scores,
                       const DetectorState& detector, bool mix_mode);

MetricReport evaluate(const Model& model, const DetectorState& detector,
                      const std::vector<std::uint32_t>& class_labels,
                      const Dataset& data, bool mix_mode, std::size_t threads = 1);

} // namespace skod

#endif
