#include "skod/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "skod/autodiff.hpp"
#include "skod/errors.hpp"

namespace skod {

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ValueError("train: learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0)
        throw ValueError("train: momentum must lie in [0, 1)");
    if (weight_decay < 0.0) throw ValueError("train: weight decay must be >= 0");
    if (batch_size == 0) throw ValueError("train: batch size must be positive");
    if (epochs == 0) throw ValueError("train: epoch count must be positive");
    energy.validate();
}

double warmup_lr(double base, std::size_t epoch, std::size_t warmup_epochs) {
    if (warmup_epochs == 0 || epoch >= warmup_epochs) return base;
    return base * double(epoch + 1) / double(warmup_epochs);
}

void sgd_step(ParamSet& params, SgdState& state, const std::vector<Tensor>& grads,
              double lr, double momentum, double weight_decay) {
    if (grads.size() != params.size())
        throw ContractError("sgd: gradient count does not match parameter count");
    if (state.velocity.empty()) {
        for (const Tensor& p : params.values) {
            Tensor v(p.shape());
            v.fill(0.0);
            state.velocity.push_back(std::move(v));
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& w = params.values[i];
        Tensor& v = state.velocity[i];
        const Tensor& g0 = grads[i];
        if (g0.shape() != w.shape())
            throw ContractError("sgd: gradient shape mismatch for " + params.names[i]);
        for (std::size_t k = 0; k < w.size(); ++k) {
            double g = g0[k] + weight_decay * w[k];
            v[k] = momentum * v[k] - lr * g;
            w[k] += momentum * v[k] - lr * g; // Nesterov look-ahead
        }
    }
}

namespace {

// model index of a label, or seen_count when it is not a seen class
std::size_t label_index(const std::vector<std::uint32_t>& class_labels,
                        std::uint32_t label) {
    auto it = std::lower_bound(class_labels.begin(), class_labels.end(), label);
    if (it != class_labels.end() && *it == label)
        return std::size_t(it - class_labels.begin());
    return class_labels.size();
}

double eval_top1(const Model& model, const std::vector<std::uint32_t>& class_labels,
                 const Dataset& data) {
    if (data.empty()) return 0.0;
    std::size_t hits = 0;
    std::size_t seen = class_labels.size();
    for (const SkeletonSequence& s : data.samples) {
        std::vector<double> logits = model.eval_logits(s);
        std::size_t best = 0;
        for (std::size_t i = 1; i < seen; ++i)
            if (logits[i] > logits[best]) best = i;
        if (best == label_index(class_labels, s.label)) ++hits;
    }
    return 100.0 * double(hits) / double(data.size());
}

} // namespace

TrainResult train(Model model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg, std::ostream* log) {
    cfg.validate();
    if (train_set.empty()) throw ValueError("train: empty training set");

    std::vector<std::uint32_t> class_labels;
    for (const SkeletonSequence& s : train_set.samples)
        class_labels.push_back(s.label);
    std::sort(class_labels.begin(), class_labels.end());
    class_labels.erase(std::unique(class_labels.begin(), class_labels.end()),
                       class_labels.end());
    std::size_t seen = class_labels.size();
    if (seen != model.config().seen_classes)
        throw ContractError("train: training set has " + std::to_string(seen) +
                            " classes but the model expects " +
                            std::to_string(model.config().seen_classes));

    double alpha_base = cfg.energy_loss ? cfg.energy.alpha : 0.0;
    SgdState sgd;
    TrainResult result{std::move(model), DetectorState{}, std::move(class_labels), {}};
    std::size_t n = train_set.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(cfg.seed, 5000 + epoch));
        Rng dropout_rng(mix_seed(cfg.seed, 6000 + epoch));
        shuffle_rng.shuffle(order);
        double lr = warmup_lr(cfg.lr, epoch, cfg.warmup_epochs);
        // the hinge is huge at initialization (energies sit far above the
        // margin) and drowns the classification signal if applied at full
        // weight from the start; ramp its weight linearly over the whole run
        // so cross-entropy shapes the features first and the margin term
        // calibrates the energy scale once those features mean something
        double alpha = alpha_base * double(epoch + 1) / double(cfg.epochs);

        double sum_loss = 0.0, sum_ce = 0.0, sum_hinge = 0.0, sum_energy = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            std::size_t count = std::min(cfg.batch_size, n - start);
            Tape tape;
            std::vector<Var> pvars = result.model.push_params(tape);
            std::vector<Var> ces, hinges;
            for (std::size_t b = 0; b < count; ++b) {
                const SkeletonSequence& s = train_set.samples[order[start + b]];
                std::size_t target = label_index(result.class_labels, s.label);
                if (target >= seen)
                    throw ContractError("train: label " + std::to_string(s.label) +
                                        " is not a seen class");
                Model::ForwardResult fr =
                    result.model.forward(tape, pvars, s, true, &dropout_rng);
                ces.push_back(cross_entropy(fr.logits, target));
                Var energy =
                    neg(logsumexp_op(slice(fr.logits, 0, seen), cfg.energy.epsilon));
                sum_energy += energy.value()[0];
                hinges.push_back(hinge_sq(energy, cfg.energy.margin));
            }
            Var ce_mean = mean_of(ces);
            Var loss = ce_mean;
            Var hinge_mean = mean_of(hinges);
            if (alpha != 0.0) loss = add(ce_mean, scale(hinge_mean, alpha));
            tape.backward(loss);

            sum_loss += loss.value()[0] * double(count);
            sum_ce += ce_mean.value()[0] * double(count);
            sum_hinge += alpha * hinge_mean.value()[0] * double(count);

            std::vector<Tensor> grads;
            grads.reserve(pvars.size());
            for (const Var& v : pvars) grads.push_back(v.grad());
            sgd_step(result.model.params(), sgd, grads, lr, cfg.momentum,
                     cfg.weight_decay);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = sum_loss / double(n);
        stats.ce = sum_ce / double(n);
        stats.energy_term = sum_hinge / double(n);
        stats.mean_energy = sum_energy / double(n);
        stats.val_top1 = eval_top1(result.model, result.class_labels, val_set);
        if (log != nullptr) {
            nlohmann::json line = {
                {"epoch", stats.epoch},       {"lr", lr},
                {"loss", stats.loss},         {"ce", stats.ce},
                {"energy_term", stats.energy_term},
                {"mean_energy", stats.mean_energy},
                {"val_top1", stats.val_top1},
            };
            *log << line.dump() << "\n";
        }
        result.history.push_back(stats);
    }

    std::vector<double> scores;
    scores.reserve(n);
    for (const SkeletonSequence& s : train_set.samples) {
        std::vector<double> logits = result.model.eval_logits(s);
        scores.push_back(-energy_score({logits.data(), seen}, cfg.energy.epsilon));
    }
    result.detector = calibrate_threshold(scores, cfg.energy);
    return result;
}

std::vector<SampleScore> score_dataset(const Model& model,
                                       const DetectorState& detector,
                                       const std::vector<std::uint32_t>& class_labels,
                                       const Dataset& data, std::size_t threads) {
    if (data.empty()) throw ValueError("evaluate: empty dataset");
    if (!detector.calibrated)
        throw StateError("evaluate: detector threshold is not calibrated");
    std::size_t seen = class_labels.size();
    std::size_t n = data.size();

    std::vector<SampleScore> scores(n);
    auto worker = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const SkeletonSequence& s = data.samples[i];
            std::vector<double> logits = model.eval_logits(s);
            Detection d = detect(logits, seen, detector);
            std::size_t best = 0;
            for (std::size_t c = 1; c < seen; ++c)
                if (logits[c] > logits[best]) best = c;
            std::size_t truth = label_index(class_labels, s.label);
            scores[i] = {s.source_id, d.score, truth < seen,
                         d.is_ood,    d.label, best,
                         truth};
        }
    };
    if (threads <= 1) {
        worker(0, n);
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (n + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            std::size_t lo = std::min(t * chunk, n), hi = std::min(lo + chunk, n);
            if (lo < hi) pool.emplace_back(worker, lo, hi);
        }
        for (std::thread& th : pool) th.join();
    }
    return scores;
}

MetricReport summarize(const std::vector<SampleScore>& scores,
                       const DetectorState& detector, bool mix_mode) {
    std::vector<ScoredSample> all, id_only;
    std::vector<double> id_scores, ood_scores;
    for (const SampleScore& sc : scores) {
        ScoredSample s{sc.score, sc.is_id, sc.predicted, sc.truth};
        all.push_back(s);
        if (s.is_id) {
            // Top-1 is plain classification accuracy; the threshold verdict
            // only feeds the detection metrics.
            s.predicted = sc.cls_pred;
            id_only.push_back(s);
            id_scores.push_back(s.score);
        } else {
            ood_scores.push_back(s.score);
        }
    }

    MetricReport report;
    report.n_id = id_only.size();
    report.n_ood = all.size() - id_only.size();
    report.tau = detector.tau;
    if (!id_only.empty()) report.top1 = top1(id_only);
    if (mix_mode) {
        if (report.n_id == 0 || report.n_ood == 0)
            throw ValueError("evaluate: mix mode needs both seen and unseen samples");
        report.error = detection_error(all);
        report.fpr95 = fpr_at_tpr(all);
        report.auroc = auroc(all);
        report.overlap = overlap(id_scores, ood_scores);
    }
    return report;
}

MetricReport evaluate(const Model& model, const DetectorState& detector,
                      const std::vector<std::uint32_t>& class_labels,
                      const Dataset& data, bool mix_mode, std::size_t threads) {
    return summarize(score_dataset(model, detector, class_labels, data, threads),
                     detector, mix_mode);
}

} // namespace skod
