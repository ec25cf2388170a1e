#ifndef SKOD_METRICS_HPP
#define SKOD_METRICS_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace skod {

struct ScoredSample {
    double score = 0.0; // -E, higher means more ID-like
    bool is_id = false;
    std::size_t predicted = 0;
    std::size_t truth = 0;
};

// FPR at the operating point where ID (positive-class) TPR reaches the
// target: the largest threshold theta with TPR(theta) >= target, where a
// sample is positive when score >= theta.
double fpr_at_tpr(const std::vector<ScoredSample>& samples, double tpr_target = 0.95);

// 0.5*(1 - TPR) + 0.5*FPR at the fpr_at_tpr operating point.
double detection_error(const std::vector<ScoredSample>& samples,
                       double tpr_target = 0.95);

// Mann-Whitney statistic P(ID > OOD) + 0.5 P(tie), by rank summation.
double auroc(const std::vector<ScoredSample>& samples);

// 100 * correct / N over the given predictions.
double top1(const std::vector<ScoredSample>& samples);

// Histogram-intersection area of the two score distributions over a shared
// equal-width binning of the joint range.
double overlap(const std::vector<double>& id_scores,
               const std::vector<double>& ood_scores, std::size_t bins = 50);

struct MetricReport {
    std::optional<double> error;
    std::optional<double> fpr95;
    std::optional<double> auroc;
    std::optional<double> top1;
    std::optional<double> overlap;
    std::size_t n_id = 0;
    std::size_t n_ood = 0;
    double tau = 0.0;

    std::string to_json() const;
};

} // namespace skod

#endif
