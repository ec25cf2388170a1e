#include "skod/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "skod/errors.hpp"

namespace skod {

namespace {

void split_scores(const std::vector<ScoredSample>& samples,
                  std::vector<double>& id_scores, std::vector<double>& ood_scores) {
    for (const ScoredSample& s : samples) {
        if (!std::isfinite(s.score)) throw ValueError("metrics: non-finite score");
        (s.is_id ? id_scores : ood_scores).push_back(s.score);
    }
    if (id_scores.empty() || ood_scores.empty())
        throw ValueError("metrics: both ID and OOD samples required");
}

// Largest threshold with TPR >= target: the k-th largest ID score where
// k = ceil(target * n_id).
double operating_threshold(std::vector<double> id_scores, double target) {
    std::sort(id_scores.begin(), id_scores.end(), std::greater<>());
    std::size_t k = std::size_t(std::ceil(target * double(id_scores.size())));
    if (k == 0) k = 1;
    if (k > id_scores.size()) k = id_scores.size();
    return id_scores[k - 1];
}

double rate_at(const std::vector<double>& scores, double threshold) {
    std::size_t hits = 0;
    for (double s : scores)
        if (s >= threshold) ++hits;
    return double(hits) / double(scores.size());
}

} // namespace

double fpr_at_tpr(const std::vector<ScoredSample>& samples, double tpr_target) {
    std::vector<double> id_scores, ood_scores;
    split_scores(samples, id_scores, ood_scores);
    double theta = operating_threshold(id_scores, tpr_target);
    return rate_at(ood_scores, theta);
}

double detection_error(const std::vector<ScoredSample>& samples, double tpr_target) {
    // the TPR term is the nominal target at the chosen operating point
    return 0.5 * (1.0 - tpr_target) + 0.5 * fpr_at_tpr(samples, tpr_target);
}

double auroc(const std::vector<ScoredSample>& samples) {
    std::vector<double> id_scores, ood_scores;
    split_scores(samples, id_scores, ood_scores);

    struct Entry {
        double score;
        bool is_id;
    };
    std::vector<Entry> all;
    all.reserve(samples.size());
    for (double s : id_scores) all.push_back({s, true});
    for (double s : ood_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(),
              [](const Entry& a, const Entry& b) { return a.score < b.score; });

    // midranks over tie groups
    double id_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        double midrank = 0.5 * (double(i + 1) + double(j)); // ranks are 1-based
        for (std::size_t k = i; k < j; ++k)
            if (all[k].is_id) id_rank_sum += midrank;
        i = j;
    }
    double n1 = double(id_scores.size());
    double n2 = double(ood_scores.size());
    double u = id_rank_sum - n1 * (n1 + 1.0) / 2.0;
    return u / (n1 * n2);
}

double top1(const std::vector<ScoredSample>& samples) {
    if (samples.empty()) throw ValueError("top1: empty input");
    std::size_t hit = 0;
    for (const ScoredSample& s : samples)
        if (s.predicted == s.truth) ++hit;
    return 100.0 * double(hit) / double(samples.size());
}

double overlap(const std::vector<double>& id_scores,
               const std::vector<double>& ood_scores, std::size_t bins) {
    if (id_scores.empty() || ood_scores.empty())
        throw ValueError("overlap: both score lists must be non-empty");
    if (bins < 2) throw ValueError("overlap: need at least 2 bins");
    double lo = std::min(*std::min_element(id_scores.begin(), id_scores.end()),
                         *std::min_element(ood_scores.begin(), ood_scores.end()));
    double hi = std::max(*std::max_element(id_scores.begin(), id_scores.end()),
                         *std::max_element(ood_scores.begin(), ood_scores.end()));
    if (lo == hi) return 1.0; // identical point masses
    double width = (hi - lo) / double(bins);
    auto histogram = [&](const std::vector<double>& scores) {
        std::vector<double> h(bins, 0.0);
        for (double s : scores) {
            std::size_t b = std::size_t((s - lo) / width);
            if (b >= bins) b = bins - 1; // the top edge belongs to the last bin
            h[b] += 1.0;
        }
        for (double& x : h) x /= double(scores.size());
        return h;
    };
    std::vector<double> hid = histogram(id_scores);
    std::vector<double> hood = histogram(ood_scores);
    double area = 0.0;
    for (std::size_t b = 0; b < bins; ++b) area += std::min(hid[b], hood[b]);
    return area;
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v)
            j[key] = *v;
        else
            j[key] = nullptr;
    };
    put("error", error);
    put("fpr95", fpr95);
    put("auroc", auroc);
    put("top1", top1);
    put("overlap", overlap);
    j["n_id"] = n_id;
    j["n_ood"] = n_ood;
    j["tau"] = tau;
    return j.dump(2);
}

} // namespace skod
