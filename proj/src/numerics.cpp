#include "skod/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "skod/errors.hpp"

namespace skod {

double logsumexp(std::span<const double> v, double epsilon) {
    if (v.empty()) throw ValueError("logsumexp: empty input");
    if (epsilon <= 0.0) throw ValueError("logsumexp: epsilon must be positive");
    double m = v[0];
    for (double x : v) {
        if (!std::isfinite(x)) throw ValueError("logsumexp: non-finite input");
        m = std::max(m, x);
    }
    double s = 0.0;
    for (double x : v) s += std::exp((x - m) / epsilon);
    return m + epsilon * std::log(s);
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw ValueError("softmax: empty input");
    double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        s += out[i];
    }
    for (double& x : out) x /= s;
    return out;
}

double softmax_cross_entropy(std::span<const double> logits, std::size_t target) {
    if (target >= logits.size())
        throw ValueError("softmax_cross_entropy: target index out of range");
    // -log softmax[target] = logsumexp(logits) - logits[target]
    return logsumexp(logits, 1.0) - logits[target];
}

} // namespace skod
