#ifndef SKOD_NUMERICS_HPP
#define SKOD_NUMERICS_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace skod {

// epsilon * log(sum_i exp(v_i / epsilon)), stabilized by max subtraction.
// Satisfies logsumexp(v + c) = logsumexp(v) + c.
double logsumexp(std::span<const double> v, double epsilon = 1.0);

std::vector<double> softmax(std::span<const double> logits);

// -log(softmax(logits)[target])
double softmax_cross_entropy(std::span<const double> logits, std::size_t target);

} // namespace skod

#endif
