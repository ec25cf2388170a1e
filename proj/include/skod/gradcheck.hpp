#ifndef SKOD_GRADCHECK_HPP
#define SKOD_GRADCHECK_HPP

#include <functional>

#include "skod/autodiff.hpp"

namespace skod {

struct GradCheckResult {
    bool pass = false;
    double max_rel_err = 0.0;
};

// Compares reverse-mode gradients against central finite differences.
//
// `build` must record a fresh graph on the given tape and return {root, param}
// where root is scalar-valued and param is the leaf whose storage is
// `param_storage` (re-read on every call, so perturbations take effect).
GradCheckResult check_gradient(
    const std::function<std::pair<Var, Var>(Tape&)>& build,
    Tensor& param_storage, double tolerance, double step = 1e-5);

} // namespace skod

#endif
