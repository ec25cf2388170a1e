#include "skod/gradcheck.hpp"

#include <cmath>

namespace skod {

GradCheckResult check_gradient(
    const std::function<std::pair<Var, Var>(Tape&)>& build,
    Tensor& param_storage, double tolerance, double step) {
    Tensor analytic;
    {
        Tape tape;
        auto [root, param] = build(tape);
        if (root.value().size() != 1)
            throw ContractError("check_gradient: root must be scalar");
        tape.backward(root);
        analytic = param.grad();
    }
    if (analytic.size() != param_storage.size())
        throw ContractError("check_gradient: parameter does not match its leaf");

    auto eval = [&]() {
        Tape tape;
        auto [root, param] = build(tape);
        (void)param;
        return root.value()[0];
    };

    GradCheckResult result;
    result.pass = true;
    for (std::size_t i = 0; i < param_storage.size(); ++i) {
        double saved = param_storage[i];
        param_storage[i] = saved + step;
        double up = eval();
        param_storage[i] = saved - step;
        double down = eval();
        param_storage[i] = saved;
        double numeric = (up - down) / (2.0 * step);
        double denom = std::max(1e-4, std::abs(analytic[i]) + std::abs(numeric));
        double rel = std::abs(analytic[i] - numeric) / denom;
        result.max_rel_err = std::max(result.max_rel_err, rel);
    }
    result.pass = result.max_rel_err <= tolerance;
    return result;
}

} // namespace skod
