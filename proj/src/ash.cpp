#include "skod/ash.hpp"

#include <algorithm>
#include <cmath>

#include "skod/errors.hpp"

namespace skod {

std::string to_string(AshStrategy s) {
    switch (s) {
        case AshStrategy::P: return "p";
        case AshStrategy::B: return "b";
        case AshStrategy::S: return "s";
        case AshStrategy::Off: return "off";
    }
    return "?";
}

AshStrategy ash_strategy_from_string(const std::string& s) {
    if (s == "p" || s == "P") return AshStrategy::P;
    if (s == "b" || s == "B") return AshStrategy::B;
    if (s == "s" || s == "S") return AshStrategy::S;
    if (s == "off") return AshStrategy::Off;
    throw ValueError("unknown ASH strategy: " + s);
}

void AshConfig::validate() const {
    if (strategy != AshStrategy::Off && (prune_pct <= 0.0 || prune_pct >= 100.0))
        throw ValueError("AshConfig: pruning percentage must lie in (0, 100)");
}

double ash_threshold(const std::vector<double>& f, double prune_pct) {
    if (f.empty()) throw ValueError("ash: empty feature vector");
    if (prune_pct <= 0.0 || prune_pct >= 100.0)
        throw ValueError("ash: pruning percentage must lie in (0, 100)");
    std::vector<double> sorted(f);
    std::sort(sorted.begin(), sorted.end());
    std::size_t idx = std::size_t(std::floor(prune_pct / 100.0 * double(f.size())));
    if (idx >= f.size()) idx = f.size() - 1;
    return sorted[idx];
}

static AshResult prune(const std::vector<double>& f, double prune_pct) {
    double t = ash_threshold(f, prune_pct);
    AshResult r;
    r.values = f;
    r.mask.assign(f.size(), 0);
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f[i] < t) {
            r.values[i] = 0.0;
        } else {
            r.mask[i] = 1;
        }
    }
    return r;
}

AshResult ash_p(const std::vector<double>& f, double prune_pct) {
    return prune(f, prune_pct);
}

AshResult ash_b(const std::vector<double>& f, double prune_pct) {
    double s = 0.0;
    for (double x : f) s += x;
    AshResult r = prune(f, prune_pct);
    std::size_t n = 0;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (r.mask[i] && r.values[i] != 0.0) ++n;
    if (n == 0) {
        std::fill(r.values.begin(), r.values.end(), 0.0);
        r.degenerate = true;
        return r;
    }
    double fill_value = s / double(n);
    for (std::size_t i = 0; i < f.size(); ++i)
        r.values[i] = (r.mask[i] && f[i] != 0.0) ? fill_value : 0.0;
    return r;
}

AshResult ash_s(const std::vector<double>& f, double prune_pct) {
    double s1 = 0.0;
    for (double x : f) s1 += x;
    AshResult r = prune(f, prune_pct);
    double s2 = 0.0;
    for (double x : r.values) s2 += x;
    if (s2 == 0.0) {
        std::fill(r.values.begin(), r.values.end(), 0.0);
        r.degenerate = true;
        return r;
    }
    double factor = std::exp(s1 / s2);
    for (double& x : r.values) x *= factor;
    return r;
}

AshResult ash_apply(const std::vector<double>& f, const AshConfig& cfg) {
    switch (cfg.strategy) {
        case AshStrategy::P: return ash_p(f, cfg.prune_pct);
        case AshStrategy::B: return ash_b(f, cfg.prune_pct);
        case AshStrategy::S: return ash_s(f, cfg.prune_pct);
        case AshStrategy::Off: break;
    }
    AshResult r;
    r.values = f;
    r.mask.assign(f.size(), 1);
    return r;
}

} // namespace skod
