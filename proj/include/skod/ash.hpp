#ifndef SKOD_ASH_HPP
#define SKOD_ASH_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace skod {

enum class AshStrategy : std::uint8_t { P, B, S, Off };

std::string to_string(AshStrategy s);
AshStrategy ash_strategy_from_string(const std::string& s);

struct AshConfig {
    AshStrategy strategy = AshStrategy::P;
    double prune_pct = 75.0; // in (0, 100)

    void validate() const;
};

struct AshResult {
    std::vector<double> values;
    std::vector<std::uint8_t> mask; // 1 = survivor
    bool degenerate = false;        // no survivors after pruning
};

// Nearest-rank pruning threshold: the value at index floor(p/100 * D) of the
// ascending sort. Entries strictly below the threshold are pruned.
double ash_threshold(const std::vector<double>& f, double prune_pct);

// ASH-P: prune entries below the percentile threshold, keep survivors as-is.
AshResult ash_p(const std::vector<double>& f, double prune_pct);

// ASH-B: prune, then set every survivor to sum(F)/n where the sum is taken
// before pruning and n counts survivors.
AshResult ash_b(const std::vector<double>& f, double prune_pct);

// ASH-S: prune, then scale survivors by exp(s1/s2) with s1 the pre-prune sum
// and s2 the survivor sum.
AshResult ash_s(const std::vector<double>& f, double prune_pct);

AshResult ash_apply(const std::vector<double>& f, const AshConfig& cfg);

} // namespace skod

#endif
