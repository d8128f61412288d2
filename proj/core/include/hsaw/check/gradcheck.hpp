#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hsaw::check {

inline constexpr double kGradCheckStep = 1e-3;  // central-difference step
inline constexpr double kGradCheckTol = 1e-4;   // max allowed relative error

struct GradCheckFailure {
    std::string where;  // op/input, shape, flat index, trial
    double analytic = 0.0;
    double fd = 0.0;
    double rel_err = 0.0;
};

struct GradCheckOpStat {
    std::string op;
    int trials = 0;
    std::int64_t elements = 0;  // partial derivatives compared
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    int trials_per_op = 0;
    int cases = 0;
    std::int64_t elements = 0;
    double max_rel_err = 0.0;
    std::string worst;  // location of max_rel_err
    std::vector<GradCheckOpStat> per_op;
    std::vector<GradCheckFailure> failures;

    bool passed() const { return failures.empty(); }
};

// Runs every differentiable op at `trials_per_op` random shapes/seeds and
// compares backward() against central finite differences of the
// double-precision reference forward. Relative error is
// |analytic - fd| / max(1, |analytic|, |fd|).
GradCheckReport run_gradcheck(int trials_per_op = 20, std::uint64_t seed = 17);

// Multi-line human-readable rendering (per-op table plus verdict).
std::string summarize(const GradCheckReport& report);

}  // namespace hsaw::check
