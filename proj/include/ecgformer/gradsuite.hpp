#pragma once

// The gradient suite: finite-difference verification of every primitive's
// backward rule plus the full tiny-model loss, in double precision. This is
// the single entry point behind the `gradcheck` subcommand and the gradient
// acceptance gate.

#include <cstdint>
#include <string>
#include <vector>

namespace ecgformer {

struct GradCheckEntry {
    std::string name;
    size_t instances = 0;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct GradSuiteResult {
    std::vector<GradCheckEntry> entries;
    bool all_pass() const {
        for (const auto& e : entries)
            if (!e.pass) return false;
        return !entries.empty();
    }
};

// Runs every check with `instances` random instances each. Primitive checks
// use tolerance 1e-5, end-to-end model checks 1e-4.
GradSuiteResult run_gradient_suite(uint64_t seed = 0, size_t instances = 50);

}  // namespace ecgformer
