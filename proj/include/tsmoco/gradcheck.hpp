#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tsmoco {

// Finite-difference validation of the full combined-loss graph (teacher,
// student, masking, reconstruction head) at toy dimensions, reported per
// parameter group.
struct GradCheckReport {
    struct Group {
        std::string name;
        double max_rel_err;
    };
    std::vector<Group> groups;
    double tolerance = 1e-4;

    bool passed() const;
    std::vector<std::string> failing() const;
};

// h is the central-difference step. When inject_fault is set, one backward
// rule is deliberately wrong; the report must then fail (used to prove the
// check can catch a bad rule).
GradCheckReport full_model_gradcheck(double h, std::uint64_t seed, double tolerance,
                                     bool inject_fault = false);

}  // namespace tsmoco
