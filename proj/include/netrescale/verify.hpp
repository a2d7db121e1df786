#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "netrescale/arch.hpp"
#include "netrescale/solvers.hpp"

namespace netrescale {

// Result of re-deriving a candidate's claims from scratch. Nothing here
// reuses the shape or cost code of the solvers: window positions are
// counted by sliding, and costs are summed directly per layer.
struct VerificationReport {
    bool scope_equality_holds = false;
    std::int64_t whole_network_param_delta = 0;
    std::int64_t whole_network_flops_delta = 0;
    bool interface_shape_match = false;
    std::vector<std::string> violations;

    bool passed() const { return violations.empty(); }
};

// Throws InvalidGeometry when either network does not propagate.
VerificationReport verify_candidate(const NetworkSpec& original, const SolutionCandidate& candidate);

// Brute-force enumeration of the solution tuples of one approach: every
// combination in the ranges is built and checked directly, and filter counts
// are scanned upward until the scope cost passes the budget. Test oracle
// for the solvers; returns an empty set when the approach does not apply.
std::set<SolutionTuple> oracle_enumerate(const NetworkSpec& net, std::int64_t new_resolution,
                                         const EnumRanges& ranges, Approach approach, BudgetMode mode);

} // namespace netrescale
