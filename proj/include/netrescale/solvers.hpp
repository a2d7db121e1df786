#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "netrescale/arch.hpp"

namespace netrescale {

// The four ways of rebuilding a network for a larger input while holding
// its parameter count or FLOPS fixed. Numbered 1-4 on the command line.
enum class Approach {
    global_pool_head = 1,  // average pool the conv stack, resize fc1 for FLOPS
    dilated_conv1 = 2,     // dilate conv1, re-solve its stride/padding
    pooled_conv1 = 3,      // bigger conv1 kernel, fewer filters, new pool after it
    first_two_convs = 4,   // bigger conv1 kernel, rebalance conv1/conv2
};

enum class BudgetMode { params, flops };

// Region of the network over which a solver states its equality.
enum class Scope { conv1, conv1_pool, first_two_convs, fc_head };

inline constexpr Approach all_approaches[] = {Approach::global_pool_head, Approach::dilated_conv1,
                                              Approach::pooled_conv1, Approach::first_two_convs};

int approach_number(Approach a);
std::optional<Approach> approach_from_number(int n);
std::string_view approach_label(Approach a);  // "I" .. "IV"
std::optional<Approach> approach_from_label(std::string_view s);
std::string_view to_string(BudgetMode m);
std::optional<BudgetMode> budget_mode_from_string(std::string_view s);
std::string_view to_string(Scope s);
std::optional<Scope> scope_from_string(std::string_view s);
Scope scope_of(Approach a);

struct IntRange {
    std::int64_t lo = 0;
    std::int64_t hi = -1;

    bool empty() const { return hi < lo; }
    friend bool operator==(const IntRange&, const IntRange&) = default;
};

// Search ranges for the free integer variables. Pooling kernels inserted by
// approach 3 draw from the same kernel range as convolutions.
struct EnumRanges {
    IntRange kernel{3, 8};
    IntRange stride{1, 5};
    IntRange padding{0, 5};
    IntRange dilation{2, 4};

    friend bool operator==(const EnumRanges&, const EnumRanges&) = default;
};

// Empty string when the ranges respect the type minimums.
std::string check_ranges(const EnumRanges& r);

using SolutionTuple = std::vector<std::int64_t>;

// Field names of the solution tuple, in lexicographic sort order:
//   1: (fc1_out)
//   2: (conv1_padding, conv1_stride, conv1_dilation)
//   3: (conv1_filters, conv1_kernel, conv1_padding, conv1_stride,
//       pool_kernel, pool_padding, pool_stride)
//   4: (conv1_filters, conv1_kernel, conv1_padding, conv1_stride,
//       conv2_kernel, conv2_padding, conv2_stride)
std::span<const std::string_view> tuple_field_names(Approach a);

struct CostDelta {
    std::int64_t params = 0;
    std::int64_t flops = 0;

    friend bool operator==(const CostDelta&, const CostDelta&) = default;
};

struct SolutionCandidate {
    Approach approach = Approach::dilated_conv1;
    BudgetMode budget_mode = BudgetMode::params;
    std::int64_t new_resolution = 0;
    SolutionTuple tuple;
    Scope scope = Scope::conv1;
    NetworkSpec modified_net;
    // Whole-network totals of modified_net minus those of the baseline.
    CostDelta deltas;

    friend bool operator==(const SolutionCandidate&, const SolutionCandidate&) = default;
};

// The network the candidates are compared against. Identical to the input
// except for approach 1, whose baseline has its boundary replaced by a
// global average pool. Throws StructureMismatch when approach 1 does not
// apply.
NetworkSpec baseline_for(const NetworkSpec& net, Approach approach);

// Every solver returns its complete solution set within the ranges, sorted
// by tuple. An empty result means no solution exists. Structural
// preconditions that do not hold throw StructureMismatch.
std::vector<SolutionCandidate> solve_approach1(const NetworkSpec& net, std::int64_t new_resolution,
                                               BudgetMode mode);
// Approach 2 preserves both budgets; mode is only recorded on the candidates.
std::vector<SolutionCandidate> solve_approach2(const NetworkSpec& net, std::int64_t new_resolution,
                                               const EnumRanges& ranges, BudgetMode mode = BudgetMode::params);
std::vector<SolutionCandidate> solve_approach3(const NetworkSpec& net, std::int64_t new_resolution,
                                               const EnumRanges& ranges, BudgetMode mode);
std::vector<SolutionCandidate> solve_approach4(const NetworkSpec& net, std::int64_t new_resolution,
                                               const EnumRanges& ranges, BudgetMode mode);

std::vector<SolutionCandidate> solve(const NetworkSpec& net, Approach approach, std::int64_t new_resolution,
                                     const EnumRanges& ranges, BudgetMode mode);

} // namespace netrescale
