#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "netrescale/errors.hpp"
#include "netrescale/search.hpp"
#include "netrescale/solvers.hpp"
#include "netrescale/verify.hpp"
#include "nets.hpp"

using namespace netrescale;

namespace {

bool any_violation_mentions(const VerificationReport& r, std::string_view text) {
    return std::any_of(r.violations.begin(), r.violations.end(),
                       [&](const std::string& v) { return v.find(text) != std::string::npos; });
}

// Writes tuple field i into the modified network, keeping tuple and net
// consistent so only the equalities can catch the change.
SolutionCandidate with_field(SolutionCandidate c, std::size_t i, std::int64_t value) {
    c.tuple[i] = value;
    auto& net = c.modified_net;
    auto& conv1 = std::get<ConvLayer>(net.layers[0]);
    switch (c.approach) {
    case Approach::global_pool_head: {
        const auto b = *boundary_index(net);
        std::get<DenseLayer>(net.layers[b + 1]).out_features = value;
        break;
    }
    case Approach::dilated_conv1: {
        std::int64_t* f[] = {&conv1.padding, &conv1.stride, &conv1.dilation};
        *f[i] = value;
        break;
    }
    case Approach::pooled_conv1: {
        auto& pool = std::get<PoolLayer>(net.layers[1]);
        std::int64_t* f[] = {&conv1.out_channels, &conv1.kernel, &conv1.padding, &conv1.stride,
                             &pool.kernel,        &pool.padding, &pool.stride};
        *f[i] = value;
        break;
    }
    case Approach::first_two_convs: {
        std::size_t j = 1;
        while (!std::holds_alternative<ConvLayer>(net.layers[j])) ++j;
        auto& conv2 = std::get<ConvLayer>(net.layers[j]);
        std::int64_t* f[] = {&conv1.out_channels, &conv1.kernel, &conv1.padding, &conv1.stride,
                             &conv2.kernel,       &conv2.padding, &conv2.stride};
        *f[i] = value;
        break;
    }
    }
    return c;
}

// Mutations outside the enumeration ranges can be valid rescalings the
// ranged oracle never lists, so the property only looks inside them.
bool in_ranges(std::string_view field, std::int64_t v, const EnumRanges& r) {
    const auto inside = [v](const IntRange& range) { return v >= range.lo && v <= range.hi; };
    if (field.find("padding") != std::string_view::npos) return inside(r.padding);
    if (field.find("stride") != std::string_view::npos) return inside(r.stride);
    if (field.find("dilation") != std::string_view::npos) return inside(r.dilation);
    if (field.find("kernel") != std::string_view::npos) return inside(r.kernel);
    return true;
}

} // namespace

TEST_CASE("approach 2 candidates verify with zero deltas", "[verify]") {
    const auto net = testing::mnist_lenet();
    const auto list = solve_approach2(net, 56, EnumRanges{});
    REQUIRE_FALSE(list.empty());
    for (const auto& c : list) {
        const auto r = verify_candidate(net, c);
        CHECK(r.passed());
        CHECK(r.scope_equality_holds);
        CHECK(r.interface_shape_match);
        CHECK(r.whole_network_param_delta == 0);
        CHECK(r.whole_network_flops_delta == 0);
    }
}

TEST_CASE("approach 4 params instance verifies", "[verify]") {
    EnumRanges ranges;
    ranges.kernel = {1, 8};
    const auto net = testing::two_conv_instance();
    const auto list = solve_approach4(net, 16, ranges, BudgetMode::params);
    const auto it = std::find_if(list.begin(), list.end(),
                                 [](const auto& c) { return c.tuple == SolutionTuple{4, 8, 1, 2, 1, 0, 1}; });
    REQUIRE(it != list.end());
    const auto r = verify_candidate(net, *it);
    CHECK(r.passed());
    CHECK(r.scope_equality_holds);
    // Nothing past conv2 changes, so the whole-network param delta is the scope delta.
    CHECK(r.whole_network_param_delta == 0);
}

TEST_CASE("a hand-corrupted conv2 kernel fails the first-two-convs equality", "[verify]") {
    EnumRanges ranges;
    ranges.kernel = {1, 8};
    const auto net = testing::two_conv_instance();
    const auto list = solve_approach4(net, 16, ranges, BudgetMode::params);
    auto it = std::find_if(list.begin(), list.end(),
                           [](const auto& c) { return c.tuple == SolutionTuple{4, 8, 1, 2, 1, 0, 1}; });
    REQUIRE(it != list.end());
    SolutionCandidate bad = *it;
    std::get<ConvLayer>(bad.modified_net.layers[1]).kernel = 2;
    const auto r = verify_candidate(net, bad);
    CHECK_FALSE(r.passed());
    CHECK_FALSE(r.scope_equality_holds);
    CHECK(any_violation_mentions(r, "first_two_convs params equality"));
}

TEST_CASE("stale stored deltas are reported", "[verify]") {
    const auto net = testing::mnist_lenet();
    auto c = solve_approach2(net, 56, EnumRanges{}).front();
    c.deltas.flops = 1;
    const auto r = verify_candidate(net, c);
    CHECK(any_violation_mentions(r, "stored flops delta"));
}

TEST_CASE("mismatched tuple is reported", "[verify]") {
    const auto net = testing::mnist_lenet();
    auto c = solve_approach2(net, 56, EnumRanges{}).front();
    c.tuple[0] += 1;
    CHECK(any_violation_mentions(verify_candidate(net, c), "does not describe conv1"));
}

TEST_CASE("verification of an unpropagatable network throws", "[verify]") {
    const auto net = testing::mnist_lenet();
    auto c = solve_approach2(net, 56, EnumRanges{}).front();
    std::get<ConvLayer>(c.modified_net.layers[0]).kernel = 100;
    CHECK_THROWS_AS(verify_candidate(net, c), InvalidGeometry);
}

TEST_CASE("single-field perturbations fail unless they land on another solution", "[verify][property]") {
    EnumRanges ranges;
    ranges.kernel = {1, 8};
    ranges.dilation = {1, 4};
    struct Case {
        NetworkSpec net;
        std::int64_t n;
    };
    const std::vector<Case> cases{{testing::mnist_plain(14, 3), 21},
                                  {testing::mnist_lenet(), 40},
                                  {testing::pooled_head_net(2, 10, 100, 10), 4},
                                  {testing::two_conv_instance(), 16}};
    std::size_t mutated = 0;
    for (const auto& [net, n] : cases) {
        for (Approach a : all_approaches) {
            for (auto mode : {BudgetMode::params, BudgetMode::flops}) {
                std::vector<SolutionCandidate> list;
                try {
                    list = solve(net, a, n, ranges, mode);
                } catch (const StructureMismatch&) {
                    continue;
                }
                const auto solutions = oracle_enumerate(net, n, ranges, a, mode);
                for (std::size_t ci = 0; ci < std::min<std::size_t>(list.size(), 5); ++ci) {
                    const auto& c = list[ci];
                    for (std::size_t i = 0; i < c.tuple.size(); ++i) {
                        for (std::int64_t step : {-1, 1}) {
                            auto m = with_field(c, i, c.tuple[i] + step);
                            if (m.tuple[i] < 0 || !in_ranges(tuple_field_names(a)[i], m.tuple[i], ranges)) continue;
                            // Filter counts and kernels enter every budget equality.
                            const bool budget_field = tuple_field_names(a)[i].find("filters") != std::string_view::npos ||
                                                      tuple_field_names(a)[i] == "conv1_kernel" ||
                                                      tuple_field_names(a)[i] == "conv2_kernel" ||
                                                      tuple_field_names(a)[i] == "fc1_out";
                            bool failed = false;
                            try {
                                failed = !verify_candidate(net, m).passed();
                            } catch (const InvalidGeometry&) {
                                failed = true;
                            }
                            ++mutated;
                            INFO(net.name << " N'=" << n << " approach " << approach_number(a) << " "
                                          << to_string(mode) << " field " << tuple_field_names(a)[i] << " -> "
                                          << m.tuple[i]);
                            if (budget_field && a != Approach::dilated_conv1) {
                                CHECK(failed);
                            } else {
                                // Geometry fields may land on another valid tuple; the
                                // stored deltas were computed for the unmutated net.
                                const bool other_solution = solutions.count(m.tuple) && m.tuple != c.tuple;
                                CHECK((failed || other_solution));
                            }
                        }
                    }
                }
            }
        }
    }
    CHECK(mutated > 100);
}

TEST_CASE("oracle with zero-width ranges", "[verify][oracle]") {
    const auto net = testing::mnist_lenet();
    EnumRanges single{{5, 5}, {2, 2}, {0, 0}, {2, 2}};
    CHECK(oracle_enumerate(net, 56, single, Approach::dilated_conv1, BudgetMode::params) ==
          std::set<SolutionTuple>{{0, 2, 2}});
    EnumRanges none{{5, 5}, {1, 1}, {0, 0}, {2, 2}};
    CHECK(oracle_enumerate(net, 56, none, Approach::dilated_conv1, BudgetMode::params).empty());
    EnumRanges empty;
    empty.stride = {3, 2};
    CHECK(oracle_enumerate(net, 56, empty, Approach::first_two_convs, BudgetMode::params).empty());
}

TEST_CASE("oracle returns nothing where an approach does not apply", "[verify][oracle]") {
    NetworkSpec net{"one", {8, 1}, {ConvLayer{4, 3}, FlattenLayer{}, DenseLayer{10}}};
    CHECK(oracle_enumerate(net, 16, EnumRanges{}, Approach::first_two_convs, BudgetMode::params).empty());
    CHECK(oracle_enumerate(net, 16, EnumRanges{}, Approach::global_pool_head, BudgetMode::params).empty());
}

TEST_CASE("solver candidates verify across sampled originals", "[verify][property]") {
    const auto originals = sample_original_networks(DatasetProfile::mnist, 12, 3);
    for (const auto& net : originals) {
        for (Approach a : all_approaches) {
            for (auto mode : {BudgetMode::params, BudgetMode::flops}) {
                const std::int64_t n = 2 * net.input.spatial;
                for (const auto& c : solve(net, a, n, EnumRanges{}, mode)) {
                    const auto r = verify_candidate(net, c);
                    INFO(net.name << " approach " << approach_number(a));
                    CHECK(r.passed());
                }
            }
        }
    }
}
