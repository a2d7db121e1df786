#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "netrescale/errors.hpp"
#include "netrescale/search.hpp"
#include "netrescale/verify.hpp"
#include "nets.hpp"

using namespace netrescale;

namespace {

std::vector<SolutionCandidate> numbered(std::size_t n) {
    std::vector<SolutionCandidate> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i].tuple = {static_cast<std::int64_t>(i)};
    return out;
}

std::vector<std::int64_t> ids(const std::vector<SolutionCandidate>& list) {
    std::vector<std::int64_t> out;
    for (const auto& c : list) out.push_back(c.tuple.at(0));
    return out;
}

} // namespace

TEST_CASE("default resolution set is (N, 2N]", "[search]") {
    const auto res = resolution_set(testing::mnist_lenet(16), SearchConfig{});
    REQUIRE(res.size() == 16);
    CHECK(res.front() == 17);
    CHECK(res.back() == 32);
}

TEST_CASE("slack predicates", "[search]") {
    CHECK(passes_slack(0, 0, SlackKind::absolute));
    CHECK_FALSE(passes_slack(1, 0, SlackKind::absolute));
    CHECK(passes_slack(-5, 5, SlackKind::absolute));
    CHECK_FALSE(passes_slack(0, 5, SlackKind::positive));
    CHECK(passes_slack(4, 5, SlackKind::positive));
    CHECK_FALSE(passes_slack(5, 5, SlackKind::positive));
    CHECK_FALSE(passes_slack(-1, 5, SlackKind::positive));
}

TEST_CASE("approach 2 sweep with zero slack keeps every solution", "[search]") {
    const auto net = testing::mnist_lenet();
    SearchConfig cfg;
    cfg.approaches = {Approach::dilated_conv1};
    const auto result = sweep(net, cfg);
    std::size_t solved = 0;
    for (const auto& row : result.rows) {
        CHECK(row.solved == row.retained);
        solved += row.solved;
    }
    CHECK(result.total_retained() == solved);
    CHECK(solved > 0);
    for (const auto& c : result.flattened()) CHECK(c.deltas == CostDelta{0, 0});
}

TEST_CASE("approach 3 whole-network filter matches an independent re-costing", "[search]") {
    const auto net = testing::mnist_lenet(16);
    SearchConfig all;
    all.approaches = {Approach::pooled_conv1};
    all.slack = INT64_MAX;
    SearchConfig exact = all;
    exact.slack = 0;

    const auto everything = sweep(net, all).flattened();
    const auto kept = sweep(net, exact).flattened();
    std::set<std::pair<std::int64_t, SolutionTuple>> expected;
    for (const auto& c : everything) {
        const auto r = verify_candidate(net, c);
        if (r.whole_network_param_delta == 0) expected.insert({c.new_resolution, c.tuple});
    }
    std::set<std::pair<std::int64_t, SolutionTuple>> got;
    for (const auto& c : kept) got.insert({c.new_resolution, c.tuple});
    CHECK(got == expected);
    CHECK(kept.size() <= everything.size());
}

TEST_CASE("retained candidates satisfy the positive slack predicate", "[search]") {
    const auto net = testing::mnist_lenet(16);
    SearchConfig cfg;
    cfg.approaches = {Approach::pooled_conv1, Approach::first_two_convs};
    cfg.budget_mode = BudgetMode::flops;
    cfg.slack = 5000;
    cfg.slack_kind = SlackKind::positive;
    for (const auto& c : sweep(net, cfg).flattened()) {
        const auto r = verify_candidate(net, c);
        CHECK(r.whole_network_flops_delta > 0);
        CHECK(r.whole_network_flops_delta < 5000);
    }
}

TEST_CASE("empty resolution set and empty approach set give empty sweeps", "[search]") {
    const auto net = testing::mnist_lenet();
    SearchConfig cfg;
    cfg.resolutions = std::vector<std::int64_t>{};
    auto r = sweep(net, cfg);
    CHECK(r.rows.empty());
    CHECK(r.total_retained() == 0);

    SearchConfig none;
    none.approaches.clear();
    r = sweep(net, none);
    CHECK(r.rows.empty());
}

TEST_CASE("sweep ordering does not depend on the thread count", "[search]") {
    const auto net = testing::mnist_plain(14, 3);
    SearchConfig one;
    one.threads = 1;
    SearchConfig many = one;
    many.threads = 4;
    const auto a = sweep(net, one);
    const auto b = sweep(net, many);
    CHECK(a.flattened() == b.flattened());
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].retained == b.rows[i].retained);
}

TEST_CASE("structure mismatches abort the sweep", "[search]") {
    NetworkSpec net{"one", {8, 1}, {ConvLayer{4, 3}, FlattenLayer{}, DenseLayer{10}, DenseLayer{10}}};
    SearchConfig cfg;
    cfg.approaches = {Approach::first_two_convs};
    CHECK_THROWS_AS(sweep(net, cfg), StructureMismatch);
}

TEST_CASE("sampling is seeded and clamps to the list", "[search][sampling]") {
    const auto list = numbered(10);
    const auto a = sample_candidates(list, 4, 42);
    CHECK(a.size() == 4);
    CHECK(ids(a) == ids(sample_candidates(list, 4, 42)));
    const auto picked = ids(a);
    CHECK(std::set<std::int64_t>(picked.begin(), picked.end()).size() == 4);

    CHECK(sample_candidates(numbered(3), 4, 1).size() == 3);
    CHECK_THROWS_AS(sample_candidates({}, 4, 1), EmptyCandidateList);
}

TEST_CASE("fixed-seed sampling regression", "[search][sampling]") {
    // Recorded from the first run of this implementation.
    const auto list = numbered(10);
    const auto s1 = ids(sample_candidates(list, 4, 1));
    const auto s2 = ids(sample_candidates(list, 4, 2));
    CHECK(s1 == std::vector<std::int64_t>{1, 7, 3, 9});
    CHECK(s2 == std::vector<std::int64_t>{9, 4, 6, 1});
    CHECK(s1 != s2);
}

TEST_CASE("seeded permutations are permutations", "[search][sampling]") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto p = seeded_permutation(17, seed);
        std::sort(p.begin(), p.end());
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == i);
    }
}

TEST_CASE("original network grids", "[search][originals]") {
    const auto cifar = sample_original_networks(DatasetProfile::cifar10, 10, 5);
    REQUIRE(cifar.size() == 10);
    for (const auto& net : cifar) {
        CHECK(validate(net).ok());
        CHECK(net.input.channels == 3);
        CHECK(std::get<ConvLayer>(net.layers[0]).out_channels == 30);
    }
    CHECK(sample_original_networks(DatasetProfile::cifar10, 10, 5) == cifar);
    CHECK(sample_original_networks(DatasetProfile::cifar10, 10, 6) != cifar);

    const auto mnist = original_network_grid(DatasetProfile::mnist);
    for (const auto& net : mnist) {
        CHECK(std::get<ConvLayer>(net.layers[0]).out_channels == 10);
        CHECK(net.layers.size() >= 5);
    }
    // Exactly the geometrically invalid grid points are discarded: at 7x7,
    // kernels 5 and 5 with pools 2 and 2 cannot propagate.
    const auto has = [&](const std::string& name) {
        return std::any_of(mnist.begin(), mnist.end(), [&](const auto& n) { return n.name == name; });
    };
    CHECK_FALSE(has("mnist_n7_k5-5_p2-2"));
    CHECK(has("mnist_n28_k5-5_p2-2"));
    std::size_t expected = 0;
    for (std::int64_t image : {7, 14, 28})
        for (std::int64_t k1 : {2, 3, 5})
            for (std::int64_t k2 : {2, 3, 5})
                for (std::int64_t q1 : {1, 2})
                    for (std::int64_t q2 : {1, 2}) {
                        const auto m1 = window_output_size(image, k1, 1, 0);
                        const auto p1 = m1 ? window_output_size(*m1, q1, q1, 0) : std::nullopt;
                        const auto m2 = p1 ? window_output_size(*p1, k2, 1, 0) : std::nullopt;
                        const auto p2 = m2 ? window_output_size(*m2, q2, q2, 0) : std::nullopt;
                        if (p2) ++expected;
                    }
    CHECK(mnist.size() == expected);
}

TEST_CASE("original grid without pooling", "[search][originals]") {
    OriginalGridOptions opts;
    opts.drop_pooling = true;
    const auto grid = original_network_grid(DatasetProfile::fmnist, opts);
    // 27 grid points minus 7x7 with kernels 5 and 5.
    CHECK(grid.size() == 26);
    for (const auto& net : grid) {
        CHECK(std::holds_alternative<ConvLayer>(net.layers[1]));
    }
    const auto many = sample_original_networks(DatasetProfile::fmnist, 60, 9, opts);
    CHECK(many.size() == 60);
}
