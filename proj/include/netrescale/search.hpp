#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "netrescale/arch.hpp"
#include "netrescale/solvers.hpp"

namespace netrescale {

enum class SlackKind {
    absolute,  // keep iff |delta| <= slack
    positive,  // keep iff 0 < delta < slack
};

struct SearchConfig {
    std::vector<Approach> approaches{all_approaches, all_approaches + 4};
    BudgetMode budget_mode = BudgetMode::params;
    // Explicit N' values; when unset every integer in (N, 2N] is tried.
    std::optional<std::vector<std::int64_t>> resolutions;
    EnumRanges ranges;
    std::int64_t slack = 0;
    SlackKind slack_kind = SlackKind::absolute;
    std::int64_t sample_count = 4;
    std::uint64_t rng_seed = 0;
    // Worker threads for the sweep; 0 picks the hardware concurrency.
    unsigned threads = 0;
};

std::vector<std::int64_t> resolution_set(const NetworkSpec& net, const SearchConfig& config);

// Whether a whole-network delta of the budgeted quantity is kept.
bool passes_slack(std::int64_t delta, std::int64_t slack, SlackKind kind);
std::int64_t budget_delta(const SolutionCandidate& c);

struct SweepRow {
    std::int64_t resolution = 0;
    Approach approach = Approach::dilated_conv1;
    std::size_t solved = 0;    // solver output size
    std::size_t retained = 0;  // after the slack filter
};

struct SweepResult {
    // N' -> retained candidates, ordered by (approach, tuple).
    std::map<std::int64_t, std::vector<SolutionCandidate>> by_resolution;
    std::vector<SweepRow> rows;

    std::size_t total_retained() const;
    std::vector<SolutionCandidate> flattened() const;
};

// Runs every enabled approach at every resolution and keeps the candidates
// passing the slack filter. A StructureMismatch from a solver aborts the
// sweep; candidates that fail to propagate are dropped.
SweepResult sweep(const NetworkSpec& net, const SearchConfig& config);

// Seeded draw of min(k, size) distinct candidates. Uses mt19937_64 with an
// explicit Fisher-Yates so the selection is identical across standard
// libraries. Throws EmptyCandidateList.
std::vector<SolutionCandidate> sample_candidates(const std::vector<SolutionCandidate>& list, std::size_t k,
                                                 std::uint64_t seed);

// Seeded permutation of 0..n-1 (same generator as sample_candidates).
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

enum class DatasetProfile { mnist, fmnist, cifar10 };

std::optional<DatasetProfile> dataset_profile_from_string(std::string_view s);
std::string_view to_string(DatasetProfile p);

struct OriginalGridOptions {
    // Leave out the pooling layers after each conv.
    bool drop_pooling = false;
    std::int64_t hidden_units = 100;
    std::int64_t classes = 10;
};

// Every LeNet-style net (conv, pool, conv, pool, flatten, dense, dense) of
// the profile's grid that propagates: image size x conv1 kernel x conv2
// kernel x pool1 kernel x pool2 kernel. Pools use stride = kernel.
std::vector<NetworkSpec> original_network_grid(DatasetProfile profile, const OriginalGridOptions& options = {});

// count nets drawn from the grid without replacement (the grid is cycled
// through fresh permutations when count exceeds its size).
std::vector<NetworkSpec> sample_original_networks(DatasetProfile profile, std::size_t count, std::uint64_t seed,
                                                  const OriginalGridOptions& options = {});

} // namespace netrescale
