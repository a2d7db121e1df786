#include "netrescale/search.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <sstream>
#include <thread>

#include "netrescale/errors.hpp"

namespace netrescale {

std::vector<std::int64_t> resolution_set(const NetworkSpec& net, const SearchConfig& config) {
    if (config.resolutions) return *config.resolutions;
    std::vector<std::int64_t> out;
    for (std::int64_t n = net.input.spatial + 1; n <= 2 * net.input.spatial; ++n) out.push_back(n);
    return out;
}

bool passes_slack(std::int64_t delta, std::int64_t slack, SlackKind kind) {
    if (kind == SlackKind::positive) return delta > 0 && delta < slack;
    const std::int64_t magnitude = delta < 0 ? -delta : delta;
    return magnitude <= slack;
}

std::int64_t budget_delta(const SolutionCandidate& c) {
    return c.budget_mode == BudgetMode::params ? c.deltas.params : c.deltas.flops;
}

std::size_t SweepResult::total_retained() const {
    std::size_t n = 0;
    for (const auto& [res, list] : by_resolution) n += list.size();
    return n;
}

std::vector<SolutionCandidate> SweepResult::flattened() const {
    std::vector<SolutionCandidate> out;
    for (const auto& [res, list] : by_resolution) out.insert(out.end(), list.begin(), list.end());
    return out;
}

SweepResult sweep(const NetworkSpec& net, const SearchConfig& config) {
    struct Task {
        std::int64_t resolution;
        Approach approach;
        std::vector<SolutionCandidate> solved;
        std::exception_ptr error;
    };

    std::vector<Approach> approaches = config.approaches;
    std::sort(approaches.begin(), approaches.end());
    approaches.erase(std::unique(approaches.begin(), approaches.end()), approaches.end());

    std::vector<Task> tasks;
    for (std::int64_t n : resolution_set(net, config)) {
        for (Approach a : approaches) tasks.push_back({n, a, {}, nullptr});
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                tasks[i].solved = solve(net, tasks[i].approach, tasks[i].resolution, config.ranges, config.budget_mode);
            } catch (...) {
                tasks[i].error = std::current_exception();
            }
        }
    };
    unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, tasks.size()));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    SweepResult result;
    for (auto& task : tasks) {
        if (task.error) std::rethrow_exception(task.error);
        SweepRow row{task.resolution, task.approach, task.solved.size(), 0};
        auto& bucket = result.by_resolution[task.resolution];
        for (auto& c : task.solved) {
            if (!passes_slack(budget_delta(c), config.slack, config.slack_kind)) continue;
            bucket.push_back(std::move(c));
            ++row.retained;
        }
        result.rows.push_back(row);
    }
    return result;
}

namespace {

// Uniform integer in [0, bound) by rejection, independent of the standard
// library's distribution implementation.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % bound;
}

} // namespace

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

std::vector<SolutionCandidate> sample_candidates(const std::vector<SolutionCandidate>& list, std::size_t k,
                                                 std::uint64_t seed) {
    if (list.empty()) throw EmptyCandidateList("cannot sample from an empty candidate list");
    const auto perm = seeded_permutation(list.size(), seed);
    std::vector<SolutionCandidate> out;
    for (std::size_t i = 0; i < std::min(k, list.size()); ++i) out.push_back(list[perm[i]]);
    return out;
}

std::optional<DatasetProfile> dataset_profile_from_string(std::string_view s) {
    if (s == "mnist") return DatasetProfile::mnist;
    if (s == "fmnist") return DatasetProfile::fmnist;
    if (s == "cifar10") return DatasetProfile::cifar10;
    return std::nullopt;
}

std::string_view to_string(DatasetProfile p) {
    switch (p) {
    case DatasetProfile::mnist: return "mnist";
    case DatasetProfile::fmnist: return "fmnist";
    case DatasetProfile::cifar10: return "cifar10";
    }
    return "?";
}

std::vector<NetworkSpec> original_network_grid(DatasetProfile profile, const OriginalGridOptions& options) {
    const bool cifar = profile == DatasetProfile::cifar10;
    const std::vector<std::int64_t> images = cifar ? std::vector<std::int64_t>{8, 16, 32} : std::vector<std::int64_t>{7, 14, 28};
    const std::vector<std::int64_t> kernels = cifar ? std::vector<std::int64_t>{3, 5, 7} : std::vector<std::int64_t>{2, 3, 5};
    const std::vector<std::int64_t> pools = options.drop_pooling ? std::vector<std::int64_t>{0} : std::vector<std::int64_t>{1, 2};
    const std::int64_t filters = cifar ? 30 : 10;
    const std::int64_t channels = cifar ? 3 : 1;

    std::vector<NetworkSpec> out;
    for (auto image : images)
        for (auto k1 : kernels)
            for (auto k2 : kernels)
                for (auto q1 : pools)
                    for (auto q2 : pools) {
                        NetworkSpec net;
                        std::ostringstream name;
                        name << to_string(profile) << "_n" << image << "_k" << k1 << '-' << k2;
                        if (!options.drop_pooling) name << "_p" << q1 << '-' << q2;
                        net.name = name.str();
                        net.input = {image, channels};
                        net.layers.push_back(ConvLayer{filters, k1});
                        if (q1) net.layers.push_back(PoolLayer{PoolKind::max, q1, q1, 0});
                        net.layers.push_back(ConvLayer{filters, k2});
                        if (q2) net.layers.push_back(PoolLayer{PoolKind::max, q2, q2, 0});
                        net.layers.push_back(FlattenLayer{});
                        net.layers.push_back(DenseLayer{options.hidden_units});
                        net.layers.push_back(DenseLayer{options.classes});
                        if (validate(net).ok()) out.push_back(std::move(net));
                    }
    return out;
}

std::vector<NetworkSpec> sample_original_networks(DatasetProfile profile, std::size_t count, std::uint64_t seed,
                                                  const OriginalGridOptions& options) {
    const auto grid = original_network_grid(profile, options);
    std::vector<NetworkSpec> out;
    if (grid.empty()) return out;
    for (std::uint64_t round = 0; out.size() < count; ++round) {
        for (std::size_t i : seeded_permutation(grid.size(), seed + round)) {
            if (out.size() == count) break;
            out.push_back(grid[i]);
        }
    }
    return out;
}

} // namespace netrescale
