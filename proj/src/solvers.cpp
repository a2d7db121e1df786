#include "netrescale/solvers.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "netrescale/cost.hpp"
#include "netrescale/errors.hpp"

namespace netrescale {

int approach_number(Approach a) { return static_cast<int>(a); }

std::optional<Approach> approach_from_number(int n) {
    if (n < 1 || n > 4) return std::nullopt;
    return static_cast<Approach>(n);
}

std::string_view approach_label(Approach a) {
    static constexpr std::array<std::string_view, 4> labels{"I", "II", "III", "IV"};
    return labels[static_cast<std::size_t>(approach_number(a) - 1)];
}

std::optional<Approach> approach_from_label(std::string_view s) {
    for (Approach a : all_approaches) {
        if (approach_label(a) == s) return a;
    }
    return std::nullopt;
}

std::string_view to_string(BudgetMode m) { return m == BudgetMode::params ? "params" : "flops"; }

std::optional<BudgetMode> budget_mode_from_string(std::string_view s) {
    if (s == "params") return BudgetMode::params;
    if (s == "flops") return BudgetMode::flops;
    return std::nullopt;
}

std::string_view to_string(Scope s) {
    switch (s) {
    case Scope::conv1: return "conv1";
    case Scope::conv1_pool: return "conv1+pool";
    case Scope::first_two_convs: return "first_two_convs";
    case Scope::fc_head: return "fc_head";
    }
    return "?";
}

std::optional<Scope> scope_from_string(std::string_view s) {
    for (Scope sc : {Scope::conv1, Scope::conv1_pool, Scope::first_two_convs, Scope::fc_head}) {
        if (to_string(sc) == s) return sc;
    }
    return std::nullopt;
}

Scope scope_of(Approach a) {
    switch (a) {
    case Approach::global_pool_head: return Scope::fc_head;
    case Approach::dilated_conv1: return Scope::conv1;
    case Approach::pooled_conv1: return Scope::conv1_pool;
    case Approach::first_two_convs: return Scope::first_two_convs;
    }
    return Scope::conv1;
}

std::string check_ranges(const EnumRanges& r) {
    std::ostringstream os;
    if (r.kernel.lo < 1) os << "kernel range must start at >= 1; ";
    if (r.stride.lo < 1) os << "stride range must start at >= 1; ";
    if (r.padding.lo < 0) os << "padding range must start at >= 0; ";
    if (r.dilation.lo < 1) os << "dilation range must start at >= 1; ";
    return os.str();
}

std::span<const std::string_view> tuple_field_names(Approach a) {
    static constexpr std::array<std::string_view, 1> head{"fc1_out"};
    static constexpr std::array<std::string_view, 3> dilated{"conv1_padding", "conv1_stride", "conv1_dilation"};
    static constexpr std::array<std::string_view, 7> pooled{"conv1_filters", "conv1_kernel", "conv1_padding",
                                                            "conv1_stride",  "pool_kernel",  "pool_padding",
                                                            "pool_stride"};
    static constexpr std::array<std::string_view, 7> two_convs{"conv1_filters", "conv1_kernel", "conv1_padding",
                                                               "conv1_stride",  "conv2_kernel", "conv2_padding",
                                                               "conv2_stride"};
    switch (a) {
    case Approach::global_pool_head: return head;
    case Approach::dilated_conv1: return dilated;
    case Approach::pooled_conv1: return pooled;
    case Approach::first_two_convs: return two_convs;
    }
    return {};
}

namespace {

struct Pending {
    SolutionTuple tuple;
    NetworkSpec net;
};

const ConvLayer& leading_conv(const NetworkSpec& net, Approach a) {
    if (net.layers.empty() || !std::holds_alternative<ConvLayer>(net.layers.front())) {
        std::ostringstream os;
        os << "approach " << approach_number(a) << " needs a conv layer as the first layer";
        throw StructureMismatch(os.str());
    }
    return std::get<ConvLayer>(net.layers.front());
}

// Index of conv2: the first conv after conv1 with only pooling in between.
std::size_t second_conv_index(const NetworkSpec& net) {
    for (std::size_t i = 1; i < net.layers.size(); ++i) {
        if (std::holds_alternative<ConvLayer>(net.layers[i])) return i;
        if (!std::holds_alternative<PoolLayer>(net.layers[i])) break;
    }
    throw StructureMismatch("approach 4 needs a second conv layer after conv1 with only pooling in between");
}

// Solve fixed + per * k == budget for a positive integer k.
std::optional<std::int64_t> exact_count(std::uint64_t budget, std::uint64_t fixed, std::uint64_t per) {
    if (per == 0 || budget < fixed) return std::nullopt;
    const std::uint64_t rem = budget - fixed;
    if (rem % per != 0) return std::nullopt;
    const std::uint64_t k = rem / per;
    if (k < 1 || k > static_cast<std::uint64_t>(INT64_MAX)) return std::nullopt;
    return static_cast<std::int64_t>(k);
}

std::uint64_t sq(std::int64_t v) { return checked::mul(checked::u64(v), checked::u64(v)); }

std::vector<SolutionCandidate> finalize(const NetworkSpec& baseline, Approach approach, BudgetMode mode,
                                        std::int64_t new_resolution, std::vector<Pending> pending) {
    const CostReport base = cost_report(baseline);
    std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) { return a.tuple < b.tuple; });

    std::vector<SolutionCandidate> out;
    out.reserve(pending.size());
    for (auto& p : pending) {
        CostReport rep;
        try {
            rep = cost_report(p.net);
        } catch (const InvalidGeometry&) {
            continue;
        }
        SolutionCandidate c;
        c.approach = approach;
        c.budget_mode = mode;
        c.new_resolution = new_resolution;
        c.tuple = std::move(p.tuple);
        c.scope = scope_of(approach);
        c.modified_net = std::move(p.net);
        c.deltas.params = signed_delta(rep.total_params, base.total_params);
        c.deltas.flops = signed_delta(rep.total_flops, base.total_flops);
        out.push_back(std::move(c));
    }
    return out;
}

template <class F>
void for_each_in(const IntRange& r, F&& f) {
    for (std::int64_t v = r.lo; v <= r.hi; ++v) f(v);
}

} // namespace

NetworkSpec baseline_for(const NetworkSpec& net, Approach approach) {
    if (approach != Approach::global_pool_head) return net;

    const auto b = boundary_index(net);
    if (!b) throw StructureMismatch("approach 1 needs a flatten or global_avg_pool boundary");
    const std::size_t fc1 = *b + 1;
    const std::size_t fc2 = *b + 2;
    if (fc2 >= net.layers.size() || !std::holds_alternative<DenseLayer>(net.layers[fc1]) ||
        !std::holds_alternative<DenseLayer>(net.layers[fc2])) {
        throw StructureMismatch("approach 1 needs two dense layers right after the boundary");
    }
    NetworkSpec out = net;
    out.layers[*b] = GlobalAvgPoolLayer{};
    return out;
}

std::vector<SolutionCandidate> solve_approach1(const NetworkSpec& net, std::int64_t new_resolution, BudgetMode mode) {
    const NetworkSpec baseline = baseline_for(net, Approach::global_pool_head);
    const std::size_t b = *boundary_index(baseline);
    const auto& fc1 = std::get<DenseLayer>(baseline.layers[b + 1]);
    const auto& fc2 = std::get<DenseLayer>(baseline.layers[b + 2]);

    const auto shapes = propagate_shapes(baseline);
    NetworkSpec scaled = with_input_spatial(baseline, new_resolution);
    std::vector<TensorShape> scaled_shapes;
    try {
        scaled_shapes = propagate_shapes(scaled);
    } catch (const InvalidGeometry&) {
        return {};
    }

    const TensorShape pooled = shapes[b];          // U1 x U1 x V1
    const TensorShape pooled_new = scaled_shapes[b];  // U1' x U1' x V1

    std::vector<Pending> pending;
    if (mode == BudgetMode::params) {
        pending.push_back({{fc1.out_features}, scaled});
    } else {
        const std::int64_t v1 = pooled.channels;
        const std::uint64_t budget = checked::add(
            checked::add(pool_flops(pooled), dense_flops(v1, fc1.out_features, fc1.has_bias)),
            dense_flops(fc1.out_features, fc2.out_features, fc2.has_bias));
        const std::uint64_t fixed =
            checked::add(pool_flops(pooled_new), fc2.has_bias ? checked::u64(fc2.out_features) : 0);
        const std::uint64_t per = checked::u64(v1 + (fc1.has_bias ? 1 : 0) + fc2.out_features);
        if (auto z = exact_count(budget, fixed, per)) {
            NetworkSpec m = scaled;
            std::get<DenseLayer>(m.layers[b + 1]).out_features = *z;
            pending.push_back({{*z}, std::move(m)});
        }
    }
    return finalize(baseline, Approach::global_pool_head, mode, new_resolution, std::move(pending));
}

std::vector<SolutionCandidate> solve_approach2(const NetworkSpec& net, std::int64_t new_resolution,
                                               const EnumRanges& ranges, BudgetMode mode) {
    const ConvLayer& conv1 = leading_conv(net, Approach::dilated_conv1);
    if (conv1.dilation != 1) throw StructureMismatch("approach 2 needs an undilated conv1");
    const std::int64_t m1 = propagate_shapes(net)[1].spatial;

    std::vector<Pending> pending;
    for_each_in(ranges.padding, [&](std::int64_t p) {
        for_each_in(ranges.stride, [&](std::int64_t s) {
            for_each_in(ranges.dilation, [&](std::int64_t d) {
                if (window_output_size(new_resolution, conv1.kernel, s, p, d) != m1) return;
                NetworkSpec m = with_input_spatial(net, new_resolution);
                auto& c = std::get<ConvLayer>(m.layers.front());
                c.padding = p;
                c.stride = s;
                c.dilation = d;
                pending.push_back({{p, s, d}, std::move(m)});
            });
        });
    });
    return finalize(net, Approach::dilated_conv1, mode, new_resolution, std::move(pending));
}

std::vector<SolutionCandidate> solve_approach3(const NetworkSpec& net, std::int64_t new_resolution,
                                               const EnumRanges& ranges, BudgetMode mode) {
    const ConvLayer& conv1 = leading_conv(net, Approach::pooled_conv1);
    const std::int64_t depth = net.input.channels;
    const std::int64_t m1 = propagate_shapes(net)[1].spatial;
    const std::uint64_t budget =
        mode == BudgetMode::params ? conv_params(conv1, depth) : conv_flops(m1, conv1, depth);
    const std::uint64_t bias = conv1.has_bias ? 1 : 0;

    std::vector<Pending> pending;
    for_each_in(ranges.kernel, [&](std::int64_t c1) {
        if (c1 <= conv1.kernel) return;
        // Weights (+ bias) of one conv1 filter.
        const std::uint64_t filter = checked::add(checked::mul(sq(c1), checked::u64(depth)), bias);
        std::optional<std::int64_t> k_params;
        if (mode == BudgetMode::params) {
            k_params = exact_count(budget, 0, filter);
            if (!k_params) return;
        }
        for_each_in(ranges.padding, [&](std::int64_t p1) {
            for_each_in(ranges.stride, [&](std::int64_t s1) {
                const auto m1_new = window_output_size(new_resolution, c1, s1, p1, conv1.dilation);
                if (!m1_new) return;
                std::optional<std::int64_t> k1 = k_params;
                if (mode == BudgetMode::flops) {
                    // Conv1 FLOPS plus one pooling op per conv1 output element, per filter.
                    const std::uint64_t per = checked::mul(sq(*m1_new), checked::add(filter, 1));
                    k1 = exact_count(budget, 0, per);
                }
                if (!k1) return;
                for_each_in(ranges.kernel, [&](std::int64_t cp) {
                    for_each_in(ranges.padding, [&](std::int64_t pp) {
                        if (2 * pp > cp) return;
                        for_each_in(ranges.stride, [&](std::int64_t sp) {
                            if (window_output_size(*m1_new, cp, sp, pp) != m1) return;
                            NetworkSpec m = with_input_spatial(net, new_resolution);
                            auto& c = std::get<ConvLayer>(m.layers.front());
                            c.out_channels = *k1;
                            c.kernel = c1;
                            c.padding = p1;
                            c.stride = s1;
                            m.layers.insert(m.layers.begin() + 1, PoolLayer{PoolKind::avg, cp, sp, pp});
                            pending.push_back({{*k1, c1, p1, s1, cp, pp, sp}, std::move(m)});
                        });
                    });
                });
            });
        });
    });
    return finalize(net, Approach::pooled_conv1, mode, new_resolution, std::move(pending));
}

std::vector<SolutionCandidate> solve_approach4(const NetworkSpec& net, std::int64_t new_resolution,
                                               const EnumRanges& ranges, BudgetMode mode) {
    const ConvLayer& conv1 = leading_conv(net, Approach::first_two_convs);
    const std::size_t j = second_conv_index(net);
    const ConvLayer& conv2 = std::get<ConvLayer>(net.layers[j]);
    const std::int64_t depth = net.input.channels;
    const std::int64_t k2 = conv2.out_channels;

    const auto shapes = propagate_shapes(net);
    const std::int64_t m1 = shapes[1].spatial;
    const std::int64_t m2 = shapes[j + 1].spatial;
    const std::uint64_t budget =
        mode == BudgetMode::params
            ? checked::add(conv_params(conv1, depth), conv_params(conv2, conv1.out_channels))
            : checked::add(conv_flops(m1, conv1, depth), conv_flops(m2, conv2, conv1.out_channels));
    const std::uint64_t bias1 = conv1.has_bias ? 1 : 0;
    const std::uint64_t bias2 = conv2.has_bias ? 1 : 0;

    // Conv2 bias terms do not depend on conv1's filter count.
    const std::uint64_t fixed = mode == BudgetMode::params
                                    ? checked::mul(bias2, checked::u64(k2))
                                    : checked::mul(checked::mul(bias2, sq(m2)), checked::u64(k2));

    std::vector<Pending> pending;
    for_each_in(ranges.kernel, [&](std::int64_t c1) {
        if (c1 <= conv1.kernel) return;
        const std::uint64_t filter1 = checked::add(checked::mul(sq(c1), checked::u64(depth)), bias1);
        for_each_in(ranges.padding, [&](std::int64_t p1) {
            for_each_in(ranges.stride, [&](std::int64_t s1) {
                const auto m1_new = window_output_size(new_resolution, c1, s1, p1, conv1.dilation);
                if (!m1_new) return;
                std::optional<std::int64_t> into_conv2 = *m1_new;
                for (std::size_t i = 1; i < j && into_conv2; ++i) {
                    const auto& pool = std::get<PoolLayer>(net.layers[i]);
                    into_conv2 = window_output_size(*into_conv2, pool.kernel, pool.stride, pool.padding);
                }
                if (!into_conv2) return;
                for_each_in(ranges.kernel, [&](std::int64_t c2) {
                    // Per conv1 filter: its own weights plus the conv2 weights it feeds.
                    const std::uint64_t conv2_share = checked::mul(sq(c2), checked::u64(k2));
                    const std::uint64_t per =
                        mode == BudgetMode::params
                            ? checked::add(filter1, conv2_share)
                            : checked::add(checked::mul(sq(*m1_new), filter1), checked::mul(sq(m2), conv2_share));
                    const auto k1 = exact_count(budget, fixed, per);
                    if (!k1) return;
                    for_each_in(ranges.padding, [&](std::int64_t p2) {
                        for_each_in(ranges.stride, [&](std::int64_t s2) {
                            if (window_output_size(*into_conv2, c2, s2, p2, conv2.dilation) != m2) return;
                            NetworkSpec m = with_input_spatial(net, new_resolution);
                            auto& a = std::get<ConvLayer>(m.layers.front());
                            a.out_channels = *k1;
                            a.kernel = c1;
                            a.padding = p1;
                            a.stride = s1;
                            auto& b = std::get<ConvLayer>(m.layers[j]);
                            b.kernel = c2;
                            b.padding = p2;
                            b.stride = s2;
                            pending.push_back({{*k1, c1, p1, s1, c2, p2, s2}, std::move(m)});
                        });
                    });
                });
            });
        });
    });
    return finalize(net, Approach::first_two_convs, mode, new_resolution, std::move(pending));
}

std::vector<SolutionCandidate> solve(const NetworkSpec& net, Approach approach, std::int64_t new_resolution,
                                     const EnumRanges& ranges, BudgetMode mode) {
    switch (approach) {
    case Approach::global_pool_head: return solve_approach1(net, new_resolution, mode);
    case Approach::dilated_conv1: return solve_approach2(net, new_resolution, ranges, mode);
    case Approach::pooled_conv1: return solve_approach3(net, new_resolution, ranges, mode);
    case Approach::first_two_convs: return solve_approach4(net, new_resolution, ranges, mode);
    }
    return {};
}

} // namespace netrescale
