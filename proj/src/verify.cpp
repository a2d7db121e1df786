#include "netrescale/verify.hpp"

#include <algorithm>
#include <optional>
#include <sstream>

#include "netrescale/errors.hpp"

namespace netrescale {

namespace {

using i128 = __int128;

std::string str(i128 v) {
    if (v == 0) return "0";
    const bool neg = v < 0;
    std::string s;
    while (v != 0) {
        const int digit = static_cast<int>(v % 10);
        s.push_back(static_cast<char>('0' + (neg ? -digit : digit)));
        v /= 10;
    }
    if (neg) s.push_back('-');
    std::reverse(s.begin(), s.end());
    return s;
}

// Number of window placements, found by sliding the window start from -P.
std::int64_t slide_count(std::int64_t n, std::int64_t k, std::int64_t s, std::int64_t p, std::int64_t d) {
    if (n < 1 || k < 1 || s < 1 || p < 0 || d < 1) return 0;
    std::int64_t count = 0;
    for (std::int64_t start = -p; start + d * (k - 1) <= n - 1 + p; start += s) ++count;
    return count;
}

struct Dim {
    std::int64_t side = 0;
    std::int64_t depth = 0;
    bool operator==(const Dim&) const = default;
};

struct Trace {
    std::vector<Dim> dims;  // dims[0] is the input
    std::vector<i128> params;
    std::vector<i128> flops;
    i128 total_params = 0;
    i128 total_flops = 0;

    i128 sum(BudgetMode mode, std::initializer_list<std::size_t> layers) const {
        i128 t = 0;
        for (auto i : layers) t += mode == BudgetMode::params ? params[i] : flops[i];
        return t;
    }
};

std::optional<Trace> trace(const NetworkSpec& net) {
    Trace t;
    Dim cur{net.input.spatial, net.input.channels};
    t.dims.push_back(cur);
    for (const Layer& layer : net.layers) {
        i128 params = 0;
        i128 flops = 0;
        const i128 in_elems = i128(cur.side) * cur.side * cur.depth;
        if (const auto* c = std::get_if<ConvLayer>(&layer)) {
            const std::int64_t m = slide_count(cur.side, c->kernel, c->stride, c->padding, c->dilation);
            if (m == 0) return std::nullopt;
            const i128 taps = i128(c->kernel) * c->kernel * cur.depth;
            params = taps * c->out_channels + (c->has_bias ? c->out_channels : 0);
            flops = i128(m) * m * (taps + (c->has_bias ? 1 : 0)) * c->out_channels;
            cur = {m, c->out_channels};
        } else if (const auto* p = std::get_if<PoolLayer>(&layer)) {
            const std::int64_t m = slide_count(cur.side, p->kernel, p->stride, p->padding, 1);
            if (m == 0) return std::nullopt;
            flops = in_elems;
            cur = {m, cur.depth};
        } else if (std::holds_alternative<GlobalAvgPoolLayer>(layer)) {
            flops = in_elems;
            cur = {1, cur.depth};
        } else if (std::holds_alternative<FlattenLayer>(layer)) {
            cur = {1, static_cast<std::int64_t>(in_elems)};
        } else {
            const auto& d = std::get<DenseLayer>(layer);
            params = in_elems * d.out_features + (d.has_bias ? d.out_features : 0);
            flops = params;
            cur = {1, d.out_features};
        }
        t.dims.push_back(cur);
        t.params.push_back(params);
        t.flops.push_back(flops);
        t.total_params += params;
        t.total_flops += flops;
    }
    return t;
}

std::optional<std::size_t> find_boundary(const NetworkSpec& net) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& l = net.layers[i];
        if (std::holds_alternative<FlattenLayer>(l) || std::holds_alternative<GlobalAvgPoolLayer>(l)) return i;
    }
    return std::nullopt;
}

// Original with its boundary swapped for global average pooling, provided
// two dense layers follow the boundary.
std::optional<NetworkSpec> pooled_head(const NetworkSpec& net) {
    const auto b = find_boundary(net);
    if (!b || *b + 2 >= net.layers.size()) return std::nullopt;
    if (!std::holds_alternative<DenseLayer>(net.layers[*b + 1]) ||
        !std::holds_alternative<DenseLayer>(net.layers[*b + 2])) {
        return std::nullopt;
    }
    NetworkSpec out = net;
    out.layers[*b] = GlobalAvgPoolLayer{};
    return out;
}

std::optional<std::size_t> find_conv2(const NetworkSpec& net) {
    if (net.layers.empty() || !std::holds_alternative<ConvLayer>(net.layers[0])) return std::nullopt;
    for (std::size_t i = 1; i < net.layers.size(); ++i) {
        if (std::holds_alternative<ConvLayer>(net.layers[i])) return i;
        if (!std::holds_alternative<PoolLayer>(net.layers[i])) return std::nullopt;
    }
    return std::nullopt;
}

const ConvLayer* conv_at(const NetworkSpec& net, std::size_t i) {
    return i < net.layers.size() ? std::get_if<ConvLayer>(&net.layers[i]) : nullptr;
}

class Checker {
public:
    explicit Checker(VerificationReport& r) : report_(r) {}

    void fail(const std::string& msg) { report_.violations.push_back(msg); }

    void expect(bool cond, const std::string& msg) {
        if (!cond) fail(msg);
    }

    void expect_equal(i128 got, i128 want, const std::string& what) {
        if (got != want) fail(what + ": " + str(got) + " != " + str(want));
    }

private:
    VerificationReport& report_;
};

std::string tuple_text(const SolutionTuple& t) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < t.size(); ++i) os << (i ? "," : "") << t[i];
    os << ')';
    return os.str();
}

bool same_layers_except(const NetworkSpec& a, const NetworkSpec& b, std::initializer_list<std::size_t> skip) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (std::find(skip.begin(), skip.end(), i) != skip.end()) continue;
        if (!(a.layers[i] == b.layers[i])) return false;
    }
    return true;
}

} // namespace

VerificationReport verify_candidate(const NetworkSpec& original, const SolutionCandidate& cand) {
    VerificationReport report;
    Checker check(report);
    const Approach approach = cand.approach;
    const BudgetMode mode = cand.budget_mode;
    const NetworkSpec& mod = cand.modified_net;
    const std::string quantity{to_string(mode)};

    NetworkSpec baseline = original;
    if (approach == Approach::global_pool_head) {
        auto pooled = pooled_head(original);
        if (!pooled) {
            check.fail("original has no boundary followed by two dense layers");
            return report;
        }
        baseline = std::move(*pooled);
    }

    const auto base = trace(baseline);
    if (!base) throw InvalidGeometry("original network does not propagate");
    const auto next = trace(mod);
    if (!next) throw InvalidGeometry("modified network does not propagate");

    report.whole_network_param_delta = static_cast<std::int64_t>(next->total_params - base->total_params);
    report.whole_network_flops_delta = static_cast<std::int64_t>(next->total_flops - base->total_flops);
    check.expect(cand.scope == scope_of(approach), "scope label does not match the approach");
    check.expect(mod.input.spatial == cand.new_resolution, "modified input spatial is not the new resolution");
    check.expect(mod.input.channels == original.input.channels, "input channels changed");
    check.expect(next->dims.back() == base->dims.back(), "network output shape changed");
    check.expect(cand.tuple.size() == tuple_field_names(approach).size(), "solution tuple has the wrong length");
    for (std::size_t i = 0; i < mod.layers.size(); ++i) {
        if (const auto* p = std::get_if<PoolLayer>(&mod.layers[i]); p && 2 * p->padding > p->kernel) {
            check.fail("layer " + std::to_string(i) + " pool padding exceeds half its kernel");
        }
    }
    if (!report.passed()) return report;

    const std::string scope{to_string(cand.scope)};
    auto scope_equal = [&](i128 got, i128 want, const std::string& q) {
        if (got == want) return true;
        check.fail(scope + " " + q + " equality fails: " + str(got) + " != " + str(want));
        return false;
    };

    switch (approach) {
    case Approach::global_pool_head: {
        const std::size_t b = *find_boundary(baseline);
        const auto* fc1 = b + 1 < mod.layers.size() ? std::get_if<DenseLayer>(&mod.layers[b + 1]) : nullptr;
        if (!fc1 || !same_layers_except(baseline, mod, {b + 1})) {
            check.fail("only fc1 may differ from the pooled-head original");
            return report;
        }
        const auto& fc1_orig = std::get<DenseLayer>(baseline.layers[b + 1]);
        check.expect(fc1->has_bias == fc1_orig.has_bias, "fc1 bias flag changed");
        if (mode == BudgetMode::params) check.expect(fc1->out_features == fc1_orig.out_features, "fc1 resized in params mode");
        check.expect(cand.tuple == SolutionTuple{fc1->out_features},
                     "tuple " + tuple_text(cand.tuple) + " does not describe fc1");
        report.scope_equality_holds = scope_equal(next->sum(mode, {b, b + 1, b + 2}),
                                                  base->sum(mode, {b, b + 1, b + 2}), quantity);
        report.interface_shape_match = next->dims[b + 1] == base->dims[b + 1];
        break;
    }
    case Approach::dilated_conv1: {
        const auto* c0 = conv_at(original, 0);
        const auto* c1 = conv_at(mod, 0);
        if (!c0 || !c1 || !same_layers_except(original, mod, {0})) {
            check.fail("only conv1 may differ from the original");
            return report;
        }
        check.expect(c1->kernel == c0->kernel && c1->out_channels == c0->out_channels && c1->has_bias == c0->has_bias,
                     "conv1 kernel, filters and bias must be unchanged");
        check.expect(cand.tuple == SolutionTuple{c1->padding, c1->stride, c1->dilation},
                     "tuple " + tuple_text(cand.tuple) + " does not describe conv1");
        const bool p = scope_equal(next->params[0], base->params[0], "params");
        const bool f = scope_equal(next->flops[0], base->flops[0], "flops");
        report.scope_equality_holds = p && f;
        check.expect(next->total_params == base->total_params, "whole-network params not conserved");
        check.expect(next->total_flops == base->total_flops, "whole-network flops not conserved");
        report.interface_shape_match = next->dims[1] == base->dims[1];
        break;
    }
    case Approach::pooled_conv1: {
        const auto* c0 = conv_at(original, 0);
        const auto* c1 = conv_at(mod, 0);
        const auto* pool = mod.layers.size() > 1 ? std::get_if<PoolLayer>(&mod.layers[1]) : nullptr;
        bool rest_same = mod.layers.size() == original.layers.size() + 1;
        for (std::size_t i = 1; rest_same && i < original.layers.size(); ++i) {
            rest_same = original.layers[i] == mod.layers[i + 1];
        }
        if (!c0 || !c1 || !pool || !rest_same) {
            check.fail("expected conv1, a new pooling layer, then the unchanged original remainder");
            return report;
        }
        check.expect(pool->kind == PoolKind::avg, "inserted pool is not average pooling");
        check.expect(c1->kernel > c0->kernel, "conv1 kernel did not grow");
        check.expect(c1->dilation == c0->dilation && c1->has_bias == c0->has_bias, "conv1 dilation or bias changed");
        check.expect(cand.tuple == SolutionTuple{c1->out_channels, c1->kernel, c1->padding, c1->stride, pool->kernel,
                                                 pool->padding, pool->stride},
                     "tuple " + tuple_text(cand.tuple) + " does not describe conv1 and the pool");
        report.scope_equality_holds = scope_equal(next->sum(mode, {0, 1}), base->sum(mode, {0}), quantity);
        // Channel count legitimately drifts to the new filter count.
        report.interface_shape_match = next->dims[2].side == base->dims[1].side;
        break;
    }
    case Approach::first_two_convs: {
        const auto j = find_conv2(original);
        if (!j || !conv_at(mod, *j) || !conv_at(mod, 0) || !same_layers_except(original, mod, {0, *j})) {
            check.fail("only conv1 and conv2 may differ from the original");
            return report;
        }
        const auto& a0 = *conv_at(original, 0);
        const auto& a1 = *conv_at(mod, 0);
        const auto& b0 = *conv_at(original, *j);
        const auto& b1 = *conv_at(mod, *j);
        check.expect(a1.kernel > a0.kernel, "conv1 kernel did not grow");
        check.expect(a1.dilation == a0.dilation && a1.has_bias == a0.has_bias, "conv1 dilation or bias changed");
        check.expect(b1.out_channels == b0.out_channels, "conv2 filter count changed");
        check.expect(b1.dilation == b0.dilation && b1.has_bias == b0.has_bias, "conv2 dilation or bias changed");
        check.expect(cand.tuple == SolutionTuple{a1.out_channels, a1.kernel, a1.padding, a1.stride, b1.kernel,
                                                 b1.padding, b1.stride},
                     "tuple " + tuple_text(cand.tuple) + " does not describe conv1 and conv2");
        report.scope_equality_holds = scope_equal(next->sum(mode, {0, *j}), base->sum(mode, {0, *j}), quantity);
        report.interface_shape_match = next->dims[*j + 1] == base->dims[*j + 1];
        break;
    }
    }
    check.expect(report.interface_shape_match, "interface shape differs from the original");
    check.expect_equal(cand.deltas.params, next->total_params - base->total_params, "stored params delta");
    check.expect_equal(cand.deltas.flops, next->total_flops - base->total_flops, "stored flops delta");
    return report;
}

std::set<SolutionTuple> oracle_enumerate(const NetworkSpec& net, std::int64_t n_new, const EnumRanges& r,
                                         Approach approach, BudgetMode mode) {
    std::set<SolutionTuple> found;
    const bool by_params = mode == BudgetMode::params;
    auto in = [](const IntRange& range) {
        std::vector<std::int64_t> v;
        for (std::int64_t x = range.lo; x <= range.hi; ++x) v.push_back(x);
        return v;
    };
    const auto kernels = in(r.kernel);
    const auto strides = in(r.stride);
    const auto paddings = in(r.padding);
    const auto dilations = in(r.dilation);

    auto scaled = net;
    scaled.input.spatial = n_new;

    if (approach == Approach::global_pool_head) {
        const auto head = pooled_head(net);
        if (!head) return found;
        auto head_new = *head;
        head_new.input.spatial = n_new;
        const auto old_t = trace(*head);
        const auto new_t = trace(head_new);
        if (!old_t || !new_t) return found;
        const std::size_t b = *find_boundary(*head);
        const i128 budget = old_t->sum(mode, {b, b + 1, b + 2});
        for (std::int64_t z = 1;; ++z) {
            auto trial = head_new;
            std::get<DenseLayer>(trial.layers[b + 1]).out_features = z;
            const auto t = trace(trial);
            if (!t) break;
            const i128 cost = t->sum(mode, {b, b + 1, b + 2});
            if (cost == budget) found.insert({z});
            if (cost > budget) break;
        }
        return found;
    }

    const auto* conv1 = conv_at(net, 0);
    const auto orig = trace(net);
    if (!conv1 || !orig) return found;
    const std::int64_t depth = net.input.channels;
    const std::int64_t m1 = orig->dims[1].side;

    if (approach == Approach::dilated_conv1) {
        if (conv1->dilation != 1) return found;
        for (auto p : paddings)
            for (auto s : strides)
                for (auto d : dilations) {
                    auto trial = scaled;
                    auto& c = std::get<ConvLayer>(trial.layers[0]);
                    c.padding = p;
                    c.stride = s;
                    c.dilation = d;
                    const auto t = trace(trial);
                    if (t && t->dims[1] == orig->dims[1]) found.insert({p, s, d});
                }
        return found;
    }

    if (approach == Approach::pooled_conv1) {
        const i128 budget = orig->sum(mode, {0});
        for (auto c1 : kernels)
            for (auto p1 : paddings)
                for (auto s1 : strides) {
                    if (c1 <= conv1->kernel) continue;
                    const std::int64_t m1_new = slide_count(n_new, c1, s1, p1, conv1->dilation);
                    if (m1_new == 0) continue;
                    for (auto cp : kernels)
                        for (auto pp : paddings)
                            for (auto sp : strides) {
                                if (2 * pp > cp) continue;
                                if (slide_count(m1_new, cp, sp, pp, 1) != m1) continue;
                                for (std::int64_t k = 1;; ++k) {
                                    const i128 taps = i128(c1) * c1 * depth;
                                    const i128 bias = conv1->has_bias ? k : 0;
                                    const i128 conv_p = taps * k + bias;
                                    const i128 conv_f = i128(m1_new) * m1_new * (taps * k + bias);
                                    const i128 pool_f = i128(m1_new) * m1_new * k;
                                    const i128 cost = by_params ? conv_p : conv_f + pool_f;
                                    if (cost > budget) break;
                                    if (cost == budget) found.insert({k, c1, p1, s1, cp, pp, sp});
                                }
                            }
                }
        return found;
    }

    // first_two_convs
    const auto j = find_conv2(net);
    if (!j) return found;
    const auto& conv2 = std::get<ConvLayer>(net.layers[*j]);
    const i128 budget = orig->sum(mode, {0, *j});
    const std::int64_t k2 = conv2.out_channels;
    const std::int64_t m2 = orig->dims[*j + 1].side;
    for (auto c1 : kernels)
        for (auto p1 : paddings)
            for (auto s1 : strides)
                for (auto c2 : kernels)
                    for (auto p2 : paddings)
                        for (auto s2 : strides) {
                            if (c1 <= conv1->kernel) continue;
                            std::int64_t side = slide_count(n_new, c1, s1, p1, conv1->dilation);
                            if (side == 0) continue;
                            const std::int64_t m1_new = side;
                            for (std::size_t i = 1; i < *j && side != 0; ++i) {
                                const auto& pool = std::get<PoolLayer>(net.layers[i]);
                                side = slide_count(side, pool.kernel, pool.stride, pool.padding, 1);
                            }
                            if (side == 0) continue;
                            const std::int64_t m2_new = slide_count(side, c2, s2, p2, conv2.dilation);
                            if (m2_new != m2) continue;
                            for (std::int64_t k = 1;; ++k) {
                                const i128 first_p = i128(c1) * c1 * depth * k + (conv1->has_bias ? k : 0);
                                const i128 second_p = i128(c2) * c2 * k * k2 + (conv2.has_bias ? k2 : 0);
                                const i128 first_f =
                                    i128(m1_new) * m1_new * (i128(c1) * c1 * depth + (conv1->has_bias ? 1 : 0)) * k;
                                const i128 second_f =
                                    i128(m2_new) * m2_new * (i128(c2) * c2 * k + (conv2.has_bias ? 1 : 0)) * k2;
                                const i128 cost = by_params ? first_p + second_p : first_f + second_f;
                                if (cost > budget) break;
                                if (cost == budget) found.insert({k, c1, p1, s1, c2, p2, s2});
                            }
                        }
    return found;
}

} // namespace netrescale
