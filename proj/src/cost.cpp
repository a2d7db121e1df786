#include "netrescale/cost.hpp"

#include <cassert>
#include <limits>

#include "netrescale/detail/overloaded.hpp"
#include "netrescale/errors.hpp"

namespace netrescale {

namespace checked {

std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r = 0;
    if (__builtin_mul_overflow(a, b, &r)) throw ArithmeticOverflow("cost product overflows 64 bits");
    return r;
}

std::uint64_t add(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r = 0;
    if (__builtin_add_overflow(a, b, &r)) throw ArithmeticOverflow("cost sum overflows 64 bits");
    return r;
}

std::uint64_t u64(std::int64_t v) {
    if (v < 0) throw ArithmeticOverflow("negative quantity in cost arithmetic");
    return static_cast<std::uint64_t>(v);
}

} // namespace checked

using checked::add;
using checked::mul;
using checked::u64;

std::uint64_t conv_params(const ConvLayer& layer, std::int64_t in_channels) {
    const std::uint64_t k = u64(layer.out_channels);
    const std::uint64_t weights = mul(mul(mul(u64(layer.kernel), u64(layer.kernel)), u64(in_channels)), k);
    return layer.has_bias ? add(weights, k) : weights;
}

std::uint64_t dense_params(std::int64_t in_features, std::int64_t out_features, bool bias) {
    const std::uint64_t weights = mul(u64(in_features), u64(out_features));
    return bias ? add(weights, u64(out_features)) : weights;
}

std::uint64_t conv_flops(std::int64_t out_spatial, const ConvLayer& layer, std::int64_t in_channels) {
    const std::uint64_t positions = mul(u64(out_spatial), u64(out_spatial));
    std::uint64_t per_output = mul(mul(u64(layer.kernel), u64(layer.kernel)), u64(in_channels));
    if (layer.has_bias) per_output = add(per_output, 1);
    return mul(mul(positions, per_output), u64(layer.out_channels));
}

std::uint64_t pool_flops(const TensorShape& in_shape) {
    return mul(mul(u64(in_shape.spatial), u64(in_shape.spatial)), u64(in_shape.channels));
}

std::uint64_t dense_flops(std::int64_t in_features, std::int64_t out_features, bool bias) {
    return dense_params(in_features, out_features, bias);
}

LayerCost layer_cost(const Layer& layer, const TensorShape& in) {
    LayerCost cost;
    cost.out_shape = output_shape(layer, in);
    std::visit(detail::overloaded{
                   [&](const ConvLayer& c) {
                       cost.params = conv_params(c, in.channels);
                       cost.flops = conv_flops(cost.out_shape.spatial, c, in.channels);
                   },
                   [&](const PoolLayer&) { cost.flops = pool_flops(in); },
                   [&](const GlobalAvgPoolLayer&) { cost.flops = pool_flops(in); },
                   [&](const FlattenLayer&) {},
                   [&](const DenseLayer& d) {
                       const auto in_features = static_cast<std::int64_t>(pool_flops(in));
                       cost.params = dense_params(in_features, d.out_features, d.has_bias);
                       cost.flops = dense_flops(in_features, d.out_features, d.has_bias);
                   },
               },
               layer);
    return cost;
}

CostReport cost_report(const NetworkSpec& net) {
    CostReport report;
    report.input = net.input;
    report.per_layer.reserve(net.layers.size());
    const auto shapes = propagate_shapes(net);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        LayerCost c = layer_cost(net.layers[i], shapes[i]);
        report.total_params = add(report.total_params, c.params);
        report.total_flops = add(report.total_flops, c.flops);
        report.per_layer.push_back(c);
    }
#ifndef NDEBUG
    std::uint64_t params = 0;
    std::uint64_t flops = 0;
    for (const auto& c : report.per_layer) {
        params += c.params;
        flops += c.flops;
    }
    assert(params == report.total_params && flops == report.total_flops);
#endif
    return report;
}

std::int64_t signed_delta(std::uint64_t a, std::uint64_t b) {
    constexpr auto max = static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());
    if (a >= b) {
        if (a - b > max) throw ArithmeticOverflow("cost delta exceeds int64");
        return static_cast<std::int64_t>(a - b);
    }
    if (b - a > max) throw ArithmeticOverflow("cost delta exceeds int64");
    return -static_cast<std::int64_t>(b - a);
}

} // namespace netrescale
