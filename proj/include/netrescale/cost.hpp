#pragma once

#include <cstdint>
#include <vector>

#include "netrescale/arch.hpp"

namespace netrescale {

// Parameter and FLOPS accounting for one inference pass. FLOPS are counted
// as multiplications plus additions (not MACs), with these conventions:
//   conv   M^2 (C^2 K_in + 1) K_out   (without bias: M^2 C^2 K_in K_out)
//   dense  I O + O                    (without bias: I O)
//   pool   one op per input element, global average pooling included
//   flatten is free.
// All arithmetic is exact; overflow throws ArithmeticOverflow.

struct LayerCost {
    std::uint64_t params = 0;
    std::uint64_t flops = 0;
    TensorShape out_shape;
};

struct CostReport {
    TensorShape input;
    std::vector<LayerCost> per_layer;
    std::uint64_t total_params = 0;
    std::uint64_t total_flops = 0;
};

std::uint64_t conv_params(const ConvLayer& layer, std::int64_t in_channels);
std::uint64_t dense_params(std::int64_t in_features, std::int64_t out_features, bool bias);
std::uint64_t conv_flops(std::int64_t out_spatial, const ConvLayer& layer, std::int64_t in_channels);
std::uint64_t pool_flops(const TensorShape& in_shape);
std::uint64_t dense_flops(std::int64_t in_features, std::int64_t out_features, bool bias);

LayerCost layer_cost(const Layer& layer, const TensorShape& in);

// Throws InvalidGeometry when the network does not propagate.
CostReport cost_report(const NetworkSpec& net);

// Signed difference a - b; throws ArithmeticOverflow outside int64.
std::int64_t signed_delta(std::uint64_t a, std::uint64_t b);

namespace checked {
std::uint64_t mul(std::uint64_t a, std::uint64_t b);
std::uint64_t add(std::uint64_t a, std::uint64_t b);
std::uint64_t u64(std::int64_t v);
} // namespace checked

} // namespace netrescale
