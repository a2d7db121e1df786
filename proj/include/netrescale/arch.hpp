#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace netrescale {

// Square activation tensor: spatial x spatial x channels.
struct TensorShape {
    std::int64_t spatial = 1;
    std::int64_t channels = 1;

    friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

struct ConvLayer {
    std::int64_t out_channels = 1;
    std::int64_t kernel = 1;
    std::int64_t stride = 1;
    std::int64_t padding = 0;
    std::int64_t dilation = 1;
    bool has_bias = false;

    friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

enum class PoolKind { max, avg };

// Pooling is never dilated.
struct PoolLayer {
    PoolKind kind = PoolKind::max;
    std::int64_t kernel = 1;
    std::int64_t stride = 1;
    std::int64_t padding = 0;

    friend bool operator==(const PoolLayer&, const PoolLayer&) = default;
};

struct GlobalAvgPoolLayer {
    friend bool operator==(const GlobalAvgPoolLayer&, const GlobalAvgPoolLayer&) = default;
};

struct FlattenLayer {
    friend bool operator==(const FlattenLayer&, const FlattenLayer&) = default;
};

struct DenseLayer {
    std::int64_t out_features = 1;
    bool has_bias = false;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

using Layer = std::variant<ConvLayer, PoolLayer, GlobalAvgPoolLayer, FlattenLayer, DenseLayer>;

struct NetworkSpec {
    std::string name;
    TensorShape input;
    std::vector<Layer> layers;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

std::string_view layer_type_name(const Layer& layer);

// Flatten and GlobalAvgPool separate the conv stack from the dense stack.
bool is_boundary(const Layer& layer);

std::optional<std::size_t> boundary_index(const NetworkSpec& net);

// floor((N - D(C-1) - 1 + 2P) / S + 1), or nullopt when the dilated window
// does not fit in the padded input.
std::optional<std::int64_t> window_output_size(std::int64_t input, std::int64_t kernel,
                                               std::int64_t stride, std::int64_t padding,
                                               std::int64_t dilation = 1);

// Throws InvalidGeometry.
TensorShape output_shape(const Layer& layer, const TensorShape& in);

// Shape at every layer boundary: element 0 is the input, element i+1 is the
// output of layers[i]. Throws InvalidGeometry naming the failing layer.
std::vector<TensorShape> propagate_shapes(const NetworkSpec& net);

enum class ViolationKind { parameter, structure, geometry };

struct Violation {
    ViolationKind kind;
    std::optional<std::size_t> layer;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool has(ViolationKind kind) const;
    std::string to_string() const;
};

// Lists every violated invariant. Geometry is only checked once the
// parameter and structure checks are clean.
ValidationReport validate(const NetworkSpec& net);

NetworkSpec with_input_spatial(NetworkSpec net, std::int64_t spatial);

} // namespace netrescale
