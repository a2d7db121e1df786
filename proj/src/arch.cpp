#include "netrescale/arch.hpp"

#include <sstream>

#include "netrescale/detail/overloaded.hpp"
#include "netrescale/errors.hpp"

namespace netrescale {

namespace {

std::int64_t flat_length(const TensorShape& s) {
    std::int64_t area = 0;
    std::int64_t total = 0;
    if (__builtin_mul_overflow(s.spatial, s.spatial, &area) ||
        __builtin_mul_overflow(area, s.channels, &total)) {
        throw ArithmeticOverflow("tensor element count overflows 64 bits");
    }
    return total;
}

std::int64_t window_or_throw(const TensorShape& in, std::int64_t kernel, std::int64_t stride,
                             std::int64_t padding, std::int64_t dilation) {
    auto m = window_output_size(in.spatial, kernel, stride, padding, dilation);
    if (!m) {
        std::ostringstream os;
        os << "kernel " << kernel << " (dilation " << dilation << ") does not fit input "
           << in.spatial << " with padding " << padding;
        throw InvalidGeometry(os.str());
    }
    return *m;
}

} // namespace

std::string_view layer_type_name(const Layer& layer) {
    return std::visit(detail::overloaded{
                          [](const ConvLayer&) { return std::string_view{"conv"}; },
                          [](const PoolLayer&) { return std::string_view{"pool"}; },
                          [](const GlobalAvgPoolLayer&) { return std::string_view{"global_avg_pool"}; },
                          [](const FlattenLayer&) { return std::string_view{"flatten"}; },
                          [](const DenseLayer&) { return std::string_view{"dense"}; },
                      },
                      layer);
}

bool is_boundary(const Layer& layer) {
    return std::holds_alternative<FlattenLayer>(layer) || std::holds_alternative<GlobalAvgPoolLayer>(layer);
}

std::optional<std::size_t> boundary_index(const NetworkSpec& net) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (is_boundary(net.layers[i])) return i;
    }
    return std::nullopt;
}

std::optional<std::int64_t> window_output_size(std::int64_t input, std::int64_t kernel, std::int64_t stride,
                                               std::int64_t padding, std::int64_t dilation) {
    if (input < 1 || kernel < 1 || stride < 1 || padding < 0 || dilation < 1) return std::nullopt;
    const std::int64_t span = dilation * (kernel - 1) + 1;
    const std::int64_t room = input + 2 * padding - span;
    if (room < 0) return std::nullopt;
    return room / stride + 1;
}

TensorShape output_shape(const Layer& layer, const TensorShape& in) {
    return std::visit(
        detail::overloaded{
            [&](const ConvLayer& c) {
                return TensorShape{window_or_throw(in, c.kernel, c.stride, c.padding, c.dilation), c.out_channels};
            },
            [&](const PoolLayer& p) {
                return TensorShape{window_or_throw(in, p.kernel, p.stride, p.padding, 1), in.channels};
            },
            [&](const GlobalAvgPoolLayer&) { return TensorShape{1, in.channels}; },
            [&](const FlattenLayer&) { return TensorShape{1, flat_length(in)}; },
            [&](const DenseLayer& d) { return TensorShape{1, d.out_features}; },
        },
        layer);
}

std::vector<TensorShape> propagate_shapes(const NetworkSpec& net) {
    std::vector<TensorShape> shapes;
    shapes.reserve(net.layers.size() + 1);
    shapes.push_back(net.input);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        try {
            shapes.push_back(output_shape(net.layers[i], shapes.back()));
        } catch (const InvalidGeometry& e) {
            std::ostringstream os;
            os << "layer " << i << " (" << layer_type_name(net.layers[i]) << "): " << e.what();
            throw InvalidGeometry(os.str());
        }
    }
    return shapes;
}

bool ValidationReport::has(ViolationKind kind) const {
    for (const auto& v : violations) {
        if (v.kind == kind) return true;
    }
    return false;
}

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    for (const auto& v : violations) {
        if (v.layer) os << "layer " << *v.layer << ": ";
        os << v.message << '\n';
    }
    return os.str();
}

ValidationReport validate(const NetworkSpec& net) {
    ValidationReport report;
    auto add = [&](ViolationKind kind, std::optional<std::size_t> layer, std::string msg) {
        report.violations.push_back({kind, layer, std::move(msg)});
    };
    auto require = [&](bool cond, std::size_t i, const char* msg) {
        if (!cond) add(ViolationKind::parameter, i, msg);
    };

    if (net.input.spatial < 1) add(ViolationKind::parameter, std::nullopt, "input spatial >= 1");
    if (net.input.channels < 1) add(ViolationKind::parameter, std::nullopt, "input channels >= 1");

    bool seen_boundary = false;
    bool seen_dense = false;
    bool seen_feature_layer = false;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& layer = net.layers[i];
        std::visit(detail::overloaded{
                       [&](const ConvLayer& c) {
                           require(c.out_channels >= 1, i, "out_channels >= 1");
                           require(c.kernel >= 1, i, "kernel >= 1");
                           require(c.stride >= 1, i, "stride >= 1");
                           require(c.padding >= 0, i, "padding >= 0");
                           require(c.dilation >= 1, i, "dilation >= 1");
                       },
                       [&](const PoolLayer& p) {
                           require(p.kernel >= 1, i, "kernel >= 1");
                           require(p.stride >= 1, i, "stride >= 1");
                           require(p.padding >= 0, i, "padding >= 0");
                           require(2 * p.padding <= p.kernel, i, "pool padding <= kernel / 2");
                       },
                       [&](const GlobalAvgPoolLayer&) {},
                       [&](const FlattenLayer&) {},
                       [&](const DenseLayer& d) { require(d.out_features >= 1, i, "out_features >= 1"); },
                   },
                   layer);

        const bool feature_layer = std::holds_alternative<ConvLayer>(layer) || std::holds_alternative<PoolLayer>(layer);
        if (feature_layer) {
            if (seen_boundary || seen_dense) {
                add(ViolationKind::structure, i, std::string(layer_type_name(layer)) + " after dense boundary");
            }
            seen_feature_layer = true;
        } else if (is_boundary(layer)) {
            if (seen_boundary) {
                add(ViolationKind::structure, i, "more than one flatten/global_avg_pool boundary");
            } else if (seen_dense) {
                add(ViolationKind::structure, i, "boundary after dense layer");
            }
            seen_boundary = true;
        } else {
            if (!seen_boundary && !seen_dense) {
                if (seen_feature_layer) {
                    add(ViolationKind::structure, i, "dense layer needs a flatten or global_avg_pool boundary first");
                } else if (net.input.spatial != 1) {
                    add(ViolationKind::structure, i, "dense-only network needs input spatial 1");
                }
            }
            seen_dense = true;
        }
    }

    if (!report.ok()) return report;

    TensorShape shape = net.input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        try {
            shape = output_shape(net.layers[i], shape);
        } catch (const InvalidGeometry& e) {
            add(ViolationKind::geometry, i, e.what());
            break;
        } catch (const ArithmeticOverflow& e) {
            add(ViolationKind::geometry, i, e.what());
            break;
        }
    }
    return report;
}

NetworkSpec with_input_spatial(NetworkSpec net, std::int64_t spatial) {
    net.input.spatial = spatial;
    return net;
}

} // namespace netrescale
