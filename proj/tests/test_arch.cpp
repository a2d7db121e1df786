#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "netrescale/arch.hpp"
#include "netrescale/errors.hpp"
#include "nets.hpp"

using namespace netrescale;

namespace {

// Counts window placements by sliding the window start from -P.
std::int64_t count_windows(std::int64_t n, std::int64_t k, std::int64_t s, std::int64_t p, std::int64_t d) {
    std::int64_t count = 0;
    for (std::int64_t start = -p; start + d * (k - 1) <= n - 1 + p; start += s) ++count;
    return count;
}

NetworkSpec single_conv(std::int64_t spatial, ConvLayer conv) {
    return NetworkSpec{"single", {spatial, 1}, {conv}};
}

bool mentions(const ValidationReport& r, std::string_view text) {
    for (const auto& v : r.violations) {
        if (v.message.find(text) != std::string::npos) return true;
    }
    return false;
}

} // namespace

TEST_CASE("same padding keeps the spatial size", "[arch][shapes]") {
    const auto shapes = propagate_shapes(single_conv(32, ConvLayer{4, 3, 1, 1, 1}));
    REQUIRE(shapes.size() == 2);
    CHECK(shapes[1] == TensorShape{32, 4});
}

TEST_CASE("dilated strided conv output size", "[arch][shapes]") {
    // floor((56 - 2*4 - 1) / 2 + 1) = 24
    const auto shapes = propagate_shapes(single_conv(56, ConvLayer{4, 5, 2, 0, 2}));
    CHECK(shapes[1].spatial == 24);
}

TEST_CASE("kernel larger than the input is invalid geometry", "[arch][shapes]") {
    CHECK_THROWS_AS(propagate_shapes(single_conv(4, ConvLayer{4, 5, 1, 0, 1})), InvalidGeometry);
    CHECK_FALSE(window_output_size(4, 5, 1, 0, 1).has_value());
}

TEST_CASE("window formula matches a sliding-window counter", "[arch][shapes][property]") {
    for (std::int64_t n = 1; n <= 64; ++n)
        for (std::int64_t k = 1; k <= 8; ++k)
            for (std::int64_t s = 1; s <= 5; ++s)
                for (std::int64_t p = 0; p <= 5; ++p)
                    for (std::int64_t d = 1; d <= 4; ++d) {
                        const auto got = window_output_size(n, k, s, p, d);
                        const auto want = count_windows(n, k, s, p, d);
                        if (want == 0) {
                            REQUIRE_FALSE(got.has_value());
                        } else {
                            REQUIRE(got == want);
                        }
                    }
}

TEST_CASE("unpadded undilated windows reduce to (N - C) / S + 1", "[arch][shapes]") {
    for (std::int64_t n = 8; n <= 40; ++n)
        for (std::int64_t c = 1; c <= 8; ++c)
            for (std::int64_t s = 1; s <= 5; ++s) CHECK(window_output_size(n, c, s, 0, 1) == (n - c) / s + 1);
}

TEST_CASE("global average pooling always yields 1x1xC", "[arch][shapes]") {
    std::mt19937 rng(7);
    for (int i = 0; i < 100; ++i) {
        const TensorShape in{std::uniform_int_distribution<std::int64_t>(1, 300)(rng),
                             std::uniform_int_distribution<std::int64_t>(1, 512)(rng)};
        CHECK(output_shape(GlobalAvgPoolLayer{}, in) == TensorShape{1, in.channels});
    }
}

TEST_CASE("lenet shapes propagate through every boundary", "[arch][shapes]") {
    const auto shapes = propagate_shapes(testing::mnist_lenet());
    REQUIRE(shapes.size() == 8);
    CHECK(shapes[0] == TensorShape{28, 1});
    CHECK(shapes[1] == TensorShape{24, 10});
    CHECK(shapes[2] == TensorShape{12, 10});
    CHECK(shapes[3] == TensorShape{8, 10});
    CHECK(shapes[4] == TensorShape{4, 10});
    CHECK(shapes[5] == TensorShape{1, 160});
    CHECK(shapes[7] == TensorShape{1, 10});
}

TEST_CASE("propagation is deterministic", "[arch][shapes]") {
    const auto net = testing::mnist_lenet();
    CHECK(propagate_shapes(net) == propagate_shapes(net));
}

TEST_CASE("validate accepts a LeNet-style net", "[arch][validate]") {
    CHECK(validate(testing::mnist_lenet()).ok());
    CHECK(validate(testing::mnist_plain()).ok());
}

TEST_CASE("validate reports parameter violations", "[arch][validate]") {
    auto net = testing::mnist_lenet();
    std::get<ConvLayer>(net.layers[0]).stride = 0;
    const auto report = validate(net);
    REQUIRE_FALSE(report.ok());
    CHECK(report.has(ViolationKind::parameter));
    CHECK(mentions(report, "stride >= 1"));
    CHECK(report.violations[0].layer == 0u);

    auto neg = testing::mnist_lenet();
    std::get<ConvLayer>(neg.layers[2]).padding = -1;
    std::get<DenseLayer>(neg.layers[5]).out_features = 0;
    const auto r2 = validate(neg);
    CHECK(mentions(r2, "padding >= 0"));
    CHECK(mentions(r2, "out_features >= 1"));
    CHECK(r2.violations.size() == 2);
}

TEST_CASE("validate rejects conv after the dense boundary", "[arch][validate]") {
    NetworkSpec net{"bad", {8, 1}, {FlattenLayer{}, DenseLayer{10}, ConvLayer{4, 3}}};
    const auto report = validate(net);
    CHECK(report.has(ViolationKind::structure));
    CHECK(mentions(report, "conv after dense boundary"));

    NetworkSpec dense_first{"bad", {1, 8}, {DenseLayer{10}, ConvLayer{4, 1}}};
    CHECK(mentions(validate(dense_first), "conv after dense boundary"));
}

TEST_CASE("validate structural rules around the boundary", "[arch][validate]") {
    NetworkSpec two_boundaries{"b", {8, 1}, {ConvLayer{2, 3}, FlattenLayer{}, GlobalAvgPoolLayer{}, DenseLayer{2}}};
    CHECK(mentions(validate(two_boundaries), "more than one"));

    NetworkSpec no_boundary{"b", {8, 1}, {ConvLayer{2, 3}, DenseLayer{2}}};
    CHECK(mentions(validate(no_boundary), "boundary first"));

    NetworkSpec dense_only{"d", {1, 10}, {DenseLayer{10}}};
    CHECK(validate(dense_only).ok());

    NetworkSpec dense_on_image{"d", {4, 10}, {DenseLayer{10}}};
    CHECK(validate(dense_on_image).has(ViolationKind::structure));
}

TEST_CASE("validate flags pooling padding above half the kernel", "[arch][validate]") {
    NetworkSpec net{"p", {8, 1}, {PoolLayer{PoolKind::avg, 3, 1, 2}}};
    CHECK(mentions(validate(net), "pool padding"));
}

TEST_CASE("validate reports geometry separately", "[arch][validate]") {
    const auto net = testing::mnist_lenet(7);
    const auto report = validate(net);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].kind == ViolationKind::geometry);
    CHECK_FALSE(report.has(ViolationKind::structure));
}
