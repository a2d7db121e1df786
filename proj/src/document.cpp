#include "netrescale/document.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "netrescale/detail/overloaded.hpp"
#include "netrescale/errors.hpp"

namespace netrescale {

using nlohmann::json;

namespace {

// Reads one JSON object, tracking which keys were consumed so that
// leftovers can be reported as unknown fields.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("expected an object");
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(path_ + ": " + msg); }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& child(const std::string& key) {
        if (!j_.contains(key)) fail("missing field '" + key + "'");
        seen_.insert(key);
        return j_.at(key);
    }

    std::int64_t integer(const std::string& key) {
        const json& v = child(key);
        if (!v.is_number_integer()) fail("field '" + key + "' must be an integer");
        return v.get<std::int64_t>();
    }

    std::int64_t integer_or(const std::string& key, std::int64_t fallback) {
        return has(key) ? integer(key) : fallback;
    }

    bool flag_or(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = child(key);
        if (!v.is_boolean()) fail("field '" + key + "' must be a boolean");
        return v.get<bool>();
    }

    std::string text(const std::string& key) {
        const json& v = child(key);
        if (!v.is_string()) fail("field '" + key + "' must be a string");
        return v.get<std::string>();
    }

    std::string text_or(const std::string& key, std::string fallback) {
        return has(key) ? text(key) : std::move(fallback);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) fail("unknown field '" + key + "'");
        }
    }

    const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void check_format_version(ObjectReader& r) {
    if (r.has("format_version") && r.integer("format_version") != format_version) {
        r.fail("unsupported format_version");
    }
}

json shape_json(const TensorShape& s) { return {{"spatial", s.spatial}, {"channels", s.channels}}; }

Layer layer_from_json(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    const std::string type = r.text("type");
    Layer layer;
    if (type == "conv") {
        ConvLayer c;
        c.out_channels = r.integer("out_channels");
        c.kernel = r.integer("kernel");
        c.stride = r.integer_or("stride", 1);
        c.padding = r.integer_or("padding", 0);
        c.dilation = r.integer_or("dilation", 1);
        c.has_bias = r.flag_or("bias", false);
        layer = c;
    } else if (type == "pool") {
        PoolLayer p;
        const std::string kind = r.text_or("kind", "max");
        if (kind == "max") {
            p.kind = PoolKind::max;
        } else if (kind == "avg") {
            p.kind = PoolKind::avg;
        } else {
            r.fail("pool kind must be 'max' or 'avg'");
        }
        p.kernel = r.integer("kernel");
        p.stride = r.integer_or("stride", p.kernel);
        p.padding = r.integer_or("padding", 0);
        layer = p;
    } else if (type == "global_avg_pool") {
        layer = GlobalAvgPoolLayer{};
    } else if (type == "flatten") {
        layer = FlattenLayer{};
    } else if (type == "dense") {
        DenseLayer d;
        d.out_features = r.integer("out_features");
        d.has_bias = r.flag_or("bias", false);
        layer = d;
    } else {
        r.fail("unknown layer type '" + type + "'");
    }
    r.finish();
    return layer;
}

json layer_to_json(const Layer& layer) {
    return std::visit(detail::overloaded{
                          [](const ConvLayer& c) {
                              return json{{"type", "conv"},         {"out_channels", c.out_channels},
                                          {"kernel", c.kernel},     {"stride", c.stride},
                                          {"padding", c.padding},   {"dilation", c.dilation},
                                          {"bias", c.has_bias}};
                          },
                          [](const PoolLayer& p) {
                              return json{{"type", "pool"},
                                          {"kind", p.kind == PoolKind::max ? "max" : "avg"},
                                          {"kernel", p.kernel},
                                          {"stride", p.stride},
                                          {"padding", p.padding}};
                          },
                          [](const GlobalAvgPoolLayer&) { return json{{"type", "global_avg_pool"}}; },
                          [](const FlattenLayer&) { return json{{"type", "flatten"}}; },
                          [](const DenseLayer& d) {
                              return json{{"type", "dense"}, {"out_features", d.out_features}, {"bias", d.has_bias}};
                          },
                      },
                      layer);
}

json totals_json(const CostReport& r) { return {{"params", r.total_params}, {"flops", r.total_flops}}; }

} // namespace

json network_to_json(const NetworkSpec& net) {
    json layers = json::array();
    for (const auto& l : net.layers) layers.push_back(layer_to_json(l));
    return {{"format_version", format_version}, {"name", net.name}, {"input", shape_json(net.input)}, {"layers", layers}};
}

NetworkSpec network_from_json(const json& j) {
    ObjectReader r(j, "architecture");
    check_format_version(r);
    NetworkSpec net;
    net.name = r.text_or("name", "");
    {
        ObjectReader in(r.child("input"), "architecture.input");
        net.input.spatial = in.integer("spatial");
        net.input.channels = in.integer("channels");
        in.finish();
    }
    const json& layers = r.child("layers");
    if (!layers.is_array()) r.fail("field 'layers' must be an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        net.layers.push_back(layer_from_json(layers[i], "architecture.layers[" + std::to_string(i) + "]"));
    }
    r.finish();
    return net;
}

json parse_json_text(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what());
    }
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_json_text(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

json solution_document(const NetworkSpec& original, const SolutionCandidate& c) {
    json solution = json::object();
    const auto names = tuple_field_names(c.approach);
    for (std::size_t i = 0; i < names.size() && i < c.tuple.size(); ++i) solution[std::string(names[i])] = c.tuple[i];

    return {
        {"format_version", format_version},
        {"tool_version", tool_version},
        {"approach", approach_number(c.approach)},
        {"approach_label", approach_label(c.approach)},
        {"budget_mode", to_string(c.budget_mode)},
        {"new_resolution", c.new_resolution},
        {"scope", to_string(c.scope)},
        {"solution", solution},
        {"deltas", {{"params", c.deltas.params}, {"flops", c.deltas.flops}}},
        {"original", network_to_json(original)},
        {"original_cost", totals_json(cost_report(baseline_for(original, c.approach)))},
        {"modified", network_to_json(c.modified_net)},
        {"modified_cost", totals_json(cost_report(c.modified_net))},
    };
}

SolutionRecord solution_from_json(const json& j) {
    ObjectReader r(j, "solution_document");
    check_format_version(r);
    r.text_or("tool_version", "");
    SolutionRecord rec;
    auto& c = rec.candidate;

    const auto approach = approach_from_number(static_cast<int>(r.integer("approach")));
    if (!approach) r.fail("approach must be 1..4");
    c.approach = *approach;
    if (r.has("approach_label") && r.text("approach_label") != approach_label(c.approach)) {
        r.fail("approach_label does not match approach");
    }
    const auto mode = budget_mode_from_string(r.text("budget_mode"));
    if (!mode) r.fail("budget_mode must be 'params' or 'flops'");
    c.budget_mode = *mode;
    c.new_resolution = r.integer("new_resolution");
    const auto scope = scope_from_string(r.text("scope"));
    if (!scope) r.fail("unknown scope");
    c.scope = *scope;

    {
        ObjectReader sol(r.child("solution"), "solution_document.solution");
        for (auto name : tuple_field_names(c.approach)) c.tuple.push_back(sol.integer(std::string(name)));
        sol.finish();
    }
    {
        ObjectReader d(r.child("deltas"), "solution_document.deltas");
        c.deltas.params = d.integer("params");
        c.deltas.flops = d.integer("flops");
        d.finish();
    }
    rec.original = network_from_json(r.child("original"));
    c.modified_net = network_from_json(r.child("modified"));
    for (const char* key : {"original_cost", "modified_cost"}) {
        if (!r.has(key)) continue;
        ObjectReader cost(r.child(key), std::string("solution_document.") + key);
        cost.integer("params");
        cost.integer("flops");
        cost.finish();
    }
    r.finish();
    return rec;
}

json cost_report_to_json(const NetworkSpec& net, const CostReport& report) {
    json layers = json::array();
    for (std::size_t i = 0; i < report.per_layer.size(); ++i) {
        const auto& lc = report.per_layer[i];
        layers.push_back({{"index", i},
                          {"type", layer_type_name(net.layers[i])},
                          {"out_shape", shape_json(lc.out_shape)},
                          {"params", lc.params},
                          {"flops", lc.flops}});
    }
    return {{"format_version", format_version},
            {"name", net.name},
            {"input", shape_json(report.input)},
            {"layers", layers},
            {"total_params", report.total_params},
            {"total_flops", report.total_flops}};
}

json verification_to_json(const VerificationReport& report) {
    return {{"passed", report.passed()},
            {"scope_equality_holds", report.scope_equality_holds},
            {"whole_network_param_delta", report.whole_network_param_delta},
            {"whole_network_flops_delta", report.whole_network_flops_delta},
            {"interface_shape_match", report.interface_shape_match},
            {"violations", report.violations}};
}

SearchConfig search_config_from_json(const json& j) {
    ObjectReader r(j, "config");
    check_format_version(r);
    SearchConfig cfg;
    if (r.has("approaches")) {
        const json& list = r.child("approaches");
        if (!list.is_array()) r.fail("approaches must be an array");
        cfg.approaches.clear();
        for (const auto& item : list) {
            std::optional<Approach> a;
            if (item.is_number_integer()) a = approach_from_number(item.get<int>());
            if (item.is_string()) a = approach_from_label(item.get<std::string>());
            if (!a) r.fail("approaches entries must be 1..4 or I..IV");
            cfg.approaches.push_back(*a);
        }
    }
    if (r.has("budget_mode")) {
        const auto m = budget_mode_from_string(r.text("budget_mode"));
        if (!m) r.fail("budget_mode must be 'params' or 'flops'");
        cfg.budget_mode = *m;
    }
    if (r.has("resolutions")) {
        const json& list = r.child("resolutions");
        if (!list.is_array()) r.fail("resolutions must be an array");
        std::vector<std::int64_t> res;
        for (const auto& item : list) {
            if (!item.is_number_integer() || item.get<std::int64_t>() < 1) r.fail("resolutions must be positive integers");
            res.push_back(item.get<std::int64_t>());
        }
        cfg.resolutions = std::move(res);
    }
    if (r.has("ranges")) {
        ObjectReader rr(r.child("ranges"), "config.ranges");
        auto read = [&](const char* key, IntRange& out) {
            if (!rr.has(key)) return;
            const json& v = rr.child(key);
            if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
                rr.fail(std::string(key) + " must be [lo, hi]");
            }
            out = {v[0].get<std::int64_t>(), v[1].get<std::int64_t>()};
        };
        read("kernel", cfg.ranges.kernel);
        read("stride", cfg.ranges.stride);
        read("padding", cfg.ranges.padding);
        read("dilation", cfg.ranges.dilation);
        rr.finish();
        if (auto err = check_ranges(cfg.ranges); !err.empty()) rr.fail(err);
    }
    cfg.slack = r.integer_or("slack", 0);
    if (cfg.slack < 0) r.fail("slack must be >= 0");
    const std::string kind = r.text_or("slack_kind", "absolute");
    if (kind == "absolute") {
        cfg.slack_kind = SlackKind::absolute;
    } else if (kind == "positive") {
        cfg.slack_kind = SlackKind::positive;
    } else {
        r.fail("slack_kind must be 'absolute' or 'positive'");
    }
    cfg.sample_count = r.integer_or("sample_count", 4);
    if (cfg.sample_count < 1) r.fail("sample_count must be >= 1");
    cfg.rng_seed = static_cast<std::uint64_t>(r.integer_or("seed", 0));
    cfg.threads = static_cast<unsigned>(r.integer_or("threads", 0));
    r.finish();
    return cfg;
}

} // namespace netrescale
