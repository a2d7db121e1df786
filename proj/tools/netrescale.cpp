// netrescale: budget-preserving resolution scaling for small CNNs.
//
// Exit codes: 0 success, 1 verification failure, 2 parse or validation
// error, 3 invalid geometry, 4 structure mismatch.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "netrescale/arch.hpp"
#include "netrescale/cost.hpp"
#include "netrescale/document.hpp"
#include "netrescale/errors.hpp"
#include "netrescale/search.hpp"
#include "netrescale/solvers.hpp"
#include "netrescale/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace netrescale;

namespace {

enum ExitCode : int { ok = 0, verification_failed = 1, parse_failed = 2, bad_geometry = 3, bad_structure = 4 };

// Carries an exit code out of a subcommand.
struct Exit {
    int code;
};

NetworkSpec load_network(const std::string& path) {
    NetworkSpec net = network_from_json(read_json_file(path));
    const auto report = validate(net);
    if (report.has(ViolationKind::parameter) || report.has(ViolationKind::structure)) {
        std::cerr << path << ": invalid architecture\n" << report.to_string();
        throw Exit{parse_failed};
    }
    if (report.has(ViolationKind::geometry)) {
        std::cerr << path << ": invalid geometry\n" << report.to_string();
        throw Exit{bad_geometry};
    }
    return net;
}

IntRange parse_range(const std::string& text) {
    const auto colon = text.find(':');
    try {
        std::size_t used = 0;
        if (colon == std::string::npos) {
            const std::int64_t v = std::stoll(text, &used);
            if (used != text.size()) throw std::invalid_argument(text);
            return {v, v};
        }
        const std::string lo = text.substr(0, colon);
        const std::string hi = text.substr(colon + 1);
        std::size_t used_hi = 0;
        const IntRange r{std::stoll(lo, &used), std::stoll(hi, &used_hi)};
        if (used != lo.size() || used_hi != hi.size()) throw std::invalid_argument(text);
        return r;
    } catch (const std::exception&) {
        throw ParseError("range '" + text + "' must be lo:hi or a single integer");
    }
}

std::uint64_t seed_or_env(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
    if (flag) return *flag;
    if (const char* env = std::getenv("NETRESCALE_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ParseError("NETRESCALE_SEED must be an unsigned integer");
        }
    }
    return fallback;
}

std::string shape_text(const TensorShape& s) {
    std::ostringstream os;
    os << s.spatial << 'x' << s.spatial << 'x' << s.channels;
    return os.str();
}

std::string tuple_text(const SolutionCandidate& c) {
    std::ostringstream os;
    const auto names = tuple_field_names(c.approach);
    for (std::size_t i = 0; i < c.tuple.size(); ++i) {
        os << (i ? " " : "") << (i < names.size() ? names[i] : "?") << '=' << c.tuple[i];
    }
    return os.str();
}

void write_documents(const fs::path& dir, const NetworkSpec& original, const std::vector<SolutionCandidate>& list) {
    fs::create_directories(dir);
    const std::string stem = original.name.empty() ? "net" : original.name;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& c = list[i];
        std::ostringstream name;
        name << stem << "_a" << approach_number(c.approach) << '_' << to_string(c.budget_mode) << "_n"
             << c.new_resolution << '_' << std::setw(4) << std::setfill('0') << i << ".json";
        std::ofstream out(dir / name.str());
        out << solution_document(original, c).dump(2) << '\n';
        if (!out) throw std::runtime_error("cannot write " + (dir / name.str()).string());
    }
}

void print_candidates(const std::vector<SolutionCandidate>& list) {
    for (const auto& c : list) {
        std::cout << "  N'=" << std::setw(4) << c.new_resolution << "  " << std::setw(3) << approach_label(c.approach)
                  << "  d_params=" << std::setw(8) << c.deltas.params << "  d_flops=" << std::setw(10)
                  << c.deltas.flops << "  " << tuple_text(c) << '\n';
    }
}

int cmd_cost(const std::string& arch, bool as_json) {
    const NetworkSpec net = load_network(arch);
    const CostReport report = cost_report(net);
    if (as_json) {
        std::cout << cost_report_to_json(net, report).dump(2) << '\n';
        return ok;
    }
    std::cout << (net.name.empty() ? "(unnamed)" : net.name) << "  input " << shape_text(net.input) << '\n';
    std::cout << std::left << std::setw(6) << "layer" << std::setw(17) << "type" << std::setw(14) << "out_shape"
              << std::right << std::setw(14) << "params" << std::setw(16) << "flops" << '\n';
    for (std::size_t i = 0; i < report.per_layer.size(); ++i) {
        const auto& lc = report.per_layer[i];
        std::cout << std::left << std::setw(6) << i << std::setw(17) << layer_type_name(net.layers[i]) << std::setw(14)
                  << shape_text(lc.out_shape) << std::right << std::setw(14) << lc.params << std::setw(16) << lc.flops
                  << '\n';
    }
    std::cout << std::left << std::setw(37) << "total" << std::right << std::setw(14) << report.total_params
              << std::setw(16) << report.total_flops << '\n';
    return ok;
}

struct SolveArgs {
    std::string arch;
    int approach = 0;
    std::string mode = "params";
    std::int64_t resolution = 0;
    std::string kernel = "3:8";
    std::string stride = "1:5";
    std::string padding = "0:5";
    std::string dilation = "2:4";
    std::optional<std::int64_t> slack;
    std::string slack_kind = "absolute";
    std::optional<std::size_t> sample;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool json = false;
};

int cmd_solve(const SolveArgs& a) {
    const NetworkSpec net = load_network(a.arch);
    const auto approach = approach_from_number(a.approach);
    const auto mode = budget_mode_from_string(a.mode);
    if (!approach) throw ParseError("--approach must be 1..4");
    if (!mode) throw ParseError("--mode must be params or flops");
    if (a.resolution <= net.input.spatial) throw ParseError("--resolution must exceed the input resolution");
    EnumRanges ranges{parse_range(a.kernel), parse_range(a.stride), parse_range(a.padding), parse_range(a.dilation)};
    if (auto err = check_ranges(ranges); !err.empty()) throw ParseError(err);
    if (a.slack && *a.slack < 0) throw ParseError("--slack must be >= 0");
    if (a.slack_kind != "absolute" && a.slack_kind != "positive") throw ParseError("--slack-kind must be absolute or positive");

    std::vector<SolutionCandidate> list = solve(net, *approach, a.resolution, ranges, *mode);
    const std::size_t solved = list.size();
    if (a.slack) {
        const SlackKind kind = a.slack_kind == "positive" ? SlackKind::positive : SlackKind::absolute;
        std::erase_if(list, [&](const SolutionCandidate& c) { return !passes_slack(budget_delta(c), *a.slack, kind); });
    }
    if (a.sample && !list.empty()) list = sample_candidates(list, *a.sample, seed_or_env(a.seed, 0));
    if (!a.out.empty()) write_documents(a.out, net, list);

    if (a.json) {
        json docs = json::array();
        for (const auto& c : list) docs.push_back(solution_document(net, c));
        std::cout << json{{"format_version", format_version}, {"solved", solved}, {"count", list.size()}, {"candidates", docs}}
                         .dump(2)
                  << '\n';
        return ok;
    }
    std::cout << "approach " << approach_label(*approach) << ", " << to_string(*mode) << " budget, N "
              << net.input.spatial << " -> " << a.resolution << ": " << solved << " solution(s)";
    if (list.size() != solved) std::cout << ", " << list.size() << " kept";
    std::cout << '\n';
    std::cout << "count " << list.size() << '\n';
    print_candidates(list);
    return ok;
}

struct SweepArgs {
    std::string arch;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool export_all = false;
    bool json = false;
};

int cmd_sweep(const SweepArgs& a) {
    const NetworkSpec net = load_network(a.arch);
    SearchConfig cfg = a.config.empty() ? SearchConfig{} : search_config_from_json(read_json_file(a.config));
    cfg.rng_seed = seed_or_env(a.seed, cfg.rng_seed);

    const SweepResult result = sweep(net, cfg);
    auto retained = result.flattened();
    std::vector<SolutionCandidate> exported;
    if (!a.out.empty() && !retained.empty()) {
        exported = a.export_all ? retained
                                : sample_candidates(retained, static_cast<std::size_t>(cfg.sample_count), cfg.rng_seed);
        write_documents(a.out, net, exported);
    }

    if (a.json) {
        json rows = json::array();
        for (const auto& row : result.rows) {
            json deltas = json::array();
            for (const auto& c : result.by_resolution.at(row.resolution)) {
                if (c.approach == row.approach) deltas.push_back(budget_delta(c));
            }
            rows.push_back({{"resolution", row.resolution},
                            {"approach", approach_number(row.approach)},
                            {"solved", row.solved},
                            {"retained", row.retained},
                            {"budget_deltas", deltas}});
        }
        std::cout << json{{"format_version", format_version},
                          {"budget_mode", to_string(cfg.budget_mode)},
                          {"rows", rows},
                          {"total_retained", result.total_retained()},
                          {"exported", exported.size()}}
                         .dump(2)
                  << '\n';
        return ok;
    }
    std::cout << "sweep of " << (net.name.empty() ? "(unnamed)" : net.name) << ", " << to_string(cfg.budget_mode)
              << " budget, slack " << cfg.slack << '\n';
    std::cout << std::setw(6) << "N'" << std::setw(10) << "approach" << std::setw(10) << "solved" << std::setw(10)
              << "retained" << std::setw(14) << "min_delta" << std::setw(14) << "max_delta" << '\n';
    for (const auto& row : result.rows) {
        std::int64_t lo = 0, hi = 0;
        bool first = true;
        for (const auto& c : result.by_resolution.at(row.resolution)) {
            if (c.approach != row.approach) continue;
            const auto d = budget_delta(c);
            lo = first ? d : std::min(lo, d);
            hi = first ? d : std::max(hi, d);
            first = false;
        }
        std::cout << std::setw(6) << row.resolution << std::setw(10) << approach_label(row.approach) << std::setw(10)
                  << row.solved << std::setw(10) << row.retained << std::setw(14) << lo << std::setw(14) << hi << '\n';
    }
    std::cout << "total retained " << result.total_retained() << '\n';
    if (!a.out.empty()) std::cout << "exported " << exported.size() << " to " << a.out << '\n';
    return ok;
}

int cmd_verify(const std::string& path, bool as_json) {
    const SolutionRecord rec = solution_from_json(read_json_file(path));
    for (const NetworkSpec* net : {&rec.original, &rec.candidate.modified_net}) {
        const auto report = validate(*net);
        if (report.has(ViolationKind::parameter) || report.has(ViolationKind::structure)) {
            std::cerr << path << ": invalid network\n" << report.to_string();
            return parse_failed;
        }
    }
    VerificationReport report = verify_candidate(rec.original, rec.candidate);

    // Stored totals must agree with a fresh cost report.
    const json doc = read_json_file(path);
    auto check_total = [&](const char* key, const NetworkSpec& net) {
        if (!doc.contains(key)) return;
        const CostReport r = cost_report(net);
        if (doc[key]["params"].get<std::uint64_t>() != r.total_params ||
            doc[key]["flops"].get<std::uint64_t>() != r.total_flops) {
            report.violations.push_back(std::string("stored ") + key + " does not match the network");
        }
    };
    check_total("original_cost", baseline_for(rec.original, rec.candidate.approach));
    check_total("modified_cost", rec.candidate.modified_net);

    if (as_json) {
        std::cout << verification_to_json(report).dump(2) << '\n';
    } else {
        std::cout << "scope equality     " << (report.scope_equality_holds ? "holds" : "FAILS") << '\n'
                  << "interface shape    " << (report.interface_shape_match ? "matches" : "DIFFERS") << '\n'
                  << "params delta       " << report.whole_network_param_delta << '\n'
                  << "flops delta        " << report.whole_network_flops_delta << '\n';
        for (const auto& v : report.violations) std::cout << "violation: " << v << '\n';
        std::cout << (report.passed() ? "PASS" : "FAIL") << '\n';
    }
    return report.passed() ? ok : verification_failed;
}

struct SampleArgs {
    std::string profile = "mnist";
    std::size_t count = 10;
    std::optional<std::uint64_t> seed;
    bool drop_pooling = false;
    bool all = false;
    std::string out;
};

int cmd_sample(const SampleArgs& a) {
    const auto profile = dataset_profile_from_string(a.profile);
    if (!profile) throw ParseError("--profile must be mnist, fmnist or cifar10");
    OriginalGridOptions opts;
    opts.drop_pooling = a.drop_pooling;
    const auto nets = a.all ? original_network_grid(*profile, opts)
                            : sample_original_networks(*profile, a.count, seed_or_env(a.seed, 0), opts);
    if (!a.out.empty()) fs::create_directories(a.out);
    json names = json::array();
    for (std::size_t i = 0; i < nets.size(); ++i) {
        names.push_back(nets[i].name);
        if (a.out.empty()) continue;
        std::ostringstream file;
        file << std::setw(3) << std::setfill('0') << i << '_' << nets[i].name << ".json";
        std::ofstream(fs::path(a.out) / file.str()) << network_to_json(nets[i]).dump(2) << '\n';
    }
    if (a.out.empty()) {
        json all = json::array();
        for (const auto& n : nets) all.push_back(network_to_json(n));
        std::cout << all.dump(2) << '\n';
    } else {
        std::cout << "wrote " << nets.size() << " architecture(s) to " << a.out << '\n';
    }
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Budget-preserving resolution scaling for CNNs"};
    app.require_subcommand(1);

    std::string cost_file;
    bool cost_json = false;
    auto* cost = app.add_subcommand("cost", "Per-layer shapes, parameters and FLOPS");
    cost->add_option("arch", cost_file, "Architecture JSON")->required();
    cost->add_flag("--json", cost_json, "Print JSON");

    SolveArgs solve_args;
    auto* solve_cmd = app.add_subcommand("solve", "Solutions of one approach at one resolution");
    solve_cmd->add_option("arch", solve_args.arch, "Architecture JSON")->required();
    solve_cmd->add_option("--approach", solve_args.approach, "Approach 1-4")->required();
    solve_cmd->add_option("--mode", solve_args.mode, "Budget: params or flops");
    solve_cmd->add_option("--resolution", solve_args.resolution, "New input resolution N'")->required();
    solve_cmd->add_option("--kernel", solve_args.kernel, "Kernel range lo:hi");
    solve_cmd->add_option("--stride", solve_args.stride, "Stride range lo:hi");
    solve_cmd->add_option("--padding", solve_args.padding, "Padding range lo:hi");
    solve_cmd->add_option("--dilation", solve_args.dilation, "Dilation range lo:hi");
    solve_cmd->add_option("--slack", solve_args.slack, "Keep candidates within this whole-network budget delta");
    solve_cmd->add_option("--slack-kind", solve_args.slack_kind, "absolute (|d| <= slack) or positive (0 < d < slack)");
    solve_cmd->add_option("--sample", solve_args.sample, "Keep k seeded random candidates");
    solve_cmd->add_option("--seed", solve_args.seed, "Sampling seed (default: $NETRESCALE_SEED or 0)");
    solve_cmd->add_option("--out", solve_args.out, "Directory for solution documents");
    solve_cmd->add_flag("--json", solve_args.json, "Print JSON");

    SweepArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "Solve over a set of resolutions and approaches");
    sweep_cmd->add_option("arch", sweep_args.arch, "Architecture JSON")->required();
    sweep_cmd->add_option("--config", sweep_args.config, "Search config JSON");
    sweep_cmd->add_option("--seed", sweep_args.seed, "Sampling seed (overrides the config)");
    sweep_cmd->add_option("--out", sweep_args.out, "Export sampled solution documents here");
    sweep_cmd->add_flag("--export-all", sweep_args.export_all, "Export every retained candidate");
    sweep_cmd->add_flag("--json", sweep_args.json, "Print JSON");

    std::string verify_file;
    bool verify_json = false;
    auto* verify_cmd = app.add_subcommand("verify", "Independently re-check a solution document");
    verify_cmd->add_option("solution", verify_file, "Solution document")->required();
    verify_cmd->add_flag("--json", verify_json, "Print JSON");

    SampleArgs sample_args;
    auto* sample_cmd = app.add_subcommand("sample", "Draw original LeNet-style networks");
    sample_cmd->add_option("--profile", sample_args.profile, "mnist, fmnist or cifar10");
    sample_cmd->add_option("--count", sample_args.count, "Number of networks");
    sample_cmd->add_option("--seed", sample_args.seed, "Seed (default: $NETRESCALE_SEED or 0)");
    sample_cmd->add_flag("--drop-pooling", sample_args.drop_pooling, "Omit the pooling layers");
    sample_cmd->add_flag("--all", sample_args.all, "Emit the whole valid grid");
    sample_cmd->add_option("--out", sample_args.out, "Directory for architecture documents");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : parse_failed;
    }

    try {
        if (*cost) return cmd_cost(cost_file, cost_json);
        if (*solve_cmd) return cmd_solve(solve_args);
        if (*sweep_cmd) return cmd_sweep(sweep_args);
        if (*verify_cmd) return cmd_verify(verify_file, verify_json);
        if (*sample_cmd) return cmd_sample(sample_args);
    } catch (const Exit& e) {
        return e.code;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return parse_failed;
    } catch (const InvalidGeometry& e) {
        std::cerr << "invalid geometry: " << e.what() << '\n';
        return bad_geometry;
    } catch (const ArithmeticOverflow& e) {
        std::cerr << "overflow: " << e.what() << '\n';
        return bad_geometry;
    } catch (const StructureMismatch& e) {
        std::cerr << "structure mismatch: " << e.what() << '\n';
        return bad_structure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return parse_failed;
    }
    return ok;
}
