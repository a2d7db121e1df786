#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "netrescale/arch.hpp"
#include "netrescale/cost.hpp"
#include "netrescale/search.hpp"
#include "netrescale/solvers.hpp"
#include "netrescale/verify.hpp"

namespace netrescale {

inline constexpr int format_version = 1;
inline constexpr std::string_view tool_version = "0.1.0";

// Architecture documents:
//   {"format_version": 1, "name": ..., "input": {"spatial": N, "channels": D},
//    "layers": [{"type": "conv", "out_channels", "kernel", "stride", "padding",
//                "dilation", "bias"}, {"type": "pool", "kind", "kernel",
//                "stride", "padding"}, {"type": "global_avg_pool"},
//               {"type": "flatten"}, {"type": "dense", "out_features", "bias"}]}
// Unknown fields are rejected. Missing optional fields take their defaults
// (stride 1, padding 0, dilation 1, bias false; pool kind max, stride = kernel).
// Structural problems throw ParseError with the offending path.
nlohmann::json network_to_json(const NetworkSpec& net);
NetworkSpec network_from_json(const nlohmann::json& j);

// Parses text; syntax errors carry the line and column.
nlohmann::json parse_json_text(std::string_view text);
nlohmann::json read_json_file(const std::string& path);

// Self-contained record of one candidate: both networks, the solution tuple
// by field name, costs of both networks and the deltas.
nlohmann::json solution_document(const NetworkSpec& original, const SolutionCandidate& candidate);

struct SolutionRecord {
    NetworkSpec original;
    SolutionCandidate candidate;
};
SolutionRecord solution_from_json(const nlohmann::json& j);

nlohmann::json cost_report_to_json(const NetworkSpec& net, const CostReport& report);
nlohmann::json verification_to_json(const VerificationReport& report);

// {"approaches": [1, 4] or ["I", "IV"], "budget_mode": "params",
//  "resolutions": [..] (omitted: all of (N, 2N]), "ranges": {"kernel": [lo, hi], ...},
//  "slack": 0, "slack_kind": "absolute"|"positive", "sample_count": 4,
//  "seed": 0, "threads": 0}
SearchConfig search_config_from_json(const nlohmann::json& j);

} // namespace netrescale
