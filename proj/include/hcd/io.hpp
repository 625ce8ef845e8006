#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcd/builtins.hpp"
#include "hcd/conley.hpp"
#include "hcd/graph.hpp"
#include "hcd/guard_verify.hpp"
#include "hcd/lyapunov.hpp"
#include "hcd/simulate.hpp"
#include "hcd/suspension.hpp"

namespace hcd {

using Json = nlohmann::ordered_json;

const char* tool_version();

// System files. Malformed input raises ParseError with the offending path.
HybridSystemDef system_from_json(const Json& j);
Json system_to_json(const HybridSystemDef& sys);
HybridSystemDef load_system(const std::string& path);

Json to_json(const State& s);
Json to_json(const ExecutionClassification& c);

// Columns: arc_index, t, mode, x0, x1, ...
void write_trace_csv(std::ostream& os, const ExecutionTrace& tr);
// Columns: src_box, dst_box, kind (node ids of the graph).
void write_edges_csv(std::ostream& os, const TransitionGraph& g);
// One row per node: id, mode, index, centre, recurrent flag, SCC, box Lyapunov value.
void write_boxes_csv(std::ostream& os, const TransitionGraph& g, const ChainClassSet& c, const BoxLyapunov& L);
// Columns: t, variant, mode_or_guard_id, coords..., s.
void write_suspension_csv(std::ostream& os, const HybridSystemDef& sys, const std::vector<SuspensionSample>& samples);

Json analysis_json(const TransitionGraph& g, const ChainClassSet& c, const std::vector<AttractorRepellerPair>& pairs,
                   const BoxLyapunov& L, const Json& parameters);
Json guard_report_json(const GuardReport& r);
Json lyapunov_report_json(const LyapunovReport& r);

// Closed-form quantities for a builtin.
Json oracle_report(BuiltinId id, const BuiltinParams& p);

}  // namespace hcd
