#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hcd/builtins.hpp"
#include "hcd/chain.hpp"
#include "hcd/conley.hpp"
#include "hcd/error.hpp"
#include "hcd/graph.hpp"
#include "hcd/guard_verify.hpp"
#include "hcd/io.hpp"
#include "hcd/lyapunov.hpp"
#include "hcd/simulate.hpp"
#include "hcd/suspension.hpp"

namespace {

using namespace hcd;

constexpr int kPass = 0;
constexpr int kViolation = 2;
constexpr int kInconclusive = 3;

struct Config {
    std::string builtin;
    std::string system_path;
    BuiltinParams bp;
    std::uint64_t seed = 1;
    std::string out;

    // Graph parameters; negative means "per-system default".
    double h = -1, Tstep = -1, window = -2, pad = -1;
    int samples = 0;
    double eps = -1, T = -1;

    std::vector<double> x0;
    int x0_mode = 0;
    double budget_time = 100;
    int budget_jumps = 200;
    bool relaxed = false;

    std::string candidate = "paper";
    double constant = 0.0;
    std::string recurrence = "oracle";
    int n_samples = 1000;

    int m_max = 8;
    int pairs = 2000;
    double radius = 0.2, delta = 1e-3, gap = 1.0;

    std::string check = "semigroup";
    int check_samples = 100;
    int check_pairs = 10000;
    double t_end = 10.0, dt = 0.05;
};

struct Loaded {
    HybridSystemDef sys;
    std::optional<BuiltinId> id;
};

Loaded load(const Config& c) {
    if (c.builtin.empty() == c.system_path.empty()) {
        throw Error(ErrorKind::BadParameter, "give exactly one of --builtin or --system");
    }
    if (!c.system_path.empty()) return {load_system(c.system_path), std::nullopt};
    const BuiltinId id = parse_builtin(c.builtin);
    return {instantiate(id, c.bp), id};
}

// Resolutions that resolve each builtin's recurrent set on a desk machine.
GraphParams graph_params(const Config& c, const Loaded& l) {
    GraphParams gp;
    gp.h = 0.05;
    gp.T_step = 1.0;
    gp.window = -1.0;
    if (l.id) {
        switch (*l.id) {
            case BuiltinId::BouncingBall: gp.T_step = 4.0; gp.window = 0.0; break;
            case BuiltinId::SpringBall: gp.T_step = 2.0; gp.window = 0.0; break;
            case BuiltinId::Counterexample: gp.h = 0.01; gp.T_step = 0.05; break;
            case BuiltinId::OmegaPathology: gp.h = 0.005; gp.T_step = 1.0; break;
            case BuiltinId::CircleRotation: gp.h = 0.01; gp.window = 0.0; break;
            case BuiltinId::GradientFlow: gp.T_step = 2.0; gp.window = 0.0; break;
        }
    }
    if (c.h > 0) gp.h = c.h;
    if (c.Tstep > 0) gp.T_step = c.Tstep;
    if (c.window > -2) gp.window = c.window;
    if (c.pad >= 0) gp.bloat_pad = c.pad;
    gp.samples_per_box = c.samples;
    gp.seed = c.seed;
    return gp;
}

Json base_parameters(const std::string& cmd, const Config& c) {
    Json p;
    p["command"] = cmd;
    if (!c.builtin.empty()) {
        p["builtin"] = c.builtin;
        p["g"] = c.bp.g;
        p["d"] = c.bp.d;
        p["E0"] = c.bp.E0;
        p["alpha"] = c.bp.alpha;
    } else {
        p["system"] = c.system_path;
    }
    p["seed"] = c.seed;
    return p;
}

Json graph_parameters(const GraphParams& gp) {
    return {{"h", gp.h},
            {"T_step", gp.T_step},
            {"window", gp.flow_window()},
            {"bloat_pad", gp.pad()},
            {"samples_per_box", gp.samples_per_box},
            {"max_reset_chain", gp.max_reset_chain}};
}

Json to_json(const SuspensionPoint& p) {
    Json j = hcd::to_json(p.x);
    j["variant"] = p.is_base() ? "base" : "cyl";
    if (!p.is_base()) j["s"] = p.s;
    return j;
}

Json flow_law_json(const FlowLawReport& r) {
    return {{"checked", r.checked}, {"max_error", r.max_error}, {"worst_ratio", r.worst_ratio},
            {"failures", r.failures}, {"pass", r.ok()}};
}

void emit(const Config& c, const Json& j, const std::string& file) {
    std::cout << j.dump(2) << "\n";
    if (c.out.empty()) return;
    std::filesystem::create_directories(c.out);
    std::ofstream(std::filesystem::path(c.out) / file) << j.dump(2) << "\n";
}

std::ofstream out_file(const Config& c, const std::string& name) {
    std::filesystem::create_directories(c.out);
    return std::ofstream(std::filesystem::path(c.out) / name);
}

State start_state(const Config& c, const HybridSystemDef& sys) {
    if (c.x0.empty()) throw Error(ErrorKind::BadParameter, "--x0 is required");
    State s{c.x0_mode, c.x0};
    if (s.mode < 0 || s.mode >= static_cast<int>(sys.modes.size()) ||
        static_cast<int>(s.x.size()) != sys.mode(s.mode).dim) {
        throw Error(ErrorKind::BadParameter, "--x0 does not match the mode dimension");
    }
    return s;
}

int cmd_simulate(const Config& c) {
    const Loaded l = load(c);
    const State s0 = start_state(c, l.sys);
    SimBudget b;
    b.max_time = c.budget_time;
    b.max_jumps = c.budget_jumps;
    const ExecutionTrace tr = c.relaxed ? relaxed_simulate(relax(l.sys), embed(s0), b) : simulate_execution(l.sys, s0, b);
    Json p = base_parameters("simulate", c);
    p["x0"] = hcd::to_json(s0);
    p["budget_time"] = b.max_time;
    p["budget_jumps"] = b.max_jumps;
    p["relaxed"] = c.relaxed;
    Json j;
    j["version"] = tool_version();
    j["parameters"] = p;
    j["classification"] = hcd::to_json(tr.cls);
    j["n_jumps"] = tr.n_jumps;
    j["jump_times"] = tr.jump_times();
    if (!c.out.empty()) {
        auto f = out_file(c, "trace.csv");
        write_trace_csv(f, tr);
    }
    emit(c, j, "simulate.json");
    return kPass;
}

int cmd_analyze(const Config& c) {
    const Loaded l = load(c);
    const GraphParams gp = graph_params(c, l);
    const TransitionGraph g = build_transition_graph(l.sys, gp);
    const ChainClassSet classes = chain_recurrent_boxes(g);
    std::vector<AttractorRepellerPair> pairs;
    std::string pair_error;
    try {
        pairs = conley_pairs(g, classes);
    } catch (const Error& e) {
        pair_error = e.what();
    }
    const BoxLyapunov L = build_box_lyapunov(g, classes);
    Json p = base_parameters("analyze", c);
    p["graph"] = graph_parameters(gp);
    Json j = analysis_json(g, classes, pairs, L, p);
    if (!pair_error.empty()) j["pairs_error"] = pair_error;
    const auto witness = lyapunov_obstruction(l.sys, g, classes, default_probes(l.sys, g, classes));
    if (witness) {
        Json cyc = Json::array();
        for (const auto& st : witness->cycle) {
            Json e = hcd::to_json(st.point);
            e["edge"] = to_string(st.edge);
            cyc.push_back(e);
        }
        j["obstruction"] = {{"cycle", cyc}, {"contains_strict", witness->contains_strict}};
    } else {
        j["obstruction"] = nullptr;
    }
    if (c.eps > 0 && c.T > 0 && !c.x0.empty()) {
        // Chain from x0 back to itself, as a recurrence probe.
        const State x = start_state(c, l.sys);
        const auto chain = find_chain(l.sys, g, x, x, c.eps, c.T);
        Json cj = {{"eps", c.eps}, {"T", c.T}, {"found", chain.has_value()}};
        if (chain) {
            cj["N"] = chain->N;
            cj["tau"] = chain->tau;
            cj["nice"] = is_nice_chain(*chain, c.T);
            cj["violations"] = validate_chain(l.sys, *chain).violations;
        }
        j["chain"] = cj;
    }
    if (!c.out.empty()) {
        auto fb = out_file(c, "boxes.csv");
        write_boxes_csv(fb, g, classes, L);
        auto fe = out_file(c, "edges.csv");
        write_edges_csv(fe, g);
    }
    emit(c, j, "analysis.json");
    return kPass;
}

int cmd_verify_guard(const Config& c) {
    const Loaded l = load(c);
    GuardVerifyOptions opt;
    opt.m_max = c.m_max;
    opt.mu.n_pairs = c.pairs;
    opt.mu.radius = c.radius;
    opt.mu.delta = c.delta;
    opt.mu.gap = c.gap;
    opt.mu.seed = c.seed;
    const GuardReport r = verify_guard(l.sys, opt);
    Json p = base_parameters("verify-guard", c);
    p["m_max"] = opt.m_max;
    p["pairs"] = opt.mu.n_pairs;
    p["radius"] = opt.mu.radius;
    p["delta"] = opt.mu.delta;
    p["gap"] = opt.mu.gap;
    Json j;
    j["version"] = tool_version();
    j["parameters"] = p;
    j["report"] = guard_report_json(r);
    emit(c, j, "guard.json");
    return exit_code(r.verdict);
}

int cmd_verify_lyapunov(const Config& c) {
    const Loaded l = load(c);
    LyapunovCandidate cand;
    if (c.candidate == "paper") {
        if (!l.id) throw Error(ErrorKind::BadParameter, "--candidate paper needs a builtin");
        cand = stock_candidate(*l.id, c.bp);
    } else if (c.candidate == "constant") {
        cand = constant_candidate(c.constant);
    } else {
        throw Error(ErrorKind::BadParameter, "unknown candidate '" + c.candidate + "'");
    }
    Json p = base_parameters("verify-lyapunov", c);
    p["candidate"] = cand.describe();
    p["samples"] = c.n_samples;
    p["recurrence"] = c.recurrence;
    LyapunovOptions opt;
    opt.n_samples = c.n_samples;
    opt.seed = c.seed;
    LyapunovReport r;
    std::string rec_desc;
    if (c.recurrence == "oracle" && l.id) {
        const RecurrenceOracle rec = recurrence_oracle(*l.id, c.bp);
        rec_desc = rec.description;
        r = verify_lyapunov(l.sys, cand, rec, opt);
    } else if (c.recurrence == "oracle" || c.recurrence == "boxes") {
        const GraphParams gp = graph_params(c, l);
        p["graph"] = graph_parameters(gp);
        const TransitionGraph g = build_transition_graph(l.sys, gp);
        const ChainClassSet classes = chain_recurrent_boxes(g);
        const RecurrenceOracle rec = recurrence_from_boxes(g, classes);
        rec_desc = rec.description;
        r = verify_lyapunov(l.sys, cand, rec, opt);
    } else {
        throw Error(ErrorKind::BadParameter, "unknown recurrence source '" + c.recurrence + "'");
    }
    Json j;
    j["version"] = tool_version();
    j["parameters"] = p;
    j["recurrent_set"] = rec_desc;
    j["report"] = lyapunov_report_json(r);
    emit(c, j, "lyapunov.json");
    if (!r.pass()) return kViolation;
    if (r.flow_checked + r.reset_checked + r.class_checked == 0) return kInconclusive;
    return kPass;
}

std::vector<State> random_states(const HybridSystemDef& sys, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(sys.modes.size()) - 1);
    std::vector<State> out;
    for (int attempt = 0; attempt < 100 * n && static_cast<int>(out.size()) < n; ++attempt) {
        const ModeSpec& m = sys.mode(pick(rng));
        State s{m.id, Vec(m.dim)};
        for (int i = 0; i < m.dim; ++i) {
            s.x[i] = std::uniform_real_distribution<double>(m.domain.lo[i], m.domain.hi[i])(rng);
        }
        if (in_domain(sys, s, 0.0)) out.push_back(std::move(s));
    }
    return out;
}

int cmd_suspend(const Config& c) {
    const Loaded l = load(c);
    Json p = base_parameters("suspend", c);
    p["check"] = c.check;
    Json j;
    j["version"] = tool_version();
    j["parameters"] = p;
    int code = kPass;
    if (c.check == "semigroup") {
        const FlowLawReport r = semigroup_check(l.sys, c.check_samples, c.seed);
        j["report"] = flow_law_json(r);
        code = r.ok() ? kPass : kViolation;
    } else if (c.check == "conjugacy") {
        const FlowLawReport r = conjugacy_check(l.sys, c.check_samples, c.seed);
        j["report"] = flow_law_json(r);
        code = r.ok() ? kPass : kViolation;
    } else if (c.check == "classical") {
        const ClassicalReport r = classical_suspension_check(l.sys, c.check_samples, c.seed);
        j["report"] = {{"checked", r.checked},       {"mismatches", r.mismatches},
                       {"max_base_error", r.max_base_error}, {"max_s_error", r.max_s_error},
                       {"details", r.details},       {"pass", r.ok()}};
        code = r.ok() ? kPass : kViolation;
    } else if (c.check == "continuity") {
        ContinuityOptions opt;
        opt.n_pairs = c.check_pairs;
        opt.seed = c.seed;
        const auto w = suspension_continuity_check(l.sys, opt);
        Json r = {{"pairs", opt.n_pairs}, {"delta", opt.delta}, {"t", opt.t}, {"threshold", opt.threshold}};
        if (w) {
            r["witness"] = {{"p", to_json(w->p)},          {"q", to_json(w->q)},
                            {"phi_p", to_json(w->phi_p)},  {"phi_q", to_json(w->phi_q)},
                            {"input_distance", w->input_distance}, {"output_distance", w->output_distance}};
        } else {
            r["witness"] = nullptr;
        }
        j["report"] = r;
        code = w ? kViolation : kPass;
    } else if (c.check == "compatibility") {
        CompatibilityOptions opt;
        opt.seed = c.seed;
        GraphParams gp = graph_params(c, l);
        opt.h = gp.h;
        if (c.eps > 0) opt.eps = c.eps;
        if (c.T > 0) opt.T = c.T;
        p["graph"] = graph_parameters(gp);
        j["parameters"] = p;
        const TransitionGraph g = build_transition_graph(l.sys, gp);
        const CompatibilityReport r =
            suspension_compatibility_check(l.sys, g, random_states(l.sys, opt.n_samples, c.seed), opt);
        j["report"] = {{"omega_checked", r.omega_checked}, {"chain_checked", r.chain_checked},
                       {"chain_undecided", r.chain_undecided},
                       {"disagreements", r.disagreements}, {"pass", r.ok()}};
        code = r.ok() ? kPass : kViolation;
    } else if (c.check == "trace") {
        const State s0 = start_state(c, l.sys);
        const auto samples = suspension_trace(l.sys, embed(s0), c.t_end, c.dt);
        if (!c.out.empty()) {
            auto f = out_file(c, "suspension.csv");
            write_suspension_csv(f, l.sys, samples);
        }
        j["report"] = {{"samples", samples.size()}, {"endpoint", to_json(samples.back().p)}};
    } else {
        throw Error(ErrorKind::BadParameter, "unknown check '" + c.check + "'");
    }
    emit(c, j, "suspension.json");
    return code;
}

int cmd_oracle(const Config& c) {
    if (c.builtin.empty()) throw Error(ErrorKind::BadParameter, "oracle needs --builtin");
    emit(c, oracle_report(parse_builtin(c.builtin), c.bp), "oracle.json");
    return kPass;
}

int cmd_validate(const Config& c) {
    const Loaded l = load(c);
    Json diags = Json::array();
    for (const Diagnostic& d : validate_system(l.sys)) {
        Json e = {{"kind", to_string(d.kind)}, {"mode", d.mode}, {"guard", d.guard}, {"message", d.message}};
        if (d.where) e["where"] = hcd::to_json(*d.where);
        diags.push_back(e);
    }
    Json j;
    j["version"] = tool_version();
    j["parameters"] = base_parameters("validate", c);
    j["diagnostics"] = diags;
    j["system"] = system_to_json(l.sys);
    emit(c, j, "validate.json");
    return kPass;
}

void system_options(CLI::App* sc, Config& c) {
    sc->add_option("--builtin", c.builtin, "Builtin system")
        ->check(CLI::IsMember(builtin_names()));
    sc->add_option("--system", c.system_path, "System definition JSON")->check(CLI::ExistingFile);
    sc->add_option("--g", c.bp.g, "Gravity (ball)");
    sc->add_option("--d", c.bp.d, "Restitution coefficient (ball, spring)");
    sc->add_option("--E0", c.bp.E0, "Energy bound of the restricted system");
    sc->add_option("--alpha", c.bp.alpha, "Rotation number");
    sc->add_option("--seed", c.seed, "Seed for every sampled quantity");
    sc->add_option("--out", c.out, "Directory for JSON and CSV outputs");
}

void graph_options(CLI::App* sc, Config& c) {
    sc->add_option("--h", c.h, "Box side");
    sc->add_option("--Tstep", c.Tstep, "Flow time of graph edges");
    sc->add_option("--window", c.window, "Extra flow time after Tstep covered by edges (default Tstep)");
    sc->add_option("--pad", c.pad, "Bloat radius of edge targets (default h)");
    sc->add_option("--samples", c.samples, "Extra random samples per box");
}

}  // namespace

int main(int argc, char** argv) {
    Config c;
    CLI::App app{"Hybrid system dynamics toolkit"};
    app.set_help_flag("--help", "Print this help message and exit");
    app.set_version_flag("--version", std::string(tool_version()));
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "Simulate one execution");
    system_options(sim, c);
    sim->add_option("--x0", c.x0, "Initial point, comma separated")->delimiter(',')->required();
    sim->add_option("--mode", c.x0_mode, "Initial mode");
    sim->add_option("--budget-time", c.budget_time, "Time horizon");
    sim->add_option("--budget-jumps", c.budget_jumps, "Jump budget");
    sim->add_flag("--relaxed", c.relaxed, "Simulate the relaxed system");

    auto* ana = app.add_subcommand("analyze", "Box graph, recurrent classes, pairs and box Lyapunov values");
    system_options(ana, c);
    graph_options(ana, c);
    ana->add_option("--eps", c.eps, "Chain jump size for the chain probe at --x0");
    ana->add_option("--T", c.T, "Chain time spacing for the chain probe at --x0");
    ana->add_option("--x0", c.x0, "Chain probe point")->delimiter(',');
    ana->add_option("--mode", c.x0_mode, "Chain probe mode");

    auto* vg = app.add_subcommand("verify-guard", "Check the trapping-guard surrogates");
    system_options(vg, c);
    vg->add_option("--m-max", c.m_max, "Highest Lie derivative order");
    vg->add_option("--pairs", c.pairs, "Sampled pairs for the mu continuity check");
    vg->add_option("--radius", c.radius, "Guard neighbourhood radius");
    vg->add_option("--delta", c.delta, "Pair separation");
    vg->add_option("--gap", c.gap, "mu jump counted as a discontinuity");

    auto* vl = app.add_subcommand("verify-lyapunov", "Check a closed-form Lyapunov candidate");
    system_options(vl, c);
    graph_options(vl, c);
    vl->add_option("--candidate", c.candidate, "paper or constant")->check(CLI::IsMember({"paper", "constant"}));
    vl->add_option("--value", c.constant, "Value of the constant candidate");
    vl->add_option("--recurrence", c.recurrence, "oracle or boxes")->check(CLI::IsMember({"oracle", "boxes"}));
    vl->add_option("--n", c.n_samples, "Samples");

    auto* su = app.add_subcommand("suspend", "Suspension semiflow checks and traces");
    system_options(su, c);
    graph_options(su, c);
    su->add_option("--check", c.check, "semigroup, conjugacy, classical, continuity, compatibility or trace")
        ->check(CLI::IsMember({"semigroup", "conjugacy", "classical", "continuity", "compatibility", "trace"}));
    su->add_option("--n", c.check_samples, "Samples");
    su->add_option("--pairs", c.check_pairs, "Pairs for the continuity check");
    su->add_option("--eps", c.eps, "Chain jump size (compatibility)");
    su->add_option("--T", c.T, "Chain time spacing (compatibility)");
    su->add_option("--x0", c.x0, "Start point (trace)")->delimiter(',');
    su->add_option("--mode", c.x0_mode, "Start mode (trace)");
    su->add_option("--t-end", c.t_end, "Trace length");
    su->add_option("--dt", c.dt, "Trace sample step");

    auto* orc = app.add_subcommand("oracle", "Closed-form quantities of a builtin");
    system_options(orc, c);

    auto* val = app.add_subcommand("validate", "Structural diagnostics of a system");
    system_options(val, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and --version exit 0; every usage error maps to the generic error code.
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    }

    try {
        if (*sim) return cmd_simulate(c);
        if (*ana) return cmd_analyze(c);
        if (*vg) return cmd_verify_guard(c);
        if (*vl) return cmd_verify_lyapunov(c);
        if (*su) return cmd_suspend(c);
        if (*orc) return cmd_oracle(c);
        if (*val) return cmd_validate(c);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
