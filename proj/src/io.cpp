#include "hcd/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "hcd/error.hpp"

namespace hcd {

const char* tool_version() { return "hcdyn 0.9.0"; }

namespace {

[[noreturn]] void parse_fail(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::ParseError, where + ": " + what);
}

template <class T>
T get(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) parse_fail(where, std::string("missing '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        parse_fail(where + "." + key, e.what());
    }
}

// Terms {coeff, exps, out}; terms are routed to component `out` of an
// n_out-component map over nvars variables.
PolyMap poly_map_from(const Json& j, int nvars, int n_out, const std::string& where) {
    if (!j.is_array()) parse_fail(where, "expected a list of terms");
    PolyMap map(n_out, Polynomial(nvars));
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string w = where + "[" + std::to_string(i) + "]";
        const double c = get<double>(j[i], "coeff", w);
        auto exps = get<std::vector<int>>(j[i], "exps", w);
        const int out = j[i].contains("out") ? get<int>(j[i], "out", w) : 0;
        if (static_cast<int>(exps.size()) != nvars) parse_fail(w, "exps has the wrong length");
        if (out < 0 || out >= n_out) parse_fail(w, "out index out of range");
        for (int e : exps) {
            if (e < 0) parse_fail(w, "negative exponent");
        }
        if (!std::isfinite(c)) parse_fail(w, "non-finite coefficient");
        map[out].add_term(c, std::move(exps));
    }
    return map;
}

Json poly_map_to(const PolyMap& map) {
    Json out = Json::array();
    for (std::size_t k = 0; k < map.size(); ++k) {
        for (const auto& m : map[k].terms()) out.push_back({{"coeff", m.coeff}, {"exps", m.exps}, {"out", k}});
    }
    return out;
}

}  // namespace

HybridSystemDef system_from_json(const Json& j) {
    HybridSystemDef sys;
    if (!j.is_object()) parse_fail("$", "expected an object");
    if (j.contains("name")) sys.name = get<std::string>(j, "name", "$");
    if (!j.contains("modes") || !j["modes"].is_array()) parse_fail("$", "missing 'modes' list");
    const Json& modes = j["modes"];
    std::vector<int> dims;
    for (std::size_t k = 0; k < modes.size(); ++k) dims.push_back(get<int>(modes[k], "dim", "modes[" + std::to_string(k) + "]"));
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const std::string w = "modes[" + std::to_string(k) + "]";
        const Json& mj = modes[k];
        ModeSpec m;
        m.id = get<int>(mj, "id", w);
        m.dim = dims[k];
        if (m.id != static_cast<int>(k)) parse_fail(w, "mode ids must be 0..n-1 in order");
        if (m.dim < 1) parse_fail(w, "dim must be positive");
        auto dom = get<std::vector<std::vector<double>>>(mj, "domain", w);
        if (static_cast<int>(dom.size()) != m.dim) parse_fail(w + ".domain", "needs one interval per dimension");
        for (const auto& iv : dom) {
            if (iv.size() != 2 || !(iv[0] <= iv[1])) parse_fail(w + ".domain", "intervals must be [lo, hi] with lo <= hi");
            m.domain.lo.push_back(iv[0]);
            m.domain.hi.push_back(iv[1]);
        }
        m.field = poly_map_from(mj.contains("field") ? mj["field"] : Json::array(), m.dim, m.dim, w + ".field");
        if (mj.contains("constraints")) {
            const Json& cs = mj["constraints"];
            if (!cs.is_array()) parse_fail(w + ".constraints", "expected a list");
            for (std::size_t i = 0; i < cs.size(); ++i) {
                m.constraints.push_back(
                    poly_map_from(cs[i], m.dim, 1, w + ".constraints[" + std::to_string(i) + "]")[0]);
            }
        }
        if (mj.contains("periodic")) {
            m.periodic = get<std::vector<bool>>(mj, "periodic", w);
            if (static_cast<int>(m.periodic.size()) != m.dim) parse_fail(w + ".periodic", "needs one flag per axis");
        }
        if (mj.contains("guards")) {
            const Json& gs = mj["guards"];
            if (!gs.is_array()) parse_fail(w + ".guards", "expected a list");
            for (std::size_t i = 0; i < gs.size(); ++i) {
                const std::string gw = w + ".guards[" + std::to_string(i) + "]";
                GuardComponent g;
                g.psi = poly_map_from(gs[i].contains("psi") ? gs[i]["psi"] : Json::array(), m.dim, 1, gw + ".psi")[0];
                if (gs[i].contains("ineqs")) {
                    const Json& iq = gs[i]["ineqs"];
                    if (!iq.is_array()) parse_fail(gw + ".ineqs", "expected a list");
                    for (std::size_t q = 0; q < iq.size(); ++q) {
                        g.ineqs.push_back(poly_map_from(iq[q], m.dim, 1, gw + ".ineqs[" + std::to_string(q) + "]")[0]);
                    }
                }
                g.target = get<int>(gs[i], "target", gw);
                if (g.target < 0 || g.target >= static_cast<int>(modes.size())) parse_fail(gw, "target mode out of range");
                g.reset = poly_map_from(gs[i].contains("reset") ? gs[i]["reset"] : Json::array(), m.dim, dims[g.target],
                                        gw + ".reset");
                m.guards.push_back(std::move(g));
            }
        }
        sys.modes.push_back(std::move(m));
    }
    if (sys.modes.empty()) parse_fail("$.modes", "at least one mode is required");
    return sys;
}

Json system_to_json(const HybridSystemDef& sys) {
    Json j;
    if (!sys.name.empty()) j["name"] = sys.name;
    Json modes = Json::array();
    for (const auto& m : sys.modes) {
        Json mj;
        mj["id"] = m.id;
        mj["dim"] = m.dim;
        Json dom = Json::array();
        for (int i = 0; i < m.dim; ++i) dom.push_back({m.domain.lo[i], m.domain.hi[i]});
        mj["domain"] = dom;
        mj["field"] = poly_map_to(m.field);
        if (!m.constraints.empty()) {
            Json cs = Json::array();
            for (const auto& c : m.constraints) cs.push_back(poly_map_to({c}));
            mj["constraints"] = cs;
        }
        if (!m.periodic.empty()) mj["periodic"] = m.periodic;
        Json gs = Json::array();
        for (const auto& g : m.guards) {
            Json gj;
            gj["psi"] = poly_map_to({g.psi});
            Json iq = Json::array();
            for (const auto& q : g.ineqs) iq.push_back(poly_map_to({q}));
            gj["ineqs"] = iq;
            gj["target"] = g.target;
            gj["reset"] = poly_map_to(g.reset);
            gs.push_back(gj);
        }
        mj["guards"] = gs;
        modes.push_back(mj);
    }
    j["modes"] = modes;
    return j;
}

HybridSystemDef load_system(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, path + ": " + e.what());
    }
    HybridSystemDef sys = system_from_json(j);
    if (sys.name.empty()) sys.name = path;
    return sys;
}

Json to_json(const State& s) { return {{"mode", s.mode}, {"x", s.x}}; }

Json to_json(const ExecutionClassification& c) {
    Json j;
    j["kind"] = to_string(c.kind);
    if (c.kind == ExecClass::Zeno) {
        j["stop_time"] = c.stop_time;
        j["zeno_ratio"] = c.zeno_ratio;
    } else {
        j["horizon"] = c.horizon;
    }
    j["final_state"] = to_json(c.final_state);
    j["reason"] = c.reason;
    return j;
}

void write_trace_csv(std::ostream& os, const ExecutionTrace& tr) {
    std::size_t dim = 0;
    for (const auto& a : tr.arcs) {
        if (!a.x.empty()) dim = std::max(dim, a.x.front().size());
    }
    os << "arc_index,t,mode";
    for (std::size_t i = 0; i < dim; ++i) os << ",x" << i;
    os << "\n" << std::setprecision(17);
    for (std::size_t k = 0; k < tr.arcs.size(); ++k) {
        const Arc& a = tr.arcs[k];
        for (std::size_t i = 0; i < a.t.size(); ++i) {
            os << k << "," << a.t[i] << "," << a.mode;
            for (std::size_t d = 0; d < dim; ++d) {
                os << ",";
                if (d < a.x[i].size()) os << a.x[i][d];
            }
            os << "\n";
        }
    }
}

void write_edges_csv(std::ostream& os, const TransitionGraph& g) {
    os << "src_box,dst_box,kind\n";
    for (const Edge& e : g.edges) os << e.src << "," << e.dst << "," << to_string(e.kind) << "\n";
}

void write_boxes_csv(std::ostream& os, const TransitionGraph& g, const ChainClassSet& c, const BoxLyapunov& L) {
    int dim = 0;
    for (const auto& k : g.nodes) dim = std::max(dim, static_cast<int>(k.idx.size()));
    os << "box,mode";
    for (int i = 0; i < dim; ++i) os << ",i" << i;
    for (int i = 0; i < dim; ++i) os << ",c" << i;
    os << ",recurrent,scc,lyapunov\n" << std::setprecision(17);
    for (int v = 0; v < g.size(); ++v) {
        const BoxKey& k = g.nodes[v];
        const Vec c0 = g.grid.cell_center(k);
        os << v << "," << k.mode;
        for (int i = 0; i < dim; ++i) {
            os << ",";
            if (i < static_cast<int>(k.idx.size())) os << k.idx[i];
        }
        for (int i = 0; i < dim; ++i) {
            os << ",";
            if (i < static_cast<int>(c0.size())) os << c0[i];
        }
        os << "," << (c.node_recurrent[v] ? 1 : 0) << "," << c.scc_of[v] << "," << L.value[v] << "\n";
    }
}

void write_suspension_csv(std::ostream& os, const HybridSystemDef& sys, const std::vector<SuspensionSample>& samples) {
    std::size_t dim = 0;
    for (const auto& s : samples) dim = std::max(dim, s.p.x.x.size());
    os << "t,variant,mode_or_guard_id";
    for (std::size_t i = 0; i < dim; ++i) os << ",x" << i;
    os << ",s\n" << std::setprecision(17);
    for (const auto& s : samples) {
        os << s.t << ",";
        if (s.p.is_base()) {
            os << "base," << s.p.x.mode;
        } else {
            const auto gi = guard_at(sys, s.p.x);
            os << "cyl," << s.p.x.mode << ":" << (gi ? *gi : -1);
        }
        for (std::size_t d = 0; d < dim; ++d) {
            os << ",";
            if (d < s.p.x.x.size()) os << s.p.x.x[d];
        }
        os << "," << s.p.s << "\n";
    }
}

Json analysis_json(const TransitionGraph& g, const ChainClassSet& c, const std::vector<AttractorRepellerPair>& pairs,
                   const BoxLyapunov& L, const Json& parameters) {
    auto box = [&](int v) {
        Json b;
        b["id"] = v;
        b["mode"] = g.nodes[v].mode;
        b["index"] = g.nodes[v].idx;
        b["center"] = g.grid.cell_center(g.nodes[v]);
        return b;
    };
    Json j;
    j["version"] = tool_version();
    j["parameters"] = parameters;
    j["n_boxes"] = g.size();
    j["n_edges"] = g.edges.size();
    Json rec = Json::array();
    for (int v = 0; v < g.size(); ++v) {
        if (c.node_recurrent[v]) rec.push_back(box(v));
    }
    j["recurrent_boxes"] = rec;
    Json sccs = Json::array();
    for (int id : c.recurrent_sccs) sccs.push_back({{"id", id}, {"level", L.level[id]}, {"boxes", c.sccs[id]}});
    j["sccs"] = sccs;
    Json pj = Json::array();
    for (const auto& p : pairs) {
        pj.push_back({{"trivial", p.trivial},
                      {"attractor", p.attractor},
                      {"repeller", p.repeller},
                      {"trapping", p.trapping}});
    }
    j["pairs"] = pj;
    j["lyapunov_values"] = L.value;
    return j;
}

Json guard_report_json(const GuardReport& r) {
    Json j;
    j["verdict"] = to_string(r.verdict);
    j["summary"] = r.summary;
    Json gs = Json::array();
    for (const auto& e : r.guards) {
        Json pts = Json::array();
        for (const auto& p : e.points) {
            pts.push_back({{"x", p.x}, {"outcome", to_string(p.outcome)}, {"order", p.order}, {"value", p.value}});
        }
        gs.push_back({{"mode", e.mode}, {"guard", e.guard}, {"lie_tower", e.tower}, {"points", pts}});
    }
    j["guards"] = gs;
    Json mv = Json::array();
    for (const auto& v : r.mu_violations) {
        mv.push_back({{"p", to_json(v.p)}, {"q", to_json(v.q)}, {"mu_p", v.mu_p}, {"mu_q", v.mu_q}});
    }
    j["mu_violations"] = mv;
    Json bv = Json::array();
    for (const auto& v : r.boundary_violations) {
        bv.push_back({{"where", to_json(v.where)}, {"what", v.what}, {"value", v.value}});
    }
    j["boundary_violations"] = bv;
    return j;
}

Json lyapunov_report_json(const LyapunovReport& r) {
    Json j;
    j["pass"] = r.pass();
    j["flow_checked"] = r.flow_checked;
    j["reset_checked"] = r.reset_checked;
    j["class_checked"] = r.class_checked;
    auto finite_or_null = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
    j["worst_flow_margin"] = finite_or_null(r.worst_flow_margin);
    j["worst_reset_margin"] = finite_or_null(r.worst_reset_margin);
    j["max_class_spread"] = r.max_class_spread;
    j["failures"] = r.failures;
    return j;
}

Json oracle_report(BuiltinId id, const BuiltinParams& p) {
    Json j;
    j["schema_version"] = 1;
    j["version"] = tool_version();
    j["builtin"] = to_string(id);
    j["parameters"] = {{"g", p.g}, {"d", p.d}, {"E0", p.E0}, {"alpha", p.alpha}};
    switch (id) {
        case BuiltinId::BouncingBall: {
            j["mu"] = "(y + sqrt(y^2 + 2 g x)) / g";
            j["energy"] = "y^2/2 + g x";
            j["recurrent_set"] = p.d < 1 ? "origin" : "all of I";
            Json table = Json::array();
            for (double x : {0.0, 0.5, 1.0, 2.0, 4.0}) {
                for (double y : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
                    if (oracle::ball_energy(x, y, p.g) > p.E0) continue;
                    table.push_back({{"x", x}, {"y", y}, {"mu", oracle::ball_mu(x, y, p.g)}});
                }
            }
            j["mu_table"] = table;
            j["stop_time"] = {{"x0", {0.5, 3.0}},
                              {"exact", oracle::ball_stop_time(0.5, 3.0, p.g, p.d)},
                              {"full_bounce_series", oracle::ball_stop_time_series(0.5, 3.0, p.g, p.d)},
                              {"first_jumps", oracle::ball_jump_times(0.5, 3.0, p.g, p.d, 5)}};
            const double b = oracle::ball_default_b();
            j["lyapunov"] = {{"formula", "a mu + b sqrt(energy)"},
                             {"a", oracle::ball_default_a(p.g, p.d, b)},
                             {"b", b},
                             {"reset_margin_per_unit_speed", oracle::ball_reset_margin(1.0, oracle::ball_default_a(p.g, p.d, b), b, p.g, p.d)}};
            break;
        }
        case BuiltinId::SpringBall: {
            j["mu"] = "theta + pi/2, theta = atan2(y, x)";
            j["energy"] = "(x^2 + y^2)/2";
            j["recurrent_set"] = p.d < 1 ? "origin" : "all of I";
            Json table = Json::array();
            for (double th : {-std::numbers::pi / 2, -1.0, 0.0, 1.0, std::numbers::pi / 2}) {
                table.push_back({{"theta", th}, {"mu", oracle::spring_mu(std::cos(th), std::sin(th))}});
            }
            j["mu_table"] = table;
            const double a = oracle::spring_default_a(p.d, 1.0);
            j["lyapunov"] = {{"formula", "a rho mu + b rho"},
                             {"a", a},
                             {"b", 1.0},
                             {"reset_margin_per_unit_radius", oracle::spring_reset_margin(1.0, a, 1.0, p.d)}};
            break;
        }
        case BuiltinId::Counterexample:
            j["recurrent_set"] = "[-1,0] u [1,2]";
            j["pairs"] = "trivial only";
            break;
        case BuiltinId::OmegaPathology:
            j["recurrent_set"] = "(-3,-2] u {1}";
            j["omega_of_minus_1"] = "{0}";
            break;
        case BuiltinId::CircleRotation:
            j["recurrent_set"] = "all of I";
            j["suspension"] = "phi(t, x) = (x + floor(t) alpha mod 1, t - floor(t))";
            break;
        case BuiltinId::GradientFlow:
            j["recurrent_set"] = "equilibria (-1,0), (0,0), (1,0)";
            break;
    }
    return j;
}

}  // namespace hcd
