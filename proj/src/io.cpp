#include "riskshare/io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "riskshare/errors.hpp"

namespace riskshare {

namespace {

template <class F>
auto guarded(const std::string& what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorKind::configuration, what + ": " + e.what());
    }
}

double number(const json& j, const std::string& what) {
    require(j.is_number(), ErrorKind::configuration, what + " must be a number");
    return j.get<double>();
}

std::size_t parse_index(const std::string& s, std::size_t line, const char* col) {
    try {
        std::size_t used = 0;
        long v = std::stol(s, &used);
        if (used != s.size() || v < 1) throw std::invalid_argument(s);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        fail(ErrorKind::ingestion, "row at line " + std::to_string(line) + ": bad " + col + " '" + s + "'");
    }
}

}  // namespace

DistortionFn distortion_from_json(const json& j) {
    return guarded("distortion", [&]() -> DistortionFn {
        if (j.is_string()) {
            const auto s = j.get<std::string>();
            if (s == "expectation" || s == "identity") return identity_distortion();
            fail(ErrorKind::configuration, "unknown distortion '" + s + "'");
        }
        require(j.is_object(), ErrorKind::configuration, "distortion must be a string or an object");
        if (j.contains("es")) return es_distortion(number(j["es"], "es level"));
        if (j.contains("power"))
            return power_distortion(number(j["power"], "power"), j.value("pieces", std::size_t{32}));
        if (j.contains("breakpoints")) {
            std::vector<Knot> k;
            for (const auto& bp : j["breakpoints"]) {
                require(bp.is_array() && bp.size() == 2, ErrorKind::configuration, "breakpoint must be [u, k]");
                k.push_back({number(bp[0], "u"), number(bp[1], "k")});
            }
            return DistortionFn(std::move(k));
        }
        if (j.contains("mix")) {
            std::vector<std::pair<double, DistortionFn>> parts;
            for (const auto& part : j["mix"])
                parts.emplace_back(number(part.at("weight"), "mixture weight"), distortion_from_json(part.at("distortion")));
            return mix(parts);
        }
        fail(ErrorKind::configuration, "unrecognised distortion " + j.dump());
    });
}

json distortion_to_json(const DistortionFn& k) {
    json bp = json::array();
    for (const auto& kn : k.breakpoints()) bp.push_back({kn.x, kn.y});
    return json{{"breakpoints", bp}};
}

DistortionSet distortion_set_from_json(const json& j) {
    if (j.is_object() && j.contains("sup")) {
        DistortionSet out;
        for (const auto& d : j["sup"]) out.push_back(distortion_from_json(d));
        require(!out.empty(), ErrorKind::configuration, "empty distortion set");
        return out;
    }
    return {distortion_from_json(j)};
}

json distortion_set_to_json(const DistortionSet& ks) {
    if (ks.size() == 1) return distortion_to_json(ks.front());
    json arr = json::array();
    for (const auto& k : ks) arr.push_back(distortion_to_json(k));
    return json{{"sup", arr}};
}

RiskSpec risk_spec_from_json(const json& j) {
    return guarded("risk spec", [&] {
        require(j.is_object() && j.contains("periods") && j["periods"].is_array(), ErrorKind::configuration,
                "risk spec needs a 'periods' array");
        RiskSpec spec;
        for (const auto& pj : j["periods"]) {
            PeriodSpec ps;
            const auto mode = pj.value("mode", std::string("marginal"));
            if (mode == "marginal") ps.mode = EvalMode::marginal;
            else if (mode == "tree") ps.mode = EvalMode::tree;
            else fail(ErrorKind::configuration, "unknown evaluation mode '" + mode + "'");
            if (pj.contains("distortion") && !pj.contains("regimes")) {
                ps.regimes.regimes.push_back({RegimeRule{}, distortion_set_from_json(pj["distortion"])});
            } else {
                require(pj.contains("regimes") && pj["regimes"].is_array(), ErrorKind::configuration,
                        "period needs 'regimes' or 'distortion'");
                for (const auto& rj : pj["regimes"]) {
                    Regime r;
                    require(rj.contains("distortion"), ErrorKind::configuration, "regime needs a distortion");
                    r.kernel = distortion_set_from_json(rj["distortion"]);
                    if (rj.value("else", false)) {
                        r.rule.kind = RegimeRule::Kind::otherwise;
                    } else {
                        require(rj.contains("obs"), ErrorKind::configuration, "regime rule needs 'obs' or 'else'");
                        r.rule.obs = Observable::parse(rj["obs"].get<std::string>());
                        if (rj.contains("leq_quantile")) {
                            r.rule.kind = RegimeRule::Kind::leq_quantile;
                            r.rule.level = number(rj["leq_quantile"], "leq_quantile");
                            require(r.rule.level > 0.0 && r.rule.level <= 1.0, ErrorKind::configuration,
                                    "leq_quantile must lie in (0, 1]");
                        } else if (rj.contains("leq")) {
                            r.rule.kind = RegimeRule::Kind::leq_value;
                            r.rule.level = number(rj["leq"], "leq");
                        } else {
                            fail(ErrorKind::configuration, "regime rule needs 'leq_quantile' or 'leq'");
                        }
                    }
                    ps.regimes.regimes.push_back(std::move(r));
                }
            }
            spec.periods.push_back(std::move(ps));
        }
        require(!spec.periods.empty(), ErrorKind::configuration, "risk spec has no periods");
        return spec;
    });
}

json risk_spec_to_json(const RiskSpec& spec) {
    json periods = json::array();
    for (const auto& ps : spec.periods) {
        json regimes = json::array();
        for (const auto& r : ps.regimes.regimes) {
            json rj{{"distortion", distortion_set_to_json(r.kernel)}};
            switch (r.rule.kind) {
                case RegimeRule::Kind::otherwise: rj["else"] = true; break;
                case RegimeRule::Kind::leq_quantile:
                    rj["obs"] = r.rule.obs.name();
                    rj["leq_quantile"] = r.rule.level;
                    break;
                case RegimeRule::Kind::leq_value:
                    rj["obs"] = r.rule.obs.name();
                    rj["leq"] = r.rule.level;
                    break;
            }
            regimes.push_back(rj);
        }
        periods.push_back({{"mode", ps.mode == EvalMode::marginal ? "marginal" : "tree"}, {"regimes", regimes}});
    }
    return json{{"periods", periods}};
}

ScenarioTree tree_from_json(const json& j) {
    return guarded("scenario tree", [&] {
        require(j.contains("nodes") && j["nodes"].is_array(), ErrorKind::configuration, "tree needs a 'nodes' array");
        std::vector<TreeNode> nodes;
        for (const auto& nj : j["nodes"]) {
            TreeNode nd;
            if (nj.contains("parent") && !nj["parent"].is_null()) nd.parent = nj["parent"].get<std::size_t>();
            nd.prob = nj.value("prob", 1.0);
            nd.value = nj.value("value", 0.0);
            if (nj.contains("endowments")) nd.endowments = nj["endowments"].get<std::vector<double>>();
            nodes.push_back(std::move(nd));
        }
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (!nodes[k].parent) continue;
            const auto par = *nodes[k].parent;
            require(par < k, ErrorKind::configuration, "tree nodes must list parents before children");
            nodes[par].children.push_back(k);
            nodes[k].period = nodes[par].period + 1;
        }
        return ScenarioTree(std::move(nodes));
    });
}

SamplePathSet paths_from_json(const json& j) {
    return guarded("inline paths", [&] {
        PathData d;
        const auto S = j.at("S").get<std::vector<std::vector<double>>>();
        require(!S.empty(), ErrorKind::configuration, "no paths");
        d.horizon = j.value("horizon", S.front().size());
        for (const auto& row : S) {
            require(row.size() == d.horizon, ErrorKind::configuration, "ragged S matrix");
            d.aggregate.insert(d.aggregate.end(), row.begin(), row.end());
        }
        if (j.contains("weights")) d.weights = j["weights"].get<std::vector<double>>();
        if (j.contains("O"))
            for (const auto& row : j["O"].get<std::vector<std::vector<double>>>())
                d.observables.insert(d.observables.end(), row.begin(), row.end());
        if (j.contains("X")) {
            const auto X = j["X"].get<std::vector<std::vector<std::vector<double>>>>();
            require(X.size() == S.size(), ErrorKind::configuration, "X must have one entry per path");
            for (const auto& path : X) {
                require(path.size() == d.horizon, ErrorKind::configuration, "X must have one entry per period");
                for (const auto& per : path) {
                    if (d.n_agents == 0) d.n_agents = per.size();
                    require(per.size() == d.n_agents, ErrorKind::configuration, "ragged X tensor");
                    d.endowments.insert(d.endowments.end(), per.begin(), per.end());
                }
            }
        }
        return SamplePathSet(std::move(d));
    });
}

void write_paths_csv(std::ostream& out, const SamplePathSet& paths) {
    out << "path_id,period,weight,S";
    for (std::size_t i = 0; i < paths.n_agents(); ++i) out << ",X" << i + 1;
    out << '\n';
    for (std::size_t p = 0; p < paths.size(); ++p) {
        for (std::size_t t = 1; t <= paths.horizon(); ++t) {
            out << p + 1 << ',' << t << ',' << format_double(paths.weight(p)) << ','
                << format_double(paths.aggregate(p, t));
            for (std::size_t i = 0; i < paths.n_agents(); ++i) out << ',' << format_double(paths.endowment(p, t, i));
            out << '\n';
        }
    }
}

void write_allocation_csv(std::ostream& out, const AllocationProcess& alloc) {
    out << "path_id,period,agent,Y\n";
    for (std::size_t p = 0; p < alloc.size(); ++p)
        for (std::size_t t = 1; t <= alloc.horizon(); ++t)
            for (std::size_t i = 0; i < alloc.n_agents(); ++i)
                out << p + 1 << ',' << t << ',' << i + 1 << ',' << format_double(alloc.at(p, t, i)) << '\n';
}

AllocationProcess read_allocation_csv(const CsvTable& table, const PathSetPtr& paths) {
    require(paths != nullptr, ErrorKind::configuration, "allocation needs a path set");
    for (const char* c : {"path_id", "period", "agent", "Y"})
        require(table.column(c) != CsvTable::npos, ErrorKind::ingestion, std::string("missing column ") + c);
    const auto cp = table.column("path_id"), ct = table.column("period"), ca = table.column("agent"),
               cy = table.column("Y");
    std::size_t n = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        n = std::max(n, parse_index(table.rows[r][ca], table.lines[r], "agent"));
    const std::size_t N = paths->size(), T = paths->horizon();
    require(n >= 1, ErrorKind::ingestion, "allocation table is empty");
    std::vector<double> Y(N * T * n, 0.0);
    std::vector<char> seen(N * T * n, 0);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto line = table.lines[r];
        const auto p = parse_index(table.rows[r][cp], line, "path_id");
        const auto t = parse_index(table.rows[r][ct], line, "period");
        const auto i = parse_index(table.rows[r][ca], line, "agent");
        if (p > N || t > T)
            fail(ErrorKind::ingestion, "row at line " + std::to_string(line) + ": index outside the scenario");
        const auto k = ((p - 1) * T + (t - 1)) * n + (i - 1);
        if (seen[k]) fail(ErrorKind::ingestion, "row at line " + std::to_string(line) + ": duplicate entry");
        seen[k] = 1;
        try {
            Y[k] = std::stod(table.rows[r][cy]);
        } catch (const std::exception&) {
            fail(ErrorKind::ingestion, "row at line " + std::to_string(line) + ": bad Y value");
        }
    }
    for (char s : seen) require(s, ErrorKind::ingestion, "allocation table is missing entries");
    try {
        return AllocationProcess(paths, n, std::move(Y));
    } catch (const Error& e) {
        fail(ErrorKind::ingestion, e.what());
    }
}

json retention_to_json(const RetentionSchedule& sched) {
    json periods = json::array();
    for (const auto& per : sched.periods) {
        json agents = json::array();
        for (std::size_t i = 0; i < per.g.size(); ++i) {
            json bp = json::array();
            for (const auto& k : per.g[i].knots()) bp.push_back({k.x, k.y});
            agents.push_back({{"breakpoints", bp},
                              {"left_slope", per.g[i].left_slope()},
                              {"right_slope", per.g[i].right_slope()},
                              {"premium", per.premium[i]}});
        }
        periods.push_back({{"period", per.period}, {"s_low", per.s_low}, {"r_low", per.r_low}, {"agents", agents}});
    }
    return json{{"periods", periods}};
}

RetentionSchedule retention_from_json(const json& j) {
    return guarded("retention schedule", [&] {
        RetentionSchedule s;
        for (const auto& pj : j.at("periods")) {
            RetentionPeriod per;
            per.period = pj.at("period").get<std::size_t>();
            per.s_low = pj.at("s_low").get<double>();
            per.r_low = pj.at("r_low").get<double>();
            for (const auto& aj : pj.at("agents")) {
                std::vector<Knot> k;
                for (const auto& bp : aj.at("breakpoints")) k.push_back({bp.at(0).get<double>(), bp.at(1).get<double>()});
                per.g.emplace_back(std::move(k), aj.at("left_slope").get<double>(), aj.at("right_slope").get<double>());
                per.premium.push_back(aj.at("premium").get<double>());
            }
            s.periods.push_back(std::move(per));
        }
        return s;
    });
}

json report_to_json(const SolveReport& rep) {
    json periods = json::array();
    for (const auto& p : rep.periods) {
        json pj{{"period", p.period},
                {"objective", p.objective},
                {"candidates", p.candidates},
                {"truncated", p.truncated},
                {"tie_policy", to_string(p.tie_policy)},
                {"premia_policy", to_string(p.premia_policy)},
                {"r_low", p.r_low},
                {"s_low", p.s_low},
                {"thresholds", p.thresholds}};
        pj["premia_bounds"] = p.premia_bounds;
        pj["ir"] = p.ir;
        periods.push_back(pj);
    }
    json out{{"periods", periods}, {"expected_total_risk", rep.expected_total_risk}};
    out["ir_dynamic"] = rep.ir_dynamic;
    return out;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::configuration, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const std::exception& e) {
        fail(ErrorKind::configuration, path + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::configuration, "cannot write " + path);
    out << text;
}

}  // namespace riskshare
