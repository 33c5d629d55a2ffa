#include "rca/subgraph.hpp"

#include "rca/error.hpp"
#include "rca/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace rca {

bool CausalSubgraph::has_node(std::string_view n) const {
    return std::find(nodes.begin(), nodes.end(), n) != nodes.end();
}

LaggedSeries::LaggedSeries(const KpiPanel& panel, const std::vector<std::string>& nodes)
    : names_(nodes), values_(panel.select(nodes).values()) {}

std::size_t LaggedSeries::index_of(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw ValidationError("unknown node '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - names_.begin());
}

CiTestResult LaggedSeries::test(LaggedVar x, LaggedVar y, const std::vector<LaggedVar>& cond) const {
    int max_lag = std::max(x.lag, y.lag);
    for (const auto& c : cond) max_lag = std::max(max_lag, c.lag);
    const auto total = static_cast<Eigen::Index>(length());
    const Eigen::Index n = total - max_lag;
    if (n <= static_cast<Eigen::Index>(cond.size()) + 3)
        throw AnalysisError("insufficient overlap after lag alignment: " + std::to_string(std::max<Eigen::Index>(n, 0)) +
                            " rows for a conditioning set of " + std::to_string(cond.size()));
    auto column = [&](LaggedVar v) -> Eigen::VectorXd {
        return values_.col(static_cast<Eigen::Index>(v.var)).segment(max_lag - v.lag, n);
    };
    Eigen::MatrixXd z(n, static_cast<Eigen::Index>(cond.size()));
    for (std::size_t k = 0; k < cond.size(); ++k) z.col(static_cast<Eigen::Index>(k)) = column(cond[k]);
    const auto pc = partial_correlation(column(x), column(y), z);
    return fisher_z_test(pc.r, static_cast<std::size_t>(n), cond.size(), pc.degenerate);
}

std::vector<LaggedParent> select_lagged_parents(const LaggedSeries& data, std::size_t target, int tau_max, double alpha,
                                                std::size_t max_cond) {
    if (tau_max < 1) throw ConfigError("tau_max must be at least 1");
    const std::size_t need = static_cast<std::size_t>(tau_max) + max_cond + 4;
    if (data.length() < need)
        throw AnalysisError("window too short for parent selection: " + std::to_string(data.length()) +
                            " ticks, need at least " + std::to_string(need));

    std::vector<LaggedParent> cands;
    for (std::size_t v = 0; v < data.variables(); ++v)
        for (int lag = 1; lag <= tau_max; ++lag)
            cands.push_back({{v, lag}, std::numeric_limits<double>::infinity(), 0.0});
    const LaggedVar y{target, 0};

    auto by_strength = [](const LaggedParent& a, const LaggedParent& b) {
        if (a.strength != b.strength) return a.strength > b.strength;
        return a.link < b.link;
    };
    for (std::size_t level = 0; level <= max_cond; ++level) {
        if (cands.empty() || cands.size() - 1 < level) break;
        std::sort(cands.begin(), cands.end(), by_strength);
        const std::vector<LaggedParent> ranked = cands;
        std::vector<bool> drop(cands.size(), false);
        for (std::size_t i = 0; i < cands.size(); ++i) {
            std::vector<LaggedVar> cond;
            for (std::size_t k = 0; k < ranked.size() && cond.size() < level; ++k)
                if (k != i) cond.push_back(ranked[k].link);
            const auto res = data.test(cands[i].link, y, cond);
            cands[i].strength = std::min(cands[i].strength, std::abs(res.r));
            cands[i].p = std::max(cands[i].p, res.p);
            drop[i] = res.p > alpha;
        }
        std::vector<LaggedParent> kept;
        for (std::size_t i = 0; i < cands.size(); ++i)
            if (!drop[i]) kept.push_back(cands[i]);
        cands = std::move(kept);
    }
    std::sort(cands.begin(), cands.end(), by_strength);
    return cands;
}

CiTestResult mci_test(const LaggedSeries& data, LaggedVar source, std::size_t target,
                      const std::vector<LaggedParent>& parents_of_target,
                      const std::vector<LaggedParent>& parents_of_source) {
    if (source.lag < 1) throw ConfigError("MCI links need lag >= 1");
    std::vector<LaggedVar> cond;
    std::set<LaggedVar> seen{source};
    for (const auto& p : parents_of_target)
        if (seen.insert(p.link).second) cond.push_back(p.link);
    for (const auto& p : parents_of_source) {
        const LaggedVar shifted{p.link.var, p.link.lag + source.lag};
        if (seen.insert(shifted).second) cond.push_back(shifted);
    }
    return data.test(source, {target, 0}, cond);
}

std::optional<LaggedEdge> mci_edge_test(const LaggedSeries& data, LaggedVar source, std::size_t target,
                                        const std::vector<LaggedParent>& parents_of_target,
                                        const std::vector<LaggedParent>& parents_of_source, double alpha) {
    const auto res = mci_test(data, source, target, parents_of_target, parents_of_source);
    if (res.p > alpha) return std::nullopt;
    return LaggedEdge{data.names()[source.var], data.names()[target], source.lag, res.r, res.p};
}

CausalSubgraph build_subgraph(const KpiPanel& window, const std::vector<std::string>& nodes, const SubgraphConfig& cfg) {
    {
        std::set<std::string_view> seen;
        for (const auto& n : nodes)
            if (!seen.insert(n).second) throw ValidationError("duplicate node '" + n + "'");
    }
    for (const auto& n : nodes) window.column_index(n);
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("subgraph alpha must lie in (0, 1)");

    CausalSubgraph out;
    out.nodes = nodes;
    if (nodes.empty() || (nodes.size() == 1 && !cfg.include_autolinks)) return out;

    const LaggedSeries data(window, nodes);
    const std::size_t v = nodes.size();
    std::vector<std::vector<LaggedParent>> parents(v);
    parallel_for(v, cfg.jobs, [&](std::size_t j) {
        parents[j] = select_lagged_parents(data, j, cfg.tau_max, cfg.alpha, cfg.max_cond);
    });

    std::vector<std::vector<LaggedEdge>> per_target(v);
    parallel_for(v, cfg.jobs, [&](std::size_t y) {
        for (std::size_t x = 0; x < v; ++x) {
            if (x == y && !cfg.include_autolinks) continue;
            for (int lag = 1; lag <= cfg.tau_max; ++lag)
                if (auto e = mci_edge_test(data, {x, lag}, y, parents[y], parents[x], cfg.alpha))
                    per_target[y].push_back(*e);
        }
    });
    for (auto& list : per_target) out.edges.insert(out.edges.end(), list.begin(), list.end());
    std::sort(out.edges.begin(), out.edges.end(), [](const LaggedEdge& a, const LaggedEdge& b) {
        return std::tie(a.source, a.target, a.lag) < std::tie(b.source, b.target, b.lag);
    });
    return out;
}

GraphDiff graph_diff(const CausalSubgraph& normal, const CausalSubgraph& abnormal) {
    const std::set<std::string> a(normal.nodes.begin(), normal.nodes.end());
    const std::set<std::string> b(abnormal.nodes.begin(), abnormal.nodes.end());
    if (a != b) {
        std::string msg = "node universes differ:";
        for (const auto& n : a)
            if (!b.count(n)) msg += " -" + n;
        for (const auto& n : b)
            if (!a.count(n)) msg += " +" + n;
        throw ValidationError(msg);
    }
    using Key = std::tuple<std::string, std::string, int>;
    std::map<Key, const LaggedEdge*> first, second;
    for (const auto& e : normal.edges) first[{e.source, e.target, e.lag}] = &e;
    for (const auto& e : abnormal.edges) second[{e.source, e.target, e.lag}] = &e;
    GraphDiff d;
    for (const auto& [k, e] : first) (second.count(k) ? d.common : d.removed).push_back(*e);
    for (const auto& [k, e] : second)
        if (!first.count(k)) d.added.push_back(*e);
    return d;
}

namespace {
std::string quoted(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}
}  // namespace

std::string to_dot(const CausalSubgraph& graph, std::string_view name) {
    std::ostringstream os;
    os << "digraph " << name << " {\n  rankdir=LR;\n";
    std::vector<std::string> nodes = graph.nodes;
    std::sort(nodes.begin(), nodes.end());
    for (const auto& n : nodes) os << "  " << quoted(n) << ";\n";
    char label[64];
    for (const auto& e : graph.edges) {
        std::snprintf(label, sizeof label, "lag=%d, r=%.3f", e.lag, e.r);
        os << "  " << quoted(e.source) << " -> " << quoted(e.target) << " [label=" << quoted(label) << "];\n";
    }
    os << "}\n";
    return os.str();
}

namespace {
nlohmann::json edge_json(const LaggedEdge& e) {
    return {{"src", e.source}, {"dst", e.target}, {"lag", e.lag}, {"r", e.r}, {"p", e.p}};
}
}  // namespace

nlohmann::json to_json(const CausalSubgraph& graph) {
    nlohmann::json j;
    j["nodes"] = graph.nodes;
    j["edges"] = nlohmann::json::array();
    for (const auto& e : graph.edges) j["edges"].push_back(edge_json(e));
    return j;
}

nlohmann::json to_json(const GraphDiff& diff) {
    nlohmann::json j;
    for (auto [key, list] : {std::pair{"added", &diff.added}, std::pair{"removed", &diff.removed},
                             std::pair{"common", &diff.common}}) {
        j[key] = nlohmann::json::array();
        for (const auto& e : *list) j[key].push_back(edge_json(e));
    }
    return j;
}

}  // namespace rca
