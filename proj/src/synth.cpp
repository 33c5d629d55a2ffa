#include "rca/synth.hpp"

#include "rca/error.hpp"
#include "rca/stats.hpp"
#include "rca/util.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <random>
#include <unordered_set>

namespace rca {

namespace {

constexpr double kOverflowGuard = 1e12;

}  // namespace

void ScmSpec::validate() const {
    if (nodes.empty()) throw ValidationError("SCM has no nodes");
    std::unordered_set<std::string_view> seen;
    for (const auto& n : nodes)
        if (n.empty() || !seen.insert(n).second) throw ValidationError("duplicate or empty SCM node '" + n + "'");
    if (noise_sd.size() != nodes.size()) throw ValidationError("noise_sd needs one entry per node");
    if (!intercept.empty() && intercept.size() != nodes.size())
        throw ValidationError("intercept needs one entry per node");
    for (double s : noise_sd)
        if (!(s >= 0.0) || !std::isfinite(s)) throw ValidationError("noise sd must be finite and non-negative");
    for (const auto& e : edges) {
        index_of(e.parent);
        index_of(e.child);
        if (e.lag < 1) throw ValidationError("edge " + e.parent + "->" + e.child + " needs lag >= 1");
        if (!std::isfinite(e.weight)) throw ValidationError("edge weight must be finite");
    }
    if (sla) index_of(sla->node);
    if (granularity_seconds <= 0) throw ValidationError("granularity_seconds must be positive");
}

int ScmSpec::max_lag() const noexcept {
    int m = 0;
    for (const auto& e : edges) m = std::max(m, e.lag);
    return m;
}

std::size_t ScmSpec::index_of(std::string_view node) const {
    auto it = std::find(nodes.begin(), nodes.end(), node);
    if (it == nodes.end()) throw ValidationError("unknown SCM node '" + std::string(node) + "'");
    return static_cast<std::size_t>(it - nodes.begin());
}

double spectral_radius(const ScmSpec& spec) {
    spec.validate();
    const auto v = static_cast<Eigen::Index>(spec.nodes.size());
    const int p = std::max(1, spec.max_lag());
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(v * p, v * p);
    for (const auto& e : spec.edges) {
        const auto c = static_cast<Eigen::Index>(spec.index_of(e.child));
        const auto a = static_cast<Eigen::Index>(spec.index_of(e.parent));
        companion(c, (e.lag - 1) * v + a) += e.weight;
    }
    if (p > 1) companion.bottomLeftCorner(v * (p - 1), v * (p - 1)).setIdentity();
    return Eigen::EigenSolver<Eigen::MatrixXd>(companion, false).eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<std::string> descendants(const ScmSpec& spec, std::string_view node) {
    const std::size_t start = spec.index_of(node);
    std::vector<bool> seen(spec.nodes.size(), false);
    std::vector<std::size_t> stack{start};
    while (!stack.empty()) {
        const std::size_t cur = stack.back();
        stack.pop_back();
        for (const auto& e : spec.edges) {
            if (spec.index_of(e.parent) != cur) continue;
            const std::size_t c = spec.index_of(e.child);
            if (!seen[c]) {
                seen[c] = true;
                stack.push_back(c);
            }
        }
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i)
        if (seen[i] && i != start) out.push_back(spec.nodes[i]);
    return out;
}

namespace {

struct ResolvedEdge {
    std::size_t parent, child;
    int lag;
    double weight;
};

KpiPanel simulate(const ScmSpec& spec, std::size_t horizon, std::uint64_t seed,
                  const std::vector<InterventionSpec>& interventions) {
    spec.validate();
    const int max_lag = spec.max_lag();
    if (horizon <= static_cast<std::size_t>(max_lag))
        throw ValidationError("horizon " + std::to_string(horizon) + " must exceed the maximum lag " +
                              std::to_string(max_lag));
    const std::size_t burn_in = 10 * static_cast<std::size_t>(std::max(1, max_lag));
    const std::size_t v = spec.nodes.size();

    std::vector<ResolvedEdge> edges;
    for (const auto& e : spec.edges) edges.push_back({spec.index_of(e.parent), spec.index_of(e.child), e.lag, e.weight});

    // Per node, the intervention in force (later specs override earlier ones
    // for the same target after their own onset).
    struct Active {
        const InterventionSpec* spec;
        std::size_t start;  // simulation step
    };
    std::vector<std::vector<Active>> per_node(v);
    for (const auto& iv : interventions) {
        if (iv.onset < 0 || static_cast<std::size_t>(iv.onset) >= horizon)
            throw ValidationError("intervention onset " + std::to_string(iv.onset) + " outside horizon " +
                                  std::to_string(horizon));
        per_node[spec.index_of(iv.target)].push_back({&iv, burn_in + static_cast<std::size_t>(iv.onset)});
    }
    for (auto& list : per_node)
        std::stable_sort(list.begin(), list.end(), [](const Active& a, const Active& b) { return a.start < b.start; });

    const std::size_t steps = burn_in + horizon;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(v));
    std::mt19937_64 rng(derive_seed(seed, {0x5C1A}));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t i = 0; i < v; ++i) {
            const double eps = normal(rng);  // drawn unconditionally to keep streams aligned
            const InterventionSpec* active = nullptr;
            for (const auto& a : per_node[i])
                if (t >= a.start) active = a.spec;
            if (active && active->kind == InterventionKind::hard) {
                x(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = active->hard_value;
                continue;
            }
            double value = spec.intercept.empty() ? 0.0 : spec.intercept[i];
            for (const auto& e : edges)
                if (e.child == i && t >= static_cast<std::size_t>(e.lag))
                    value += e.weight * x(static_cast<Eigen::Index>(t - static_cast<std::size_t>(e.lag)),
                                          static_cast<Eigen::Index>(e.parent));
            double sd = spec.noise_sd[i];
            if (active) {
                value += active->mean_shift;
                sd *= active->noise_scale;
            }
            value += sd * eps;
            if (!std::isfinite(value) || std::abs(value) > kOverflowGuard)
                throw ValidationError("unstable SCM: node '" + spec.nodes[i] + "' exceeded the overflow guard");
            x(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = value;
        }
    }

    std::vector<std::int64_t> ticks(horizon);
    for (std::size_t t = 0; t < horizon; ++t) ticks[t] = static_cast<std::int64_t>(t);
    Eigen::MatrixXd out = x.bottomRows(static_cast<Eigen::Index>(horizon));
    return KpiPanel(std::move(ticks), spec.nodes, std::move(out), spec.granularity_seconds);
}

}  // namespace

KpiPanel generate(const ScmSpec& spec, std::size_t horizon, std::uint64_t seed) {
    return simulate(spec, horizon, seed, {});
}

std::pair<KpiPanel, GroundTruth> inject(const ScmSpec& spec, std::uint64_t seed,
                                        const std::vector<InterventionSpec>& interventions, std::size_t horizon) {
    KpiPanel panel = simulate(spec, horizon, seed, interventions);

    GroundTruth truth;
    truth.edges = spec.edges;
    const std::size_t v = spec.nodes.size();
    constexpr auto kUnreached = std::numeric_limits<std::int64_t>::max();
    std::vector<std::int64_t> arrival(v, kUnreached);
    std::vector<bool> hard(v, false);
    for (const auto& iv : interventions) {
        truth.interventions.push_back({iv.target, iv.kind, iv.onset});
        const std::size_t i = spec.index_of(iv.target);
        arrival[i] = std::min(arrival[i], iv.onset);
        if (iv.kind == InterventionKind::hard) hard[i] = true;
    }
    // Earliest arrival over lagged paths; hard-intervened nodes do not take
    // input from their parents.
    using Item = std::pair<std::int64_t, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    for (std::size_t i = 0; i < v; ++i)
        if (arrival[i] != kUnreached) queue.push({arrival[i], i});
    while (!queue.empty()) {
        auto [t, u] = queue.top();
        queue.pop();
        if (t != arrival[u]) continue;
        for (const auto& e : spec.edges) {
            if (spec.index_of(e.parent) != u || e.weight == 0.0) continue;
            const std::size_t c = spec.index_of(e.child);
            if (hard[c] || c == u) continue;
            const std::int64_t reach = t + e.lag;
            if (reach < arrival[c] && reach < static_cast<std::int64_t>(horizon)) {
                arrival[c] = reach;
                queue.push({reach, c});
            }
        }
    }
    for (std::size_t i = 0; i < v; ++i)
        if (arrival[i] != kUnreached) truth.deviation_order.push_back({spec.nodes[i], arrival[i]});
    std::sort(truth.deviation_order.begin(), truth.deviation_order.end(), [](const auto& a, const auto& b) {
        return a.expected_onset != b.expected_onset ? a.expected_onset < b.expected_onset : a.node < b.node;
    });
    return {std::move(panel), std::move(truth)};
}

std::vector<DoVerdict> verify_do_equivalence(const ScmSpec& spec, const InterventionSpec& intervention,
                                             std::uint64_t seed, double alpha, std::size_t horizon) {
    if (intervention.kind != InterventionKind::hard) throw ConfigError("do-equivalence check needs a hard intervention");
    auto [panel, truth] = inject(spec, seed, {intervention}, horizon);
    const auto desc = descendants(spec, intervention.target);
    const auto onset = static_cast<Eigen::Index>(intervention.onset);
    const auto rows = static_cast<Eigen::Index>(panel.rows());
    if (onset < 2 || rows - onset < 2) throw ConfigError("onset leaves too few samples on one side");

    std::vector<DoVerdict> out;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        const auto& name = spec.nodes[i];
        const Eigen::VectorXd col = panel.values().col(static_cast<Eigen::Index>(i));
        const std::span<const double> all(col.data(), static_cast<std::size_t>(rows));
        const auto ks = ks_two_sample(all.first(static_cast<std::size_t>(onset)), all.subspan(static_cast<std::size_t>(onset)));
        NodeRole role = NodeRole::non_descendant;
        if (name == intervention.target)
            role = NodeRole::target;
        else if (std::find(desc.begin(), desc.end(), name) != desc.end())
            role = NodeRole::descendant;
        out.push_back({name, role, ks.d, ks.p_raw, ks.p_raw <= alpha});
    }
    return out;
}

std::string_view to_string(InterventionKind kind) noexcept {
    return kind == InterventionKind::hard ? "hard" : "soft";
}

std::string_view to_string(NodeRole role) noexcept {
    switch (role) {
        case NodeRole::target: return "target";
        case NodeRole::descendant: return "descendant";
        case NodeRole::non_descendant: return "non_descendant";
    }
    return "?";
}

Scenario single_root_scenario(std::size_t noise_nodes, std::size_t horizon, std::int64_t onset, double hard_value) {
    Scenario s;
    s.name = "single-root";
    s.spec.nodes = {"R", "Throughput"};
    s.spec.noise_sd = {1.0, 30.0};
    s.spec.intercept = {0.0, 1000.0};
    for (std::size_t k = 1; k <= noise_nodes; ++k) {
        s.spec.nodes.push_back("N" + std::to_string(k));
        s.spec.noise_sd.push_back(1.0);
        s.spec.intercept.push_back(0.0);
    }
    s.spec.edges = {{"R", "Throughput", 1, -100.0}};
    s.spec.sla = SlaDesignation{"Throughput", Comparator::less, 800.0, 3};
    s.interventions = {{"R", InterventionKind::hard, onset, hard_value, 0.0, 1.0}};
    s.horizon = horizon;
    s.normal_len = 120;
    s.abnormal_len = 120;
    s.lead_offset = 1;
    return s;
}

Scenario cascade_scenario(std::size_t horizon, std::int64_t onset_a, std::int64_t onset_b) {
    Scenario s;
    s.name = "cascade";
    s.spec.nodes = {"A", "B", "Throughput", "N1", "N2"};
    s.spec.noise_sd = {1.0, 1.0, 40.0, 1.0, 1.0};
    s.spec.intercept = {0.0, 0.0, 1000.0, 0.0, 0.0};
    s.spec.edges = {{"A", "B", 2, 0.15}, {"B", "Throughput", 8, 40.0}};
    s.spec.sla = SlaDesignation{"Throughput", Comparator::less, 900.0, 4};
    s.interventions = {{"A", InterventionKind::soft, onset_a, 0.0, 3.0, 1.0},
                       {"B", InterventionKind::hard, onset_b, -5.0, 0.0, 1.0}};
    s.horizon = horizon;
    s.normal_len = 120;
    s.abnormal_len = 120;
    s.lead_offset = 20;
    return s;
}

Scenario null_scenario() {
    Scenario s = cascade_scenario();
    s.name = "null";
    s.interventions.clear();
    s.lead_offset = 0;
    s.abnormal_start = 160;
    return s;
}

std::vector<std::string> canned_scenario_names() { return {"cascade", "null", "single-root"}; }

Scenario canned_scenario(std::string_view name) {
    if (name == "single-root") return single_root_scenario();
    if (name == "cascade") return cascade_scenario();
    if (name == "null") return null_scenario();
    std::string list;
    for (const auto& n : canned_scenario_names()) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown scenario '" + std::string(name) + "'; available: " + list);
}

Scenario scenario_from_json(const nlohmann::json& j) {
    try {
        Scenario s;
        s.name = j.value("name", "custom");
        s.horizon = j.at("horizon").get<std::size_t>();
        s.spec.granularity_seconds = j.value("granularity_seconds", 15);
        for (const auto& n : j.at("nodes")) {
            s.spec.nodes.push_back(n.at("name").get<std::string>());
            s.spec.noise_sd.push_back(n.value("noise_sd", 1.0));
            s.spec.intercept.push_back(n.value("intercept", 0.0));
        }
        for (const auto& e : j.value("edges", nlohmann::json::array()))
            s.spec.edges.push_back({e.at("parent").get<std::string>(), e.at("child").get<std::string>(),
                                    e.at("lag").get<int>(), e.at("weight").get<double>()});
        if (j.contains("sla")) {
            const auto& r = j.at("sla");
            s.spec.sla = SlaDesignation{r.at("node").get<std::string>(), parse_comparator(r.at("op").get<std::string>()),
                                        r.at("threshold").get<double>(), r.value("min_duration", std::int64_t{0})};
        }
        for (const auto& iv : j.value("interventions", nlohmann::json::array())) {
            InterventionSpec spec;
            spec.target = iv.at("target").get<std::string>();
            const auto kind = iv.at("kind").get<std::string>();
            if (kind == "hard")
                spec.kind = InterventionKind::hard;
            else if (kind == "soft")
                spec.kind = InterventionKind::soft;
            else
                throw ConfigError("intervention kind must be 'hard' or 'soft', got '" + kind + "'");
            spec.onset = iv.at("onset").get<std::int64_t>();
            spec.hard_value = iv.value("value", 0.0);
            spec.mean_shift = iv.value("mean_shift", 0.0);
            spec.noise_scale = iv.value("noise_scale", 1.0);
            s.interventions.push_back(spec);
        }
        if (j.contains("labeling")) {
            const auto& l = j.at("labeling");
            s.normal_len = l.value("normal_len", s.normal_len);
            s.abnormal_len = l.value("abnormal_len", s.abnormal_len);
            s.lead_offset = l.value("lead_offset", s.lead_offset);
            if (l.contains("abnormal_start")) s.abnormal_start = l.at("abnormal_start").get<std::int64_t>();
        }
        s.spec.validate();
        for (const auto& iv : s.interventions) s.spec.index_of(iv.target);
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario spec: ") + e.what());
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("scenario spec: ") + e.what());
    }
}

nlohmann::json to_json(const Scenario& s) {
    nlohmann::json j;
    j["name"] = s.name;
    j["horizon"] = s.horizon;
    j["granularity_seconds"] = s.spec.granularity_seconds;
    j["nodes"] = nlohmann::json::array();
    for (std::size_t i = 0; i < s.spec.nodes.size(); ++i)
        j["nodes"].push_back({{"name", s.spec.nodes[i]},
                              {"noise_sd", s.spec.noise_sd[i]},
                              {"intercept", s.spec.intercept.empty() ? 0.0 : s.spec.intercept[i]}});
    j["edges"] = nlohmann::json::array();
    for (const auto& e : s.spec.edges)
        j["edges"].push_back({{"parent", e.parent}, {"child", e.child}, {"lag", e.lag}, {"weight", e.weight}});
    if (s.spec.sla)
        j["sla"] = {{"node", s.spec.sla->node},
                    {"op", std::string(to_string(s.spec.sla->op))},
                    {"threshold", s.spec.sla->threshold},
                    {"min_duration", s.spec.sla->min_duration_ticks}};
    j["interventions"] = nlohmann::json::array();
    for (const auto& iv : s.interventions) {
        nlohmann::json o{{"target", iv.target}, {"kind", std::string(to_string(iv.kind))}, {"onset", iv.onset}};
        if (iv.kind == InterventionKind::hard)
            o["value"] = iv.hard_value;
        else {
            o["mean_shift"] = iv.mean_shift;
            o["noise_scale"] = iv.noise_scale;
        }
        j["interventions"].push_back(o);
    }
    j["labeling"] = {{"normal_len", s.normal_len}, {"abnormal_len", s.abnormal_len}, {"lead_offset", s.lead_offset}};
    if (s.abnormal_start) j["labeling"]["abnormal_start"] = *s.abnormal_start;
    return j;
}

nlohmann::json to_json(const GroundTruth& truth) {
    nlohmann::json j;
    j["interventions"] = nlohmann::json::array();
    for (const auto& iv : truth.interventions)
        j["interventions"].push_back({{"node", iv.node}, {"kind", std::string(to_string(iv.kind))}, {"onset", iv.onset}});
    j["edges"] = nlohmann::json::array();
    for (const auto& e : truth.edges)
        j["edges"].push_back({{"parent", e.parent}, {"child", e.child}, {"lag", e.lag}, {"weight", e.weight}});
    j["deviation_order"] = nlohmann::json::array();
    for (const auto& d : truth.deviation_order)
        j["deviation_order"].push_back({{"node", d.node}, {"expected_onset", d.expected_onset}});
    return j;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
    try {
        return scenario_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("scenario file '" + path.string() + "': " + e.what());
    }
}

}  // namespace rca
