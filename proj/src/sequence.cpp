#include "rca/sequence.hpp"

#include "rca/error.hpp"
#include "rca/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace rca {

Correction parse_correction(std::string_view text) {
    if (text == "none") return Correction::none;
    if (text == "bonferroni") return Correction::bonferroni;
    if (text == "bh_fdr" || text == "bh-fdr" || text == "fdr" || text == "bh") return Correction::bh_fdr;
    throw ConfigError("unknown correction '" + std::string(text) + "' (none, bonferroni, bh_fdr)");
}

std::string_view to_string(Correction c) noexcept {
    switch (c) {
        case Correction::none: return "none";
        case Correction::bonferroni: return "bonferroni";
        case Correction::bh_fdr: return "bh_fdr";
    }
    return "?";
}

void SequenceConfig::validate() const {
    if (!(cis_alpha > 0.0 && cis_alpha < 1.0)) throw ConfigError("cis alpha must lie in (0, 1)");
    if (window < 8) throw ConfigError("cis window must be at least 8 ticks");
    if (stride < 1) throw ConfigError("cis stride must be positive");
    if (!(z_thr > 0.0)) throw ConfigError("cis z_thr must be positive");
}

std::vector<WindowScan> rolling_ks_onset(std::span<const KpiSegment> batch, const SequenceConfig& cfg) {
    cfg.validate();
    std::vector<WindowScan> scans;
    std::vector<double> pooled;
    for (const auto& item : batch) {
        if (item.baseline.size() < cfg.window)
            throw AnalysisError("baseline of '" + item.kpi + "' has " + std::to_string(item.baseline.size()) +
                                " ticks, shorter than the " + std::to_string(cfg.window) + "-tick window");
        if (item.segment.size() < cfg.window)
            throw AnalysisError("abnormal segment of '" + item.kpi + "' has " + std::to_string(item.segment.size()) +
                                " ticks, shorter than the " + std::to_string(cfg.window) + "-tick window");
        if (item.ticks.size() != item.segment.size()) throw Error("segment ticks and values differ in length");
        WindowScan scan;
        scan.kpi = item.kpi;
        const std::span<const double> seg(item.segment);
        for (std::size_t s = 0; s + cfg.window <= seg.size(); s += cfg.stride) {
            const auto ks = ks_two_sample(seg.subspan(s, cfg.window), item.baseline);
            scan.window_starts.push_back(item.ticks[s]);
            scan.d.push_back(ks.d);
            scan.p_raw.push_back(ks.p_raw);
            pooled.push_back(ks.p_raw);
        }
        scans.push_back(std::move(scan));
    }

    std::vector<double> adjusted;
    switch (cfg.correction) {
        case Correction::none: adjusted = pooled; break;
        case Correction::bonferroni: adjusted = bonferroni(pooled, pooled.size()); break;
        case Correction::bh_fdr: adjusted = bh_adjust(pooled); break;
    }
    std::size_t k = 0;
    for (auto& scan : scans) {
        for (std::size_t w = 0; w < scan.p_raw.size(); ++w, ++k) {
            scan.p_adj.push_back(adjusted[k]);
            if (!scan.onset_window && adjusted[k] <= cfg.cis_alpha) scan.onset_window = w;
        }
    }
    return scans;
}

Direction direction_at_onset(std::span<const double> series, std::size_t onset, std::size_t window, double mu,
                             double sigma, double z_thr) {
    if (onset >= series.size()) throw AnalysisError("onset outside the series");
    const auto win = series.subspan(onset, std::min(window, series.size() - onset));
    Direction out;

    std::optional<double> pinned;
    std::size_t run = 1;
    for (std::size_t i = onset + 1; i < series.size() && !pinned; ++i) {
        run = series[i] == series[i - 1] ? run + 1 : 1;
        if (run >= window) pinned = series[i];
    }
    auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };

    if (pinned || !(sigma > 0.0)) {
        out.hard_constant = true;
        const double level = pinned ? *pinned : mean(win);
        out.z = sigma > 0.0 ? z_score(level, mu, sigma) : 0.0;
        out.direction = sign(level - mu);
        return out;
    }
    out.z = z_score(mean(win), mu, sigma);
    out.direction = direction_code(out.z, z_thr);
    if (out.direction == 0) out.direction = sign(out.z);
    return out;
}

std::vector<Step> order_events(std::vector<DeviationEvent> events) {
    std::sort(events.begin(), events.end(), [](const DeviationEvent& a, const DeviationEvent& b) {
        if (a.onset != b.onset) return a.onset < b.onset;
        if (a.ks_d != b.ks_d) return a.ks_d > b.ks_d;
        return a.kpi < b.kpi;
    });
    std::vector<Step> steps;
    for (std::size_t i = 0; i < events.size(); ++i) steps.push_back({i + 1, std::move(events[i])});
    return steps;
}

std::vector<DeviationEvent> detect_events(const LabeledPanel& data, const std::vector<std::string>& kpis,
                                          const SequenceConfig& cfg, std::vector<WindowScan>* scans_out) {
    const auto& t = data.panel.ticks();
    std::vector<KpiSegment> batch;
    for (const auto& kpi : kpis) {
        const Eigen::VectorXd col = data.panel.column(kpi);
        KpiSegment seg;
        seg.kpi = kpi;
        seg.baseline.assign(col.data() + data.normal_rows.first, col.data() + data.normal_rows.end());
        seg.segment.assign(col.data() + data.abnormal_rows.first, col.data() + data.abnormal_rows.end());
        seg.ticks.assign(t.begin() + static_cast<std::ptrdiff_t>(data.abnormal_rows.first),
                         t.begin() + static_cast<std::ptrdiff_t>(data.abnormal_rows.end()));
        batch.push_back(std::move(seg));
    }
    auto scans = rolling_ks_onset(batch, cfg);

    std::vector<DeviationEvent> events;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& scan = scans[i];
        if (!scan.onset_window) continue;
        const std::size_t w = *scan.onset_window;
        const std::size_t offset = w * cfg.stride;
        const double mu = mean(batch[i].baseline);
        const double sigma = sample_sd(batch[i].baseline);
        const auto dir = direction_at_onset(batch[i].segment, offset, cfg.window, mu, sigma, cfg.z_thr);
        events.push_back({scan.kpi, scan.window_starts[w], dir.direction, scan.d[w], scan.p_adj[w], cfg.correction,
                          dir.hard_constant, dir.z});
    }
    if (scans_out) *scans_out = std::move(scans);
    return events;
}

CisReport assemble_cis(const CausalSubgraph& subgraph, const std::vector<Step>& steps, const std::string& sla_metric,
                       const SequenceConfig& cfg) {
    std::map<std::string, std::int64_t> onset;
    for (const auto& s : steps) {
        if (!subgraph.has_node(s.event.kpi))
            throw AnalysisError("stage mismatch: event KPI '" + s.event.kpi + "' is not a subgraph node");
        onset.emplace(s.event.kpi, s.event.onset);
    }
    CisReport r;
    r.steps = steps;
    r.sla_metric = sla_metric;
    r.config = cfg;
    for (const auto& n : subgraph.nodes) r.nodes.push_back({n, onset.count(n) > 0, n == sla_metric});
    for (const auto& e : subgraph.edges) {
        const auto u = onset.find(e.source), v = onset.find(e.target);
        r.edges.push_back({e, u != onset.end() && v != onset.end() && u->second <= v->second});
    }
    return r;
}

nlohmann::json to_json(const CisReport& report) {
    nlohmann::json j;
    j["steps"] = nlohmann::json::array();
    for (const auto& s : report.steps)
        j["steps"].push_back({{"step", s.step},
                              {"kpi", s.event.kpi},
                              {"onset_tick", s.event.onset},
                              {"direction", s.event.direction},
                              {"ks_d", s.event.ks_d},
                              {"p_adj", s.event.p_adj},
                              {"hard_constant", s.event.hard_constant}});
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : report.nodes) j["nodes"].push_back({{"kpi", n.kpi}, {"flagged", n.flagged}, {"sla", n.sla}});
    j["edges"] = nlohmann::json::array();
    for (const auto& e : report.edges)
        j["edges"].push_back({{"src", e.edge.source}, {"dst", e.edge.target}, {"lag", e.edge.lag}, {"flagged", e.flagged}});
    j["config"] = {{"cis_alpha", report.config.cis_alpha},
                   {"window", report.config.window},
                   {"stride", report.config.stride},
                   {"correction", std::string(to_string(report.config.correction))},
                   {"z_thr", report.config.z_thr},
                   {"sla_metric", report.sla_metric}};
    return j;
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

std::string to_dot(const CisReport& report) {
    std::map<std::string, std::size_t> step_of;
    for (const auto& s : report.steps) step_of.emplace(s.event.kpi, s.step);
    auto nodes = report.nodes;
    std::sort(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) { return a.kpi < b.kpi; });

    std::ostringstream os;
    os << "digraph cis {\n  rankdir=LR;\n";
    for (const auto& n : nodes) {
        std::string label = n.kpi;
        if (auto it = step_of.find(n.kpi); it != step_of.end()) label += "\\nSTEP " + std::to_string(it->second);
        os << "  " << quoted(n.kpi) << " [label=\"" << label << "\"";
        if (n.flagged) os << ", intervention=true, style=filled, fillcolor=yellow";
        if (n.sla) os << ", sla=true, color=red";
        os << "];\n";
    }
    char label[64];
    for (const auto& e : report.edges) {
        std::snprintf(label, sizeof label, "lag=%d, r=%.3f", e.edge.lag, e.edge.r);
        os << "  " << quoted(e.edge.source) << " -> " << quoted(e.edge.target) << " [label=" << quoted(label);
        if (e.flagged) os << ", sequence=true, style=dashed, color=red";
        os << "];\n";
    }
    os << "}\n";
    return os.str();
}

std::string deviation_traces_csv(const LabeledPanel& data, const std::vector<std::string>& kpis, double z_thr) {
    const RowRange rows = data.analysis_rows();
    std::vector<std::vector<int>> codes;
    for (const auto& kpi : kpis) {
        const Eigen::VectorXd col = data.panel.column(kpi);
        const std::span<const double> normal(col.data() + data.normal_rows.first, data.normal_rows.count);
        const double mu = mean(normal), sigma = sample_sd(normal);
        auto& c = codes.emplace_back();
        for (std::size_t r = rows.first; r < rows.end(); ++r) {
            const double x = col[static_cast<Eigen::Index>(r)];
            c.push_back(sigma > 0.0 ? direction_code(z_score(x, mu, sigma), z_thr) : (x > mu) - (x < mu));
        }
    }
    std::ostringstream os;
    os << "tick";
    for (const auto& k : kpis) os << ',' << k;
    os << '\n';
    for (std::size_t i = 0; i < rows.count; ++i) {
        os << data.panel.ticks()[rows.first + i];
        for (const auto& c : codes) os << ',' << c[i];
        os << '\n';
    }
    return os.str();
}

}  // namespace rca
