#include "rca/pipeline.hpp"

#include "rca/report.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace rca {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"run", {"seed"}},
        {"input", {"panel", "missing", "granularity", "scenario", "scenario_file", "horizon"}},
        {"sla", {"metric", "op", "threshold", "min_duration"}},
        {"windows", {"normal_len", "abnormal_len", "lead_offset", "abnormal_start"}},
        {"rcd", {"g", "n_runs", "alpha", "max_cond", "allow_sla"}},
        {"subgraph", {"tau_max", "alpha", "max_cond", "include_autolinks", "nodes", "min_frequency"}},
        {"cis", {"alpha", "window", "stride", "correction", "z_thr"}},
        {"mc", {"g_range", "n_set", "p_thr", "reduction"}},
        {"output", {"dir"}},
    };
    return keys;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
        if (!piece.empty()) out.push_back(piece);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto t = trim(text);
    const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
        throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
    return value;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
    const auto t = trim(text);
    if (!t.empty() && t.front() == '-') throw ConfigError("config key '" + key + "' must be non-negative");
    return parse_number<std::size_t>(key, t);
}

bool parse_bool(const std::string& key, const std::string& text) {
    const auto t = trim(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + text + "'");
}

std::vector<std::size_t> parse_g_range(const std::string& key, const std::string& text) {
    const auto t = trim(text);
    if (t.empty() || t == "auto") return {};
    if (const auto dash = t.find('-'); dash != std::string::npos) {
        const auto lo = parse_count(key, t.substr(0, dash));
        const auto hi = parse_count(key, t.substr(dash + 1));
        if (lo > hi) throw ConfigError("config key '" + key + "': empty range '" + t + "'");
        std::vector<std::size_t> out;
        for (auto g = lo; g <= hi; ++g) out.push_back(g);
        return out;
    }
    std::vector<std::size_t> out;
    for (const auto& p : split_list(t)) out.push_back(parse_count(key, p));
    return out;
}

ReductionRule parse_reduction(const std::string& text) {
    const auto t = trim(text);
    if (t == "proportional") return ReductionRule::proportional;
    if (t == "absolute") return ReductionRule::absolute;
    throw ConfigError("unknown mc reduction '" + t + "' (proportional, absolute)");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(trim(p));
    if (path.empty() || path.is_absolute() || base.empty()) return path;
    return (base / path).lexically_normal();
}

nlohmann::json list_json(const std::vector<std::size_t>& v) { return v; }

}  // namespace

void PipelineConfig::validate() const {
    if (!scenario.empty()) canned_scenario(scenario);
    if (rcd.g < 2) throw ConfigError("rcd g must be at least 2");
    if (rcd.n_runs == 0) throw ConfigError("rcd n_runs must be positive");
    if (!(rcd.alpha > 0.0 && rcd.alpha < 1.0)) throw ConfigError("rcd alpha must lie in (0, 1)");
    if (subgraph.tau_max < 1) throw ConfigError("subgraph tau_max must be at least 1");
    if (!(subgraph.alpha > 0.0 && subgraph.alpha < 1.0)) throw ConfigError("subgraph alpha must lie in (0, 1)");
    if (!(min_frequency >= 0.0 && min_frequency <= 1.0)) throw ConfigError("subgraph min_frequency must lie in [0, 1]");
    cis.validate();
    for (auto g : mc.g_range)
        if (g < 2) throw ConfigError("mc g_range values must be at least 2");
    if (mc.n_set.empty()) throw ConfigError("mc n_set must not be empty");
    for (auto n : mc.n_set)
        if (n == 0) throw ConfigError("mc n_set values must be positive");
    if (!(mc.p_thr >= 0.0 && mc.p_thr < 1.0)) throw ConfigError("mc p_thr must lie in [0, 1)");
    if (windows.normal_len && *windows.normal_len == 0) throw ConfigError("windows normal_len must be positive");
    if (windows.abnormal_len && *windows.abnormal_len == 0) throw ConfigError("windows abnormal_len must be positive");
    if (jobs == 0) throw ConfigError("jobs must be positive");
}

PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config: " + e.message() + " at line " + std::to_string(e.line()));
    }
    PipelineConfig cfg;
    std::optional<std::string> sla_metric;
    std::string sla_op = "<";
    std::optional<double> sla_threshold;
    std::int64_t sla_min = 0;

    for (const auto& [section, body] : tree) {
        const auto sec = known_keys().find(section);
        if (sec == known_keys().end()) throw ConfigError("unknown config section [" + section + "]");
        if (body.empty() && !body.data().empty())
            throw ConfigError("config key '" + section + "' must belong to a section");
        for (const auto& [name, node] : body) {
            const std::string key = section + "." + name;
            if (!sec->second.count(name)) throw ConfigError("unknown config key '" + key + "'");
            const std::string v = trim(node.data());
            if (key == "run.seed") cfg.seed = parse_number<std::uint64_t>(key, v);
            else if (key == "input.panel") cfg.panel = resolve(base_dir, v);
            else if (key == "input.missing") cfg.csv.missing = parse_missing_policy(v);
            else if (key == "input.granularity") cfg.csv.granularity_seconds = parse_number<int>(key, v);
            else if (key == "input.scenario") cfg.scenario = v;
            else if (key == "input.scenario_file") cfg.scenario_file = resolve(base_dir, v);
            else if (key == "input.horizon") cfg.horizon = parse_count(key, v);
            else if (key == "sla.metric") sla_metric = v;
            else if (key == "sla.op") sla_op = v;
            else if (key == "sla.threshold") sla_threshold = parse_number<double>(key, v);
            else if (key == "sla.min_duration") sla_min = parse_number<std::int64_t>(key, v);
            else if (key == "windows.normal_len") cfg.windows.normal_len = parse_count(key, v);
            else if (key == "windows.abnormal_len") cfg.windows.abnormal_len = parse_count(key, v);
            else if (key == "windows.lead_offset") cfg.windows.lead_offset = parse_count(key, v);
            else if (key == "windows.abnormal_start") cfg.windows.abnormal_start = parse_number<std::int64_t>(key, v);
            else if (key == "rcd.g") cfg.rcd.g = parse_count(key, v);
            else if (key == "rcd.n_runs") cfg.rcd.n_runs = parse_count(key, v);
            else if (key == "rcd.alpha") cfg.rcd.alpha = parse_number<double>(key, v);
            else if (key == "rcd.max_cond") cfg.rcd.max_cond = parse_count(key, v);
            else if (key == "rcd.allow_sla") cfg.allow_sla = parse_bool(key, v);
            else if (key == "subgraph.tau_max") cfg.subgraph.tau_max = parse_number<int>(key, v);
            else if (key == "subgraph.alpha") cfg.subgraph.alpha = parse_number<double>(key, v);
            else if (key == "subgraph.max_cond") cfg.subgraph.max_cond = parse_count(key, v);
            else if (key == "subgraph.include_autolinks") cfg.subgraph.include_autolinks = parse_bool(key, v);
            else if (key == "subgraph.nodes") cfg.subgraph_nodes = split_list(v);
            else if (key == "subgraph.min_frequency") cfg.min_frequency = parse_number<double>(key, v);
            else if (key == "cis.alpha") cfg.cis.cis_alpha = parse_number<double>(key, v);
            else if (key == "cis.window") cfg.cis.window = parse_count(key, v);
            else if (key == "cis.stride") cfg.cis.stride = parse_count(key, v);
            else if (key == "cis.correction") cfg.cis.correction = parse_correction(v);
            else if (key == "cis.z_thr") cfg.cis.z_thr = parse_number<double>(key, v);
            else if (key == "mc.g_range") cfg.mc.g_range = parse_g_range(key, v);
            else if (key == "mc.n_set") {
                cfg.mc.n_set.clear();
                for (const auto& p : split_list(v)) cfg.mc.n_set.push_back(parse_count(key, p));
            } else if (key == "mc.p_thr") cfg.mc.p_thr = parse_number<double>(key, v);
            else if (key == "mc.reduction") cfg.mc.reduction = parse_reduction(v);
            else if (key == "output.dir") cfg.out_dir = resolve(base_dir, v);
        }
    }
    if (sla_metric || sla_threshold) {
        if (!sla_metric || !sla_threshold) throw ConfigError("[sla] needs both metric and threshold");
        cfg.sla = SlaRule{*sla_metric, parse_comparator(sla_op), *sla_threshold, sla_min};
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    return parse_config(in, path.parent_path());
}

nlohmann::json to_json(const PipelineConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["input"] = {{"panel", cfg.panel.generic_string()},
                  {"granularity", cfg.csv.granularity_seconds},
                  {"scenario", cfg.scenario},
                  {"scenario_file", cfg.scenario_file.generic_string()}};
    j["input"]["missing"] = cfg.csv.missing == MissingPolicy::fail       ? "fail"
                            : cfg.csv.missing == MissingPolicy::drop_row ? "drop-row"
                                                                         : "linear";
    j["input"]["horizon"] = cfg.horizon ? nlohmann::json(*cfg.horizon) : nlohmann::json(nullptr);
    if (cfg.sla)
        j["sla"] = {{"metric", cfg.sla->metric},
                    {"op", std::string(to_string(cfg.sla->op))},
                    {"threshold", cfg.sla->threshold},
                    {"min_duration", cfg.sla->min_duration_ticks}};
    else
        j["sla"] = nullptr;
    auto opt = [](const auto& o) { return o ? nlohmann::json(*o) : nlohmann::json(nullptr); };
    j["windows"] = {{"normal_len", opt(cfg.windows.normal_len)},
                    {"abnormal_len", opt(cfg.windows.abnormal_len)},
                    {"lead_offset", opt(cfg.windows.lead_offset)},
                    {"abnormal_start", opt(cfg.windows.abnormal_start)}};
    j["rcd"] = {{"g", cfg.rcd.g},
                {"n_runs", cfg.rcd.n_runs},
                {"alpha", cfg.rcd.alpha},
                {"max_cond", cfg.rcd.max_cond},
                {"allow_sla", cfg.allow_sla}};
    j["subgraph"] = {{"tau_max", cfg.subgraph.tau_max},
                     {"alpha", cfg.subgraph.alpha},
                     {"max_cond", cfg.subgraph.max_cond},
                     {"include_autolinks", cfg.subgraph.include_autolinks},
                     {"nodes", cfg.subgraph_nodes},
                     {"min_frequency", cfg.min_frequency}};
    j["cis"] = {{"alpha", cfg.cis.cis_alpha},
                {"window", cfg.cis.window},
                {"stride", cfg.cis.stride},
                {"correction", std::string(to_string(cfg.cis.correction))},
                {"z_thr", cfg.cis.z_thr}};
    j["mc"] = {{"g_range", cfg.mc.g_range.empty() ? nlohmann::json("auto") : list_json(cfg.mc.g_range)},
               {"n_set", list_json(cfg.mc.n_set)},
               {"p_thr", cfg.mc.p_thr},
               {"reduction", cfg.mc.reduction == ReductionRule::proportional ? "proportional" : "absolute"}};
    return j;
}

void write_bundle(const Bundle& bundle, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::vector<fs::path> written;
    try {
        fs::create_directories(dir);
        for (const auto& [name, content] : bundle) {
            const fs::path target = dir / name;
            const fs::path tmp = dir / (name + ".partial");
            {
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                if (!out) throw Error("cannot write '" + tmp.string() + "'");
                out << content;
                if (!out) throw Error("cannot write '" + tmp.string() + "'");
            }
            written.push_back(tmp);
        }
        for (const auto& [name, content] : bundle) fs::rename(dir / (name + ".partial"), dir / name);
    } catch (const fs::filesystem_error& e) {
        std::error_code ec;
        for (const auto& p : written) fs::remove(p, ec);
        throw Error(std::string("writing outputs: ") + e.what());
    } catch (...) {
        std::error_code ec;
        for (const auto& p : written) fs::remove(p, ec);
        throw;
    }
}

int exit_code_for(const std::exception& e) noexcept {
    if (auto s = dynamic_cast<const StageError*>(&e)) return s->exit_code();
    if (dynamic_cast<const ConfigError*>(&e)) return exit_codes::config;
    if (dynamic_cast<const ValidationError*>(&e)) return exit_codes::data;
    if (dynamic_cast<const Error*>(&e)) return exit_codes::analysis;
    return exit_codes::usage;
}

namespace {

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e.what(), exit_code_for(e));
    }
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

nlohmann::json window_json(const LabeledPanel& l) {
    return {{"normal", {{"begin", l.normal_window.begin}, {"end", l.normal_window.end}}},
            {"abnormal", {{"begin", l.abnormal_window.begin}, {"end", l.abnormal_window.end}}}};
}

/// Panel, its labeling and the resolved SLA metric, shared by most commands.
struct Prepared {
    KpiPanel panel;
    LabeledPanel labeled;
    std::optional<SlaRule> sla;
    std::vector<std::string> candidates;
};

Prepared prepare(const PipelineConfig& cfg) {
    auto panel = stage("input", [&] { return load_panel(cfg); });
    auto sla = stage("label", [&] { return resolve_sla(cfg); });
    auto labeled = stage("label", [&] { return label_panel(panel, cfg); });
    std::optional<std::string> metric;
    if (sla) {
        panel.column_index(sla->metric);
        metric = sla->metric;
    }
    auto candidates = rcd_candidates(panel, metric, cfg.allow_sla);
    if (candidates.size() < 2) throw StageError("rcd", "need at least two candidate KPIs", exit_codes::data);
    return {std::move(panel), std::move(labeled), std::move(sla), std::move(candidates)};
}

RcdResult discover(const Prepared& p, const PipelineConfig& cfg) {
    return stage("rcd", [&] {
        return rcd_multi_run(RcdData(p.labeled, p.candidates), effective_rcd(cfg, p.candidates.size()), cfg.jobs);
    });
}

std::vector<std::string> subgraph_nodes(const Prepared& p, const PipelineConfig& cfg, const RcdResult* rcd) {
    std::vector<std::string> nodes = cfg.subgraph_nodes;
    if (nodes.empty() && rcd) {
        for (std::size_t i = 0; i < rcd->table.kpis.size(); ++i)
            if (rcd->table.proportion(i) >= cfg.min_frequency) nodes.push_back(rcd->table.kpis[i]);
        if (p.sla && std::find(nodes.begin(), nodes.end(), p.sla->metric) == nodes.end())
            nodes.push_back(p.sla->metric);
    }
    for (const auto& n : nodes) p.panel.column_index(n);
    return nodes;
}

SubgraphConfig subgraph_cfg(const PipelineConfig& cfg) {
    auto s = cfg.subgraph;
    s.jobs = cfg.jobs;
    return s;
}

nlohmann::json rcd_json(const RcdResult& r, const RcdConfig& eff) {
    auto j = to_json(r);
    j["effective"] = {{"g", eff.g}, {"n_runs", eff.n_runs}, {"alpha", eff.alpha}, {"max_cond", eff.max_cond}};
    return j;
}

std::vector<std::size_t> g_range_for(const PipelineConfig& cfg, std::size_t v) {
    if (!cfg.mc.g_range.empty()) return cfg.mc.g_range;
    std::vector<std::size_t> out;
    for (std::size_t g = std::min<std::size_t>(3, v); g <= v; ++g) out.push_back(g);
    return out;
}

}  // namespace

std::optional<Scenario> resolve_scenario(const PipelineConfig& cfg) {
    if (!cfg.scenario_file.empty()) return load_scenario(cfg.scenario_file);
    if (!cfg.scenario.empty()) return canned_scenario(cfg.scenario);
    return std::nullopt;
}

KpiPanel load_panel(const PipelineConfig& cfg) {
    if (!cfg.panel.empty()) return load_csv(cfg.panel, cfg.csv);
    const auto sc = resolve_scenario(cfg);
    if (!sc) throw ConfigError("no input: set [input] panel, scenario or scenario_file");
    return inject(sc->spec, cfg.seed, sc->interventions, cfg.horizon.value_or(sc->horizon)).first;
}

std::optional<SlaRule> resolve_sla(const PipelineConfig& cfg) {
    if (cfg.sla) return cfg.sla;
    if (const auto sc = resolve_scenario(cfg); sc && sc->spec.sla) return sc->spec.sla->rule();
    return std::nullopt;
}

LabeledPanel label_panel(const KpiPanel& panel, const PipelineConfig& cfg) {
    const auto sc = resolve_scenario(cfg);
    const std::size_t normal_len = cfg.windows.normal_len.value_or(sc ? sc->normal_len : 120);
    const std::size_t abnormal_len = cfg.windows.abnormal_len.value_or(sc ? sc->abnormal_len : 120);
    const std::size_t lead = cfg.windows.lead_offset.value_or(sc ? sc->lead_offset : 0);
    std::optional<std::int64_t> start = cfg.windows.abnormal_start;
    if (!start && sc) start = sc->abnormal_start;

    if (start) return label_rows(panel, panel.row_of_tick(*start), normal_len, abnormal_len);

    const auto rule = resolve_sla(cfg);
    if (!rule) throw ConfigError("labeling needs an [sla] rule or windows.abnormal_start");
    const auto breaches = apply_sla_rule(panel, *rule);
    if (breaches.empty())
        throw AnalysisError("no SLA breach: '" + rule->metric + "' never satisfies " + std::string(to_string(rule->op)) +
                            " " + std::to_string(rule->threshold) + " for the required duration");
    std::string last;
    for (const auto& b : breaches) {
        try {
            return label_states(panel, b, normal_len, abnormal_len, lead);
        } catch (const ValidationError& e) {
            last = e.what();
        }
    }
    throw ValidationError("no SLA breach leaves room for both windows (" + last + ")");
}

RcdConfig effective_rcd(const PipelineConfig& cfg, std::size_t candidates) {
    RcdConfig r = cfg.rcd;
    r.seed = cfg.seed;
    r.g = std::min(r.g, std::max<std::size_t>(2, candidates));
    r.max_cond = std::min(r.max_cond, r.g - 1);
    return r;
}

Bundle cmd_synth(const PipelineConfig& cfg) {
    const auto sc = stage("synth", [&] { return resolve_scenario(cfg); });
    if (!sc) throw ConfigError("synth needs a scenario name or scenario file");
    auto [panel, truth] =
        stage("synth", [&] { return inject(sc->spec, cfg.seed, sc->interventions, cfg.horizon.value_or(sc->horizon)); });
    nlohmann::json gt = to_json(truth);
    gt["seed"] = cfg.seed;
    gt["scenario"] = to_json(*sc);
    return {{"panel.csv", to_csv(panel)}, {"ground_truth.json", dump(gt)}};
}

Bundle cmd_label(const PipelineConfig& cfg) {
    const auto p = prepare(cfg);
    std::ostringstream csv;
    csv << "tick,fnode\n";
    const RowRange rows = p.labeled.analysis_rows();
    for (std::size_t r = rows.first; r < rows.end(); ++r)
        csv << p.panel.ticks()[r] << ',' << int(p.labeled.fnode[r]) << '\n';
    nlohmann::json j = window_json(p.labeled);
    j["sla_metric"] = p.sla ? nlohmann::json(p.sla->metric) : nlohmann::json(nullptr);
    j["config"] = to_json(cfg);
    return {{"labels.csv", csv.str()}, {"windows.json", dump(j)}};
}

Bundle cmd_discover(const PipelineConfig& cfg) {
    const auto p = prepare(cfg);
    const auto r = discover(p, cfg);
    auto j = rcd_json(r, effective_rcd(cfg, p.candidates.size()));
    j["config"] = to_json(cfg);
    return {{"rcd.json", dump(j)}};
}

Bundle cmd_subgraph(const PipelineConfig& cfg) {
    const auto p = prepare(cfg);
    std::optional<RcdResult> r;
    if (cfg.subgraph_nodes.empty()) r = discover(p, cfg);
    const auto nodes = subgraph_nodes(p, cfg, r ? &*r : nullptr);
    const auto g = stage("subgraph", [&] { return build_subgraph(p.labeled.normal(), nodes, subgraph_cfg(cfg)); });
    auto j = to_json(g);
    j["config"] = to_json(cfg);
    return {{"subgraph.json", dump(j)}, {"subgraph.dot", to_dot(g)}};
}

Bundle cmd_sequence(const PipelineConfig& cfg) {
    const auto p = prepare(cfg);
    std::optional<RcdResult> r;
    if (cfg.subgraph_nodes.empty()) r = discover(p, cfg);
    const auto nodes = subgraph_nodes(p, cfg, r ? &*r : nullptr);
    const auto g = stage("subgraph", [&] { return build_subgraph(p.labeled.normal(), nodes, subgraph_cfg(cfg)); });
    const auto report = stage("sequence", [&] {
        return assemble_cis(g, order_events(detect_events(p.labeled, nodes, cfg.cis)), p.sla ? p.sla->metric : "",
                            cfg.cis);
    });
    auto j = to_json(report);
    j["config_full"] = to_json(cfg);
    return {{"cis.json", dump(j)},
            {"cis.dot", to_dot(report)},
            {"deviation_traces.csv", deviation_traces_csv(p.labeled, nodes, cfg.cis.z_thr)}};
}

Bundle cmd_tune(const PipelineConfig& cfg) {
    const auto p = prepare(cfg);
    const auto grid = stage("tune", [&] {
        const RcdData data(p.labeled, p.candidates);
        auto base = cfg.rcd;
        return run_grid(data, g_range_for(cfg, p.candidates.size()), cfg.mc.n_set, base, cfg.seed, cfg.jobs);
    });
    const auto rows = stage("tune", [&] { return tuning_rows(grid, cfg.mc.reduction); });
    const auto prominent = prominent_sources(rows, cfg.mc.p_thr);
    const auto params = stage("tune", [&] { return consolidate(rows, prominent, cfg.mc.p_thr); });
    nlohmann::json j;
    j["consolidated"] = to_json(params);
    j["grid"] = to_json(grid);
    j["config"] = to_json(cfg);
    return {{"tuning.csv", tuning_csv(rows)}, {"tuning.json", dump(j)}};
}

Bundle cmd_compare_states(const PipelineConfig& cfg) {
    const auto p = prepare(cfg);
    std::optional<RcdResult> r;
    if (cfg.subgraph_nodes.empty()) r = discover(p, cfg);
    const auto nodes = subgraph_nodes(p, cfg, r ? &*r : nullptr);
    const auto sg = subgraph_cfg(cfg);
    const auto normal = stage("subgraph", [&] { return build_subgraph(p.labeled.normal(), nodes, sg); });
    const auto abnormal = stage("subgraph", [&] { return build_subgraph(p.labeled.abnormal(), nodes, sg); });
    const auto diff = stage("compare", [&] { return graph_diff(normal, abnormal); });
    auto j = to_json(diff);
    j["nodes"] = nodes;
    j["config"] = to_json(cfg);
    return {{"graph_diff.json", dump(j)},
            {"subgraph_normal.dot", to_dot(normal, "normal_state")},
            {"subgraph_abnormal.dot", to_dot(abnormal, "abnormal_state")}};
}

Bundle cmd_run_all(const PipelineConfig& cfg) {
    const auto p = prepare(cfg);
    const auto eff = effective_rcd(cfg, p.candidates.size());
    const auto r = discover(p, cfg);
    const auto nodes = subgraph_nodes(p, cfg, &r);
    const auto g = stage("subgraph", [&] { return build_subgraph(p.labeled.normal(), nodes, subgraph_cfg(cfg)); });
    const auto report = stage("sequence", [&] {
        return assemble_cis(g, order_events(detect_events(p.labeled, nodes, cfg.cis)), p.sla ? p.sla->metric : "",
                            cfg.cis);
    });
    const auto hist = stage("report", [&] { return histograms_csv(p.labeled, p.panel.kpi_names()); });
    const auto traces = stage("report", [&] { return deviation_traces_csv(p.labeled, nodes, cfg.cis.z_thr); });

    Bundle b;
    auto cis = to_json(report);
    cis["config_full"] = to_json(cfg);
    b["cis.json"] = dump(cis);
    b["cis.dot"] = to_dot(report);
    auto sgj = to_json(g);
    sgj["config"] = to_json(cfg);
    b["subgraph.json"] = dump(sgj);
    b["subgraph.dot"] = to_dot(g);
    auto rj = rcd_json(r, eff);
    rj["config"] = to_json(cfg);
    b["rcd.json"] = dump(rj);
    b["deviation_traces.csv"] = traces;
    b["histograms.csv"] = hist;

    nlohmann::json meta;
    meta["tool"] = "rca";
    meta["version"] = "0.1.0";
    meta["stages"] = {"input", "label", "rcd", "subgraph", "sequence", "report"};
    meta["input"] = {{"rows", p.panel.rows()}, {"kpis", p.panel.kpi_names()}};
    meta["windows"] = window_json(p.labeled);
    meta["sla_metric"] = p.sla ? nlohmann::json(p.sla->metric) : nlohmann::json(nullptr);
    meta["subgraph_nodes"] = nodes;
    meta["steps"] = report.steps.size();
    meta["config"] = to_json(cfg);
    std::vector<std::string> outputs;
    for (const auto& [name, _] : b) outputs.push_back(name);
    outputs.push_back("run_metadata.json");
    std::sort(outputs.begin(), outputs.end());
    meta["outputs"] = outputs;
    b["run_metadata.json"] = dump(meta);
    return b;
}

}  // namespace rca
