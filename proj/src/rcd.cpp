#include "rca/rcd.hpp"

#include "rca/error.hpp"
#include "rca/util.hpp"

#include <algorithm>
#include <numeric>

namespace rca {

namespace {

Eigen::MatrixXd pooled_matrix(const LabeledPanel& data, const std::vector<std::string>& candidates) {
    const RowRange rows = data.analysis_rows();
    const auto n = static_cast<Eigen::Index>(rows.count);
    Eigen::MatrixXd m(n, static_cast<Eigen::Index>(candidates.size() + 1));
    for (std::size_t j = 0; j < candidates.size(); ++j)
        m.col(static_cast<Eigen::Index>(j)) =
            data.panel.values().col(static_cast<Eigen::Index>(data.panel.column_index(candidates[j]))).segment(
                static_cast<Eigen::Index>(rows.first), n);
    for (Eigen::Index r = 0; r < n; ++r)
        m(r, static_cast<Eigen::Index>(candidates.size())) = data.fnode[rows.first + static_cast<std::size_t>(r)];
    return m;
}

// Calls fn(subset) for every size-k subset of items in lexicographic order;
// stops early when fn returns false.
template <class Fn>
void for_each_subset(const std::vector<std::size_t>& items, std::size_t k, Fn&& fn) {
    if (k > items.size()) return;
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<std::size_t> subset(k);
    for (;;) {
        for (std::size_t i = 0; i < k; ++i) subset[i] = items[idx[i]];
        if (!fn(std::span<const std::size_t>(subset))) return;
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == items.size() - k + (i - 1)) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

}  // namespace

void RcdConfig::validate(std::size_t kpi_count) const {
    if (g < 2) throw ConfigError("rcd g must be at least 2");
    if (g > std::max<std::size_t>(2, kpi_count))
        throw ConfigError("rcd g=" + std::to_string(g) + " exceeds the " + std::to_string(kpi_count) + " candidate KPIs");
    if (max_cond + 1 > g) throw ConfigError("rcd max_cond must be at most g - 1");
    if (n_runs == 0) throw ConfigError("rcd n_runs must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("rcd alpha must lie in (0, 1)");
}

RcdData::RcdData(const LabeledPanel& data, std::vector<std::string> candidates)
    : candidates_(std::move(candidates)), tester_(pooled_matrix(data, candidates_)) {}

std::vector<std::string> rcd_candidates(const KpiPanel& panel, const std::optional<std::string>& sla_metric,
                                        bool allow_sla) {
    std::vector<std::string> out;
    for (const auto& n : panel.kpi_names())
        if (allow_sla || !sla_metric || n != *sla_metric) out.push_back(n);
    return out;
}

std::vector<std::vector<std::size_t>> partition(std::vector<std::size_t> items, std::size_t g, std::mt19937_64& rng) {
    if (g < 2) throw ConfigError("chunk size g must be at least 2");
    std::shuffle(items.begin(), items.end(), rng);
    std::vector<std::vector<std::size_t>> chunks;
    for (std::size_t i = 0; i < items.size(); i += g)
        chunks.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(i),
                            items.begin() + static_cast<std::ptrdiff_t>(std::min(items.size(), i + g)));
    return chunks;
}

std::vector<std::vector<std::string>> partition(std::vector<std::string> names, std::size_t g, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(names.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<std::vector<std::string>> out;
    for (const auto& chunk : partition(std::move(idx), g, rng)) {
        auto& c = out.emplace_back();
        for (auto i : chunk) c.push_back(names[i]);
    }
    return out;
}

SkeletonResult local_skeleton(const RcdData& data, std::span<const std::size_t> chunk, double alpha,
                              std::size_t max_cond) {
    SkeletonResult out;
    std::vector<std::size_t> adjacent(chunk.begin(), chunk.end());
    std::sort(adjacent.begin(), adjacent.end());
    adjacent.erase(std::unique(adjacent.begin(), adjacent.end()), adjacent.end());
    for (auto x : adjacent)
        if (x >= data.size()) throw Error("chunk member outside the candidate set");
    std::vector<double> max_p(data.size(), 0.0);
    const std::size_t f = data.fnode_index();
    const std::size_t n = data.sample_size();

    for (std::size_t level = 0; level <= max_cond; ++level) {
        if (adjacent.empty() || adjacent.size() - 1 < level) break;
        if (n <= level + 3) {
            out.warnings.push_back("conditioning level " + std::to_string(level) + " skipped: sample size " +
                                   std::to_string(n) + " too small");
            break;
        }
        std::vector<std::size_t> removed;
        for (auto x : adjacent) {
            std::vector<std::size_t> others;
            for (auto o : adjacent)
                if (o != x) others.push_back(o);
            bool independent = false;
            for_each_subset(others, level, [&](std::span<const std::size_t> s) {
                const auto res = data.tester().test(x, f, s);
                max_p[x] = std::max(max_p[x], res.p);
                independent = res.p > alpha;
                return !independent;
            });
            if (independent) removed.push_back(x);
        }
        std::erase_if(adjacent, [&](std::size_t x) { return std::binary_search(removed.begin(), removed.end(), x); });
    }
    out.survivors = adjacent;
    for (auto x : adjacent) out.p_values.push_back(max_p[x]);
    return out;
}

CandidateSet hierarchical_refine(const RcdData& data, std::vector<std::size_t> survivors, std::size_t g, double alpha,
                                 std::size_t max_cond, std::mt19937_64& rng, std::vector<std::string>* warnings) {
    auto note = [&](const std::vector<std::string>& w) {
        if (warnings) warnings->insert(warnings->end(), w.begin(), w.end());
    };
    std::sort(survivors.begin(), survivors.end());
    while (survivors.size() > g) {
        std::vector<std::size_t> next;
        for (const auto& chunk : partition(survivors, g, rng)) {
            auto res = local_skeleton(data, chunk, alpha, max_cond);
            note(res.warnings);
            next.insert(next.end(), res.survivors.begin(), res.survivors.end());
        }
        std::sort(next.begin(), next.end());
        const bool stalled = next.size() == survivors.size();
        survivors = std::move(next);
        if (stalled) break;
    }
    CandidateSet out;
    if (survivors.empty()) return out;
    auto final_pass = local_skeleton(data, survivors, alpha, max_cond);
    note(final_pass.warnings);
    for (std::size_t i = 0; i < final_pass.survivors.size(); ++i) {
        out.kpis.push_back(data.candidates()[final_pass.survivors[i]]);
        out.p_values.push_back(final_pass.p_values[i]);
    }
    return out;
}

RunRecord rcd_single_run(const RcdData& data, const RcdConfig& cfg, std::size_t run_index) {
    RunRecord rec;
    rec.index = run_index;
    rec.seed = derive_seed(cfg.seed, {run_index});
    std::mt19937_64 rng(rec.seed);

    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> survivors;
    for (const auto& chunk : partition(all, cfg.g, rng)) {
        auto& names = rec.chunks.emplace_back();
        for (auto i : chunk) names.push_back(data.candidates()[i]);
        auto res = local_skeleton(data, chunk, cfg.alpha, cfg.max_cond);
        rec.warnings.insert(rec.warnings.end(), res.warnings.begin(), res.warnings.end());
        survivors.insert(survivors.end(), res.survivors.begin(), res.survivors.end());
    }
    std::sort(survivors.begin(), survivors.end());
    for (auto i : survivors) rec.first_pass_survivors.push_back(data.candidates()[i]);
    rec.candidates = hierarchical_refine(data, std::move(survivors), cfg.g, cfg.alpha, cfg.max_cond, rng, &rec.warnings);
    return rec;
}

std::optional<std::size_t> FrequencyTable::find(std::string_view kpi) const {
    auto it = std::find(kpis.begin(), kpis.end(), kpi);
    if (it == kpis.end()) return std::nullopt;
    return static_cast<std::size_t>(it - kpis.begin());
}

RcdResult rcd_multi_run(const RcdData& data, const RcdConfig& cfg, unsigned jobs) {
    cfg.validate(data.size());
    RcdResult out;
    out.runs.resize(cfg.n_runs);
    parallel_for(cfg.n_runs, jobs, [&](std::size_t i) { out.runs[i] = rcd_single_run(data, cfg, i); });
    out.table.kpis = data.candidates();
    out.table.counts.assign(data.size(), 0);
    out.table.n_runs = cfg.n_runs;
    for (const auto& run : out.runs)
        for (const auto& kpi : run.candidates.kpis) ++out.table.counts[*out.table.find(kpi)];
    return out;
}

RcdResult rcd_multi_run(const LabeledPanel& data, const RcdConfig& cfg, const std::optional<std::string>& sla_metric,
                        unsigned jobs) {
    return rcd_multi_run(RcdData(data, rcd_candidates(data.panel, sla_metric)), cfg, jobs);
}

nlohmann::json to_json(const RcdResult& result) {
    nlohmann::json j;
    j["n_runs"] = result.table.n_runs;
    j["frequency"] = nlohmann::json::array();
    for (std::size_t i = 0; i < result.table.kpis.size(); ++i)
        j["frequency"].push_back({{"kpi", result.table.kpis[i]},
                                  {"count", result.table.counts[i]},
                                  {"proportion", result.table.proportion(i)}});
    j["runs"] = nlohmann::json::array();
    for (const auto& run : result.runs) {
        nlohmann::json r{{"run", run.index}, {"seed", run.seed}, {"chunks", run.chunks},
                         {"first_pass_survivors", run.first_pass_survivors}};
        r["candidates"] = nlohmann::json::array();
        for (std::size_t i = 0; i < run.candidates.kpis.size(); ++i)
            r["candidates"].push_back({{"kpi", run.candidates.kpis[i]}, {"p_value", run.candidates.p_values[i]}});
        r["warnings"] = run.warnings;
        j["runs"].push_back(std::move(r));
    }
    return j;
}

}  // namespace rca
