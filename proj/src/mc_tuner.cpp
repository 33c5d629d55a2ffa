#include "rca/mc_tuner.hpp"

#include "rca/error.hpp"
#include "rca/stats.hpp"
#include "rca/util.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace rca {

std::size_t McGrid::g_index(std::size_t g) const {
    auto it = std::find(g_values.begin(), g_values.end(), g);
    if (it == g_values.end()) throw AnalysisError("g=" + std::to_string(g) + " is not in the grid");
    return static_cast<std::size_t>(it - g_values.begin());
}

std::size_t McGrid::kpi_index(std::string_view kpi) const {
    auto it = std::find(kpis.begin(), kpis.end(), kpi);
    if (it == kpis.end()) throw AnalysisError("KPI '" + std::string(kpi) + "' is not in the grid");
    return static_cast<std::size_t>(it - kpis.begin());
}

McGrid run_grid(const RcdData& data, std::vector<std::size_t> g_range, std::vector<std::size_t> n_set,
                const RcdConfig& base, std::uint64_t seed, unsigned jobs) {
    std::sort(g_range.begin(), g_range.end());
    g_range.erase(std::unique(g_range.begin(), g_range.end()), g_range.end());
    std::sort(n_set.begin(), n_set.end());
    n_set.erase(std::unique(n_set.begin(), n_set.end()), n_set.end());
    if (g_range.empty() || n_set.empty()) throw ConfigError("Monte Carlo grid needs at least one g and one n");
    const std::size_t v = data.size();
    if (g_range.front() < 2 || g_range.back() > std::max<std::size_t>(2, v))
        throw ConfigError("g range must lie within [2, " + std::to_string(v) + "]");
    if (n_set.front() == 0) throw ConfigError("n values must be positive");

    McGrid grid;
    grid.g_values = g_range;
    grid.n_values = n_set;
    grid.kpis = data.candidates();

    struct Task {
        std::size_t cell;
        std::size_t run;
    };
    std::vector<RcdConfig> cells;
    std::vector<Task> tasks;
    for (auto g : g_range)
        for (auto n : n_set) {
            RcdConfig cfg = base;
            cfg.g = g;
            cfg.n_runs = n;
            cfg.max_cond = std::min(base.max_cond, g - 1);
            cfg.seed = derive_seed(seed, {g, n});
            cfg.validate(v);
            for (std::size_t r = 0; r < n; ++r) tasks.push_back({cells.size(), r});
            cells.push_back(cfg);
        }

    std::vector<std::vector<std::size_t>> found(tasks.size());
    parallel_for(tasks.size(), jobs, [&](std::size_t t) {
        const auto run = rcd_single_run(data, cells[tasks[t].cell], tasks[t].run);
        for (const auto& kpi : run.candidates.kpis) found[t].push_back(grid.kpi_index(kpi));
    });

    grid.counts.assign(cells.size() * v, 0);
    for (std::size_t t = 0; t < tasks.size(); ++t)
        for (auto k : found[t]) ++grid.counts[tasks[t].cell * v + k];
    return grid;
}

double estimate_p(const McGrid& grid, std::string_view kpi, std::size_t g) {
    const auto gi = grid.g_index(g);
    const auto ki = grid.kpi_index(kpi);
    double sum = 0.0;
    for (std::size_t ni = 0; ni < grid.n_values.size(); ++ni) sum += grid.proportion(gi, ni, ki);
    return sum / static_cast<double>(grid.n_values.size());
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw AnalysisError("regression needs at least two paired points");
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw AnalysisError("regression is degenerate: all x values are equal");
    return sxy / sxx;
}

namespace {
std::vector<double> cell_variances(const McGrid& grid, std::size_t gi, std::size_t ki) {
    std::vector<double> out;
    for (std::size_t ni = 0; ni < grid.n_values.size(); ++ni) {
        const double sd = binomial_sd(grid.proportion(gi, ni, ki), grid.n_values[ni]);
        out.push_back(sd * sd);
    }
    return out;
}
}  // namespace

VarianceTrend variance_trend(const McGrid& grid, std::string_view kpi) {
    if (grid.n_values.size() < 3)
        throw AnalysisError("variance trend needs at least three n values, grid has " +
                            std::to_string(grid.n_values.size()));
    const auto ki = grid.kpi_index(kpi);
    std::vector<double> x(grid.n_values.begin(), grid.n_values.end());
    VarianceTrend out;
    out.g_values = grid.g_values;
    std::size_t negative = 0;
    for (std::size_t gi = 0; gi < grid.g_values.size(); ++gi) {
        const double s = ols_slope(x, cell_variances(grid, gi, ki));
        out.slopes.push_back(s);
        if (s < 0.0) ++negative;
    }
    out.negative_fraction = static_cast<double>(negative) / static_cast<double>(out.slopes.size());
    out.reliable = out.negative_fraction >= 0.9;
    return out;
}

GSelection select_g(const McGrid& grid, std::string_view kpi) {
    if (grid.g_values.empty()) throw AnalysisError("grid has no g values");
    std::vector<GSelection> est;
    for (auto g : grid.g_values) est.push_back({g, estimate_p(grid, kpi, g)});
    auto sorted = est;
    std::sort(sorted.begin(), sorted.end(), [](const GSelection& a, const GSelection& b) {
        return a.p_hat != b.p_hat ? a.p_hat < b.p_hat : a.g < b.g;
    });
    const std::size_t m = sorted.size();
    std::vector<double> medians{sorted[(m - 1) / 2].p_hat};
    if (m % 2 == 0) medians.push_back(sorted[m / 2].p_hat);
    for (const auto& e : est)
        if (std::find(medians.begin(), medians.end(), e.p_hat) != medians.end()) return e;
    return est.front();
}

std::size_t select_n(std::span<const std::size_t> n_values, std::span<const double> variances, ReductionRule rule) {
    if (n_values.size() != variances.size()) throw Error("n values and variances differ in length");
    std::size_t best_n = 0;
    double best = 0.0;
    for (std::size_t k = 1; k < n_values.size(); ++k) {
        const double prev = variances[k - 1];
        if (prev == 0.0) continue;
        const double drop = prev - variances[k];
        const double score = rule == ReductionRule::proportional ? drop / prev : drop;
        if (score > best) {
            best = score;
            best_n = n_values[k];
        }
    }
    return best_n;
}

std::size_t select_n(const McGrid& grid, std::string_view kpi, std::size_t g, ReductionRule rule) {
    const auto var = cell_variances(grid, grid.g_index(g), grid.kpi_index(kpi));
    return select_n(grid.n_values, var, rule);
}

std::vector<TuningRow> tuning_rows(const McGrid& grid, ReductionRule rule) {
    std::vector<TuningRow> rows;
    for (const auto& kpi : grid.kpis) {
        const auto sel = select_g(grid, kpi);
        rows.push_back({kpi, sel.g, sel.p_hat, select_n(grid, kpi, sel.g, rule)});
    }
    return rows;
}

std::vector<std::string> prominent_sources(std::span<const TuningRow> rows, double p_thr) {
    std::vector<std::string> out;
    for (const auto& r : rows) {
        const bool poor = r.n == 0 && r.p < 1.0;
        if (r.p > p_thr && !poor) out.push_back(r.kpi);
    }
    return out;
}

ConsolidatedParams consolidate(std::span<const TuningRow> rows, const std::vector<std::string>& prominent,
                               double p_thr) {
    if (prominent.empty()) throw AnalysisError("no prominent sources; lower p_thr or increase data");
    ConsolidatedParams out;
    out.prominent = prominent;
    out.p_thr = p_thr;
    for (const auto& kpi : prominent) {
        auto it = std::find_if(rows.begin(), rows.end(), [&](const TuningRow& r) { return r.kpi == kpi; });
        if (it == rows.end()) throw AnalysisError("prominent KPI '" + kpi + "' has no tuning row");
        out.g_star = std::max(out.g_star, it->g);
        out.n_star = std::max(out.n_star, it->n);
    }
    return out;
}

std::string tuning_csv(std::span<const TuningRow> rows) {
    std::ostringstream os;
    os << "KPI Name,Parameter g,Probability Estimation,Optimal n\n";
    char p[32];
    for (const auto& r : rows) {
        std::snprintf(p, sizeof p, "%.4f", r.p);
        os << r.kpi << ',' << r.g << ',' << p << ',' << r.n << '\n';
    }
    return os.str();
}

nlohmann::json to_json(const ConsolidatedParams& params) {
    return {{"g_star", params.g_star}, {"n_star", params.n_star}, {"prominent", params.prominent}, {"p_thr", params.p_thr}};
}

nlohmann::json to_json(const McGrid& grid) {
    nlohmann::json j;
    j["g_values"] = grid.g_values;
    j["n_values"] = grid.n_values;
    j["kpis"] = nlohmann::json::array();
    for (std::size_t ki = 0; ki < grid.kpis.size(); ++ki) {
        nlohmann::json k{{"kpi", grid.kpis[ki]}};
        k["p_hat"] = nlohmann::json::array();
        for (auto g : grid.g_values) k["p_hat"].push_back(estimate_p(grid, grid.kpis[ki], g));
        k["counts"] = nlohmann::json::array();
        for (std::size_t gi = 0; gi < grid.g_values.size(); ++gi) {
            auto row = nlohmann::json::array();
            for (std::size_t ni = 0; ni < grid.n_values.size(); ++ni) row.push_back(grid.count(gi, ni, ki));
            k["counts"].push_back(std::move(row));
        }
        if (grid.n_values.size() >= 3) {
            const auto trend = variance_trend(grid, grid.kpis[ki]);
            k["variance_slopes"] = trend.slopes;
            k["negative_fraction"] = trend.negative_fraction;
            k["reliable"] = trend.reliable;
        }
        j["kpis"].push_back(std::move(k));
    }
    return j;
}

}  // namespace rca
