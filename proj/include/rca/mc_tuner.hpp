#pragma once

#include "rca/rcd.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rca {

/// Default swept run counts.
inline const std::vector<std::size_t> kDefaultNSet{10, 15, 20, 25, 30, 40, 50};

/// Per (g, n, KPI) count of RCD runs that reported the KPI as a causal
/// source, out of n runs.
struct McGrid {
    std::vector<std::size_t> g_values;  // ascending
    std::vector<std::size_t> n_values;  // ascending
    std::vector<std::string> kpis;
    std::vector<std::size_t> counts;  // [g][n][kpi], row-major

    std::size_t count(std::size_t gi, std::size_t ni, std::size_t ki) const {
        return counts[(gi * n_values.size() + ni) * kpis.size() + ki];
    }
    double proportion(std::size_t gi, std::size_t ni, std::size_t ki) const {
        return static_cast<double>(count(gi, ni, ki)) / static_cast<double>(n_values[ni]);
    }
    /// Throws AnalysisError when g was not swept.
    std::size_t g_index(std::size_t g) const;
    std::size_t kpi_index(std::string_view kpi) const;
};

/// Runs rcd_multi_run for every (g, n) cell. Each cell's seed derives from
/// (seed, g, n) and max_cond is capped at g - 1, so a cell's result does not
/// depend on the rest of the grid or on jobs.
McGrid run_grid(const RcdData& data, std::vector<std::size_t> g_range, std::vector<std::size_t> n_set,
                const RcdConfig& base, std::uint64_t seed, unsigned jobs = 1);

/// Mean of P_{g,n} over the swept n.
double estimate_p(const McGrid& grid, std::string_view kpi, std::size_t g);

/// Ordinary least-squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

struct VarianceTrend {
    std::vector<std::size_t> g_values;
    std::vector<double> slopes;
    double negative_fraction = 0.0;
    bool reliable = false;
};

/// Per g, regresses binomial_sd(P_{g,n}, n)^2 on n. Reliable when at least
/// 90% of the slopes are strictly negative. Needs three or more n values.
VarianceTrend variance_trend(const McGrid& grid, std::string_view kpi);

struct GSelection {
    std::size_t g = 0;
    double p_hat = 0.0;
};

/// g whose p-hat is the median across g. With two middle values the smaller
/// g wins; any g sharing a median p-hat competes, smallest first.
GSelection select_g(const McGrid& grid, std::string_view kpi);

enum class ReductionRule { proportional, absolute };

/// n_k maximizing the drop from var_{k-1} to var_k over consecutive swept n
/// (pairs with var_{k-1} = 0 skipped); 0 when no drop is strictly positive.
std::size_t select_n(std::span<const std::size_t> n_values, std::span<const double> variances,
                     ReductionRule rule = ReductionRule::proportional);
std::size_t select_n(const McGrid& grid, std::string_view kpi, std::size_t g,
                     ReductionRule rule = ReductionRule::proportional);

struct TuningRow {
    std::string kpi;
    std::size_t g = 0;
    double p = 0.0;
    std::size_t n = 0;
};

std::vector<TuningRow> tuning_rows(const McGrid& grid, ReductionRule rule = ReductionRule::proportional);

/// p > p_thr, excluding poor sources (n = 0 with p < 1).
std::vector<std::string> prominent_sources(std::span<const TuningRow> rows, double p_thr);

struct ConsolidatedParams {
    std::size_t g_star = 0;
    std::size_t n_star = 0;
    std::vector<std::string> prominent;
    double p_thr = 0.0;
};

/// g* and n*: maxima of the selected g and n over the prominent rows.
ConsolidatedParams consolidate(std::span<const TuningRow> rows, const std::vector<std::string>& prominent,
                               double p_thr = 0.0);

/// Columns: KPI Name, Parameter g, Probability Estimation, Optimal n.
std::string tuning_csv(std::span<const TuningRow> rows);
nlohmann::json to_json(const ConsolidatedParams& params);
nlohmann::json to_json(const McGrid& grid);

}  // namespace rca
