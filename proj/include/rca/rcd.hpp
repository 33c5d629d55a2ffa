#pragma once

#include "rca/data_model.hpp"
#include "rca/stats.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace rca {

struct RcdConfig {
    std::size_t g = 5;
    std::size_t n_runs = 10;
    double alpha = 0.05;
    std::size_t max_cond = 3;
    std::uint64_t seed = 0;

    /// Throws ConfigError unless 2 <= g <= max(2, kpi_count), max_cond < g,
    /// n_runs >= 1 and alpha in (0, 1).
    void validate(std::size_t kpi_count) const;
};

/// Pooled normal + abnormal rows of the candidate KPIs with the failure
/// indicator appended as the last variable.
class RcdData {
public:
    RcdData(const LabeledPanel& data, std::vector<std::string> candidates);

    const std::vector<std::string>& candidates() const noexcept { return candidates_; }
    std::size_t size() const noexcept { return candidates_.size(); }
    std::size_t sample_size() const noexcept { return tester_.sample_size(); }
    std::size_t fnode_index() const noexcept { return candidates_.size(); }
    const CovarianceCiTest& tester() const noexcept { return tester_; }

private:
    std::vector<std::string> candidates_;
    CovarianceCiTest tester_;
};

/// KPIs of the panel minus the SLA metric (unless allowed).
std::vector<std::string> rcd_candidates(const KpiPanel& panel, const std::optional<std::string>& sla_metric,
                                        bool allow_sla = false);

/// Shuffles and cuts into ceil(V / g) consecutive chunks of at most g.
std::vector<std::vector<std::size_t>> partition(std::vector<std::size_t> items, std::size_t g, std::mt19937_64& rng);
std::vector<std::vector<std::string>> partition(std::vector<std::string> names, std::size_t g, std::mt19937_64& rng);

struct SkeletonResult {
    std::vector<std::size_t> survivors;  // candidate indices, ascending
    std::vector<double> p_values;        // largest p seen per survivor
    std::vector<std::string> warnings;
};

/// PC-style search for the neighbors of F inside one chunk. Every chunk
/// member starts adjacent to F; for each level l up to max_cond, X is
/// dropped when some S of size l from the level-start adjacency gives
/// p(X _||_ F | S) > alpha. Removals apply once the level is complete.
SkeletonResult local_skeleton(const RcdData& data, std::span<const std::size_t> chunk, double alpha,
                              std::size_t max_cond);

struct CandidateSet {
    std::vector<std::string> kpis;
    std::vector<double> p_values;
};

/// Re-chunks the survivors at size g until at most g remain (or a round
/// removes nothing), then runs one final pass over the rest as one chunk.
CandidateSet hierarchical_refine(const RcdData& data, std::vector<std::size_t> survivor_union, std::size_t g,
                                 double alpha, std::size_t max_cond, std::mt19937_64& rng,
                                 std::vector<std::string>* warnings = nullptr);

struct RunRecord {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::string>> chunks;
    std::vector<std::string> first_pass_survivors;
    CandidateSet candidates;
    std::vector<std::string> warnings;
};

RunRecord rcd_single_run(const RcdData& data, const RcdConfig& cfg, std::size_t run_index);

struct FrequencyTable {
    std::vector<std::string> kpis;
    std::vector<std::size_t> counts;
    std::size_t n_runs = 0;

    double proportion(std::size_t i) const { return static_cast<double>(counts.at(i)) / static_cast<double>(n_runs); }
    std::optional<std::size_t> find(std::string_view kpi) const;
};

struct RcdResult {
    FrequencyTable table;
    std::vector<RunRecord> runs;
};

/// n_runs independent runs; run i uses a stream derived from (seed, i), so
/// the result does not depend on jobs.
RcdResult rcd_multi_run(const RcdData& data, const RcdConfig& cfg, unsigned jobs = 1);
RcdResult rcd_multi_run(const LabeledPanel& data, const RcdConfig& cfg, const std::optional<std::string>& sla_metric,
                        unsigned jobs = 1);

nlohmann::json to_json(const RcdResult& result);

}  // namespace rca
