#pragma once

#include "rca/data_model.hpp"
#include "rca/stats.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace rca {

/// X(t - lag) as a variable of the lagged design.
struct LaggedVar {
    std::size_t var = 0;
    int lag = 0;

    bool operator==(const LaggedVar&) const = default;
    auto operator<=>(const LaggedVar&) const = default;
};

struct LaggedParent {
    LaggedVar link;
    /// Smallest |r| seen across the conditioning levels.
    double strength = 0.0;
    /// Largest p seen across the conditioning levels.
    double p = 0.0;
};

struct LaggedEdge {
    std::string source;
    std::string target;
    int lag = 1;
    double r = 0.0;
    double p = 1.0;
};

struct CausalSubgraph {
    std::vector<std::string> nodes;
    std::vector<LaggedEdge> edges;  // sorted by (source, target, lag)

    bool has_node(std::string_view n) const;
};

struct SubgraphConfig {
    int tau_max = 8;
    double alpha = 0.01;
    std::size_t max_cond = 3;
    /// Keep X -> X links in the output graph. Own lags always take part in
    /// parent selection and conditioning.
    bool include_autolinks = false;
    unsigned jobs = 1;
};

/// Series of a node set over one window, addressed by (node, lag).
class LaggedSeries {
public:
    LaggedSeries(const KpiPanel& panel, const std::vector<std::string>& nodes);

    std::size_t length() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    std::size_t variables() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::size_t index_of(std::string_view name) const;

    /// Partial correlation test of x and y given cond over the rows where
    /// every lag is available. Throws AnalysisError when the overlap is too
    /// short for the conditioning set.
    CiTestResult test(LaggedVar x, LaggedVar y, const std::vector<LaggedVar>& cond) const;

private:
    std::vector<std::string> names_;
    Eigen::MatrixXd values_;
};

/// PC1-style condition selection for one target: every (X, lag) with lag in
/// [1, tau_max] starts as a candidate; at level p each candidate is tested
/// against the target given the p strongest other candidates and dropped when
/// p-value > alpha. Stops after max_cond or when too few candidates remain.
/// Result is ranked by strength, strongest first.
std::vector<LaggedParent> select_lagged_parents(const LaggedSeries& data, std::size_t target, int tau_max, double alpha,
                                                std::size_t max_cond);

/// Momentary conditional independence of source -> target: conditions on the
/// target's parents (minus the link itself) and the source's parents shifted
/// by the source lag.
CiTestResult mci_test(const LaggedSeries& data, LaggedVar source, std::size_t target,
                      const std::vector<LaggedParent>& parents_of_target,
                      const std::vector<LaggedParent>& parents_of_source);

std::optional<LaggedEdge> mci_edge_test(const LaggedSeries& data, LaggedVar source, std::size_t target,
                                        const std::vector<LaggedParent>& parents_of_target,
                                        const std::vector<LaggedParent>& parents_of_source, double alpha);

/// Parent selection for every node, then MCI for every lagged link.
CausalSubgraph build_subgraph(const KpiPanel& window, const std::vector<std::string>& nodes,
                              const SubgraphConfig& cfg = {});

struct GraphDiff {
    std::vector<LaggedEdge> added;    // only in the second graph
    std::vector<LaggedEdge> removed;  // only in the first graph
    std::vector<LaggedEdge> common;
};

/// Set difference on (source, target, lag). Throws ValidationError listing
/// the nodes that are not shared.
GraphDiff graph_diff(const CausalSubgraph& normal, const CausalSubgraph& abnormal);

std::string to_dot(const CausalSubgraph& graph, std::string_view name = "causal_subgraph");
nlohmann::json to_json(const CausalSubgraph& graph);
nlohmann::json to_json(const GraphDiff& diff);

}  // namespace rca
