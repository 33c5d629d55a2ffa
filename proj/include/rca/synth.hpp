#pragma once

#include "rca/data_model.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rca {

/// parent(t - lag) * weight feeds child(t). lag >= 1.
struct ScmEdge {
    std::string parent;
    std::string child;
    int lag = 1;
    double weight = 0.0;
};

struct SlaDesignation {
    std::string node;
    Comparator op = Comparator::less;
    double threshold = 0.0;
    std::int64_t min_duration_ticks = 0;

    SlaRule rule() const { return {node, op, threshold, min_duration_ticks}; }
};

/// Linear lagged structural causal model with Gaussian noise:
///   x_i(t) = intercept_i + sum_e weight_e * x_parent(t - lag_e) + noise_sd_i * eps
struct ScmSpec {
    std::vector<std::string> nodes;
    std::vector<ScmEdge> edges;
    std::vector<double> noise_sd;
    std::vector<double> intercept;  // empty means all zero
    std::optional<SlaDesignation> sla;
    int granularity_seconds = 15;

    void validate() const;
    int max_lag() const noexcept;
    std::size_t index_of(std::string_view node) const;
};

enum class InterventionKind { hard, soft };

struct InterventionSpec {
    std::string target;
    InterventionKind kind = InterventionKind::hard;
    std::int64_t onset = 0;
    double hard_value = 0.0;   // hard: constant from onset on
    double mean_shift = 0.0;   // soft: additive offset
    double noise_scale = 1.0;  // soft: multiplies the node's noise sd
};

struct GroundTruth {
    struct Intervened {
        std::string node;
        InterventionKind kind;
        std::int64_t onset;
    };
    struct Deviation {
        std::string node;
        std::int64_t expected_onset;
    };
    std::vector<Intervened> interventions;
    std::vector<ScmEdge> edges;
    /// Nodes reachable from an intervention, sorted by earliest arrival.
    std::vector<Deviation> deviation_order;
};

/// Largest modulus among the eigenvalues of the VAR companion matrix.
double spectral_radius(const ScmSpec& spec);

/// Descendants along the edge support, excluding the node itself.
std::vector<std::string> descendants(const ScmSpec& spec, std::string_view node);

KpiPanel generate(const ScmSpec& spec, std::size_t horizon, std::uint64_t seed);

/// Same noise stream as generate(); ticks before the earliest onset are
/// bit-identical to generate(spec, horizon, seed).
std::pair<KpiPanel, GroundTruth> inject(const ScmSpec& spec, std::uint64_t seed,
                                        const std::vector<InterventionSpec>& interventions, std::size_t horizon);

enum class NodeRole { target, descendant, non_descendant };

struct DoVerdict {
    std::string node;
    NodeRole role;
    double ks_d;
    double p;
    bool shifted;
};

/// Compares each node's pre-onset and post-onset samples with a K-S test
/// under one hard intervention. Non-descendants are expected consistent.
std::vector<DoVerdict> verify_do_equivalence(const ScmSpec& spec, const InterventionSpec& intervention,
                                             std::uint64_t seed, double alpha, std::size_t horizon = 2000);

std::string_view to_string(InterventionKind kind) noexcept;
std::string_view to_string(NodeRole role) noexcept;

/// A generator spec plus the interventions and labeling that go with it.
struct Scenario {
    std::string name;
    ScmSpec spec;
    std::vector<InterventionSpec> interventions;
    std::size_t horizon = 0;
    std::size_t normal_len = 120;
    std::size_t abnormal_len = 120;
    std::size_t lead_offset = 0;
    /// When set, windows are anchored at this tick instead of the SLA breach.
    std::optional<std::int64_t> abnormal_start;
};

/// One hard-intervened root R driving the SLA metric, plus pure-noise KPIs N1..Nk.
Scenario single_root_scenario(std::size_t noise_nodes = 3, std::size_t horizon = 260, std::int64_t onset = 120,
                              double hard_value = 3.0);
/// A soft-shifts, then B is pinned, then the SLA metric breaches through B.
Scenario cascade_scenario(std::size_t horizon = 300, std::int64_t onset_a = 172, std::int64_t onset_b = 180);
/// Cascade topology with no intervention.
Scenario null_scenario();

std::vector<std::string> canned_scenario_names();
/// Throws ConfigError listing the available names.
Scenario canned_scenario(std::string_view name);

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scenario& scenario);
nlohmann::json to_json(const GroundTruth& truth);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace rca
