#pragma once

#include "rca/data_model.hpp"
#include "rca/subgraph.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rca {

enum class Correction { none, bonferroni, bh_fdr };

Correction parse_correction(std::string_view text);
std::string_view to_string(Correction c) noexcept;

struct SequenceConfig {
    double cis_alpha = 0.1;
    std::size_t window = 16;
    std::size_t stride = 4;
    Correction correction = Correction::bh_fdr;
    double z_thr = 3.0;

    void validate() const;
};

/// One KPI's normal-window baseline and its abnormal segment.
struct KpiSegment {
    std::string kpi;
    std::vector<double> baseline;
    std::vector<double> segment;
    std::vector<std::int64_t> ticks;  // ticks of segment
};

struct WindowScan {
    std::string kpi;
    std::vector<std::int64_t> window_starts;
    std::vector<double> d;
    std::vector<double> p_raw;
    std::vector<double> p_adj;
    /// Index of the earliest window with p_adj <= cis_alpha.
    std::optional<std::size_t> onset_window;

    std::optional<std::int64_t> onset_tick() const {
        if (!onset_window) return std::nullopt;
        return window_starts[*onset_window];
    }
};

/// Slides a window of `window` ticks by `stride` over every segment and runs
/// a two-sample K-S test against the whole baseline. The correction spans
/// all windows of all KPIs in the batch (m = sum of window counts).
std::vector<WindowScan> rolling_ks_onset(std::span<const KpiSegment> batch, const SequenceConfig& cfg);

struct Direction {
    int direction = 0;
    bool hard_constant = false;
    double z = 0.0;
};

/// Direction of the deviation at onset. The onset window mean is scored
/// against the normal (mu, sigma) and coded with z_thr; a sub-threshold
/// score falls back to its sign, since the K-S scan already established a
/// deviation. A KPI that sits on one value for at least `window` ticks from
/// onset on, or whose normal sigma is 0, is flagged hard-constant and takes
/// the sign of (pinned value - mu).
Direction direction_at_onset(std::span<const double> series, std::size_t onset, std::size_t window, double mu,
                             double sigma, double z_thr);

struct DeviationEvent {
    std::string kpi;
    std::int64_t onset = 0;
    int direction = 0;
    double ks_d = 0.0;
    double p_adj = 1.0;
    Correction correction = Correction::bh_fdr;
    bool hard_constant = false;
    double z = 0.0;
};

struct Step {
    std::size_t step = 0;
    DeviationEvent event;
};

/// Ascending onset; ties by larger K-S d, then KPI name. Steps are 1-based.
std::vector<Step> order_events(std::vector<DeviationEvent> events);

/// Scans the listed KPIs of a labeled panel and returns their events.
std::vector<DeviationEvent> detect_events(const LabeledPanel& data, const std::vector<std::string>& kpis,
                                          const SequenceConfig& cfg, std::vector<WindowScan>* scans = nullptr);

struct CisReport {
    struct NodeFlag {
        std::string kpi;
        bool flagged = false;
        bool sla = false;
    };
    struct EdgeFlag {
        LaggedEdge edge;
        bool flagged = false;
    };
    std::vector<Step> steps;
    std::vector<NodeFlag> nodes;
    std::vector<EdgeFlag> edges;
    std::string sla_metric;
    SequenceConfig config;
};

/// Flags step nodes and the subgraph edges u -> v where both ends have
/// events and onset(u) <= onset(v). Throws AnalysisError if a step KPI is
/// missing from the subgraph.
CisReport assemble_cis(const CausalSubgraph& subgraph, const std::vector<Step>& steps, const std::string& sla_metric,
                       const SequenceConfig& cfg = {});

nlohmann::json to_json(const CisReport& report);
std::string to_dot(const CisReport& report);

/// Per-tick direction codes over both windows: tick column then one column
/// per KPI with values in {-1, 0, 1}.
std::string deviation_traces_csv(const LabeledPanel& data, const std::vector<std::string>& kpis, double z_thr);

}  // namespace rca
