#pragma once

#include "rca/data_model.hpp"
#include "rca/error.hpp"
#include "rca/mc_tuner.hpp"
#include "rca/rcd.hpp"
#include "rca/sequence.hpp"
#include "rca/subgraph.hpp"
#include "rca/synth.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rca {

struct WindowConfig {
    std::optional<std::size_t> normal_len;
    std::optional<std::size_t> abnormal_len;
    std::optional<std::size_t> lead_offset;
    std::optional<std::int64_t> abnormal_start;
};

struct McConfig {
    std::vector<std::size_t> g_range;  // empty: 3..V
    std::vector<std::size_t> n_set = kDefaultNSet;
    double p_thr = 0.4;
    ReductionRule reduction = ReductionRule::proportional;
};

/// Everything a pipeline command needs. Loaded from an INI file; sections
/// run, input, sla, windows, rcd, subgraph, cis, mc, output.
struct PipelineConfig {
    std::uint64_t seed = 0;

    std::filesystem::path panel;  // CSV input; empty means synthesize from the scenario
    CsvOptions csv;
    std::string scenario;  // canned scenario name
    std::filesystem::path scenario_file;
    std::optional<std::size_t> horizon;

    std::optional<SlaRule> sla;
    WindowConfig windows;

    RcdConfig rcd;
    bool allow_sla = false;

    SubgraphConfig subgraph;
    std::vector<std::string> subgraph_nodes;  // empty: RCD candidates + SLA metric
    double min_frequency = 0.5;

    SequenceConfig cis;
    McConfig mc;

    std::filesystem::path out_dir = "out";
    unsigned jobs = 1;

    void validate() const;
};

PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
/// Echo of every setting that can affect results (jobs and out_dir excluded).
nlohmann::json to_json(const PipelineConfig& cfg);

/// Named output files held in memory until the command has succeeded.
using Bundle = std::map<std::string, std::string>;

/// Writes every file or none: on failure the files already written are removed.
void write_bundle(const Bundle& bundle, const std::filesystem::path& dir);

/// A stage failure; keeps the exit code class of the underlying error.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& cause, int code)
        : Error("stage '" + stage + "': " + cause), stage_(std::move(stage)), code_(code) {}
    const std::string& stage() const noexcept { return stage_; }
    int exit_code() const noexcept { return code_; }

private:
    std::string stage_;
    int code_;
};

namespace exit_codes {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int config = 2;
inline constexpr int data = 3;
inline constexpr int analysis = 4;
}  // namespace exit_codes

int exit_code_for(const std::exception& e) noexcept;

/// Scenario named or referenced by the config, if any.
std::optional<Scenario> resolve_scenario(const PipelineConfig& cfg);
KpiPanel load_panel(const PipelineConfig& cfg);
LabeledPanel label_panel(const KpiPanel& panel, const PipelineConfig& cfg);
std::optional<SlaRule> resolve_sla(const PipelineConfig& cfg);
/// Clamps g to the candidate count and max_cond below g.
RcdConfig effective_rcd(const PipelineConfig& cfg, std::size_t candidates);

Bundle cmd_synth(const PipelineConfig& cfg);
Bundle cmd_label(const PipelineConfig& cfg);
Bundle cmd_discover(const PipelineConfig& cfg);
Bundle cmd_subgraph(const PipelineConfig& cfg);
Bundle cmd_sequence(const PipelineConfig& cfg);
Bundle cmd_tune(const PipelineConfig& cfg);
Bundle cmd_compare_states(const PipelineConfig& cfg);
Bundle cmd_run_all(const PipelineConfig& cfg);

}  // namespace rca
