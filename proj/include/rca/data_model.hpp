#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rca {

/// Half-open range of tick values [begin, end).
struct TickRange {
    std::int64_t begin = 0;
    std::int64_t end = 0;

    std::int64_t length() const noexcept { return end - begin; }
    bool contains(std::int64_t t) const noexcept { return t >= begin && t < end; }
    bool operator==(const TickRange&) const = default;
};

/// Half-open range of row positions inside a panel.
struct RowRange {
    std::size_t first = 0;
    std::size_t count = 0;

    std::size_t end() const noexcept { return first + count; }
    bool operator==(const RowRange&) const = default;
};

/// Rectangular multivariate KPI time series: T ticks by V named columns.
/// Immutable after construction; the constructor enforces strictly
/// increasing ticks, unique names and finite values.
class KpiPanel {
public:
    KpiPanel(std::vector<std::int64_t> ticks, std::vector<std::string> kpi_names,
             Eigen::MatrixXd values, int granularity_seconds = 15);

    std::size_t rows() const noexcept { return ticks_.size(); }
    std::size_t cols() const noexcept { return names_.size(); }
    const std::vector<std::int64_t>& ticks() const noexcept { return ticks_; }
    const std::vector<std::string>& kpi_names() const noexcept { return names_; }
    const Eigen::MatrixXd& values() const noexcept { return values_; }
    int granularity_seconds() const noexcept { return granularity_; }

    std::optional<std::size_t> find_column(std::string_view name) const;
    /// Throws ValidationError naming the KPI when it is absent.
    std::size_t column_index(std::string_view name) const;
    Eigen::VectorXd column(std::string_view name) const;
    std::size_t row_of_tick(std::int64_t tick) const;

    KpiPanel select(const std::vector<std::string>& names) const;
    KpiPanel slice(RowRange rows) const;

private:
    std::vector<std::int64_t> ticks_;
    std::vector<std::string> names_;
    Eigen::MatrixXd values_;
    int granularity_;
};

enum class MissingPolicy { fail, drop_row, linear };

MissingPolicy parse_missing_policy(std::string_view text);

struct CsvOptions {
    MissingPolicy missing = MissingPolicy::fail;
    int granularity_seconds = 15;
};

/// Header row, first column integer tick or ISO-8601 timestamp, remaining
/// columns numeric. ISO timestamps become epoch seconds / granularity.
KpiPanel parse_csv(std::istream& in, const CsvOptions& options = {});
KpiPanel load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// Shortest round-trip formatting; re-parsing yields identical values.
void write_csv(std::ostream& out, const KpiPanel& panel);
std::string to_csv(const KpiPanel& panel);

enum class Comparator { less, less_equal, greater, greater_equal };

Comparator parse_comparator(std::string_view text);
std::string_view to_string(Comparator op) noexcept;
bool compare(double value, Comparator op, double threshold) noexcept;

struct SlaRule {
    std::string metric;
    Comparator op = Comparator::less;
    double threshold = 0.0;
    std::int64_t min_duration_ticks = 0;
};

/// Maximal tick ranges over which the rule holds on consecutive ticks for
/// at least max(1, min_duration_ticks) ticks.
std::vector<TickRange> apply_sla_rule(const KpiPanel& panel, const SlaRule& rule);

/// Panel plus binary failure indicator and the two analysis windows.
/// fnode[i] == 1 exactly for rows inside the abnormal window.
struct LabeledPanel {
    KpiPanel panel;
    std::vector<std::uint8_t> fnode;
    TickRange normal_window;
    TickRange abnormal_window;
    RowRange normal_rows;
    RowRange abnormal_rows;

    KpiPanel normal() const { return panel.slice(normal_rows); }
    KpiPanel abnormal() const { return panel.slice(abnormal_rows); }
    /// Rows of both windows in time order (normal first).
    RowRange analysis_rows() const { return {normal_rows.first, normal_rows.count + abnormal_rows.count}; }
};

/// Anchors the abnormal window at breach.begin minus lead_offset ticks and
/// places a normal window of normal_len ticks immediately before it.
LabeledPanel label_states(const KpiPanel& panel, TickRange breach, std::size_t normal_len,
                          std::size_t abnormal_len, std::size_t lead_offset = 0);

/// Labels by row position: abnormal rows start at abnormal_first.
LabeledPanel label_rows(const KpiPanel& panel, std::size_t abnormal_first, std::size_t normal_len,
                        std::size_t abnormal_len);

}  // namespace rca
