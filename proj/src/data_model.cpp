#include "rca/data_model.hpp"

#include "rca/error.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace rca {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        auto field = trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (field.size() >= 2 && field.front() == '"' && field.back() == '"') field = field.substr(1, field.size() - 2);
        fields.push_back(field);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

bool is_missing_token(std::string_view s) {
    return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null" || s == "N/A";
}

std::optional<double> parse_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

// YYYY-MM-DD[T ]HH:MM:SS[.fff][Z|+HH:MM|-HH:MM] -> seconds since the epoch.
std::optional<std::int64_t> parse_iso8601(std::string_view s) {
    auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
        if (pos + len > s.size()) return std::nullopt;
        int v = 0;
        auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
        if (ec != std::errc() || ptr != s.data() + pos + len) return std::nullopt;
        return v;
    };
    if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
        s[16] != ':')
        return std::nullopt;
    auto y = num(0, 4), mo = num(5, 2), d = num(8, 2), h = num(11, 2), mi = num(14, 2), sec = num(17, 2);
    if (!y || !mo || !d || !h || !mi || !sec) return std::nullopt;
    using namespace std::chrono;
    const year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)}, day{static_cast<unsigned>(*d)}};
    if (!ymd.ok() || *h > 23 || *mi > 59 || *sec > 60) return std::nullopt;
    std::int64_t total = sys_days{ymd}.time_since_epoch().count() * 86400LL + *h * 3600LL + *mi * 60LL + *sec;

    std::size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    }
    if (pos == s.size()) return total;
    if (s[pos] == 'Z' && pos + 1 == s.size()) return total;
    if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() && s[pos + 3] == ':') {
        auto oh = num(pos + 1, 2), om = num(pos + 4, 2);
        if (!oh || !om) return std::nullopt;
        const std::int64_t offset = *oh * 3600LL + *om * 60LL;
        return s[pos] == '+' ? total - offset : total + offset;
    }
    return std::nullopt;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

KpiPanel::KpiPanel(std::vector<std::int64_t> ticks, std::vector<std::string> kpi_names, Eigen::MatrixXd values,
                   int granularity_seconds)
    : ticks_(std::move(ticks)), names_(std::move(kpi_names)), values_(std::move(values)),
      granularity_(granularity_seconds) {
    if (granularity_ <= 0) throw ValidationError("granularity_seconds must be positive");
    if (static_cast<std::size_t>(values_.rows()) != ticks_.size())
        throw ValidationError("tick count " + std::to_string(ticks_.size()) + " does not match row count " +
                              std::to_string(values_.rows()));
    if (static_cast<std::size_t>(values_.cols()) != names_.size())
        throw ValidationError("KPI name count " + std::to_string(names_.size()) + " does not match column count " +
                              std::to_string(values_.cols()));
    for (std::size_t i = 1; i < ticks_.size(); ++i)
        if (ticks_[i] <= ticks_[i - 1])
            throw ValidationError("ticks not strictly increasing at row " + std::to_string(i) + " (tick " +
                                  std::to_string(ticks_[i]) + " after " + std::to_string(ticks_[i - 1]) + ")");
    std::unordered_set<std::string_view> seen;
    for (const auto& n : names_) {
        if (n.empty()) throw ValidationError("empty KPI name");
        if (!seen.insert(n).second) throw ValidationError("duplicate KPI name '" + n + "'");
    }
    for (Eigen::Index c = 0; c < values_.cols(); ++c)
        for (Eigen::Index r = 0; r < values_.rows(); ++r)
            if (!std::isfinite(values_(r, c)))
                throw ValidationError("non-finite value at row " + std::to_string(r) + " in KPI '" +
                                      names_[static_cast<std::size_t>(c)] + "'");
}

std::optional<std::size_t> KpiPanel::find_column(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
}

std::size_t KpiPanel::column_index(std::string_view name) const {
    if (auto idx = find_column(name)) return *idx;
    throw ValidationError("unknown KPI '" + std::string(name) + "'");
}

Eigen::VectorXd KpiPanel::column(std::string_view name) const {
    return values_.col(static_cast<Eigen::Index>(column_index(name)));
}

std::size_t KpiPanel::row_of_tick(std::int64_t tick) const {
    auto it = std::lower_bound(ticks_.begin(), ticks_.end(), tick);
    if (it == ticks_.end() || *it != tick) throw ValidationError("tick " + std::to_string(tick) + " not in panel");
    return static_cast<std::size_t>(it - ticks_.begin());
}

KpiPanel KpiPanel::select(const std::vector<std::string>& names) const {
    Eigen::MatrixXd out(values_.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j)
        out.col(static_cast<Eigen::Index>(j)) = values_.col(static_cast<Eigen::Index>(column_index(names[j])));
    return KpiPanel(ticks_, names, std::move(out), granularity_);
}

KpiPanel KpiPanel::slice(RowRange rows) const {
    if (rows.end() > ticks_.size()) throw ValidationError("row slice exceeds panel length");
    std::vector<std::int64_t> t(ticks_.begin() + static_cast<std::ptrdiff_t>(rows.first),
                                ticks_.begin() + static_cast<std::ptrdiff_t>(rows.end()));
    Eigen::MatrixXd v =
        values_.middleRows(static_cast<Eigen::Index>(rows.first), static_cast<Eigen::Index>(rows.count));
    return KpiPanel(std::move(t), names_, std::move(v), granularity_);
}

MissingPolicy parse_missing_policy(std::string_view text) {
    if (text == "fail") return MissingPolicy::fail;
    if (text == "drop-row" || text == "drop_row") return MissingPolicy::drop_row;
    if (text == "linear" || text == "linear-interpolate") return MissingPolicy::linear;
    throw ConfigError("unknown missing-value policy '" + std::string(text) + "' (fail, drop-row, linear)");
}

KpiPanel parse_csv(std::istream& in, const CsvOptions& options) {
    if (options.granularity_seconds <= 0) throw ConfigError("granularity_seconds must be positive");
    std::string line;
    std::size_t line_no = 0;

    std::vector<std::string> names;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
        if (trim(view).empty()) continue;
        auto fields = split_fields(view);
        if (fields.size() < 2) throw ParseError(line_no, "header needs a timestamp column and at least one KPI");
        for (std::size_t j = 1; j < fields.size(); ++j) names.emplace_back(fields[j]);
        break;
    }
    if (names.empty()) throw ParseError(line_no, "missing header row");
    {
        std::unordered_set<std::string_view> seen;
        for (const auto& n : names) {
            if (n.empty()) throw ParseError(line_no, "empty KPI name in header");
            if (!seen.insert(n).second) throw ParseError(line_no, "duplicate KPI name '" + n + "'");
        }
    }

    const std::size_t v = names.size();
    std::vector<std::int64_t> ticks;
    std::vector<std::size_t> lines;
    std::vector<double> cells;  // row-major, NaN marks missing
    std::vector<bool> row_has_missing;
    bool any_iso = false, any_int = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != v + 1)
            throw ParseError(line_no, "expected " + std::to_string(v + 1) + " fields, found " +
                                          std::to_string(fields.size()));
        std::int64_t tick = 0;
        if (auto i = parse_int(fields[0])) {
            tick = *i;
            any_int = true;
        } else if (auto s = parse_iso8601(fields[0])) {
            if (*s % options.granularity_seconds != 0)
                throw ParseError(line_no, "timestamp '" + std::string(fields[0]) + "' not aligned to " +
                                              std::to_string(options.granularity_seconds) + " s granularity");
            tick = floor_div(*s, options.granularity_seconds);
            any_iso = true;
        } else {
            throw ParseError(line_no, "unparseable timestamp '" + std::string(fields[0]) + "'");
        }
        if (any_iso && any_int) throw ParseError(line_no, "mixed integer and ISO-8601 timestamps");
        bool missing = false;
        for (std::size_t j = 1; j <= v; ++j) {
            if (is_missing_token(fields[j])) {
                cells.push_back(std::numeric_limits<double>::quiet_NaN());
                missing = true;
                continue;
            }
            auto d = parse_double(fields[j]);
            if (!d) throw ParseError(line_no, "non-numeric value '" + std::string(fields[j]) + "' in KPI '" +
                                                  names[j - 1] + "'");
            if (!std::isfinite(*d))
                throw ValidationError("line " + std::to_string(line_no) + ": non-finite value in KPI '" +
                                      names[j - 1] + "'");
            cells.push_back(*d);
        }
        ticks.push_back(tick);
        lines.push_back(line_no);
        row_has_missing.push_back(missing);
    }
    for (std::size_t i = 1; i < ticks.size(); ++i)
        if (ticks[i] <= ticks[i - 1])
            throw ValidationError("line " + std::to_string(lines[i]) + ": timestamps not strictly increasing");

    std::size_t t = ticks.size();
    auto at = [&](std::size_t r, std::size_t c) -> double& { return cells[r * v + c]; };

    if (options.missing == MissingPolicy::fail) {
        for (std::size_t r = 0; r < t; ++r)
            if (row_has_missing[r])
                for (std::size_t c = 0; c < v; ++c)
                    if (std::isnan(at(r, c)))
                        throw ValidationError("line " + std::to_string(lines[r]) + ": missing value in KPI '" +
                                              names[c] + "' (missing-value policy is 'fail')");
    } else if (options.missing == MissingPolicy::drop_row) {
        std::vector<std::int64_t> kept_ticks;
        std::vector<double> kept;
        for (std::size_t r = 0; r < t; ++r) {
            if (row_has_missing[r]) continue;
            kept_ticks.push_back(ticks[r]);
            kept.insert(kept.end(), cells.begin() + static_cast<std::ptrdiff_t>(r * v),
                        cells.begin() + static_cast<std::ptrdiff_t>((r + 1) * v));
        }
        ticks = std::move(kept_ticks);
        cells = std::move(kept);
        t = ticks.size();
    } else {
        for (std::size_t c = 0; c < v; ++c) {
            for (std::size_t r = 0; r < t; ++r) {
                if (!std::isnan(at(r, c))) continue;
                std::optional<std::size_t> prev, next;
                for (std::size_t p = r; p-- > 0;)
                    if (!std::isnan(at(p, c))) {
                        prev = p;
                        break;
                    }
                for (std::size_t q = r + 1; q < t; ++q)
                    if (!std::isnan(at(q, c))) {
                        next = q;
                        break;
                    }
                if (!prev || !next)
                    throw ValidationError("line " + std::to_string(lines[r]) + ": cannot interpolate missing value in KPI '" +
                                          names[c] + "' (no neighbor on both sides)");
                const double w = static_cast<double>(ticks[r] - ticks[*prev]) /
                                 static_cast<double>(ticks[*next] - ticks[*prev]);
                at(r, c) = at(*prev, c) + w * (at(*next, c) - at(*prev, c));
            }
        }
    }

    Eigen::MatrixXd values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(v));
    for (std::size_t r = 0; r < t; ++r)
        for (std::size_t c = 0; c < v; ++c) values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = at(r, c);
    return KpiPanel(std::move(ticks), std::move(names), std::move(values), options.granularity_seconds);
}

KpiPanel load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    return parse_csv(in, options);
}

void write_csv(std::ostream& out, const KpiPanel& panel) {
    out << "tick";
    for (const auto& n : panel.kpi_names()) out << ',' << n;
    out << '\n';
    char buf[64];
    for (std::size_t r = 0; r < panel.rows(); ++r) {
        out << panel.ticks()[r];
        for (std::size_t c = 0; c < panel.cols(); ++c) {
            auto res = std::to_chars(buf, buf + sizeof buf,
                                     panel.values()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
            out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << '\n';
    }
}

std::string to_csv(const KpiPanel& panel) {
    std::ostringstream os;
    write_csv(os, panel);
    return os.str();
}

Comparator parse_comparator(std::string_view text) {
    text = trim(text);
    if (text == "<" || text == "lt") return Comparator::less;
    if (text == "<=" || text == "le" || text == "\xE2\x89\xA4") return Comparator::less_equal;
    if (text == ">" || text == "gt") return Comparator::greater;
    if (text == ">=" || text == "ge" || text == "\xE2\x89\xA5") return Comparator::greater_equal;
    throw ConfigError("unknown comparator '" + std::string(text) + "' (<, <=, >, >=)");
}

std::string_view to_string(Comparator op) noexcept {
    switch (op) {
        case Comparator::less: return "<";
        case Comparator::less_equal: return "<=";
        case Comparator::greater: return ">";
        case Comparator::greater_equal: return ">=";
    }
    return "?";
}

bool compare(double value, Comparator op, double threshold) noexcept {
    switch (op) {
        case Comparator::less: return value < threshold;
        case Comparator::less_equal: return value <= threshold;
        case Comparator::greater: return value > threshold;
        case Comparator::greater_equal: return value >= threshold;
    }
    return false;
}

std::vector<TickRange> apply_sla_rule(const KpiPanel& panel, const SlaRule& rule) {
    if (rule.min_duration_ticks < 0) throw ConfigError("min_duration_ticks must be non-negative");
    const auto col = static_cast<Eigen::Index>(panel.column_index(rule.metric));
    const std::int64_t need = std::max<std::int64_t>(1, rule.min_duration_ticks);
    const auto& ticks = panel.ticks();

    std::vector<TickRange> out;
    std::optional<std::int64_t> run_start;
    std::int64_t run_end = 0;
    auto close = [&] {
        if (run_start && run_end - *run_start >= need) out.push_back({*run_start, run_end});
        run_start.reset();
    };
    for (std::size_t r = 0; r < panel.rows(); ++r) {
        const bool holds = compare(panel.values()(static_cast<Eigen::Index>(r), col), rule.op, rule.threshold);
        if (run_start && ticks[r] != run_end) close();  // tick gap breaks continuity
        if (holds) {
            if (!run_start) run_start = ticks[r];
            run_end = ticks[r] + 1;
        } else {
            close();
        }
    }
    close();
    return out;
}

LabeledPanel label_rows(const KpiPanel& panel, std::size_t abnormal_first, std::size_t normal_len,
                        std::size_t abnormal_len) {
    if (normal_len == 0 || abnormal_len == 0) throw ConfigError("window lengths must be positive");
    if (abnormal_first < normal_len)
        throw ValidationError("insufficient preceding data: normal window needs " + std::to_string(normal_len) +
                              " ticks, only " + std::to_string(abnormal_first) + " available");
    if (abnormal_first + abnormal_len > panel.rows())
        throw ValidationError("insufficient following data: abnormal window needs " + std::to_string(abnormal_len) +
                              " ticks, only " + std::to_string(panel.rows() - std::min(abnormal_first, panel.rows())) +
                              " available");
    const RowRange normal{abnormal_first - normal_len, normal_len};
    const RowRange abnormal{abnormal_first, abnormal_len};
    const auto& t = panel.ticks();
    std::vector<std::uint8_t> fnode(panel.rows(), 0);
    std::fill(fnode.begin() + static_cast<std::ptrdiff_t>(abnormal.first),
              fnode.begin() + static_cast<std::ptrdiff_t>(abnormal.end()), std::uint8_t{1});
    return LabeledPanel{panel,
                        std::move(fnode),
                        TickRange{t[normal.first], t[normal.end() - 1] + 1},
                        TickRange{t[abnormal.first], t[abnormal.end() - 1] + 1},
                        normal,
                        abnormal};
}

LabeledPanel label_states(const KpiPanel& panel, TickRange breach, std::size_t normal_len, std::size_t abnormal_len,
                          std::size_t lead_offset) {
    const std::size_t onset = panel.row_of_tick(breach.begin);
    if (lead_offset > onset)
        throw ValidationError("insufficient preceding data: lead offset " + std::to_string(lead_offset) +
                              " exceeds the " + std::to_string(onset) + " ticks before the breach");
    return label_rows(panel, onset - lead_offset, normal_len, abnormal_len);
}

}  // namespace rca
