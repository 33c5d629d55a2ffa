#include "rca/data_model.hpp"
#include "rca/error.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace rca;

namespace {
KpiPanel parse(const std::string& text, CsvOptions opt = {}) {
    std::istringstream in(text);
    return parse_csv(in, opt);
}

KpiPanel series_panel(const std::vector<double>& v, const std::string& name = "DL_Throughput") {
    std::vector<std::int64_t> t(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<std::int64_t>(i);
    return KpiPanel(t, {name}, Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

std::vector<TickRange> naive_breaches(const std::vector<double>& v, double thr, std::int64_t min_len) {
    std::vector<TickRange> out;
    std::size_t i = 0;
    while (i < v.size()) {
        if (!(v[i] < thr)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < v.size() && v[j] < thr) ++j;
        if (static_cast<std::int64_t>(j - i) >= std::max<std::int64_t>(1, min_len))
            out.push_back({static_cast<std::int64_t>(i), static_cast<std::int64_t>(j)});
        i = j;
    }
    return out;
}
}  // namespace

TEST_CASE("parse a small CSV") {
    const auto p = parse("t,A,B\n0,1.0,2.0\n1,1.5,2.5\n2,2.0,3.0\n");
    CHECK(p.rows() == 3);
    CHECK(p.cols() == 2);
    CHECK(p.kpi_names() == std::vector<std::string>{"A", "B"});
    CHECK(p.values()(1, 1) == 2.5);
    CHECK(p.ticks() == std::vector<std::int64_t>{0, 1, 2});
}

TEST_CASE("CSV validation errors") {
    CHECK_THROWS_WITH_AS(parse("t,A,A\n0,1,2\n"), doctest::Contains("duplicate KPI name"), ParseError);
    CHECK_THROWS_AS(parse("t,A\n1,1\n0,2\n"), ValidationError);
    CHECK_THROWS_AS(parse("t,A\n0,abc\n"), ParseError);
    CHECK_THROWS_AS(parse("t,A\n0,1,2\n"), ParseError);
    CHECK_THROWS_AS(parse("t,A\n0,\n"), ValidationError);
    CHECK_THROWS_AS(parse("t,A\n0,1\n2024-01-01T00:00:15Z,1\n"), ParseError);
    try {
        parse("t,A\n0,1\n1,x\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("missing value policies") {
    CsvOptions lin{MissingPolicy::linear, 15};
    const auto p = parse("t,A,B\n0,1.0,5\n1,,6\n2,3.0,7\n", lin);
    CHECK(p.values()(1, 0) == 2.0);

    const auto uneven = parse("t,A\n0,1.0\n1,NA\n4,7.0\n", lin);
    CHECK(uneven.values()(1, 0) == doctest::Approx(1.0 + 6.0 * (1.0 / 4.0)));

    CHECK_THROWS_AS(parse("t,A\n0,\n1,2\n", lin), ValidationError);

    CsvOptions drop{MissingPolicy::drop_row, 15};
    const auto d = parse("t,A,B\n0,1,2\n1,NaN,3\n2,4,5\n", drop);
    CHECK(d.rows() == 2);
    CHECK(d.ticks() == std::vector<std::int64_t>{0, 2});
    CHECK(parse_missing_policy("drop-row") == MissingPolicy::drop_row);
    CHECK_THROWS_AS(parse_missing_policy("zero"), ConfigError);
}

TEST_CASE("ISO-8601 timestamps map to granularity ticks") {
    const auto p = parse("time,A\n2024-01-01T00:00:00Z,1\n2024-01-01T00:00:15Z,2\n2024-01-01T00:01:00Z,3\n");
    const std::int64_t base = 1704067200 / 15;
    CHECK(p.ticks() == std::vector<std::int64_t>{base, base + 1, base + 4});
    CHECK_THROWS_AS(parse("time,A\n2024-01-01T00:00:07Z,1\n"), ParseError);
}

TEST_CASE("CSV round trip is lossless") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> norm(0.0, 1e3);
    Eigen::MatrixXd v(50, 3);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = norm(rng);
    std::vector<std::int64_t> t(50);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<std::int64_t>(3 * i + 7);
    const KpiPanel p(t, {"x", "y z", "w"}, v);
    const auto back = parse(to_csv(p));
    CHECK(back.ticks() == p.ticks());
    CHECK(back.kpi_names() == p.kpi_names());
    CHECK((back.values().array() == p.values().array()).all());
}

TEST_CASE("panel accessors") {
    const auto p = parse("t,A,B\n10,1,2\n11,3,4\n12,5,6\n");
    CHECK(p.column_index("B") == 1);
    CHECK_THROWS_WITH_AS(p.column_index("C"), doctest::Contains("'C'"), ValidationError);
    CHECK(p.row_of_tick(11) == 1);
    const auto s = p.slice({1, 2});
    CHECK(s.ticks() == std::vector<std::int64_t>{11, 12});
    const auto sel = p.select({"B"});
    CHECK(sel.values()(2, 0) == 6.0);
    CHECK_THROWS_AS(KpiPanel({0, 1}, {"A"}, Eigen::MatrixXd::Constant(2, 1, std::nan(""))), ValidationError);
}

TEST_CASE("apply_sla_rule") {
    const SlaRule rule{"DL_Throughput", Comparator::less, 500.0, 2};
    const auto r = apply_sla_rule(series_panel({600, 480, 470, 520}), rule);
    REQUIRE(r.size() == 1);
    CHECK(r[0] == TickRange{1, 3});
    CHECK(apply_sla_rule(series_panel({600, 700, 800}), rule).empty());
    const auto all = apply_sla_rule(series_panel({450, 450, 450}), rule);
    REQUIRE(all.size() == 1);
    CHECK(all[0] == TickRange{0, 3});
    CHECK(apply_sla_rule(series_panel({600, 480, 600}), rule).empty());
    CHECK_THROWS_AS(apply_sla_rule(series_panel({1}, "other"), rule), ValidationError);
}

TEST_CASE("apply_sla_rule agrees with a naive run scan") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(60);
        for (auto& x : v) x = u(rng);
        const std::int64_t min_len = trial % 4;
        const auto got = apply_sla_rule(series_panel(v), {"DL_Throughput", Comparator::less, 0.6, min_len});
        CHECK(got == naive_breaches(v, 0.6, min_len));
    }
}

TEST_CASE("a tick gap breaks a breach run") {
    const KpiPanel p({0, 1, 5, 6}, {"m"}, Eigen::Vector4d(1, 1, 1, 1));
    const auto r = apply_sla_rule(p, {"m", Comparator::less_equal, 1.0, 2});
    REQUIRE(r.size() == 2);
    CHECK(r[0] == TickRange{0, 2});
    CHECK(r[1] == TickRange{5, 7});
}

TEST_CASE("label_states") {
    std::vector<double> v(240, 1.0);
    const auto p = series_panel(v);
    const auto l = label_states(p, {120, 130}, 120, 120);
    CHECK(l.normal_window == TickRange{0, 120});
    CHECK(l.abnormal_window == TickRange{120, 240});
    for (std::size_t i = 0; i < 240; ++i) CHECK(l.fnode[i] == (i >= 120 ? 1 : 0));
    CHECK(l.normal().rows() == 120);

    CHECK_THROWS_WITH_AS(label_states(p, {50, 60}, 120, 120), doctest::Contains("insufficient preceding data"),
                         ValidationError);
    CHECK_THROWS_WITH_AS(label_states(p, {200, 210}, 120, 120), doctest::Contains("insufficient following data"),
                         ValidationError);

    const auto tiny = label_states(series_panel({1.0, 2.0}), {1, 2}, 1, 1);
    CHECK(tiny.fnode == std::vector<std::uint8_t>{0, 1});

    const auto lead = label_states(p, {150, 160}, 100, 100, 20);
    CHECK(lead.abnormal_window == TickRange{130, 230});
    CHECK(lead.normal_window == TickRange{30, 130});
    CHECK(lead.analysis_rows() == RowRange{30, 200});
}

TEST_CASE("label_rows") {
    std::vector<double> v(20, 0.0);
    const auto l = label_rows(series_panel(v), 10, 5, 4);
    CHECK(l.normal_rows == RowRange{5, 5});
    CHECK(l.abnormal_rows == RowRange{10, 4});
    CHECK(l.fnode[10] == 1);
    CHECK(l.fnode[9] == 0);
    CHECK_THROWS_AS(label_rows(series_panel(v), 3, 5, 4), ValidationError);
}

TEST_CASE("comparators") {
    CHECK(parse_comparator("<=") == Comparator::less_equal);
    CHECK(compare(1.0, Comparator::greater, 0.5));
    CHECK(!compare(0.5, Comparator::greater, 0.5));
    CHECK(compare(0.5, Comparator::greater_equal, 0.5));
    CHECK_THROWS_AS(parse_comparator("=="), ConfigError);
}
