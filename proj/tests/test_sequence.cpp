#include "rca/error.hpp"
#include "rca/sequence.hpp"
#include "rca/stats.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace rca;

namespace {

KpiSegment make_segment(const std::string& name, std::mt19937_64& rng, std::size_t step_at, double shift,
                        double sd = 1.0) {
    std::normal_distribution<double> norm(0.0, sd);
    KpiSegment s;
    s.kpi = name;
    for (int i = 0; i < 120; ++i) s.baseline.push_back(norm(rng));
    for (std::size_t i = 0; i < 120; ++i) {
        s.segment.push_back(norm(rng) + (i >= step_at ? shift : 0.0));
        s.ticks.push_back(static_cast<std::int64_t>(1000 + i));
    }
    return s;
}

DeviationEvent event(std::string kpi, std::int64_t onset, double d = 0.5) {
    DeviationEvent e;
    e.kpi = std::move(kpi);
    e.onset = onset;
    e.ks_d = d;
    e.direction = 1;
    return e;
}

}  // namespace

TEST_CASE("step change onset lies within one window of the true change") {
    SequenceConfig cfg;
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(seed);
        const std::vector<KpiSegment> batch{make_segment("k", rng, 20, 4.0, 0.5)};
        const auto scan = rolling_ks_onset(batch, cfg)[0];
        if (!scan.onset_tick()) continue;
        const auto t0 = 1000 + 20;
        hits += std::abs(*scan.onset_tick() - t0) <= static_cast<std::int64_t>(cfg.window);
    }
    CHECK(hits >= 45);
}

TEST_CASE("no-change KPI yields no onset") {
    SequenceConfig cfg;
    int quiet = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(seed + 100);
        const std::vector<KpiSegment> batch{make_segment("k", rng, 0, 0.0)};
        quiet += !rolling_ks_onset(batch, cfg)[0].onset_window.has_value();
    }
    CHECK(quiet >= 45);
}

TEST_CASE("identical constant segments give zero statistics") {
    KpiSegment s{"c", std::vector<double>(40, 5.0), std::vector<double>(40, 5.0), {}};
    for (int i = 0; i < 40; ++i) s.ticks.push_back(i);
    const auto scan = rolling_ks_onset(std::vector<KpiSegment>{s}, {})[0];
    for (double d : scan.d) CHECK(d == 0.0);
    CHECK_FALSE(scan.onset_window.has_value());
}

TEST_CASE("correction spans every window of every KPI") {
    std::mt19937_64 rng(3);
    const std::vector<KpiSegment> batch{make_segment("a", rng, 40, 1.0), make_segment("b", rng, 80, 1.5)};
    SequenceConfig cfg;
    const auto scans = rolling_ks_onset(batch, cfg);
    std::vector<double> raw;
    for (const auto& s : batch)
        for (std::size_t st = 0; st + cfg.window <= s.segment.size(); st += cfg.stride)
            raw.push_back(ks_two_sample(std::span<const double>(s.segment).subspan(st, cfg.window), s.baseline).p_raw);
    const auto adj = bh_adjust(raw);
    std::size_t k = 0;
    for (const auto& s : scans)
        for (double p : s.p_adj) CHECK(p == doctest::Approx(adj[k++]).epsilon(1e-14));
    CHECK(k == raw.size());
    CHECK(scans[0].window_starts.size() == (120 - cfg.window) / cfg.stride + 1);

    cfg.correction = Correction::bonferroni;
    const auto bon = rolling_ks_onset(batch, cfg);
    CHECK(bon[1].p_adj[0] == doctest::Approx(std::min(1.0, raw[scans[0].p_raw.size()] * static_cast<double>(raw.size()))));
}

TEST_CASE("short segments are rejected by name") {
    KpiSegment s{"short", std::vector<double>(40, 1.0), std::vector<double>(10, 1.0), std::vector<std::int64_t>(10, 0)};
    CHECK_THROWS_WITH_AS(rolling_ks_onset(std::vector<KpiSegment>{s}, {}), doctest::Contains("short"), AnalysisError);
    SequenceConfig bad;
    bad.window = 4;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("direction at onset") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> norm;
    std::vector<double> up, down;
    for (int i = 0; i < 32; ++i) {
        up.push_back(5.0 + norm(rng) * 0.2);
        down.push_back(-5.0 + norm(rng) * 0.2);
    }
    CHECK(direction_at_onset(up, 0, 16, 0.0, 1.0, 3.0).direction == 1);
    CHECK(direction_at_onset(down, 0, 16, 0.0, 1.0, 3.0).direction == -1);

    std::vector<double> pinned(8, 0.3);
    pinned.insert(pinned.end(), 24, 2.0);
    const auto d = direction_at_onset(pinned, 0, 16, 0.0, 1.0, 3.0);
    CHECK(d.direction == 1);
    CHECK(d.hard_constant);

    const auto flat = direction_at_onset(std::vector<double>(20, -1.0), 0, 16, 0.0, 0.0, 3.0);
    CHECK(flat.hard_constant);
    CHECK(flat.direction == -1);

    std::vector<double> mild(32, 1.0);
    for (std::size_t i = 0; i < mild.size(); i += 2) mild[i] = 2.0;
    const auto m = direction_at_onset(mild, 0, 16, 0.0, 1.0, 3.0);
    CHECK_FALSE(m.hard_constant);
    CHECK(m.direction == 1);
}

TEST_CASE("order_events") {
    auto steps = order_events({event("B", 120), event("A", 50)});
    CHECK(steps[0].event.kpi == "A");
    CHECK(steps[0].step == 1);
    CHECK(steps[1].event.kpi == "B");
    CHECK(steps[1].step == 2);

    steps = order_events({event("low", 50, 0.4), event("high", 50, 0.9)});
    CHECK(steps[0].event.kpi == "high");
    steps = order_events({event("z", 50, 0.4), event("a", 50, 0.4)});
    CHECK(steps[0].event.kpi == "a");
    CHECK(order_events({event("only", 3)})[0].step == 1);
}

TEST_CASE("assemble_cis") {
    CausalSubgraph g{{"A", "B", "SLA", "C"}, {{"A", "B", 2, 0.4, 0.0}, {"B", "SLA", 8, 0.6, 0.0}, {"C", "A", 1, 0.3, 0.0}}};
    const auto steps = order_events({event("A", 10), event("B", 20), event("SLA", 30)});
    const auto r = assemble_cis(g, steps, "SLA");
    CHECK(r.edges[0].flagged);
    CHECK(r.edges[1].flagged);
    CHECK_FALSE(r.edges[2].flagged);
    CHECK(r.nodes[2].sla);
    CHECK_FALSE(r.nodes[3].flagged);

    const auto reverse = assemble_cis(g, order_events({event("A", 30), event("B", 20)}), "SLA");
    CHECK_FALSE(reverse.edges[0].flagged);

    const auto lone = assemble_cis(g, order_events({event("C", 5)}), "SLA");
    CHECK(lone.nodes[3].flagged);
    for (const auto& e : lone.edges) CHECK_FALSE(e.flagged);

    const auto none = assemble_cis(g, {}, "SLA");
    for (const auto& n : none.nodes) CHECK_FALSE(n.flagged);
    CHECK(to_json(none)["steps"].empty());

    CHECK_THROWS_WITH_AS(assemble_cis(g, order_events({event("Q", 1)}), "SLA"), doctest::Contains("stage mismatch"),
                         AnalysisError);

    const auto j = to_json(r);
    CHECK(j["steps"][0]["kpi"] == "A");
    CHECK(j["steps"][0]["onset_tick"] == 10);
    CHECK(j["config"]["cis_alpha"] == 0.1);
    CHECK(j["config"]["correction"] == "bh_fdr");
    const auto dot = to_dot(r);
    CHECK(dot.find("intervention=true") != std::string::npos);
    CHECK(dot.find("sequence=true") != std::string::npos);
    CHECK(dot.find("STEP 1") != std::string::npos);
}

TEST_CASE("lowering cis alpha never adds events") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        std::mt19937_64 rng(seed);
        std::vector<KpiSegment> batch;
        for (int k = 0; k < 5; ++k) batch.push_back(make_segment("k" + std::to_string(k), rng, 30 + 15 * k, 0.3 * k));
        for (auto corr : {Correction::none, Correction::bonferroni, Correction::bh_fdr}) {
            SequenceConfig lo, hi;
            lo.cis_alpha = 0.05;
            lo.correction = hi.correction = corr;
            std::set<std::string> small, large;
            for (const auto& s : rolling_ks_onset(batch, lo))
                if (s.onset_window) small.insert(s.kpi);
            for (const auto& s : rolling_ks_onset(batch, hi))
                if (s.onset_window) large.insert(s.kpi);
            CHECK(std::includes(large.begin(), large.end(), small.begin(), small.end()));
        }
    }
}

TEST_CASE("detect_events on a labeled panel") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> norm;
    Eigen::MatrixXd v(240, 2);
    std::vector<std::int64_t> ticks(240);
    for (Eigen::Index i = 0; i < 240; ++i) {
        ticks[static_cast<std::size_t>(i)] = i;
        v(i, 0) = norm(rng) + (i >= 150 ? 6.0 : 0.0);
        v(i, 1) = norm(rng);
    }
    const auto l = label_rows(KpiPanel(ticks, {"up", "flat"}, v), 120, 120, 120);
    SequenceConfig cfg;
    cfg.correction = Correction::bonferroni;
    const auto events = detect_events(l, {"up", "flat"}, cfg);
    REQUIRE(events.size() == 1);
    CHECK(events[0].kpi == "up");
    CHECK(events[0].direction == 1);
    CHECK(std::abs(events[0].onset - 150) <= 16);

    const auto csv = deviation_traces_csv(l, {"up", "flat"}, 3.0);
    CHECK(csv.rfind("tick,up,flat\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 241);
}
