#include "rca/error.hpp"
#include "rca/report.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace rca;

TEST_CASE("quantile interpolates linearly") {
    const std::vector<double> x{4, 1, 3, 2};
    CHECK(quantile(x, 0.0) == 1.0);
    CHECK(quantile(x, 1.0) == 4.0);
    CHECK(quantile(x, 0.5) == 2.5);
    CHECK(quantile(x, 0.25) == doctest::Approx(1.75));
    CHECK_THROWS_AS(quantile(std::vector<double>{}, 0.5), AnalysisError);
}

TEST_CASE("Freedman-Diaconis edges") {
    std::vector<double> x(100);
    std::iota(x.begin(), x.end(), 0.0);
    const auto e = freedman_diaconis_edges(x);
    // IQR = 74.25 - 24.75 = 49.5, width = 99 / cbrt(100).
    const auto bins = static_cast<std::size_t>(std::ceil(99.0 / (2.0 * 49.5 / std::cbrt(100.0))));
    CHECK(e.size() == bins + 1);
    CHECK(e.front() == 0.0);
    CHECK(e.back() == 99.0);

    const auto single = freedman_diaconis_edges(std::vector<double>{2, 2, 2});
    CHECK(single == std::vector<double>{1.5, 2.5});

    std::vector<double> spike(50, 1.0);
    spike.push_back(9.0);
    const auto sturges = freedman_diaconis_edges(spike);
    CHECK(sturges.size() == static_cast<std::size_t>(std::ceil(std::log2(51.0))) + 2);
}

TEST_CASE("bin counts cover the sample") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> norm;
    std::vector<double> a(300), b(200);
    for (auto& v : a) v = norm(rng);
    for (auto& v : b) v = norm(rng) + 2.0;
    const auto h = state_histogram("k", a, b);
    CHECK(std::accumulate(h.normal.begin(), h.normal.end(), std::size_t{0}) == 300);
    CHECK(std::accumulate(h.abnormal.begin(), h.abnormal.end(), std::size_t{0}) == 200);
    CHECK(h.normal.size() + 1 == h.edges.size());

    const std::vector<double> edges{0, 1, 2};
    CHECK(bin_counts(std::vector<double>{0, 0.5, 1, 2, 3, -1}, edges) == std::vector<std::size_t>{2, 2});
}

TEST_CASE("histograms CSV") {
    Eigen::MatrixXd v(8, 1);
    v << 1, 2, 1, 2, 5, 6, 5, 6;
    std::vector<std::int64_t> t(8);
    std::iota(t.begin(), t.end(), 0);
    const auto l = label_rows(KpiPanel(t, {"m"}, v), 4, 4, 4);
    const auto csv = histograms_csv(l, {"m"});
    CHECK(csv.rfind("kpi,bin,lower,upper,normal_count,abnormal_count\n", 0) == 0);
    CHECK(csv.find("m,0,1,") != std::string::npos);
}
