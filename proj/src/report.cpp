#include "rca/report.hpp"

#include "rca/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace rca {

double quantile(std::span<const double> x, double q) {
    if (x.empty()) throw AnalysisError("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile level outside [0, 1]");
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    const double h = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

std::vector<double> freedman_diaconis_edges(std::span<const double> x, std::size_t max_bins) {
    if (x.empty()) throw AnalysisError("histogram of an empty sample");
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi == lo) return {lo - 0.5, lo + 0.5};

    const double n = static_cast<double>(x.size());
    const double iqr = quantile(x, 0.75) - quantile(x, 0.25);
    std::size_t bins;
    if (iqr > 0.0) {
        const double width = 2.0 * iqr / std::cbrt(n);
        bins = static_cast<std::size_t>(std::ceil((hi - lo) / width));
    } else {
        bins = static_cast<std::size_t>(std::ceil(std::log2(n))) + 1;
    }
    bins = std::clamp<std::size_t>(bins, 1, std::max<std::size_t>(1, max_bins));
    std::vector<double> edges(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    edges.back() = hi;
    return edges;
}

std::vector<std::size_t> bin_counts(std::span<const double> x, std::span<const double> edges) {
    if (edges.size() < 2) throw Error("need at least two bin edges");
    std::vector<std::size_t> counts(edges.size() - 1, 0);
    for (double v : x) {
        if (v < edges.front() || v > edges.back()) continue;
        auto it = std::upper_bound(edges.begin(), edges.end(), v);
        auto bin = static_cast<std::size_t>(it - edges.begin());
        bin = bin == 0 ? 0 : bin - 1;
        ++counts[std::min(bin, counts.size() - 1)];
    }
    return counts;
}

StateHistogram state_histogram(std::string kpi, std::span<const double> normal, std::span<const double> abnormal) {
    std::vector<double> pooled(normal.begin(), normal.end());
    pooled.insert(pooled.end(), abnormal.begin(), abnormal.end());
    StateHistogram h;
    h.kpi = std::move(kpi);
    h.edges = freedman_diaconis_edges(pooled);
    h.normal = bin_counts(normal, h.edges);
    h.abnormal = bin_counts(abnormal, h.edges);
    return h;
}

namespace {
std::string fmt(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}
}  // namespace

std::string histograms_csv(const LabeledPanel& data, const std::vector<std::string>& kpis) {
    std::ostringstream os;
    os << "kpi,bin,lower,upper,normal_count,abnormal_count\n";
    for (const auto& kpi : kpis) {
        const Eigen::VectorXd col = data.panel.column(kpi);
        const std::span<const double> normal(col.data() + data.normal_rows.first, data.normal_rows.count);
        const std::span<const double> abnormal(col.data() + data.abnormal_rows.first, data.abnormal_rows.count);
        const auto h = state_histogram(kpi, normal, abnormal);
        for (std::size_t b = 0; b < h.normal.size(); ++b)
            os << kpi << ',' << b << ',' << fmt(h.edges[b]) << ',' << fmt(h.edges[b + 1]) << ',' << h.normal[b] << ','
               << h.abnormal[b] << '\n';
    }
    return os.str();
}

}  // namespace rca
