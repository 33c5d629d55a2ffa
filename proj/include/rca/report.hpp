#pragma once

#include "rca/data_model.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rca {

/// Linear-interpolation quantile (q in [0, 1]) of an unsorted sample.
double quantile(std::span<const double> x, double q);

/// Equal-width bin edges over the sample. Width is 2 * IQR / n^(1/3); a zero
/// IQR falls back to Sturges' bin count, a zero range to one unit-wide bin.
std::vector<double> freedman_diaconis_edges(std::span<const double> x, std::size_t max_bins = 200);

/// Counts per bin [edge_i, edge_{i+1}); the last bin is closed.
std::vector<std::size_t> bin_counts(std::span<const double> x, std::span<const double> edges);

struct StateHistogram {
    std::string kpi;
    std::vector<double> edges;
    std::vector<std::size_t> normal;
    std::vector<std::size_t> abnormal;
};

/// Normal and abnormal counts of one KPI over edges fitted to both states pooled.
StateHistogram state_histogram(std::string kpi, std::span<const double> normal, std::span<const double> abnormal);

/// kpi, bin, lower, upper, normal_count, abnormal_count.
std::string histograms_csv(const LabeledPanel& data, const std::vector<std::string>& kpis);

}  // namespace rca
