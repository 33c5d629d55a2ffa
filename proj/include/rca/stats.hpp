#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace rca {

/// Empirical CDF: right-continuous step function, 0 below the sample
/// minimum and 1 at or above the maximum.
class Ecdf {
public:
    explicit Ecdf(std::span<const double> sample);

    double operator()(double x) const noexcept;
    std::size_t size() const noexcept { return sorted_.size(); }
    const std::vector<double>& sorted() const noexcept { return sorted_; }

private:
    std::vector<double> sorted_;
};

struct KsResult {
    double d = 0.0;
    double p_raw = 1.0;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
};

/// P(K > lambda) for the limiting Kolmogorov distribution.
double kolmogorov_survival(double lambda);

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at
/// lambda = d * sqrt(n1 n2 / (n1 + n2)). Throws on an empty sample.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

double z_score(double x, double mu, double sigma);

/// +1 above thr, -1 below -thr, else 0.
int direction_code(double z, double thr);

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sample_sd(std::span<const double> x);

struct PartialCorrelation {
    double r = 0.0;
    /// A residual had zero variance; r is reported as 0.
    bool degenerate = false;
};

/// Correlation of the least-squares residuals of x and y after projecting
/// both onto [1, z]. z may have zero columns.
PartialCorrelation partial_correlation(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& z);

struct CiTestResult {
    double r = 0.0;
    std::vector<std::size_t> conditioning;
    double z = 0.0;
    double p = 1.0;
    /// n - |S| - 3, the Fisher-z variance denominator.
    std::size_t effective_n = 0;
    bool degenerate = false;
};

/// Fisher-z significance of a (partial) correlation. Throws AnalysisError
/// with "insufficient sample" when n <= cond_size + 3.
CiTestResult fisher_z_test(double r, std::size_t n, std::size_t cond_size, bool degenerate = false);

/// Gaussian conditional-independence tests over the columns of one data
/// matrix. The covariance is computed once; each query solves a system of
/// size |S|, which is what makes the many small tests of the skeleton
/// searches cheap.
class CovarianceCiTest {
public:
    explicit CovarianceCiTest(const Eigen::MatrixXd& data);

    std::size_t sample_size() const noexcept { return n_; }
    std::size_t variables() const noexcept { return static_cast<std::size_t>(cov_.rows()); }

    PartialCorrelation partial(std::size_t i, std::size_t j, std::span<const std::size_t> cond) const;
    CiTestResult test(std::size_t i, std::size_t j, std::span<const std::size_t> cond) const;

private:
    std::size_t n_;
    Eigen::MatrixXd cov_;
    Eigen::VectorXd scale_;
};

/// min(1, m * p_i) elementwise.
std::vector<double> bonferroni(std::span<const double> p, std::size_t m);

/// Benjamini-Hochberg step-up adjusted p-values, m defaults to p.size().
std::vector<double> bh_adjust(std::span<const double> p, std::optional<std::size_t> m = std::nullopt);

/// Benjamini-Hochberg rejection mask at level q: rejects the k smallest
/// p-values where k is the largest rank with p_(k) <= k q / m.
std::vector<bool> bh_fdr(std::span<const double> p, double q, std::optional<std::size_t> m = std::nullopt);

/// sqrt(p (1 - p) / n).
double binomial_sd(double p, std::size_t n);

}  // namespace rca
