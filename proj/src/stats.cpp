#include "rca/stats.hpp"

#include "rca/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace rca {

namespace {

void check_probabilities(std::span<const double> p) {
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0)) throw Error("p-value outside [0, 1]");
}

double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

// Relative tolerances for declaring a variance zero.
constexpr double kConstantTol = 1e-12;
constexpr double kResidualTol = 1e-10;

}  // namespace

Ecdf::Ecdf(std::span<const double> sample) : sorted_(sample.begin(), sample.end()) {
    std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const noexcept {
    if (sorted_.empty()) return 0.0;
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double kolmogorov_survival(double lambda) {
    if (!(lambda > 0.0)) return 1.0;
    double q;
    if (lambda < 1.18) {
        // Jacobi theta form of the same distribution; the alternating series
        // below converges too slowly here.
        const double pi2 = std::numbers::pi * std::numbers::pi;
        double cdf = 0.0;
        for (int k = 1; k < 100; ++k) {
            const double m = 2.0 * k - 1.0;
            const double term = std::exp(-m * m * pi2 / (8.0 * lambda * lambda));
            cdf += term;
            if (term < 1e-16) break;
        }
        cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
        q = 1.0 - cdf;
    } else {
        q = 0.0;
        for (int k = 1; k < 100; ++k) {
            const double term = std::exp(-2.0 * k * k * lambda * lambda);
            q += (k % 2 == 1 ? term : -term);
            if (term < 1e-12) break;
        }
        q *= 2.0;
    }
    return std::clamp(q, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw AnalysisError("K-S test needs two non-empty samples");
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double n1 = static_cast<double>(sa.size());
    const double n2 = static_cast<double>(sb.size());

    // Walk the pooled order statistics; compare ECDFs only after consuming
    // every copy of a tied value so the step is evaluated right-continuously.
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < sa.size() && j < sb.size()) {
        const double x = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] == x) ++i;
        while (j < sb.size() && sb[j] == x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
    }
    const double lambda = d * std::sqrt(n1 * n2 / (n1 + n2));
    return {d, kolmogorov_survival(lambda), sa.size(), sb.size()};
}

double z_score(double x, double mu, double sigma) {
    if (!(sigma > 0.0)) throw AnalysisError("z-score needs sigma > 0");
    return (x - mu) / sigma;
}

int direction_code(double z, double thr) {
    if (!(thr > 0.0)) throw Error("direction threshold must be positive");
    if (z > thr) return 1;
    if (z < -thr) return -1;
    return 0;
}

double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

PartialCorrelation partial_correlation(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& z) {
    const Eigen::Index n = x.size();
    if (y.size() != n || (z.cols() > 0 && z.rows() != n)) throw AnalysisError("series lengths differ");
    Eigen::MatrixXd design(n, z.cols() + 1);
    design.col(0).setOnes();
    if (z.cols() > 0) design.rightCols(z.cols()) = z;
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
    const Eigen::VectorXd rx = x - design * cod.solve(x);
    const Eigen::VectorXd ry = y - design * cod.solve(y);

    auto constant = [](const Eigen::VectorXd& v) {
        const double centered = (v.array() - v.mean()).square().sum();
        return centered <= kConstantTol * v.squaredNorm();
    };
    auto spent = [](const Eigen::VectorXd& resid, const Eigen::VectorXd& v) {
        return resid.squaredNorm() <= kResidualTol * (v.array() - v.mean()).square().sum();
    };
    if (constant(x) || constant(y) || spent(rx, x) || spent(ry, y)) return {0.0, true};
    const double r = rx.dot(ry) / std::sqrt(rx.squaredNorm() * ry.squaredNorm());
    return {std::clamp(r, -1.0, 1.0), false};
}

CiTestResult fisher_z_test(double r, std::size_t n, std::size_t cond_size, bool degenerate) {
    if (n <= cond_size + 3)
        throw AnalysisError("insufficient sample: n=" + std::to_string(n) + " with conditioning set of size " +
                            std::to_string(cond_size));
    CiTestResult out;
    out.effective_n = n - cond_size - 3;
    out.degenerate = degenerate;
    if (degenerate) r = 0.0;
    out.r = std::clamp(r, -1.0, 1.0);
    // atanh diverges at |r| = 1; the clamp keeps z finite while p underflows to 0.
    const double rc = std::clamp(out.r, -1.0 + 1e-16, 1.0 - 1e-16);
    out.z = std::atanh(rc) * std::sqrt(static_cast<double>(out.effective_n));
    out.p = degenerate ? 1.0 : normal_two_sided(out.z);
    return out;
}

CovarianceCiTest::CovarianceCiTest(const Eigen::MatrixXd& data) : n_(static_cast<std::size_t>(data.rows())) {
    if (data.rows() < 2) throw AnalysisError("CI test needs at least two rows");
    const Eigen::RowVectorXd mu = data.colwise().mean();
    const Eigen::MatrixXd centered = data.rowwise() - mu;
    cov_ = (centered.transpose() * centered) / static_cast<double>(data.rows() - 1);
    scale_ = data.colwise().squaredNorm().transpose() / static_cast<double>(data.rows() - 1);
}

PartialCorrelation CovarianceCiTest::partial(std::size_t i, std::size_t j, std::span<const std::size_t> cond) const {
    const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
    if (cov_(ii, ii) <= kConstantTol * scale_(ii) || cov_(jj, jj) <= kConstantTol * scale_(jj)) return {0.0, true};
    double sxx = cov_(ii, ii), syy = cov_(jj, jj), sxy = cov_(ii, jj);
    if (!cond.empty()) {
        const auto k = static_cast<Eigen::Index>(cond.size());
        Eigen::MatrixXd cbb(k, k), cba(k, 2);
        for (Eigen::Index a = 0; a < k; ++a) {
            const auto ca = static_cast<Eigen::Index>(cond[static_cast<std::size_t>(a)]);
            for (Eigen::Index b = 0; b < k; ++b) cbb(a, b) = cov_(ca, static_cast<Eigen::Index>(cond[static_cast<std::size_t>(b)]));
            cba(a, 0) = cov_(ca, ii);
            cba(a, 1) = cov_(ca, jj);
        }
        const Eigen::MatrixXd sol = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(cbb).solve(cba);
        const Eigen::Matrix2d m = [&] {
            Eigen::Matrix2d base;
            base << sxx, sxy, sxy, syy;
            return Eigen::Matrix2d(base - cba.transpose() * sol);
        }();
        if (m(0, 0) <= kResidualTol * sxx || m(1, 1) <= kResidualTol * syy) return {0.0, true};
        sxx = m(0, 0);
        syy = m(1, 1);
        sxy = 0.5 * (m(0, 1) + m(1, 0));
    }
    return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

CiTestResult CovarianceCiTest::test(std::size_t i, std::size_t j, std::span<const std::size_t> cond) const {
    const auto pc = partial(i, j, cond);
    auto res = fisher_z_test(pc.r, n_, cond.size(), pc.degenerate);
    res.conditioning.assign(cond.begin(), cond.end());
    return res;
}

std::vector<double> bonferroni(std::span<const double> p, std::size_t m) {
    check_probabilities(p);
    if (m < p.size()) throw Error("Bonferroni family size smaller than the number of p-values");
    std::vector<double> out;
    out.reserve(p.size());
    for (double v : p) out.push_back(std::min(1.0, static_cast<double>(m) * v));
    return out;
}

namespace {
std::vector<std::size_t> ascending_order(std::span<const double> p) {
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    return order;
}
}  // namespace

std::vector<double> bh_adjust(std::span<const double> p, std::optional<std::size_t> m_opt) {
    check_probabilities(p);
    const std::size_t m = m_opt.value_or(p.size());
    if (m < p.size()) throw Error("BH family size smaller than the number of p-values");
    const auto order = ascending_order(p);
    std::vector<double> adj(p.size(), 1.0);
    double running = 1.0;
    for (std::size_t k = p.size(); k-- > 0;) {
        const std::size_t idx = order[k];
        running = std::min(running, p[idx] * (static_cast<double>(m) / static_cast<double>(k + 1)));
        adj[idx] = std::min(1.0, running);
    }
    return adj;
}

std::vector<bool> bh_fdr(std::span<const double> p, double q, std::optional<std::size_t> m_opt) {
    check_probabilities(p);
    const std::size_t m = m_opt.value_or(p.size());
    if (m < p.size()) throw Error("BH family size smaller than the number of p-values");
    const auto order = ascending_order(p);
    std::size_t k_max = 0;
    for (std::size_t k = 1; k <= p.size(); ++k)
        if (p[order[k - 1]] <= static_cast<double>(k) * q / static_cast<double>(m)) k_max = k;
    std::vector<bool> reject(p.size(), false);
    for (std::size_t k = 0; k < k_max; ++k) reject[order[k]] = true;
    return reject;
}

double binomial_sd(double p, std::size_t n) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error("probability outside [0, 1]");
    if (n == 0) throw Error("binomial_sd needs n >= 1");
    return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace rca
