#pragma once

// Deterministic statistical primitives shared by every other module.
// All arithmetic is double precision and single-threaded so identical inputs
// give bit-identical outputs on the same build.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "semaudit/error.hpp"

namespace semaudit {

inline std::span<const double> column_span(const Eigen::MatrixXd& m, Eigen::Index col) {
    return {m.col(col).data(), static_cast<std::size_t>(m.rows())};
}

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

inline double mean(std::span<const double> x) {
    if (x.empty()) throw Error(ErrorCode::DomainError, "mean of empty vector");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Sample variance (n - 1 denominator).
inline double variance(std::span<const double> x) {
    if (x.size() < 2) throw Error(ErrorCode::DomainError, "variance needs at least two values");
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

/// Centres and scales to unit sample variance. Throws DegenerateConstruct on
/// a constant input.
inline Eigen::VectorXd standardize(const Eigen::VectorXd& x) {
    const double m = x.mean();
    Eigen::VectorXd c = x.array() - m;
    const double var = c.squaredNorm() / static_cast<double>(x.size() - 1);
    const double scale = std::max(1.0, std::abs(m));
    if (!(var > 1e-24 * scale * scale))
        throw Error(ErrorCode::DegenerateConstruct, "cannot standardize a constant vector");
    return c / std::sqrt(var);
}

namespace detail {

inline void check_pair(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw Error(ErrorCode::LengthMismatch, "correlation inputs differ in length");
    if (x.size() < 3)
        throw Error(ErrorCode::DegenerateCorrelation, "correlation needs at least three observations");
}

} // namespace detail

/// Pearson product-moment correlation.
inline double pearson(std::span<const double> x, std::span<const double> y) {
    detail::check_pair(x, y);
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0)
        throw Error(ErrorCode::DegenerateCorrelation, "correlation of a constant vector");
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

/// Fractional (mid-rank) ranks, 1-based. Tied values share the average of
/// the ranks they span.
inline std::vector<double> fractional_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

/// Spearman rank correlation: Pearson over fractional ranks.
inline double spearman(std::span<const double> x, std::span<const double> y) {
    detail::check_pair(x, y);
    const auto rx = fractional_ranks(x);
    const auto ry = fractional_ranks(y);
    return pearson(rx, ry);
}

/// Pairwise Pearson correlation of the columns of m.
inline Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& m) {
    if (m.rows() < 3)
        throw Error(ErrorCode::DegenerateCorrelation, "correlation matrix needs at least three rows");
    const Eigen::Index p = m.cols();
    for (Eigen::Index i = 0; i < p; ++i) {
        if (!(variance(column_span(m, i)) > 0.0))
            throw Error(ErrorCode::DegenerateCorrelation, "correlation of a constant column");
    }
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = pearson(column_span(m, i), column_span(m, j));
            r(i, j) = v;
            r(j, i) = v;
        }
    }
    return r;
}

struct OlsFit {
    Eigen::VectorXd slopes; ///< one per regressor column
    double intercept = 0.0;
    double r_squared = 0.0;
    Eigen::VectorXd residuals;
};

namespace detail {

inline double r_squared_from(const Eigen::VectorXd& y, const Eigen::VectorXd& residuals) {
    const double sst = (y.array() - y.mean()).square().sum();
    if (!(sst > 0.0)) throw Error(ErrorCode::DomainError, "regression response is constant");
    const double r2 = 1.0 - residuals.squaredNorm() / sst;
    return std::clamp(r2, 0.0, 1.0);
}

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd design(x.rows(), x.cols() + 1);
    design.leftCols(x.cols()) = x;
    design.col(x.cols()).setOnes();
    return design;
}

} // namespace detail

/// Ordinary least squares with intercept, solved by column-pivoted
/// Householder QR. A rank-deficient design is an error.
inline OlsFit ols(const Eigen::MatrixXd& regressors, const Eigen::VectorXd& response) {
    const Eigen::Index n = response.size();
    const Eigen::Index k = regressors.cols();
    if (regressors.rows() != n)
        throw Error(ErrorCode::LengthMismatch, "regressor rows differ from response length");
    if (n < k + 2)
        throw Error(ErrorCode::DomainError, "ols needs at least regressors + 2 observations");

    OlsFit fit;
    if (k == 0) {
        fit.slopes = Eigen::VectorXd(0);
        fit.intercept = response.mean();
        fit.residuals = response.array() - fit.intercept;
        fit.r_squared = 0.0;
        return fit;
    }

    const Eigen::MatrixXd design = detail::with_intercept(regressors);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < design.cols())
        throw Error(ErrorCode::SingularDesign, "regressor matrix is rank deficient");

    const Eigen::VectorXd beta = qr.solve(response);
    fit.slopes = beta.head(k);
    fit.intercept = beta(k);
    fit.residuals = response - design * beta;
    fit.r_squared = detail::r_squared_from(response, fit.residuals);
    return fit;
}

/// R² of the least-squares projection of response onto span{1, regressors}.
/// Unlike ols() this tolerates rank-deficient regressors: dependent columns
/// are dropped by the pivoted QR, which leaves the projection unchanged.
inline double projection_r_squared(const Eigen::MatrixXd& regressors, const Eigen::VectorXd& response) {
    if (regressors.cols() == 0) return 0.0;
    const Eigen::MatrixXd design = detail::with_intercept(regressors);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    const Eigen::VectorXd beta = qr.solve(response);
    const Eigen::VectorXd residuals = response - design * beta;
    return detail::r_squared_from(response, residuals);
}

/// exp(mean(log v)) over strictly positive values.
inline double geometric_mean(std::span<const double> values) {
    if (values.empty()) throw Error(ErrorCode::DomainError, "geometric mean of empty vector");
    double acc = 0.0;
    for (double v : values) {
        if (!(v > 0.0)) throw Error(ErrorCode::DomainError, "geometric mean needs positive values");
        acc += std::log(v);
    }
    return std::exp(acc / static_cast<double>(values.size()));
}

} // namespace semaudit
