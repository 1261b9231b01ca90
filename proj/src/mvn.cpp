#include "spurcor/mvn.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spurcor/rng.hpp"

namespace spurcor {

namespace {
constexpr int kBlockDraws = 1024;
}

double marginal_tail(double t, Sidedness sidedness) {
    return sidedness == Sidedness::TwoSided ? 2.0 * normal_tail(std::fabs(t)) : normal_tail(t);
}

GaussianPool::GaussianPool(const Eigen::MatrixXd& psi, int n_draws, std::uint64_t seed)
    : seed_(seed) {
    if (n_draws < 1) throw ValidationError("n_draws must be >= 1");
    if (psi.rows() != psi.cols()) throw ValidationError("psi must be square");
    const int d = static_cast<int>(psi.rows());

    // factor via eigendecomposition; PSD rank-deficient inputs are fine,
    // anything with a clearly negative eigenvalue is not
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(psi);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
    const double eps = 1e-10 * d;
    if (es.eigenvalues().minCoeff() < -std::max(eps, 1e-8 * es.eigenvalues().maxCoeff()))
        throw NumericError("correlation matrix is not positive semi-definite");
    Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd factor = es.eigenvectors() * clipped.asDiagonal();

    draws_.resize(n_draws, d);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> z(kBlockDraws, d);
    for (int start = 0, block = 0; start < n_draws; start += kBlockDraws, ++block) {
        const int rows = std::min(kBlockDraws, n_draws - start);
        Xoshiro256 rng(derive_seed(seed, "mvn-pool", static_cast<std::uint64_t>(block)));
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < d; ++j) z(i, j) = rng.next_normal();
        draws_.middleRows(start, rows).noalias() = z.topRows(rows) * factor.transpose();
    }
}

std::vector<double> GaussianPool::subset_maxima(const std::vector<int>& subset,
                                                Sidedness sidedness) const {
    if (subset.empty()) throw ValidationError("subset must be non-empty");
    const int n = n_draws();
    std::vector<double> maxima(n, -HUGE_VAL);
    for (int i = 0; i < n; ++i) {
        double mx = -HUGE_VAL;
        for (int col : subset) {
            double v = draws_(i, col);
            if (sidedness == Sidedness::TwoSided) v = std::fabs(v);
            mx = std::max(mx, v);
        }
        maxima[i] = mx;
    }
    return maxima;
}

TailEstimate GaussianPool::tail_prob(double c, const std::vector<int>& subset,
                                     Sidedness sidedness) const {
    const auto maxima = subset_maxima(subset, sidedness);
    const double n = static_cast<double>(maxima.size());
    double count = 0.0;
    for (double v : maxima)
        if (v > c) count += 1.0;
    const double est = count / n;
    return {est, std::sqrt(est * (1.0 - est) / n)};
}

double GaussianPool::critical_value(double alpha, const std::vector<int>& subset,
                                    Sidedness sidedness) const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0,1)");
    auto maxima = subset_maxima(subset, sidedness);
    const int n = static_cast<int>(maxima.size());
    // order statistic at ceil((1-alpha)*N), 1-based
    int rank = static_cast<int>(std::ceil((1.0 - alpha) * n));
    rank = std::clamp(rank, 1, n);
    std::nth_element(maxima.begin(), maxima.begin() + (rank - 1), maxima.end());
    return maxima[rank - 1];
}

std::vector<double> GaussianPool::step_down_adjusted(const std::vector<int>& order,
                                                     const std::vector<double>& thresholds,
                                                     Sidedness sidedness,
                                                     double stop_alpha) const {
    const int d = static_cast<int>(order.size());
    if (static_cast<int>(thresholds.size()) != d)
        throw ValidationError("order/threshold size mismatch");
    const int n = n_draws();
    std::vector<double> counts(d, 0.0);
    // running suffix maxima: one pass per draw, ranks visited back to front
    for (int i = 0; i < n; ++i) {
        double mx = -HUGE_VAL;
        for (int r = d - 1; r >= 0; --r) {
            double v = draws_(i, order[r]);
            if (sidedness == Sidedness::TwoSided) v = std::fabs(v);
            mx = std::max(mx, v);
            if (mx > thresholds[r]) counts[r] += 1.0;
        }
    }
    std::vector<double> adjusted(d);
    double running = 0.0;
    for (int r = 0; r < d; ++r) {
        double p = counts[r] / n;
        // an adjusted p-value never exceeds the Bonferroni bound of its subset
        p = std::min(p, static_cast<double>(d - r) * marginal_tail(thresholds[r], sidedness));
        p = std::min(p, 1.0);
        running = std::max(running, p);
        adjusted[r] = running;
    }
    if (!std::isnan(stop_alpha)) {
        int stop = d;
        for (int r = 0; r < d; ++r)
            if (adjusted[r] > stop_alpha) {
                stop = r;
                break;
            }
        if (stop < d - 1) {
            // the sequential pass halts here: later hypotheses are reported
            // against the subset that was active at the stop
            std::vector<double> maxima(n, -HUGE_VAL);
            for (int i = 0; i < n; ++i) {
                double mx = -HUGE_VAL;
                for (int r = stop; r < d; ++r) {
                    double v = draws_(i, order[r]);
                    if (sidedness == Sidedness::TwoSided) v = std::fabs(v);
                    mx = std::max(mx, v);
                }
                maxima[i] = mx;
            }
            double running_p = adjusted[stop];
            for (int r = stop + 1; r < d; ++r) {
                double count = 0.0;
                for (double v : maxima)
                    if (v > thresholds[r]) count += 1.0;
                double p = count / n;
                p = std::min(p, static_cast<double>(d - stop) *
                                    marginal_tail(thresholds[r], sidedness));
                p = std::min(p, 1.0);
                running_p = std::max(running_p, p);
                adjusted[r] = running_p;
            }
        }
    }
    return adjusted;
}

std::vector<double> GaussianPool::single_step_adjusted(const std::vector<double>& thresholds,
                                                       Sidedness sidedness) const {
    const int d = dim();
    std::vector<int> full(d);
    for (int i = 0; i < d; ++i) full[i] = i;
    const auto maxima = subset_maxima(full, sidedness);
    const double n = static_cast<double>(maxima.size());
    std::vector<double> adjusted(thresholds.size());
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        double count = 0.0;
        for (double v : maxima)
            if (v > thresholds[i]) count += 1.0;
        double p = count / n;
        p = std::min(p, static_cast<double>(d) * marginal_tail(thresholds[i], sidedness));
        adjusted[i] = std::min(p, 1.0);
    }
    return adjusted;
}

TailEstimate tail_prob(const CorrelationModel& psi, double c, const std::vector<int>& subset,
                       int n_draws, std::uint64_t seed, Sidedness sidedness) {
    return GaussianPool(psi.psi, n_draws, seed).tail_prob(c, subset, sidedness);
}

double critical_value(const CorrelationModel& psi, double alpha, const std::vector<int>& subset,
                      int n_draws, std::uint64_t seed, Sidedness sidedness) {
    return GaussianPool(psi.psi, n_draws, seed).critical_value(alpha, subset, sidedness);
}

std::vector<double> adjusted_pvalues(const TMatrix& t, const CorrelationModel& psi,
                                     const std::vector<std::vector<int>>& subset_sequence,
                                     int n_draws, std::uint64_t seed) {
    if (subset_sequence.empty()) throw ValidationError("subset sequence must be non-empty");
    const int d = psi.dim();
    if (t.values.size() != d) throw ValidationError("t/psi dimension mismatch");
    GaussianPool pool(psi.psi, n_draws, seed);

    std::vector<double> stat(d);
    for (int i = 0; i < d; ++i) {
        const double v = t.values(i / psi.p, i % psi.p);
        stat[i] = t.sidedness == Sidedness::TwoSided ? std::fabs(v) : v;
    }

    if (subset_sequence.size() == 1) {
        return pool.single_step_adjusted(stat, t.sidedness);
    }

    // nested decreasing sequence: subset r must be the statistics ranked
    // r..d-1 by decreasing magnitude
    if (static_cast<int>(subset_sequence.size()) != d)
        throw ValidationError("step-down needs one subset per hypothesis");
    std::vector<int> order(d);
    std::vector<double> thresholds(d);
    for (int r = 0; r < d; ++r) {
        if (static_cast<int>(subset_sequence[r].size()) != d - r)
            throw ValidationError("subset sequence is not nested decreasing");
        if (r + 1 == d) {
            order[r] = subset_sequence[r].front();
        } else {
            // the hypothesis leaving at rank r
            const auto& cur = subset_sequence[r];
            const auto& next = subset_sequence[r + 1];
            for (int idx : next)
                if (std::find(cur.begin(), cur.end(), idx) == cur.end())
                    throw ValidationError("subset sequence is not nested decreasing");
            auto it = std::find_if(cur.begin(), cur.end(), [&next](int idx) {
                return std::find(next.begin(), next.end(), idx) == next.end();
            });
            if (it == cur.end())
                throw ValidationError("subset sequence is not nested decreasing");
            order[r] = *it;
        }
        thresholds[r] = stat[order[r]];
    }
    const auto by_rank = pool.step_down_adjusted(order, thresholds, t.sidedness);
    std::vector<double> adjusted(d);
    for (int r = 0; r < d; ++r) adjusted[order[r]] = by_rank[r];
    return adjusted;
}

} // namespace spurcor
