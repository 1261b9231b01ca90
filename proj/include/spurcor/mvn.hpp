#ifndef SPURCOR_MVN_HPP
#define SPURCOR_MVN_HPP

#include <cstdint>
#include <limits>
#include <vector>

#include "spurcor/correlation.hpp"
#include "spurcor/estimators.hpp"

namespace spurcor {

struct TailEstimate {
    double estimate;
    double mc_se;
};

// Shared Monte Carlo pool of correlated standard Gaussian vectors. One pool
// per analysis: subset tail probabilities and quantiles are computed by
// masking columns, which makes nested-subset quantities monotone by
// construction and the whole analysis reproducible from (psi, seed, N).
//
// psi may be rank deficient (PSD); the factor comes from an eigendecomposition
// with negative eigenvalues clipped at zero. Draw generation is blocked with
// a sub-stream per block derived from (seed, block index).
class GaussianPool {
public:
    GaussianPool(const Eigen::MatrixXd& psi, int n_draws, std::uint64_t seed);

    int n_draws() const { return static_cast<int>(draws_.rows()); }
    int dim() const { return static_cast<int>(draws_.cols()); }
    std::uint64_t seed() const { return seed_; }

    TailEstimate tail_prob(double c, const std::vector<int>& subset, Sidedness sidedness) const;
    double critical_value(double alpha, const std::vector<int>& subset, Sidedness sidedness) const;

    // Adjusted p-values for a step-down pass: hypotheses are visited in
    // `order` (decreasing statistic); thresholds[r] is the statistic of the
    // hypothesis at rank r; subset r is {order[r], ..., order[d-1]}. Each
    // entry is capped by its Bonferroni bound over the active subset and
    // monotone-enforced along ranks. Result is indexed by rank.
    //
    // When `stop_alpha` is given, the active subset stops shrinking at the
    // first rank whose adjusted p exceeds it: the sequential pass halts
    // there, so every later hypothesis is reported against the subset that
    // was active at the stop. Rejections are unchanged; only the reported
    // p-values of non-rejected hypotheses differ.
    std::vector<double> step_down_adjusted(
        const std::vector<int>& order, const std::vector<double>& thresholds,
        Sidedness sidedness,
        double stop_alpha = std::numeric_limits<double>::quiet_NaN()) const;

    // Single-step adjusted p-values against the full set, one per threshold,
    // with the full-set Bonferroni cap.
    std::vector<double> single_step_adjusted(const std::vector<double>& thresholds,
                                             Sidedness sidedness) const;

private:
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> draws_;
    std::uint64_t seed_;

    std::vector<double> subset_maxima(const std::vector<int>& subset, Sidedness sidedness) const;
};

// One-shot wrappers over a fresh pool.
TailEstimate tail_prob(const CorrelationModel& psi, double c, const std::vector<int>& subset,
                       int n_draws, std::uint64_t seed,
                       Sidedness sidedness = Sidedness::TwoSided);
double critical_value(const CorrelationModel& psi, double alpha, const std::vector<int>& subset,
                      int n_draws, std::uint64_t seed,
                      Sidedness sidedness = Sidedness::TwoSided);

// Adjusted p-values for a nested decreasing subset sequence (step-down) or a
// single full set (single-step), evaluated on one shared pool. t values are
// flattened in the model's index order; the result follows the same order.
std::vector<double> adjusted_pvalues(const TMatrix& t, const CorrelationModel& psi,
                                     const std::vector<std::vector<int>>& subset_sequence,
                                     int n_draws, std::uint64_t seed);

// Marginal tail of a single statistic: 2*(1-Phi(|t|)) or 1-Phi(t).
double marginal_tail(double t, Sidedness sidedness);

} // namespace spurcor

#endif
