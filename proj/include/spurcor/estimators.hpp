#ifndef SPURCOR_ESTIMATORS_HPP
#define SPURCOR_ESTIMATORS_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "spurcor/dataset.hpp"

namespace spurcor {

enum class Sidedness { TwoSided, OneSidedUpper };

// t-statistics T_j^(s), rows s = 1..m (stored at row s-1), columns j.
struct TMatrix {
    Eigen::MatrixXd values; // m x p
    Sidedness sidedness = Sidedness::TwoSided;
};

// Conventional unbiased covariance of group u (divisor n-1).
Eigen::MatrixXd cov_tilde(const GroupedDataset& ds, int u);

// Null-pooled pair estimator: deviations from the mean pooled over groups
// {0,s}, divisor n^(u) - n^(u)/(n^(0)+n^(s)). Returns matrices for u=0 and
// u=s in that order.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> cov_hat_pair(const GroupedDataset& ds, int s);

// Globally pooled estimator: deviations from the all-group mean, divisor
// n^(u) - n^(u)/sum_v n^(v).
Eigen::MatrixXd cov_global_pooled(const GroupedDataset& ds, int u);

struct ThetaCombined {
    Eigen::MatrixXd sigma0; // estimate for group 0
    Eigen::MatrixXd sigmas; // estimate for group s
    double theta = 1.0;
    int s = 1;
    // variables whose combined diagonal fell below the variance floor and
    // were replaced by the tilde estimates
    std::vector<int> fallback_vars;
};

// (theta+1)*hat - theta*tilde, entrywise per group, with a per-variable
// fallback to tilde when a combined diagonal is <= eps_var.
ThetaCombined cov_theta_combined(const GroupedDataset& ds, int s, double theta);

// Throws NumericError naming (s,j) when both groups are constant in j.
TMatrix t_statistics(const GroupedDataset& ds, Sidedness sidedness = Sidedness::TwoSided);

// Maps each statistic to the standard normal scale through the Student t
// distribution with n^(0)+n^(s)-2 degrees of freedom (exact for the
// equal-variance two-group case), so small-sample tails line up with the
// Gaussian reference used by the testing procedures.
TMatrix calibrate_to_normal(const TMatrix& t, const GroupedDataset& ds);

struct VarianceCheckRow {
    double theta;
    double var_combined;
    double var_combined_se;
    double var_tilde;
    double var_tilde_se;
};

// Monte Carlo variances of the pooled conventional estimator and the
// theta-combined estimator of sigma_jk under the complete null (m=1, common
// uniform-correlation covariance, variance 1, off-diagonal rho). Variances
// are of the (0,1) entry; SEs use the fourth-moment formula.
std::vector<VarianceCheckRow> empirical_variance_check(int p, double rho, int n_per_group,
                                                       const std::vector<double>& theta_grid,
                                                       int reps, std::uint64_t seed);

} // namespace spurcor

#endif
