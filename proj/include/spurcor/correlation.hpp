#ifndef SPURCOR_CORRELATION_HPP
#define SPURCOR_CORRELATION_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "spurcor/dataset.hpp"
#include "spurcor/estimators.hpp"

namespace spurcor {

enum class CorrelationPolicy { Conventional, Spurious, GlobalPooledNegativeControl };

struct RepairStep {
    int row;
    int col;
    double old_value;
    double new_value;
};

// Correlation model of the m*p test statistics. Flat index of (s,j) is
// (s-1)*p + j with 0-based j.
struct CorrelationModel {
    Eigen::MatrixXd psi; // (m*p) x (m*p), symmetric, unit diagonal
    int m = 0;
    int p = 0;
    CorrelationPolicy policy = CorrelationPolicy::Conventional;
    double theta = 1.0;
    bool pd = false;
    bool clamped = false;               // some raw entry exceeded [-1,1]
    double diagonal_loading = 0.0;      // lambda applied to the tilde base, 0 if none
    bool repaired = false;
    std::vector<RepairStep> repair_trace;
    std::vector<int> fallback_vars;     // from the theta-combined estimator

    int flat_index(int s, int j) const { return (s - 1) * p + j; }
    int dim() const { return m * p; }
};

// Positive-(semi)definiteness predicate used everywhere: LDL^T pivots all
// >= -eps_chol with eps_chol = 1e-10 * dimension. Rank-deficient but PSD
// estimates (p larger than the sample size) pass.
bool is_psd(const Eigen::MatrixXd& a);

// Correlation matrix from the tilde estimates: rho_jk^(ss) within pairs,
// rho_jk^(st) / rho_jj^(st) across pairs.
CorrelationModel build_conventional(const GroupedDataset& ds);

// Within-pair entries use the theta-combined estimates in both the numerator
// and the variance terms; cross-pair entries are the conventional ones.
// Out-of-range entries are clamped to +/-(1 - 1e-6); a non-PSD result is
// repaired toward the conventional model via psd_repair (seeded).
CorrelationModel build_spurious(const GroupedDataset& ds, double theta, std::uint64_t repair_seed = 0);

// Negative control: the globally pooled estimates substituted in all
// entries, within and across pairs. Same clamp/repair treatment.
CorrelationModel build_global_pooled(const GroupedDataset& ds, std::uint64_t repair_seed = 0);

// Randomized relaxation from psi_tilde toward psi_hat: pick off-diagonal
// positions uniformly without replacement per sweep, move psi by 20% of the
// remaining gap when the move preserves positive definiteness. Stops when a
// sweep accepts nothing or all remaining gaps are below 1e-6. Deterministic
// per seed. psi_tilde must pass is_psd (diagonal-load it first if needed).
CorrelationModel psd_repair(const CorrelationModel& psi_tilde, const CorrelationModel& psi_hat,
                            std::uint64_t seed);

// Smallest lambda in {1e-6 * 2^k} such that (1-lambda)*A + lambda*I passes
// is_psd, applied in place. Returns the lambda used (0 if none was needed).
double ensure_psd_loaded(Eigen::MatrixXd& a);

// Debug export, one row per line.
void write_csv_matrix(std::ostream& out, const Eigen::MatrixXd& a);

} // namespace spurcor

#endif
