#include "spurcor/correlation.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <ostream>

#include "spurcor/rng.hpp"

namespace spurcor {

namespace {

constexpr double kClampLimit = 1.0 - 1e-6;
constexpr double kRepairTol = 1e-6;
constexpr double kRelaxation = 0.2;

double clamp_entry(double v, bool& clamped) {
    if (v > 1.0) {
        clamped = true;
        return kClampLimit;
    }
    if (v < -1.0) {
        clamped = true;
        return -kClampLimit;
    }
    return v;
}

// Per-pair covariance inputs: sigma[u] for u in {0, s} plus the matrices used
// for the cross-pair entries (always the tilde ones except for the global
// pooled negative control).
struct PairInputs {
    Eigen::MatrixXd sigma0;
    Eigen::MatrixXd sigmas;
};

CorrelationModel assemble(const GroupedDataset& ds, const std::vector<PairInputs>& within,
                          const std::vector<Eigen::MatrixXd>& cross_sigma,
                          CorrelationPolicy policy) {
    const int m = ds.m();
    const int p = ds.p();
    CorrelationModel model;
    model.m = m;
    model.p = p;
    model.policy = policy;
    model.psi = Eigen::MatrixXd::Identity(m * p, m * p);

    // variance terms per (s,j): within-pair entries use the pair's own
    // estimates, cross-pair entries use the cross matrices
    Eigen::MatrixXd var_within(m, p), var_cross(m, p);
    for (int s = 1; s <= m; ++s)
        for (int j = 0; j < p; ++j) {
            var_within(s - 1, j) =
                within[s - 1].sigmas(j, j) / ds.n(s) + within[s - 1].sigma0(j, j) / ds.n(0);
            var_cross(s - 1, j) =
                cross_sigma[s](j, j) / ds.n(s) + cross_sigma[0](j, j) / ds.n(0);
        }

    for (int s = 1; s <= m; ++s) {
        for (int j = 0; j < p; ++j) {
            const int row = model.flat_index(s, j);
            // within-pair, j != k
            for (int k = 0; k < j; ++k) {
                const int col = model.flat_index(s, k);
                const double num =
                    within[s - 1].sigmas(j, k) / ds.n(s) + within[s - 1].sigma0(j, k) / ds.n(0);
                double rho = num / std::sqrt(var_within(s - 1, j) * var_within(s - 1, k));
                rho = clamp_entry(rho, model.clamped);
                model.psi(row, col) = rho;
                model.psi(col, row) = rho;
            }
            // cross-pair, all (t < s, k)
            for (int t = 1; t < s; ++t)
                for (int k = 0; k < p; ++k) {
                    const int col = model.flat_index(t, k);
                    const double num = cross_sigma[0](j, k) / ds.n(0);
                    double rho = num / std::sqrt(var_cross(s - 1, j) * var_cross(t - 1, k));
                    rho = clamp_entry(rho, model.clamped);
                    model.psi(row, col) = rho;
                    model.psi(col, row) = rho;
                }
        }
    }
    model.pd = is_psd(model.psi);
    return model;
}

std::vector<Eigen::MatrixXd> all_tilde(const GroupedDataset& ds) {
    std::vector<Eigen::MatrixXd> tilde;
    tilde.reserve(ds.groups.size());
    for (int u = 0; u <= ds.m(); ++u) tilde.push_back(cov_tilde(ds, u));
    return tilde;
}

} // namespace

bool is_psd(const Eigen::MatrixXd& a) {
    // eigenvalue-based: LDL^T pivots are unreliable for the rank-deficient
    // PSD matrices that arise whenever p exceeds the sample size
    const double eps = 1e-10 * static_cast<double>(a.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) return false;
    return es.eigenvalues().minCoeff() >= -eps;
}

CorrelationModel build_conventional(const GroupedDataset& ds) {
    ds.validate();
    const auto tilde = all_tilde(ds);
    std::vector<PairInputs> within;
    for (int s = 1; s <= ds.m(); ++s) within.push_back({tilde[0], tilde[s]});
    return assemble(ds, within, tilde, CorrelationPolicy::Conventional);
}

CorrelationModel build_spurious(const GroupedDataset& ds, double theta, std::uint64_t repair_seed) {
    ds.validate();
    const auto tilde = all_tilde(ds);
    std::vector<PairInputs> within;
    std::vector<int> fallback_flat;
    for (int s = 1; s <= ds.m(); ++s) {
        ThetaCombined comb = cov_theta_combined(ds, s, theta);
        for (int j : comb.fallback_vars) fallback_flat.push_back((s - 1) * ds.p() + j);
        within.push_back({std::move(comb.sigma0), std::move(comb.sigmas)});
    }
    CorrelationModel model = assemble(ds, within, tilde, CorrelationPolicy::Spurious);
    model.theta = theta;
    model.fallback_vars = std::move(fallback_flat);

    if (!model.pd) {
        CorrelationModel base = build_conventional(ds);
        base.diagonal_loading = ensure_psd_loaded(base.psi);
        CorrelationModel repairedm = psd_repair(base, model, repair_seed);
        repairedm.policy = CorrelationPolicy::Spurious;
        repairedm.theta = theta;
        repairedm.clamped = model.clamped;
        repairedm.fallback_vars = model.fallback_vars;
        return repairedm;
    }
    return model;
}

CorrelationModel build_global_pooled(const GroupedDataset& ds, std::uint64_t repair_seed) {
    ds.validate();
    std::vector<Eigen::MatrixXd> pooled;
    for (int u = 0; u <= ds.m(); ++u) pooled.push_back(cov_global_pooled(ds, u));
    std::vector<PairInputs> within;
    for (int s = 1; s <= ds.m(); ++s) within.push_back({pooled[0], pooled[s]});
    CorrelationModel model =
        assemble(ds, within, pooled, CorrelationPolicy::GlobalPooledNegativeControl);

    if (!model.pd) {
        CorrelationModel base = build_conventional(ds);
        base.diagonal_loading = ensure_psd_loaded(base.psi);
        CorrelationModel repairedm = psd_repair(base, model, repair_seed);
        repairedm.policy = CorrelationPolicy::GlobalPooledNegativeControl;
        repairedm.clamped = model.clamped;
        return repairedm;
    }
    return model;
}

CorrelationModel psd_repair(const CorrelationModel& psi_tilde, const CorrelationModel& psi_hat,
                            std::uint64_t seed) {
    if (psi_tilde.dim() != psi_hat.dim())
        throw ValidationError("psd_repair: dimension mismatch");
    if (!is_psd(psi_tilde.psi))
        throw ValidationError("psd_repair: base matrix is not positive definite");

    CorrelationModel out = psi_tilde;
    out.repaired = true;
    out.repair_trace.clear();
    const Eigen::MatrixXd& target = psi_hat.psi;
    const int d = out.dim();

    std::vector<std::pair<int, int>> positions;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < i; ++j) positions.emplace_back(i, j);

    Xoshiro256 rng(derive_seed(seed, "psd-repair"));
    bool running = true;
    while (running) {
        // uniform order without replacement per sweep
        for (std::size_t i = positions.size(); i > 1; --i) {
            const std::size_t k = static_cast<std::size_t>(rng.next_u64() % i);
            std::swap(positions[i - 1], positions[k]);
        }
        bool any_attempted = false;
        bool any_accepted = false;
        for (const auto& [i, j] : positions) {
            const double gap = target(i, j) - out.psi(i, j);
            if (std::fabs(gap) < kRepairTol) continue;
            any_attempted = true;
            const double old_value = out.psi(i, j);
            const double new_value = old_value + kRelaxation * gap;
            out.psi(i, j) = new_value;
            out.psi(j, i) = new_value;
            if (is_psd(out.psi)) {
                any_accepted = true;
                out.repair_trace.push_back({i, j, old_value, new_value});
            } else {
                out.psi(i, j) = old_value;
                out.psi(j, i) = old_value;
            }
        }
        running = any_attempted && any_accepted;
    }
    out.pd = true;
    return out;
}

double ensure_psd_loaded(Eigen::MatrixXd& a) {
    if (is_psd(a)) return 0.0;
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    for (int k = 0; k <= 60; ++k) {
        const double lambda = 1e-6 * std::pow(2.0, k);
        if (lambda > 1.0) break;
        Eigen::MatrixXd loaded = (1.0 - lambda) * a + lambda * identity;
        if (is_psd(loaded)) {
            a = std::move(loaded);
            return lambda;
        }
    }
    throw NumericError("diagonal loading failed to produce a positive definite matrix");
}

void write_csv_matrix(std::ostream& out, const Eigen::MatrixXd& a) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (j) out << ',';
            out << a(i, j);
        }
        out << '\n';
    }
}

} // namespace spurcor
