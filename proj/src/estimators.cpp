#include "spurcor/estimators.hpp"

#include <cmath>

#include "spurcor/rng.hpp"

namespace spurcor {

namespace {

// Scatter of group u about an arbitrary center, symmetrized exactly.
Eigen::MatrixXd scatter_about(const Eigen::MatrixXd& g, const Eigen::RowVectorXd& center) {
    const Eigen::MatrixXd d = g.rowwise() - center;
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(g.cols(), g.cols());
    for (int j = 0; j < g.cols(); ++j)
        for (int k = 0; k <= j; ++k) {
            const double v = d.col(j).dot(d.col(k));
            s(j, k) = v;
            s(k, j) = v;
        }
    return s;
}

} // namespace

Eigen::MatrixXd cov_tilde(const GroupedDataset& ds, int u) {
    const Eigen::MatrixXd& g = ds.groups.at(u);
    const Eigen::RowVectorXd mean = g.colwise().mean();
    return scatter_about(g, mean) / (static_cast<double>(g.rows()) - 1.0);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> cov_hat_pair(const GroupedDataset& ds, int s) {
    const double n0 = ds.n(0), ns = ds.n(s);
    const Eigen::RowVectorXd pooled =
        (n0 * ds.groups[0].colwise().mean() + ns * ds.groups[s].colwise().mean()) / (n0 + ns);
    // d_s^(u) = n^(u) / (n^(0)+n^(s)) keeps each matrix unbiased under the null
    const double d0 = n0 / (n0 + ns);
    const double dstar = ns / (n0 + ns);
    return {scatter_about(ds.groups[0], pooled) / (n0 - d0),
            scatter_about(ds.groups[s], pooled) / (ns - dstar)};
}

Eigen::MatrixXd cov_global_pooled(const GroupedDataset& ds, int u) {
    const double total = ds.total_n();
    Eigen::RowVectorXd pooled = Eigen::RowVectorXd::Zero(ds.p());
    for (const auto& g : ds.groups) pooled += g.colwise().sum();
    pooled /= total;
    const double nu = ds.n(u);
    return scatter_about(ds.groups[u], pooled) / (nu - nu / total);
}

ThetaCombined cov_theta_combined(const GroupedDataset& ds, int s, double theta) {
    ThetaCombined out;
    out.theta = theta;
    out.s = s;
    const auto [hat0, hats] = cov_hat_pair(ds, s);
    const Eigen::MatrixXd tilde0 = cov_tilde(ds, 0);
    const Eigen::MatrixXd tildes = cov_tilde(ds, s);
    out.sigma0 = (theta + 1.0) * hat0 - theta * tilde0;
    out.sigmas = (theta + 1.0) * hats - theta * tildes;

    for (int j = 0; j < ds.p(); ++j) {
        const double floor = 1e-12 * (tilde0(j, j) + tildes(j, j));
        if (out.sigma0(j, j) <= floor || out.sigmas(j, j) <= floor)
            out.fallback_vars.push_back(j);
    }
    for (int j : out.fallback_vars) {
        out.sigma0.row(j) = tilde0.row(j);
        out.sigma0.col(j) = tilde0.col(j);
        out.sigmas.row(j) = tildes.row(j);
        out.sigmas.col(j) = tildes.col(j);
    }
    return out;
}

TMatrix t_statistics(const GroupedDataset& ds, Sidedness sidedness) {
    ds.validate();
    const int m = ds.m();
    const int p = ds.p();
    TMatrix t;
    t.sidedness = sidedness;
    t.values.resize(m, p);
    const Eigen::MatrixXd tilde0 = cov_tilde(ds, 0);
    const Eigen::RowVectorXd mean0 = ds.groups[0].colwise().mean();
    for (int s = 1; s <= m; ++s) {
        const Eigen::MatrixXd tildes = cov_tilde(ds, s);
        const Eigen::RowVectorXd means = ds.groups[s].colwise().mean();
        for (int j = 0; j < p; ++j) {
            const double denom = tildes(j, j) / ds.n(s) + tilde0(j, j) / ds.n(0);
            if (denom <= 0.0)
                throw NumericError("degenerate variable: s=" + std::to_string(s) +
                                   ", j=" + std::to_string(j));
            t.values(s - 1, j) = (means(j) - mean0(j)) / std::sqrt(denom);
        }
    }
    return t;
}

TMatrix calibrate_to_normal(const TMatrix& t, const GroupedDataset& ds) {
    TMatrix z = t;
    for (int s = 1; s <= static_cast<int>(t.values.rows()); ++s) {
        const double df = static_cast<double>(ds.n(0) + ds.n(s) - 2);
        for (int j = 0; j < t.values.cols(); ++j) {
            const double v = t.values(s - 1, j);
            // work in the nearer tail so the mapping stays accurate far out
            const double tail = student_t_tail(std::fabs(v), df);
            const double mapped = -normal_quantile(tail);
            z.values(s - 1, j) = v < 0.0 ? -mapped : mapped;
        }
    }
    return z;
}

std::vector<VarianceCheckRow> empirical_variance_check(int p, double rho, int n_per_group,
                                                       const std::vector<double>& theta_grid,
                                                       int reps, std::uint64_t seed) {
    if (p < 2) throw ValidationError("variance check needs p >= 2");
    if (n_per_group < 2) throw ValidationError("variance check needs n >= 2 per group");
    if (reps < 10) throw ValidationError("variance check needs reps >= 10");

    // square root of the uniform correlation matrix: a*I + b*J
    const double a = std::sqrt(1.0 - rho);
    const double b = (std::sqrt(1.0 - rho + p * rho) - a) / p;

    const int q = n_per_group;
    const double n = 2.0 * q;
    std::vector<std::vector<double>> combined(theta_grid.size());
    for (auto& v : combined) v.reserve(reps);
    std::vector<double> tilde;
    tilde.reserve(reps);

    Eigen::MatrixXd y0(q, p), y1(q, p);
    Eigen::VectorXd z(p);
    for (int rep = 0; rep < reps; ++rep) {
        Xoshiro256 rng(derive_seed(seed, "variance-check", static_cast<std::uint64_t>(rep)));
        for (Eigen::MatrixXd* y : {&y0, &y1}) {
            for (int i = 0; i < q; ++i) {
                for (int j = 0; j < p; ++j) z(j) = rng.next_normal();
                const double zsum = z.sum();
                for (int j = 0; j < p; ++j) (*y)(i, j) = a * z(j) + b * zsum;
            }
        }
        GroupedDataset ds;
        ds.groups = {y0, y1};
        // pooled two-group quantities of the common-covariance setting
        const double A01 = (q - 1.0) * (cov_tilde(ds, 0)(0, 1) + cov_tilde(ds, 1)(0, 1));
        const Eigen::RowVectorXd diff = y0.colwise().mean() - y1.colwise().mean();
        const double B01 = q * q / n * diff(0) * diff(1);
        const double sigma_tilde = A01 / (n - 2.0);
        const double sigma_hat = (A01 + B01) / (n - 1.0);
        tilde.push_back(sigma_tilde);
        for (std::size_t ti = 0; ti < theta_grid.size(); ++ti) {
            const double theta = theta_grid[ti];
            combined[ti].push_back((theta + 1.0) * sigma_hat - theta * sigma_tilde);
        }
    }

    auto variance_with_se = [](const std::vector<double>& x) {
        const double r = static_cast<double>(x.size());
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= r;
        double m2 = 0.0, m4 = 0.0;
        for (double v : x) {
            const double d = v - mean;
            m2 += d * d;
            m4 += d * d * d * d;
        }
        m2 /= r;
        m4 /= r;
        const double var = m2 * r / (r - 1.0);
        const double se = std::sqrt(std::max(0.0, m4 - (r - 3.0) / (r - 1.0) * m2 * m2) / r);
        return std::pair<double, double>(var, se);
    };

    const auto [var_t, se_t] = variance_with_se(tilde);
    std::vector<VarianceCheckRow> rows;
    for (std::size_t ti = 0; ti < theta_grid.size(); ++ti) {
        const auto [var_c, se_c] = variance_with_se(combined[ti]);
        rows.push_back({theta_grid[ti], var_c, se_c, var_t, se_t});
    }
    return rows;
}

} // namespace spurcor
