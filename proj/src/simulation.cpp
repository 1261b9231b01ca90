#include "spurcor/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spurcor/rng.hpp"

namespace spurcor {

int SimScenario::n_alternatives() const {
    return m * static_cast<int>(std::lround(r * p));
}

Eigen::MatrixXd gen_block_cov(int p, double rho, int block_size) {
    if (p < 1 || block_size < 1) throw ValidationError("p and block_size must be >= 1");
    if (block_size > 1 && !(rho > -1.0 / (block_size - 1) && rho < 1.0))
        throw ValidationError("rho outside the positive definite range (-1/(block_size-1), 1)");
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(p, p);
    for (int start = 0; start < p; start += block_size) {
        const int bs = std::min(block_size, p - start);
        for (int j = 0; j < bs; ++j)
            for (int k = 0; k < bs; ++k)
                if (j != k) cov(start + j, start + k) = rho;
    }
    return cov;
}

namespace {

// One row with covariance (1-rho)I + rho*J per block, via the closed-form
// square root a*I + (b/bs)*J of the uniform block.
void fill_block_row(Xoshiro256& rng, double rho, int block_size, Eigen::RowVectorXd& row) {
    const int p = static_cast<int>(row.size());
    for (int start = 0; start < p; start += block_size) {
        const int bs = std::min(block_size, p - start);
        const double a = std::sqrt(1.0 - rho);
        const double b = (std::sqrt(1.0 - rho + bs * rho) - a) / bs;
        double sum = 0.0;
        for (int j = 0; j < bs; ++j) {
            row(start + j) = rng.next_normal();
            sum += row(start + j);
        }
        for (int j = 0; j < bs; ++j) row(start + j) = a * row(start + j) + b * sum;
    }
}

} // namespace

GroupedDataset gen_dataset(const SimScenario& scenario, int rep_index) {
    if (scenario.p < 1 || scenario.n < 2 || scenario.m < 1)
        throw ValidationError("invalid scenario shape");
    gen_block_cov(scenario.p, scenario.rho, scenario.block_size); // range check
    const int shifted = static_cast<int>(std::lround(scenario.r * scenario.p));

    Xoshiro256 rng(derive_seed(scenario.seed, "data", static_cast<std::uint64_t>(rep_index)));
    GroupedDataset ds;
    Eigen::RowVectorXd row(scenario.p);
    for (int u = 0; u <= scenario.m; ++u) {
        Eigen::MatrixXd g(scenario.n, scenario.p);
        for (int i = 0; i < scenario.n; ++i) {
            fill_block_row(rng, scenario.rho, scenario.block_size, row);
            g.row(i) = row;
        }
        if (u > 0 && shifted > 0) g.leftCols(shifted).array() += scenario.mu;
        ds.groups.push_back(std::move(g));
    }
    for (int j = 0; j < scenario.p; ++j) ds.variable_names.push_back("v" + std::to_string(j + 1));
    return ds;
}

namespace {

struct RepAccumulator {
    double false_reject_sum = 0.0;
    std::vector<double> batch_false_rejects; // per batch counts
    double power_sum = 0.0;
    double power_sq_sum = 0.0;
    double adj_p_sum = 0.0;
};

void accumulate(RepAccumulator& acc, const std::vector<double>& adjusted,
                const std::vector<bool>& is_alt, double alpha, int batch) {
    bool false_reject = false;
    int n_alt = 0, alt_rejected = 0;
    double adj_p = 0.0;
    int adj_count = 0;
    const bool any_alt = std::find(is_alt.begin(), is_alt.end(), true) != is_alt.end();
    for (std::size_t i = 0; i < adjusted.size(); ++i) {
        const bool rejected = adjusted[i] <= alpha;
        if (is_alt[i]) {
            ++n_alt;
            if (rejected) ++alt_rejected;
        } else if (rejected) {
            false_reject = true;
        }
        if (is_alt[i] || !any_alt) {
            adj_p += adjusted[i];
            ++adj_count;
        }
    }
    if (false_reject) {
        acc.false_reject_sum += 1.0;
        acc.batch_false_rejects[batch] += 1.0;
    }
    if (n_alt > 0) {
        const double frac = static_cast<double>(alt_rejected) / n_alt;
        acc.power_sum += frac;
        acc.power_sq_sum += frac * frac;
    }
    if (adj_count > 0) acc.adj_p_sum += adj_p / adj_count;
}

MethodSimResult finalize(Method method, const RepAccumulator& acc, int reps, int batches,
                         bool has_nulls, bool has_alts) {
    MethodSimResult res;
    res.method = method;
    const double r = static_cast<double>(reps);
    res.fwer_defined = has_nulls;
    if (has_nulls) {
        res.fwer = acc.false_reject_sum / r;
        res.fwer_se = std::sqrt(res.fwer * (1.0 - res.fwer) / r);
        // SD of FWER estimates across independent batches
        const int nb = static_cast<int>(acc.batch_false_rejects.size());
        if (nb > 1) {
            const double per_batch = r / nb;
            double mean = 0.0;
            for (double c : acc.batch_false_rejects) mean += c / per_batch;
            mean /= nb;
            double ss = 0.0;
            for (double c : acc.batch_false_rejects) {
                const double f = c / per_batch;
                ss += (f - mean) * (f - mean);
            }
            res.fwer_batch_sd = std::sqrt(ss / (nb - 1));
        }
    }
    res.power_defined = has_alts;
    if (has_alts) {
        res.power = acc.power_sum / r;
        const double var = std::max(0.0, acc.power_sq_sum / r - res.power * res.power);
        res.power_se = std::sqrt(var / r);
    }
    res.mean_adjusted_p = acc.adj_p_sum / r;
    return res;
}

std::vector<double> scatter_by_rank(const std::vector<double>& by_rank,
                                    const std::vector<int>& order) {
    std::vector<double> out(by_rank.size());
    for (std::size_t r = 0; r < order.size(); ++r) out[order[r]] = by_rank[r];
    return out;
}

} // namespace

SimReport run_simulation(const SimScenario& scenario) {
    if (scenario.reps < 1) throw ValidationError("reps must be >= 1");
    if (!(scenario.alpha > 0.0 && scenario.alpha < 1.0))
        throw ValidationError("alpha must be in (0,1)");
    const auto t_start = std::chrono::steady_clock::now();

    const int d = scenario.m * scenario.p;
    const int shifted = static_cast<int>(std::lround(scenario.r * scenario.p));
    std::vector<bool> is_alt(d, false);
    for (int s = 1; s <= scenario.m; ++s)
        for (int j = 0; j < shifted; ++j)
            if (scenario.mu != 0.0) is_alt[(s - 1) * scenario.p + j] = true;
    const bool has_alts = std::find(is_alt.begin(), is_alt.end(), true) != is_alt.end();
    const bool has_nulls = std::find(is_alt.begin(), is_alt.end(), false) != is_alt.end();

    const bool need_conv_pool =
        std::find(scenario.methods.begin(), scenario.methods.end(), Method::MaxT) !=
            scenario.methods.end() ||
        std::find(scenario.methods.begin(), scenario.methods.end(), Method::StepDownMaxT) !=
            scenario.methods.end();

    std::vector<RepAccumulator> accs(scenario.methods.size());
    const int batches = std::max(1, std::min(scenario.batches, scenario.reps));
    for (auto& acc : accs) acc.batch_false_rejects.assign(batches, 0.0);

    for (int rep = 0; rep < scenario.reps; ++rep) {
        const int batch = std::min(batches - 1, rep * batches / scenario.reps);
        const std::uint64_t rep_seed =
            derive_seed(scenario.seed, "rep", static_cast<std::uint64_t>(rep));
        const GroupedDataset ds = gen_dataset(scenario, rep);
        const TMatrix t = calibrate_to_normal(t_statistics(ds, scenario.sidedness), ds);

        std::vector<double> stat(d);
        for (int i = 0; i < d; ++i) {
            const double v = t.values(i / scenario.p, i % scenario.p);
            stat[i] = scenario.sidedness == Sidedness::TwoSided ? std::fabs(v) : v;
        }
        std::vector<int> order(d);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&stat](int a, int b) { return stat[a] > stat[b]; });
        std::vector<double> thresholds(d);
        for (int r = 0; r < d; ++r) thresholds[r] = stat[order[r]];

        // one shared draw stream: every policy's pool uses the same seed
        const std::uint64_t pool_seed = derive_seed(rep_seed, "pool");
        std::unique_ptr<GaussianPool> conv_pool;
        if (need_conv_pool) {
            const CorrelationModel conv = build_conventional(ds);
            Eigen::MatrixXd psi = conv.psi;
            ensure_psd_loaded(psi);
            conv_pool = std::make_unique<GaussianPool>(psi, scenario.n_draws, pool_seed);
        }

        for (std::size_t mi = 0; mi < scenario.methods.size(); ++mi) {
            std::vector<double> adjusted;
            switch (scenario.methods[mi]) {
                case Method::Bonferroni: {
                    adjusted.resize(d);
                    for (int i = 0; i < d; ++i)
                        adjusted[i] =
                            std::min(1.0, d * marginal_tail(stat[i], scenario.sidedness));
                    break;
                }
                case Method::MaxT:
                    adjusted = conv_pool->single_step_adjusted(stat, scenario.sidedness);
                    break;
                case Method::StepDownMaxT:
                    adjusted = scatter_by_rank(
                        conv_pool->step_down_adjusted(order, thresholds, scenario.sidedness, scenario.alpha),
                        order);
                    break;
                case Method::Proposal: {
                    const CorrelationModel psi = build_spurious(
                        ds, scenario.theta, derive_seed(rep_seed, "repair"));
                    Eigen::MatrixXd mat = psi.psi;
                    ensure_psd_loaded(mat);
                    GaussianPool pool(mat, scenario.n_draws, pool_seed);
                    adjusted = scatter_by_rank(
                        pool.step_down_adjusted(order, thresholds, scenario.sidedness, scenario.alpha), order);
                    break;
                }
                case Method::GlobalPooledNegativeControl: {
                    const CorrelationModel psi =
                        build_global_pooled(ds, derive_seed(rep_seed, "repair"));
                    Eigen::MatrixXd mat = psi.psi;
                    ensure_psd_loaded(mat);
                    GaussianPool pool(mat, scenario.n_draws, pool_seed);
                    adjusted = scatter_by_rank(
                        pool.step_down_adjusted(order, thresholds, scenario.sidedness, scenario.alpha), order);
                    break;
                }
            }
            accumulate(accs[mi], adjusted, is_alt, scenario.alpha, batch);
        }
    }

    SimReport report;
    report.scenario = scenario;
    report.reps_completed = scenario.reps;
    for (std::size_t mi = 0; mi < scenario.methods.size(); ++mi)
        report.methods.push_back(finalize(scenario.methods[mi], accs[mi], scenario.reps,
                                          batches, has_nulls, has_alts));
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

SimReport estimate_fwer(const SimScenario& scenario) {
    if (scenario.reps < 100) throw ValidationError("FWER estimation needs reps >= 100");
    return run_simulation(scenario);
}

SimReport estimate_power(const SimScenario& scenario) {
    if (scenario.reps < 100) throw ValidationError("power estimation needs reps >= 100");
    if (scenario.mu == 0.0 || scenario.r == 0.0)
        throw ValidationError("power estimation needs true alternatives (mu != 0 and r > 0)");
    return run_simulation(scenario);
}

SimReport corollary1_demo(int n, double mu2, int reps, double alpha, std::uint64_t seed) {
    // the three-group construction: p=2, identity covariance, group 1 null,
    // group 2 shifted by mu2 in both variables
    SimScenario scenario;
    scenario.rho = 0.0;
    scenario.n = n;
    scenario.p = 2;
    scenario.m = 2;
    scenario.mu = mu2;
    scenario.r = 0.0; // shifts are applied manually below
    scenario.block_size = 2;
    scenario.reps = reps;
    scenario.alpha = alpha;
    scenario.seed = seed;
    scenario.methods = {Method::GlobalPooledNegativeControl, Method::Proposal};
    const auto t_start = std::chrono::steady_clock::now();

    const int d = 4;
    std::vector<bool> is_alt = {false, false, mu2 != 0.0, mu2 != 0.0};
    const bool has_alts = mu2 != 0.0;

    std::vector<RepAccumulator> accs(scenario.methods.size());
    const int batches = std::max(1, std::min(scenario.batches, reps));
    for (auto& acc : accs) acc.batch_false_rejects.assign(batches, 0.0);

    for (int rep = 0; rep < reps; ++rep) {
        const int batch = std::min(batches - 1, rep * batches / reps);
        const std::uint64_t rep_seed = derive_seed(seed, "rep", static_cast<std::uint64_t>(rep));
        Xoshiro256 rng(derive_seed(seed, "data", static_cast<std::uint64_t>(rep)));
        GroupedDataset ds;
        for (int u = 0; u <= 2; ++u) {
            Eigen::MatrixXd g(n, 2);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < 2; ++j) g(i, j) = rng.next_normal();
            if (u == 2) g.array() += mu2;
            ds.groups.push_back(std::move(g));
        }
        const TMatrix t = calibrate_to_normal(t_statistics(ds, scenario.sidedness), ds);
        std::vector<double> stat(d);
        for (int i = 0; i < d; ++i) stat[i] = std::fabs(t.values(i / 2, i % 2));
        std::vector<int> order(d);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&stat](int a, int b) { return stat[a] > stat[b]; });
        std::vector<double> thresholds(d);
        for (int r = 0; r < d; ++r) thresholds[r] = stat[order[r]];

        const std::uint64_t pool_seed = derive_seed(rep_seed, "pool");
        for (std::size_t mi = 0; mi < scenario.methods.size(); ++mi) {
            const CorrelationModel psi =
                scenario.methods[mi] == Method::GlobalPooledNegativeControl
                    ? build_global_pooled(ds, derive_seed(rep_seed, "repair"))
                    : build_spurious(ds, scenario.theta, derive_seed(rep_seed, "repair"));
            Eigen::MatrixXd mat = psi.psi;
            ensure_psd_loaded(mat);
            GaussianPool pool(mat, scenario.n_draws, pool_seed);
            const auto adjusted = scatter_by_rank(
                pool.step_down_adjusted(order, thresholds, scenario.sidedness, scenario.alpha), order);
            accumulate(accs[mi], adjusted, is_alt, alpha, batch);
        }
    }

    SimReport report;
    report.scenario = scenario;
    report.reps_completed = reps;
    for (std::size_t mi = 0; mi < scenario.methods.size(); ++mi)
        report.methods.push_back(
            finalize(scenario.methods[mi], accs[mi], reps, batches, true, has_alts));
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

std::vector<SimScenario> table1_scenarios() {
    std::vector<SimScenario> out;
    auto add = [&out](double rho, int n, int p, double mu, double r) {
        SimScenario sc;
        sc.rho = rho;
        sc.n = n;
        sc.p = p;
        sc.mu = mu;
        sc.r = r;
        sc.methods = {Method::Bonferroni, Method::StepDownMaxT, Method::Proposal};
        out.push_back(sc);
    };
    for (double rho : {0.0, 0.2, 0.4, 0.6}) add(rho, 12, 50, 0.0, 0.0);
    for (int n : {6, 10, 14, 18}) add(0.3, n, 50, 0.0, 0.0);
    for (int p : {20, 40, 60, 80}) add(0.3, 12, p, 0.0, 0.0);
    for (double mu : {0.6, 1.0, 1.4, 1.8}) add(0.3, 12, 50, mu, 0.5);
    for (double r : {0.2, 0.4, 0.6, 0.8}) add(0.3, 12, 50, 1.2, r);
    return out;
}

std::vector<SimScenario> table2_scenarios() {
    std::vector<SimScenario> out;
    auto add = [&out](double rho, int n, int p, double mu) {
        SimScenario sc;
        sc.rho = rho;
        sc.n = n;
        sc.p = p;
        sc.mu = mu;
        sc.r = 1.0;
        // the published power grid corresponds to upper-tailed tests
        sc.sidedness = Sidedness::OneSidedUpper;
        out.push_back(sc);
    };
    for (double rho : {0.0, 0.2, 0.4, 0.6}) add(rho, 12, 50, 1.2);
    for (int n : {6, 10, 14, 18}) add(0.3, n, 50, 1.2);
    for (int p : {20, 40, 60, 80}) add(0.3, 12, p, 1.2);
    for (double mu : {0.9, 1.1, 1.3, 1.5}) add(0.3, 12, 50, mu);
    return out;
}

namespace {

nlohmann::json scenario_json(const SimScenario& sc) {
    nlohmann::json j;
    j["rho"] = sc.rho;
    j["n"] = sc.n;
    j["p"] = sc.p;
    j["m"] = sc.m;
    j["mu"] = sc.mu;
    j["r"] = sc.r;
    j["block_size"] = sc.block_size;
    j["sidedness"] = sc.sidedness == Sidedness::TwoSided ? "two-sided" : "one-sided";
    std::vector<std::string> methods;
    for (Method m : sc.methods) methods.push_back(method_name(m));
    j["methods"] = methods;
    j["reps"] = sc.reps;
    j["alpha"] = sc.alpha;
    j["seed"] = sc.seed;
    j["n_draws"] = sc.n_draws;
    j["theta"] = sc.theta;
    j["batches"] = sc.batches;
    return j;
}

} // namespace

SimScenario scenario_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scenario JSON: ") + e.what());
    }
    SimScenario sc;
    try {
        sc.rho = j.value("rho", sc.rho);
        sc.n = j.value("n", sc.n);
        sc.p = j.value("p", sc.p);
        sc.m = j.value("m", sc.m);
        sc.mu = j.value("mu", sc.mu);
        sc.r = j.value("r", sc.r);
        sc.block_size = j.value("block_size", sc.block_size);
        if (j.contains("sidedness"))
            sc.sidedness = j["sidedness"] == "one-sided" ? Sidedness::OneSidedUpper
                                                         : Sidedness::TwoSided;
        if (j.contains("methods")) {
            sc.methods.clear();
            for (const auto& name : j["methods"])
                sc.methods.push_back(method_from_string(name.get<std::string>()));
        }
        sc.reps = j.value("reps", sc.reps);
        sc.alpha = j.value("alpha", sc.alpha);
        sc.seed = j.value("seed", sc.seed);
        sc.n_draws = j.value("n_draws", sc.n_draws);
        sc.theta = j.value("theta", sc.theta);
        sc.batches = j.value("batches", sc.batches);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scenario JSON: ") + e.what());
    }
    return sc;
}

std::string scenario_to_json(const SimScenario& scenario, int indent) {
    return scenario_json(scenario).dump(indent);
}

std::string report_to_json(const SimReport& report, int indent) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["scenario"] = scenario_json(report.scenario);
    j["reps_completed"] = report.reps_completed;
    j["wall_seconds"] = report.wall_seconds;
    auto& ms = j["methods"] = nlohmann::json::array();
    for (const auto& r : report.methods) {
        nlohmann::json mj;
        mj["method"] = method_name(r.method);
        if (r.fwer_defined) {
            mj["fwer"] = r.fwer;
            mj["fwer_se"] = r.fwer_se;
            mj["fwer_batch_sd"] = r.fwer_batch_sd;
        }
        if (r.power_defined) {
            mj["power"] = r.power;
            mj["power_se"] = r.power_se;
        }
        mj["mean_adjusted_p"] = r.mean_adjusted_p;
        ms.push_back(mj);
    }
    return j.dump(indent);
}

std::string report_to_csv(const SimReport& report, bool write_header) {
    std::ostringstream out;
    if (write_header)
        out << "rho,n,p,m,mu,r,reps,alpha,seed,method,fwer,fwer_se,fwer_batch_sd,power,"
               "power_se,mean_adjusted_p\n";
    const SimScenario& sc = report.scenario;
    for (const auto& m : report.methods) {
        out << sc.rho << ',' << sc.n << ',' << sc.p << ',' << sc.m << ',' << sc.mu << ','
            << sc.r << ',' << report.reps_completed << ',' << sc.alpha << ',' << sc.seed << ','
            << method_name(m.method) << ',';
        if (m.fwer_defined)
            out << m.fwer << ',' << m.fwer_se << ',' << m.fwer_batch_sd << ',';
        else
            out << ",,,";
        if (m.power_defined)
            out << m.power << ',' << m.power_se << ',';
        else
            out << ",,";
        out << m.mean_adjusted_p << '\n';
    }
    return out.str();
}

} // namespace spurcor
