#include "spurcor/procedures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spurcor/rng.hpp"

namespace spurcor {

std::string method_name(Method m) {
    switch (m) {
        case Method::Bonferroni: return "bonferroni";
        case Method::MaxT: return "maxt";
        case Method::StepDownMaxT: return "stepdown-maxt";
        case Method::Proposal: return "proposal";
        case Method::GlobalPooledNegativeControl: return "global-pooled";
    }
    return "unknown";
}

Method method_from_string(const std::string& name) {
    if (name == "bonferroni" || name == "bon") return Method::Bonferroni;
    if (name == "maxt") return Method::MaxT;
    if (name == "stepdown-maxt" || name == "sdmaxt") return Method::StepDownMaxT;
    if (name == "proposal") return Method::Proposal;
    if (name == "global-pooled") return Method::GlobalPooledNegativeControl;
    throw ValidationError("unknown method '" + name + "'");
}

int TestOutcome::n_rejected() const {
    return static_cast<int>(
        std::count_if(hypotheses.begin(), hypotheses.end(), [](const Hypothesis& h) {
            return h.rejected;
        }));
}

namespace {

std::vector<Hypothesis> flatten(const TMatrix& t) {
    const int m = static_cast<int>(t.values.rows());
    const int p = static_cast<int>(t.values.cols());
    std::vector<Hypothesis> hs;
    hs.reserve(m * p);
    for (int s = 1; s <= m; ++s)
        for (int j = 0; j < p; ++j) hs.push_back({s, j, t.values(s - 1, j), 1.0, false});
    return hs;
}

std::vector<double> statistics(const TMatrix& t) {
    std::vector<double> stat;
    stat.reserve(t.values.size());
    for (int s = 0; s < t.values.rows(); ++s)
        for (int j = 0; j < t.values.cols(); ++j) {
            const double v = t.values(s, j);
            stat.push_back(t.sidedness == Sidedness::TwoSided ? std::fabs(v) : v);
        }
    return stat;
}

void apply_decisions(TestOutcome& outcome, const std::vector<double>& adjusted) {
    for (std::size_t i = 0; i < outcome.hypotheses.size(); ++i) {
        outcome.hypotheses[i].adjusted_p = adjusted[i];
        outcome.hypotheses[i].rejected = adjusted[i] <= outcome.alpha;
    }
}

TestOutcome step_down_on_model(const TMatrix& t, const CorrelationModel& psi, double alpha,
                               int n_draws, std::uint64_t seed, Method method) {
    TestOutcome outcome;
    outcome.method = method;
    outcome.alpha = alpha;
    outcome.sidedness = t.sidedness;
    outcome.seed = seed;
    outcome.n_draws = n_draws;
    outcome.correlation_policy = psi.policy;
    outcome.theta = psi.theta;
    outcome.repaired = psi.repaired;
    outcome.clamped = psi.clamped;
    outcome.diagonal_loading = psi.diagonal_loading;
    outcome.fallback_vars = psi.fallback_vars;
    outcome.hypotheses = flatten(t);

    const int d = psi.dim();
    const auto stat = statistics(t);
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&stat](int a, int b) { return stat[a] > stat[b]; });
    std::vector<double> thresholds(d);
    for (int r = 0; r < d; ++r) thresholds[r] = stat[order[r]];

    GaussianPool pool(psi.psi, n_draws, seed);
    const auto by_rank = pool.step_down_adjusted(order, thresholds, t.sidedness, alpha);
    std::vector<double> adjusted(d);
    for (int r = 0; r < d; ++r) adjusted[order[r]] = by_rank[r];
    apply_decisions(outcome, adjusted);

    // critical values of the steps actually taken (and the first that fails)
    std::vector<int> suffix(order);
    for (int r = 0; r < d; ++r) {
        outcome.critical_values.push_back(pool.critical_value(alpha, suffix, t.sidedness));
        if (by_rank[r] > alpha) break;
        suffix.erase(suffix.begin());
        if (suffix.empty()) break;
    }
    return outcome;
}

} // namespace

TestOutcome bonferroni(const TMatrix& t, double alpha) {
    TestOutcome outcome;
    outcome.method = Method::Bonferroni;
    outcome.alpha = alpha;
    outcome.sidedness = t.sidedness;
    outcome.hypotheses = flatten(t);
    const double d = static_cast<double>(outcome.hypotheses.size());
    std::vector<double> adjusted;
    adjusted.reserve(outcome.hypotheses.size());
    for (const auto& h : outcome.hypotheses)
        adjusted.push_back(std::min(1.0, d * marginal_tail(
                                             t.sidedness == Sidedness::TwoSided
                                                 ? std::fabs(h.t_value)
                                                 : h.t_value,
                                             t.sidedness)));
    apply_decisions(outcome, adjusted);
    const double per_test = alpha / d;
    outcome.critical_values.push_back(normal_quantile(
        1.0 - (t.sidedness == Sidedness::TwoSided ? per_test / 2.0 : per_test)));
    return outcome;
}

TestOutcome maxt_single_step(const TMatrix& t, const CorrelationModel& psi, double alpha,
                             int n_draws, std::uint64_t seed) {
    TestOutcome outcome;
    outcome.method = Method::MaxT;
    outcome.alpha = alpha;
    outcome.sidedness = t.sidedness;
    outcome.seed = seed;
    outcome.n_draws = n_draws;
    outcome.correlation_policy = psi.policy;
    outcome.theta = psi.theta;
    outcome.repaired = psi.repaired;
    outcome.clamped = psi.clamped;
    outcome.diagonal_loading = psi.diagonal_loading;
    outcome.fallback_vars = psi.fallback_vars;
    outcome.hypotheses = flatten(t);

    GaussianPool pool(psi.psi, n_draws, seed);
    const auto adjusted = pool.single_step_adjusted(statistics(t), t.sidedness);
    apply_decisions(outcome, adjusted);
    std::vector<int> full(psi.dim());
    std::iota(full.begin(), full.end(), 0);
    outcome.critical_values.push_back(pool.critical_value(alpha, full, t.sidedness));
    return outcome;
}

TestOutcome maxt_step_down(const TMatrix& t, const CorrelationModel& psi, double alpha,
                           int n_draws, std::uint64_t seed) {
    return step_down_on_model(t, psi, alpha, n_draws, seed, Method::StepDownMaxT);
}

TestOutcome proposal(const GroupedDataset& ds, double alpha, double theta, int n_draws,
                     std::uint64_t seed, Sidedness sidedness) {
    const TMatrix z = calibrate_to_normal(t_statistics(ds, sidedness), ds);
    const CorrelationModel psi = build_spurious(ds, theta, derive_seed(seed, "repair"));
    return step_down_on_model(z, psi, alpha, n_draws, derive_seed(seed, "pool"),
                              Method::Proposal);
}

TestOutcome run_analysis(const GroupedDataset& ds, Method method, const AnalysisOptions& options) {
    if (!(options.alpha > 0.0 && options.alpha < 1.0))
        throw ValidationError("alpha must be in (0,1)");
    if (options.theta > 1.0 || options.theta <= -1.0) {
        // permitted for experimentation; theta in (-1,1] is the supported range
    }
    ds.validate();
    const TMatrix t = t_statistics(ds, options.sidedness);
    // decisions are made on the normal-calibrated scale; the reported
    // per-hypothesis t values stay on the raw scale
    const TMatrix z = calibrate_to_normal(t, ds);
    // the reported seed is always the run seed the caller supplied; the MC
    // pool and the repair use sub-streams derived from it
    auto finish = [&options, &t](TestOutcome outcome) {
        outcome.seed = options.seed;
        for (auto& h : outcome.hypotheses) h.t_value = t.values(h.s - 1, h.j);
        return outcome;
    };
    switch (method) {
        case Method::Bonferroni:
            return finish(bonferroni(z, options.alpha));
        case Method::MaxT:
            return finish(maxt_single_step(z, build_conventional(ds), options.alpha,
                                           options.n_draws,
                                           derive_seed(options.seed, "pool")));
        case Method::StepDownMaxT:
            return finish(maxt_step_down(z, build_conventional(ds), options.alpha,
                                         options.n_draws,
                                         derive_seed(options.seed, "pool")));
        case Method::Proposal:
            return finish(proposal(ds, options.alpha, options.theta, options.n_draws,
                                   options.seed, options.sidedness));
        case Method::GlobalPooledNegativeControl: {
            const CorrelationModel psi =
                build_global_pooled(ds, derive_seed(options.seed, "repair"));
            return finish(step_down_on_model(z, psi, options.alpha, options.n_draws,
                                             derive_seed(options.seed, "pool"),
                                             Method::GlobalPooledNegativeControl));
        }
    }
    throw ValidationError("unknown method");
}

std::string to_json(const TestOutcome& outcome, int indent) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["method"] = method_name(outcome.method);
    j["alpha"] = outcome.alpha;
    j["sidedness"] = outcome.sidedness == Sidedness::TwoSided ? "two-sided" : "one-sided";
    j["theta"] = outcome.theta;
    j["seed"] = outcome.seed;
    j["n_draws"] = outcome.n_draws;
    switch (outcome.correlation_policy) {
        case CorrelationPolicy::Conventional: j["correlation_policy"] = "conventional"; break;
        case CorrelationPolicy::Spurious: j["correlation_policy"] = "spurious"; break;
        case CorrelationPolicy::GlobalPooledNegativeControl:
            j["correlation_policy"] = "global-pooled-negative-control";
            break;
    }
    j["repaired"] = outcome.repaired;
    j["clamped"] = outcome.clamped;
    j["diagonal_loading"] = outcome.diagonal_loading;
    j["fallback_vars"] = outcome.fallback_vars;
    j["critical_values"] = outcome.critical_values;
    j["n_rejected"] = outcome.n_rejected();
    auto& hs = j["hypotheses"] = nlohmann::json::array();
    for (const auto& h : outcome.hypotheses)
        hs.push_back({{"s", h.s},
                      {"j", h.j + 1},
                      {"t", h.t_value},
                      {"adjusted_p", h.adjusted_p},
                      {"rejected", h.rejected}});
    return j.dump(indent);
}

std::string to_text_table(const TestOutcome& outcome) {
    std::ostringstream out;
    char buf[128];
    out << "method=" << method_name(outcome.method) << " alpha=" << outcome.alpha
        << " sidedness="
        << (outcome.sidedness == Sidedness::TwoSided ? "two-sided" : "one-sided")
        << " seed=" << outcome.seed << " n_draws=" << outcome.n_draws << "\n";
    out << "  s  var          t  adjusted_p  rejected\n";
    for (const auto& h : outcome.hypotheses) {
        std::snprintf(buf, sizeof(buf), "%3d %4d %10.4f %11.5f  %s\n", h.s, h.j + 1, h.t_value,
                      h.adjusted_p, h.rejected ? "yes" : "no");
        out << buf;
    }
    out << "rejected " << outcome.n_rejected() << " of " << outcome.hypotheses.size() << "\n";
    return out.str();
}

} // namespace spurcor
