#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "spurcor/dataset.hpp"
#include "spurcor/procedures.hpp"
#include "spurcor/rng.hpp"
#include "spurcor/simulation.hpp"

namespace {

using namespace spurcor;

constexpr int kExitInput = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNumeric = 4;

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out << content;
}

std::uint64_t resolve_seed(std::uint64_t seed, bool seed_given) {
    if (seed_given) return seed;
    std::random_device rd;
    const std::uint64_t generated =
        (static_cast<std::uint64_t>(rd()) << 32) ^ static_cast<std::uint64_t>(rd());
    std::cerr << "seed not given; using generated seed " << generated << "\n";
    return generated;
}

std::string outcome_to_csv(const TestOutcome& outcome) {
    std::ostringstream out;
    out << "s,variable,t,adjusted_p,rejected\n";
    for (const auto& h : outcome.hypotheses)
        out << h.s << ',' << h.j + 1 << ',' << h.t_value << ',' << h.adjusted_p << ','
            << (h.rejected ? 1 : 0) << '\n';
    return out.str();
}

int cmd_analyze(const std::string& input, const std::string& method_str, double alpha,
                bool one_sided, double theta, int n_draws, std::uint64_t seed, bool seed_given,
                const std::string& output, const std::string& format, char delimiter,
                const std::string& group_column, long control_label,
                bool allow_negative_control) {
    // an unknown method name is a usage problem, not a validation failure
    const Method method = [&method_str] {
        try {
            return method_from_string(method_str);
        } catch (const ValidationError& e) {
            throw ParseError(e.what());
        }
    }();
    if (method == Method::GlobalPooledNegativeControl && !allow_negative_control)
        throw ValidationError(
            "the global-pooled policy does not control the family-wise error rate; "
            "pass --allow-negative-control to run it anyway");
    if (theta > 1.0 || theta <= -1.0)
        std::cerr << "warning: theta=" << theta << " is outside (-1,1]\n";

    CsvOptions csv;
    csv.delimiter = delimiter;
    csv.group_column = group_column;
    csv.control_label = control_label;
    const GroupedDataset ds = load_csv_file(input, csv);

    AnalysisOptions options;
    options.alpha = alpha;
    options.sidedness = one_sided ? Sidedness::OneSidedUpper : Sidedness::TwoSided;
    options.theta = theta;
    options.n_draws = n_draws;
    options.seed = resolve_seed(seed, seed_given);

    const TestOutcome outcome = run_analysis(ds, method, options);
    if (format == "json")
        write_output(output, to_json(outcome) + "\n");
    else if (format == "csv")
        write_output(output, outcome_to_csv(outcome));
    else
        write_output(output, to_text_table(outcome));
    return 0;
}

int cmd_simulate(const std::string& scenario_path, bool table1, bool table2, int reps_override,
                 std::uint64_t seed, bool seed_given, int n_draws_override,
                 const std::string& methods_csv, const std::string& output,
                 const std::string& format) {
    std::vector<SimScenario> scenarios;
    if (table1)
        scenarios = table1_scenarios();
    else if (table2)
        scenarios = table2_scenarios();
    else if (!scenario_path.empty()) {
        std::ifstream in(scenario_path);
        if (!in) throw ParseError("cannot open '" + scenario_path + "'");
        std::stringstream buffer;
        buffer << in.rdbuf();
        scenarios.push_back(scenario_from_json(buffer.str()));
    } else {
        throw ValidationError("one of --scenario, --table1, --table2 is required");
    }

    const std::uint64_t run_seed = resolve_seed(seed, seed_given);
    std::vector<Method> methods;
    if (!methods_csv.empty()) {
        std::istringstream ss(methods_csv);
        std::string name;
        while (std::getline(ss, name, ',')) methods.push_back(method_from_string(name));
    }

    std::ostringstream out;
    bool header = true;
    std::vector<std::string> json_reports;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        SimScenario sc = scenarios[i];
        if (reps_override > 0) sc.reps = reps_override;
        if (sc.reps < 1) throw ValidationError("reps must be >= 1");
        if (n_draws_override > 0) sc.n_draws = n_draws_override;
        if (!methods.empty()) sc.methods = methods;
        sc.seed = derive_seed(run_seed, "scenario", static_cast<std::uint64_t>(i));
        const SimReport report = run_simulation(sc);
        if (format == "json") {
            json_reports.push_back(report_to_json(report));
        } else {
            out << report_to_csv(report, header);
            header = false;
        }
        std::cerr << "scenario " << i + 1 << "/" << scenarios.size() << " done ("
                  << report.wall_seconds << " s)\n";
    }
    if (format == "json") {
        std::ostringstream joined;
        joined << "[\n";
        for (std::size_t i = 0; i < json_reports.size(); ++i)
            joined << json_reports[i] << (i + 1 < json_reports.size() ? ",\n" : "\n");
        joined << "]\n";
        write_output(output, joined.str());
    } else {
        write_output(output, out.str());
    }
    return 0;
}

int cmd_demo(std::uint64_t seed, bool seed_given, double mu, int n, double alpha) {
    const std::uint64_t run_seed = resolve_seed(seed, seed_given);
    // two-group, two-variable synthetic data with both case means shifted up
    const double rho = 0.15;
    Xoshiro256 rng(derive_seed(run_seed, "demo"));
    const double a = std::sqrt(1.0 - rho);
    const double b = (std::sqrt(1.0 + rho) - a) / 2.0;
    GroupedDataset ds;
    for (int u = 0; u <= 1; ++u) {
        Eigen::MatrixXd g(n, 2);
        for (int i = 0; i < n; ++i) {
            const double z1 = rng.next_normal(), z2 = rng.next_normal();
            g(i, 0) = a * z1 + b * (z1 + z2);
            g(i, 1) = a * z2 + b * (z1 + z2);
        }
        if (u == 1) g.array() += mu;
        ds.groups.push_back(std::move(g));
    }
    ds.variable_names = {"v1", "v2"};

    auto correlation_of = [](const Eigen::MatrixXd& cov) {
        return cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1));
    };
    const Eigen::MatrixXd tilde0 = cov_tilde(ds, 0);
    const Eigen::MatrixXd tilde1 = cov_tilde(ds, 1);
    const auto [hat0, hat1] = cov_hat_pair(ds, 1);
    const double n0 = ds.n(0), n1 = ds.n(1);
    const Eigen::MatrixXd hat_pooled =
        ((n0 - n0 / (n0 + n1)) * hat0 + (n1 - n1 / (n0 + n1)) * hat1) / (n0 + n1 - 1.0);

    std::cout << "demo seed=" << run_seed << " n=" << n << " mu=" << mu << " alpha=" << alpha
              << " (one-sided)\n";
    std::cout << "control correlation:  " << correlation_of(tilde0) << "\n";
    std::cout << "case correlation:     " << correlation_of(tilde1) << "\n";
    std::cout << "spurious correlation: " << correlation_of(hat_pooled) << "\n\n";

    AnalysisOptions options;
    options.alpha = alpha;
    options.sidedness = Sidedness::OneSidedUpper;
    options.seed = run_seed;
    const TestOutcome maxt = run_analysis(ds, Method::MaxT, options);
    const TestOutcome prop = run_analysis(ds, Method::Proposal, options);
    std::cout << to_text_table(maxt) << "\n" << to_text_table(prop);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spurious-correlation maxT multiple testing"};
    app.require_subcommand(1);

    std::string input, output, format = "json", method = "proposal";
    std::string scenario_path, methods_csv, group_column = "group";
    std::string delimiter = ",";
    double alpha = 0.05, theta = 1.0, mu = 1.5;
    int n_draws = 100000, reps = 0, n = 10, threads = 0;
    long control_label = 0;
    std::uint64_t seed = 0;
    bool one_sided = false, table1 = false, table2 = false, allow_negative_control = false;

    auto* analyze = app.add_subcommand("analyze", "run a multiple testing analysis on a CSV");
    analyze->add_option("--input", input, "input CSV path")->required();
    analyze->add_option("--method", method,
                        "bonferroni|maxt|stepdown-maxt|proposal|global-pooled");
    analyze->add_option("--alpha", alpha, "significance level");
    analyze->add_flag("--one-sided", one_sided, "test K: mu^(s) > mu^(0) (default two-sided)");
    analyze->add_option("--theta", theta, "theta of the combined estimator");
    analyze->add_option("--n-draws", n_draws, "Monte Carlo draws");
    auto* seed_opt_a = analyze->add_option("--seed", seed, "run seed (generated if absent)");
    analyze->add_option("--output", output, "output path (default stdout)");
    analyze->add_option("--format", format, "json|csv|text");
    analyze->add_option("--delimiter", delimiter, "CSV delimiter");
    analyze->add_option("--group-column", group_column, "group column name");
    analyze->add_option("--control-label", control_label, "label of the control group");
    analyze->add_flag("--allow-negative-control", allow_negative_control,
                      "permit the global-pooled policy outside simulations");

    auto* simulate = app.add_subcommand("simulate", "run simulation scenarios");
    simulate->add_option("--scenario", scenario_path, "scenario JSON path");
    simulate->add_flag("--table1", table1, "complete-null / partial-alternative FWER grid");
    simulate->add_flag("--table2", table2, "power grid (r=1)");
    simulate->add_option("--reps", reps, "replications per scenario (overrides scenario)");
    auto* seed_opt_s = simulate->add_option("--seed", seed, "run seed (generated if absent)");
    int sim_draws = 0;
    simulate->add_option("--n-draws", sim_draws, "Monte Carlo draws per replication");
    simulate->add_option("--methods", methods_csv, "comma-separated method subset");
    simulate->add_option("--output", output, "output path (default stdout)");
    simulate->add_option("--format", format, "json|csv");

    auto* demo = app.add_subcommand("demo", "two-variable illustration of spurious correlation");
    auto* seed_opt_d = demo->add_option("--seed", seed, "run seed (generated if absent)");
    demo->add_option("--mu", mu, "shift of the case group");
    demo->add_option("--n", n, "per-group sample size");
    demo->add_option("--alpha", alpha, "significance level");

    app.add_option("--threads", threads,
                   "worker cap (accepted for compatibility; execution is single-threaded)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitInput;
    }

    try {
        if (analyze->parsed())
            return cmd_analyze(input, method, alpha, one_sided, theta, n_draws, seed,
                               seed_opt_a->count() > 0, output, format,
                               delimiter.empty() ? ',' : delimiter[0], group_column,
                               control_label, allow_negative_control);
        if (simulate->parsed())
            return cmd_simulate(scenario_path, table1, table2, reps, seed,
                                seed_opt_s->count() > 0, sim_draws, methods_csv, output, format);
        if (demo->parsed())
            return cmd_demo(seed, seed_opt_d->count() > 0, mu, n, alpha);
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kExitInput;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitInput;
}
