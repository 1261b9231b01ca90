#ifndef SPURCOR_SIMULATION_HPP
#define SPURCOR_SIMULATION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spurcor/procedures.hpp"

namespace spurcor {

struct SimScenario {
    double rho = 0.0;
    int n = 12;   // per-group sample size
    int p = 50;
    int m = 1;
    double mu = 0.0;
    double r = 0.0; // fraction of true alternatives
    int block_size = 10;
    Sidedness sidedness = Sidedness::TwoSided;
    std::vector<Method> methods = {Method::Bonferroni, Method::MaxT, Method::StepDownMaxT,
                                   Method::Proposal};
    int reps = 2000;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    int n_draws = 20000;
    double theta = 1.0;
    int batches = 10; // for the across-batch SD of the FWER estimate

    int n_alternatives() const; // round(r * m * p), shifted variables per case group
};

struct MethodSimResult {
    Method method;
    bool fwer_defined = false; // false when there are no true nulls
    double fwer = 0.0;
    double fwer_se = 0.0;
    double fwer_batch_sd = 0.0;
    bool power_defined = false; // false under the complete null
    double power = 0.0;
    double power_se = 0.0;
    double mean_adjusted_p = 0.0; // over true alternatives (power mode) or all (null mode)
};

struct SimReport {
    SimScenario scenario;
    std::vector<MethodSimResult> methods;
    int reps_completed = 0;
    double wall_seconds = 0.0;
};

// Block-diagonal covariance, unit variances, within-block covariance rho.
// Throws ValidationError when rho is outside (-1/(block_size-1), 1).
Eigen::MatrixXd gen_block_cov(int p, double rho, int block_size);

// Gaussian samples with the scenario covariance; the first n_alternatives()
// variables of every case group are shifted by mu. Deterministic per
// (scenario.seed, rep_index).
GroupedDataset gen_dataset(const SimScenario& scenario, int rep_index);

SimReport run_simulation(const SimScenario& scenario);
SimReport estimate_fwer(const SimScenario& scenario);
SimReport estimate_power(const SimScenario& scenario);

// Three-group negative control: p=2, identity covariance, group 1 null,
// group 2 shifted by mu2 in both variables. Runs the globally pooled policy
// and the Proposal; FWER counts rejections among the group-1 hypotheses.
SimReport corollary1_demo(int n, double mu2, int reps, double alpha, std::uint64_t seed);

// Scenario grids of the simulation study tables.
std::vector<SimScenario> table1_scenarios();
std::vector<SimScenario> table2_scenarios();

SimScenario scenario_from_json(const std::string& json_text);
std::string scenario_to_json(const SimScenario& scenario, int indent = 2);
std::string report_to_json(const SimReport& report, int indent = 2);
// one CSV row per method; write_header controls the header line
std::string report_to_csv(const SimReport& report, bool write_header);

} // namespace spurcor

#endif
