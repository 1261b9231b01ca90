#ifndef SPURCOR_PROCEDURES_HPP
#define SPURCOR_PROCEDURES_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spurcor/correlation.hpp"
#include "spurcor/dataset.hpp"
#include "spurcor/estimators.hpp"
#include "spurcor/mvn.hpp"

namespace spurcor {

enum class Method { Bonferroni, MaxT, StepDownMaxT, Proposal, GlobalPooledNegativeControl };

std::string method_name(Method m);
Method method_from_string(const std::string& name);

struct Hypothesis {
    int s;
    int j;
    double t_value;
    double adjusted_p;
    bool rejected;
};

struct TestOutcome {
    std::vector<Hypothesis> hypotheses; // flat order (s-1)*p + j
    Method method = Method::Bonferroni;
    double alpha = 0.05;
    Sidedness sidedness = Sidedness::TwoSided;
    double theta = 1.0;
    std::uint64_t seed = 0;
    int n_draws = 0;
    CorrelationPolicy correlation_policy = CorrelationPolicy::Conventional;
    std::vector<double> critical_values; // one per step-down step (single-step: one)
    bool repaired = false;
    bool clamped = false;
    double diagonal_loading = 0.0;
    std::vector<int> fallback_vars;

    int n_rejected() const;
};

struct AnalysisOptions {
    double alpha = 0.05;
    Sidedness sidedness = Sidedness::TwoSided;
    double theta = 1.0;
    int n_draws = 100000;
    std::uint64_t seed = 0;
};

TestOutcome bonferroni(const TMatrix& t, double alpha);
TestOutcome maxt_single_step(const TMatrix& t, const CorrelationModel& psi, double alpha,
                             int n_draws, std::uint64_t seed);
TestOutcome maxt_step_down(const TMatrix& t, const CorrelationModel& psi, double alpha,
                           int n_draws, std::uint64_t seed);
TestOutcome proposal(const GroupedDataset& ds, double alpha, double theta, int n_draws,
                     std::uint64_t seed, Sidedness sidedness = Sidedness::TwoSided);

TestOutcome run_analysis(const GroupedDataset& ds, Method method, const AnalysisOptions& options);

std::string to_json(const TestOutcome& outcome, int indent = 2);
std::string to_text_table(const TestOutcome& outcome);

} // namespace spurcor

#endif
