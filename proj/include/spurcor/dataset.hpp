#ifndef SPURCOR_DATASET_HPP
#define SPURCOR_DATASET_HPP

#include <Eigen/Dense>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

namespace spurcor {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Grouped multivariate samples. groups[u] is an n^(u) x p matrix; group 0 is
// the control group, groups 1..m are case groups. Immutable after
// construction (validate() is called by the factory paths).
struct GroupedDataset {
    std::vector<Eigen::MatrixXd> groups;
    std::vector<std::string> variable_names;

    int m() const { return static_cast<int>(groups.size()) - 1; }
    int p() const { return groups.empty() ? 0 : static_cast<int>(groups.front().cols()); }
    int n(int u) const { return static_cast<int>(groups.at(u).rows()); }
    int total_n() const;

    // Throws ValidationError on shape violations (p mismatch, n^(u) < 2,
    // fewer than two groups, non-finite cells).
    void validate() const;
};

struct GroupSummary {
    Eigen::MatrixXd means;             // (m+1) x p, row u = group-u mean
    Eigen::MatrixXd pooled_pair_means; // m x p, row s-1 = mean pooled over {0,s}
    Eigen::VectorXd global_pooled_means;
};

struct CsvOptions {
    char delimiter = ',';
    bool header = true;
    std::string group_column = "group";
    long control_label = 0;
};

// Wide-format CSV: one row per sample, one integer group column, p numeric
// columns. Group labels are remapped deterministically: control label first,
// remaining labels in ascending order.
GroupedDataset load_csv(std::istream& in, const CsvOptions& options = {});
GroupedDataset load_csv_file(const std::string& path, const CsvOptions& options = {});

GroupSummary summarize(const GroupedDataset& ds);

} // namespace spurcor

#endif
