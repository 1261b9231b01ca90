#include "spurcor/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace spurcor {

int GroupedDataset::total_n() const {
    int total = 0;
    for (const auto& g : groups) total += static_cast<int>(g.rows());
    return total;
}

void GroupedDataset::validate() const {
    if (groups.size() < 2) throw ValidationError("need >= 2 groups");
    const int pp = p();
    if (pp < 1) throw ValidationError("need p >= 1 variables");
    for (std::size_t u = 0; u < groups.size(); ++u) {
        if (groups[u].cols() != pp)
            throw ValidationError("group " + std::to_string(u) + " has inconsistent dimension");
        if (groups[u].rows() < 2)
            throw ValidationError("group " + std::to_string(u) + " has n<2");
        if (!groups[u].allFinite())
            throw ValidationError("group " + std::to_string(u) + " contains non-finite values");
    }
    if (!variable_names.empty() && static_cast<int>(variable_names.size()) != pp)
        throw ValidationError("variable_names size does not match p");
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, delimiter)) cells.push_back(cell);
    if (!line.empty() && line.back() == delimiter) cells.emplace_back();
    return cells;
}

std::string trimmed(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& cell, int row_number) {
    const std::string t = trimmed(cell);
    if (t.empty()) throw ParseError("row " + std::to_string(row_number) + ": empty cell");
    std::size_t pos = 0;
    double value;
    try {
        value = std::stod(t, &pos);
    } catch (const std::exception&) {
        throw ParseError("row " + std::to_string(row_number) + ": non-numeric cell '" + t + "'");
    }
    if (pos != t.size())
        throw ParseError("row " + std::to_string(row_number) + ": non-numeric cell '" + t + "'");
    if (!std::isfinite(value))
        throw ParseError("row " + std::to_string(row_number) + ": non-finite cell '" + t + "'");
    return value;
}

long parse_label(const std::string& cell, int row_number) {
    const std::string t = trimmed(cell);
    long value = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size())
        throw ParseError("row " + std::to_string(row_number) + ": group label '" + t +
                         "' is not an integer");
    return value;
}

} // namespace

GroupedDataset load_csv(std::istream& in, const CsvOptions& options) {
    std::string line;
    int row_number = 0;
    std::size_t group_col = 0;
    std::size_t n_cols = 0;
    std::vector<std::string> names;

    if (options.header) {
        if (!std::getline(in, line)) throw ParseError("empty input");
        ++row_number;
        auto cells = split_line(line, options.delimiter);
        n_cols = cells.size();
        bool found = false;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (trimmed(cells[c]) == options.group_column) {
                group_col = c;
                found = true;
            } else {
                names.push_back(trimmed(cells[c]));
            }
        }
        if (!found)
            throw SchemaError("missing group column '" + options.group_column + "'");
    }

    std::map<long, std::vector<std::vector<double>>> by_label;
    while (std::getline(in, line)) {
        ++row_number;
        if (trimmed(line).empty()) continue;
        auto cells = split_line(line, options.delimiter);
        if (n_cols == 0) {
            n_cols = cells.size();
            if (n_cols < 2) throw SchemaError("need a group column and at least one variable");
            if (!options.header) group_col = 0; // headerless: first column is the group
        }
        if (cells.size() != n_cols)
            throw ParseError("row " + std::to_string(row_number) + ": expected " +
                             std::to_string(n_cols) + " cells, got " +
                             std::to_string(cells.size()));
        std::vector<double> values;
        values.reserve(n_cols - 1);
        long label = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == group_col)
                label = parse_label(cells[c], row_number);
            else
                values.push_back(parse_double(cells[c], row_number));
        }
        by_label[label].push_back(std::move(values));
    }

    if (by_label.empty()) throw ParseError("no data rows");
    if (by_label.size() < 2) throw ValidationError("need >= 2 groups");
    if (by_label.find(options.control_label) == by_label.end())
        throw ValidationError("control group label " + std::to_string(options.control_label) +
                              " not present");

    // control first, remaining labels ascending
    std::vector<long> order;
    order.push_back(options.control_label);
    for (const auto& [label, rows] : by_label)
        if (label != options.control_label) order.push_back(label);

    GroupedDataset ds;
    const std::size_t p = n_cols - 1;
    for (std::size_t u = 0; u < order.size(); ++u) {
        const auto& rows = by_label[order[u]];
        if (rows.size() < 2)
            throw ValidationError("group " + std::to_string(order[u]) + " has n<2");
        Eigen::MatrixXd g(rows.size(), p);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < p; ++j) g(i, j) = rows[i][j];
        ds.groups.push_back(std::move(g));
    }
    if (names.size() == p) {
        ds.variable_names = std::move(names);
    } else {
        for (std::size_t j = 0; j < p; ++j) ds.variable_names.push_back("v" + std::to_string(j + 1));
    }
    ds.validate();
    return ds;
}

GroupedDataset load_csv_file(const std::string& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return load_csv(in, options);
}

GroupSummary summarize(const GroupedDataset& ds) {
    ds.validate();
    const int m = ds.m();
    const int p = ds.p();
    GroupSummary out;
    out.means.resize(m + 1, p);
    for (int u = 0; u <= m; ++u) out.means.row(u) = ds.groups[u].colwise().mean();

    out.pooled_pair_means.resize(m, p);
    for (int s = 1; s <= m; ++s) {
        const double n0 = ds.n(0), ns = ds.n(s);
        out.pooled_pair_means.row(s - 1) =
            (n0 * out.means.row(0) + ns * out.means.row(s)) / (n0 + ns);
    }

    Eigen::RowVectorXd total = Eigen::RowVectorXd::Zero(p);
    for (int u = 0; u <= m; ++u) total += ds.groups[u].colwise().sum();
    out.global_pooled_means = (total / ds.total_n()).transpose();
    return out;
}

} // namespace spurcor
