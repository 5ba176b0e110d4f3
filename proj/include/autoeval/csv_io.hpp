// Copyright 2026 The Autoeval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Strict CSV readers/writers for the two input schemas.
//
// Metric files:   labeled   -> id, phi_<name>, ehat_<name> per model
//                 unlabeled -> id, ehat_<name> per model
// Comparison files: labeled   -> id, model_a, model_b, y, y_hat
//                   unlabeled -> id, model_a, model_b, y_hat
//
// UTF-8, header row required, '.' decimal separator, no quoting, no missing
// cells. Model identity is by column/model name, never by position.

#ifndef AUTOEVAL_CSV_IO_HPP_
#define AUTOEVAL_CSV_IO_HPP_

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "autoeval/bradley_terry.hpp"
#include "autoeval/errors.hpp"
#include "autoeval/harness.hpp"
#include "autoeval/ppi_mean.hpp"

namespace autoeval {

// Schema violation with the 1-based line number where it was found.
class CsvError : public InputError {
 public:
  CsvError(const std::string& path, int line, const std::string& what)
      : InputError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

namespace csv {

struct Table {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // rows[i] is file line i + 2
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

inline Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError(path, 0, "cannot open file");
  Table table;
  table.path = path;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      table.header = split_line(line);
      if (table.header.empty() || (table.header.size() == 1 && table.header[0].empty())) {
        throw CsvError(path, 1, "missing header row");
      }
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != table.header.size()) {
      throw CsvError(path, lineno,
                     "expected " + std::to_string(table.header.size()) +
                         " fields, found " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) throw CsvError(path, 1, "missing header row");
  return table;
}

inline double parse_double(const Table& table, std::size_t row, std::size_t col) {
  const std::string& field = table.rows[row][col];
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || field.empty()) {
    throw CsvError(table.path, static_cast<int>(row) + 2,
                   "column '" + table.header[col] + "': not a number: '" + field + "'");
  }
  if (!std::isfinite(value)) {
    throw CsvError(table.path, static_cast<int>(row) + 2,
                   "column '" + table.header[col] + "': non-finite value");
  }
  return value;
}

inline std::size_t require_column(const Table& table, const std::string& name) {
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (table.header[i] == name) return i;
  }
  throw CsvError(table.path, 1, "missing required column '" + name + "'");
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace csv

// --- metric schema ----------------------------------------------------------

namespace detail {

// Model names from `phi_*`/`ehat_*` header pairs, in phi-column order for
// labeled files and ehat-column order for unlabeled ones.
struct MetricColumns {
  std::vector<std::string> model_names;
  std::vector<std::size_t> phi_cols;   // empty for unlabeled files
  std::vector<std::size_t> ehat_cols;
};

inline MetricColumns metric_columns(const csv::Table& table, bool labeled) {
  MetricColumns cols;
  csv::require_column(table, "id");
  std::map<std::string, std::size_t> ehat_by_name;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    const std::string& h = table.header[i];
    if (h.rfind("ehat_", 0) == 0) {
      if (!ehat_by_name.emplace(h.substr(5), i).second) {
        throw CsvError(table.path, 1, "duplicate column '" + h + "'");
      }
    } else if (h.rfind("phi_", 0) == 0) {
      if (!labeled) throw CsvError(table.path, 1, "unexpected column '" + h + "' in unlabeled file");
    } else if (h != "id") {
      throw CsvError(table.path, 1, "unexpected column '" + h + "'");
    }
  }
  if (labeled) {
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      const std::string& h = table.header[i];
      if (h.rfind("phi_", 0) != 0) continue;
      std::string name = h.substr(4);
      auto it = ehat_by_name.find(name);
      if (it == ehat_by_name.end()) {
        throw CsvError(table.path, 1, "missing required column 'ehat_" + name + "'");
      }
      cols.model_names.push_back(name);
      cols.phi_cols.push_back(i);
      cols.ehat_cols.push_back(it->second);
      ehat_by_name.erase(it);
    }
    if (!ehat_by_name.empty()) {
      throw CsvError(table.path, 1,
                     "missing required column 'phi_" + ehat_by_name.begin()->first + "'");
    }
  } else {
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      const std::string& h = table.header[i];
      if (h.rfind("ehat_", 0) != 0) continue;
      cols.model_names.push_back(h.substr(5));
      cols.ehat_cols.push_back(i);
    }
  }
  if (cols.model_names.empty()) {
    throw CsvError(table.path, 1, "no model columns found");
  }
  return cols;
}

}  // namespace detail

// Labeled metric file as a fully labeled population (also the --data format
// for experiment runs).
inline MetricPopulation read_labeled_metric_csv(const std::string& path) {
  csv::Table table = csv::read_table(path);
  detail::MetricColumns cols = detail::metric_columns(table, true);
  const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
  const Eigen::Index m = static_cast<Eigen::Index>(cols.model_names.size());
  MetricPopulation pop;
  pop.model_names = cols.model_names;
  pop.phi.resize(n, m);
  pop.ehat.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      pop.phi(i, j) = csv::parse_double(table, i, cols.phi_cols[static_cast<std::size_t>(j)]);
      pop.ehat(i, j) = csv::parse_double(table, i, cols.ehat_cols[static_cast<std::size_t>(j)]);
    }
  }
  return pop;
}

struct UnlabeledMetricFile {
  Eigen::MatrixXd ehat;
  std::vector<std::string> model_names;
};

inline UnlabeledMetricFile read_unlabeled_metric_csv(const std::string& path) {
  csv::Table table = csv::read_table(path);
  detail::MetricColumns cols = detail::metric_columns(table, false);
  const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
  const Eigen::Index m = static_cast<Eigen::Index>(cols.model_names.size());
  UnlabeledMetricFile file;
  file.model_names = cols.model_names;
  file.ehat.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      file.ehat(i, j) = csv::parse_double(table, i, cols.ehat_cols[static_cast<std::size_t>(j)]);
    }
  }
  return file;
}

// Joins labeled and unlabeled files by model name (columns may be ordered
// differently); the two name sets must be identical.
inline EvalDataset make_eval_dataset(const MetricPopulation& labeled,
                                     const UnlabeledMetricFile& unlabeled) {
  std::map<std::string, Eigen::Index> unlabeled_index;
  for (std::size_t j = 0; j < unlabeled.model_names.size(); ++j) {
    unlabeled_index[unlabeled.model_names[j]] = static_cast<Eigen::Index>(j);
  }
  if (unlabeled.model_names.size() != labeled.model_names.size()) {
    throw InvalidInput("labeled and unlabeled files list different model sets");
  }
  EvalDataset ds;
  ds.labeled_phi = labeled.phi;
  ds.labeled_ehat = labeled.ehat;
  ds.unlabeled_ehat.resize(unlabeled.ehat.rows(), labeled.phi.cols());
  ds.model_names = labeled.model_names;
  for (std::size_t j = 0; j < labeled.model_names.size(); ++j) {
    auto it = unlabeled_index.find(labeled.model_names[j]);
    if (it == unlabeled_index.end()) {
      throw InvalidInput("model '" + labeled.model_names[j] + "' is missing from the unlabeled file");
    }
    ds.unlabeled_ehat.col(static_cast<Eigen::Index>(j)) = unlabeled.ehat.col(it->second);
  }
  return ds;
}

inline void write_labeled_metric_csv(const std::string& path,
                                     const Eigen::MatrixXd& phi,
                                     const Eigen::MatrixXd& ehat,
                                     const std::vector<std::string>& model_names) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  out << "id";
  for (const auto& name : model_names) out << ",phi_" << name << ",ehat_" << name;
  out << "\n";
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < phi.cols(); ++j) {
      out << ',' << csv::format_double(phi(i, j)) << ','
          << csv::format_double(ehat(i, j));
    }
    out << "\n";
  }
}

inline void write_unlabeled_metric_csv(const std::string& path,
                                       const Eigen::MatrixXd& ehat,
                                       const std::vector<std::string>& model_names) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  out << "id";
  for (const auto& name : model_names) out << ",ehat_" << name;
  out << "\n";
  for (Eigen::Index i = 0; i < ehat.rows(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < ehat.cols(); ++j) {
      out << ',' << csv::format_double(ehat(i, j));
    }
    out << "\n";
  }
}

// --- comparison schema ------------------------------------------------------

struct ComparisonCsvRow {
  std::string model_a;
  std::string model_b;
  std::optional<double> y;
  std::optional<double> y_hat;
  int line = 0;
};

inline std::vector<ComparisonCsvRow> read_comparison_csv(const std::string& path,
                                                         bool labeled) {
  csv::Table table = csv::read_table(path);
  std::size_t col_a = csv::require_column(table, "model_a");
  std::size_t col_b = csv::require_column(table, "model_b");
  csv::require_column(table, "id");
  std::size_t col_yhat = csv::require_column(table, "y_hat");
  std::size_t col_y = labeled ? csv::require_column(table, "y") : 0;

  std::vector<ComparisonCsvRow> rows;
  rows.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    ComparisonCsvRow row;
    row.line = static_cast<int>(i) + 2;
    row.model_a = table.rows[i][col_a];
    row.model_b = table.rows[i][col_b];
    if (row.model_a.empty() || row.model_b.empty()) {
      throw CsvError(path, row.line, "empty model name");
    }
    if (row.model_a == row.model_b) {
      throw CsvError(path, row.line, "model_a and model_b must differ");
    }
    if (labeled) {
      row.y = csv::parse_double(table, i, col_y);
      if (!(*row.y >= 0.0 && *row.y <= 1.0)) {
        throw CsvError(path, row.line, "y must lie in [0,1]");
      }
    }
    row.y_hat = csv::parse_double(table, i, col_yhat);
    if (!(*row.y_hat >= 0.0 && *row.y_hat <= 1.0)) {
      throw CsvError(path, row.line, "y_hat must lie in [0,1]");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

struct NamedComparisons {
  ComparisonDataset data;
  std::vector<std::string> model_names;  // index order; model 0 is the reference
};

// Model names map to indices in first-appearance order (labeled rows first);
// `reference` pins the zeta = 0 model to index 0.
inline NamedComparisons make_comparison_dataset(
    const std::vector<ComparisonCsvRow>& labeled,
    const std::vector<ComparisonCsvRow>& unlabeled,
    const std::optional<std::string>& reference) {
  std::vector<std::string> names;
  std::map<std::string, int> index;
  auto intern = [&](const std::string& name) {
    auto it = index.find(name);
    if (it != index.end()) return it->second;
    int id = static_cast<int>(names.size());
    names.push_back(name);
    index[name] = id;
    return id;
  };
  if (reference) intern(*reference);
  for (const auto& row : labeled) {
    intern(row.model_a);
    intern(row.model_b);
  }
  for (const auto& row : unlabeled) {
    intern(row.model_a);
    intern(row.model_b);
  }
  if (reference && names.size() < 2) {
    throw InvalidInput("reference model '" + *reference + "' does not appear in the data");
  }
  if (reference) {
    bool seen = false;
    for (const auto& row : labeled) {
      if (row.model_a == *reference || row.model_b == *reference) seen = true;
    }
    for (const auto& row : unlabeled) {
      if (row.model_a == *reference || row.model_b == *reference) seen = true;
    }
    if (!seen) {
      throw InvalidInput("reference model '" + *reference + "' does not appear in the data");
    }
  }

  NamedComparisons out;
  out.model_names = names;
  out.data.num_models = static_cast<int>(names.size());
  for (const auto& row : labeled) {
    out.data.labeled.push_back(
        ComparisonRecord{index[row.model_a], index[row.model_b], row.y, row.y_hat});
  }
  for (const auto& row : unlabeled) {
    out.data.unlabeled.push_back(
        ComparisonRecord{index[row.model_a], index[row.model_b], std::nullopt, row.y_hat});
  }
  return out;
}

inline void write_comparison_csv(const std::string& path,
                                 const std::vector<ComparisonRecord>& records,
                                 const std::vector<std::string>& model_names,
                                 bool labeled) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  out << (labeled ? "id,model_a,model_b,y,y_hat" : "id,model_a,model_b,y_hat") << "\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    out << i << ',' << model_names[static_cast<std::size_t>(r.a)] << ','
        << model_names[static_cast<std::size_t>(r.b)];
    if (labeled) out << ',' << csv::format_double(r.y.value());
    out << ',' << csv::format_double(r.y_hat.value()) << "\n";
  }
}

}  // namespace autoeval

#endif  // AUTOEVAL_CSV_IO_HPP_
