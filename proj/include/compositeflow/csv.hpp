#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace compositeflow {

/// Reads a dense matrix from CSV: one row per line, comma-separated decimal
/// scalars, no header. Throws UsageError on ragged rows or parse failures.
Eigen::MatrixXd read_matrix_csv(const std::string& path);

/// Reads a vector from CSV (single column, or a single row of values).
Eigen::VectorXd read_vector_csv(const std::string& path);

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& mat);

/// Shortest round-trip decimal rendering of a double; used for every CSV
/// field so rewriting a run reproduces identical bytes.
std::string format_double(double value);

/// A CSV table with a fixed header, written row by row.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void write_row(const std::vector<double>& values);

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace compositeflow
