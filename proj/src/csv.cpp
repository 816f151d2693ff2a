#include "compositeflow/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "compositeflow/errors.hpp"

namespace compositeflow {

namespace {

std::vector<double> parse_row(const std::string& line, const std::string& path) {
  std::vector<double> row;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) comma = line.size();
    std::string field = line.substr(pos, comma - pos);
    // Trim surrounding whitespace; CSV fields are plain decimals.
    const auto begin = field.find_first_not_of(" \t\r");
    const auto end = field.find_last_not_of(" \t\r");
    if (begin == std::string::npos) {
      throw UsageError("CSV parse error in " + path + ": empty field");
    }
    field = field.substr(begin, end - begin + 1);
    try {
      std::size_t consumed = 0;
      const double value = std::stod(field, &consumed);
      if (consumed != field.size()) throw std::invalid_argument(field);
      row.push_back(value);
    } catch (const std::exception&) {
      throw UsageError("CSV parse error in " + path + ": bad field '" + field + "'");
    }
    pos = comma + 1;
    if (comma == line.size()) break;
  }
  return row;
}

}  // namespace

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open CSV file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(parse_row(line, path));
    if (rows.back().size() != rows.front().size()) {
      throw UsageError("CSV parse error in " + path + ": ragged row " +
                       std::to_string(rows.size()));
    }
  }
  if (rows.empty()) throw UsageError("CSV file is empty: " + path);
  Eigen::MatrixXd mat(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < mat.rows(); ++i) {
    for (Eigen::Index j = 0; j < mat.cols(); ++j) {
      mat(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return mat;
}

Eigen::VectorXd read_vector_csv(const std::string& path) {
  const Eigen::MatrixXd mat = read_matrix_csv(path);
  if (mat.cols() == 1) return mat.col(0);
  if (mat.rows() == 1) return mat.row(0).transpose();
  throw UsageError("CSV file is not a vector: " + path);
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& mat) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open CSV file for writing: " + path);
  for (Eigen::Index i = 0; i < mat.rows(); ++i) {
    for (Eigen::Index j = 0; j < mat.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(mat(i, j));
    }
    out << '\n';
  }
}

std::string format_double(double value) {
  // Shortest representation that round-trips: try increasing precision.
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
    double parsed = 0;
    std::sscanf(buf, "%lf", &parsed);
    if (parsed == value) break;
  }
  return buf;
}

struct CsvWriter::Impl {
  std::ofstream out;
  std::size_t columns;
  std::string path;
};

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : impl_(new Impl{std::ofstream(path), header.size(), path}) {
  if (!impl_->out) {
    delete impl_;
    throw UsageError("cannot open CSV file for writing: " + path);
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i > 0) impl_->out << ',';
    impl_->out << header[i];
  }
  impl_->out << '\n';
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::write_row(const std::vector<double>& values) {
  if (values.size() != impl_->columns) {
    throw UsageError("CSV row width mismatch writing " + impl_->path);
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) impl_->out << ',';
    impl_->out << format_double(values[i]);
  }
  impl_->out << '\n';
}

}  // namespace compositeflow
