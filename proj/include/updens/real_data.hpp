#pragma once

/**
 * Measured-data CSV: a header of column names with optional power-of-ten
 * scale suffixes ("k_rot_y:e2" means stored values are multiplied by 10^2),
 * then one system per row. The last column is the output; all others are
 * inputs. Blank lines and lines starting with '#' are ignored.
 */

#include "error.hpp"
#include "estimators.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace updens {

struct RealData
{
  LabeledSample sample;
  std::vector<std::string> input_names;
  std::string output_name;
  //! Exponents applied per column (inputs first, output last).
  std::vector<int> exponents;
};

namespace detail {

inline std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line)
{
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

} // namespace detail

inline RealData ingest_real_data(std::istream& is)
{
  std::string line;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    const auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    header = detail::split_csv(t);
    break;
  }
  if (header.size() < 2) throw Error(ErrorCode::EmptyData, "missing header or fewer than 2 columns");

  RealData data;
  for (const auto& h : header) {
    const auto colon = h.find(":e");
    int exp = 0;
    std::string name = h;
    if (colon != std::string::npos) {
      name = h.substr(0, colon);
      try {
        std::size_t used = 0;
        exp = std::stoi(h.substr(colon + 2), &used);
        if (used != h.size() - colon - 2) throw std::invalid_argument(h);
      } catch (const std::exception&) {
        throw Error(ErrorCode::MalformedRow, "bad scale suffix in header column '" + h + "'");
      }
    }
    data.exponents.push_back(exp);
    data.input_names.push_back(name);
  }
  data.output_name = data.input_names.back();
  data.input_names.pop_back();

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = detail::split_csv(t);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::ColumnCountMismatch, "line " + std::to_string(line_no) + " has " +
                                                    std::to_string(fields.size()) + " fields, header has " +
                                                    std::to_string(header.size()));
    }
    std::vector<double> row;
    for (std::size_t k = 0; k < fields.size(); ++k) {
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(fields[k], &used);
        if (used != fields[k].size()) throw std::invalid_argument(fields[k]);
      } catch (const std::exception&) {
        throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": '" + fields[k] + "' is not a number");
      }
      if (!std::isfinite(v)) throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": non-finite value");
      row.push_back(v * std::pow(10.0, data.exponents[k]));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyData, "no data rows");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(header.size() - 1);
  Matrix x(n, d);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    y(i) = rows[static_cast<std::size_t>(i)].back();
  }
  data.sample = LabeledSample(std::move(x), std::move(y));
  return data;
}

inline RealData ingest_real_data_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return ingest_real_data(in);
}

} // namespace updens
