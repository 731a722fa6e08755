#include "selclust/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "selclust/errors.hpp"

namespace selclust {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& raw, int line_no) {
  const std::string s = strip(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw DataLoadError("non-numeric cell '" + raw + "' on line " +
                        std::to_string(line_no));
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

LoadedCsv load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataLoadError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataLoadError(path + " is empty");
  std::vector<std::string> header = split_line(line);
  if (header.empty()) throw DataLoadError(path + " has an empty header");

  int label_col = -1;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string name = strip(header[j]);
    if (name == "label") {
      if (label_col >= 0)
        throw DataLoadError(path + " has more than one label column");
      label_col = static_cast<int>(j);
    } else {
      names.push_back(name);
    }
  }
  if (names.empty()) throw DataLoadError(path + " has no data columns");

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    const std::vector<std::string> fields = split_line(line);
    if (fields.size() != header.size())
      throw DataLoadError("line " + std::to_string(line_no) + " has " +
                          std::to_string(fields.size()) + " cells, expected " +
                          std::to_string(header.size()));
    std::vector<double> row;
    row.reserve(names.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const double v = parse_double(fields[j], line_no);
      if (static_cast<int>(j) == label_col)
        labels.push_back(static_cast<int>(std::lround(v)));
      else
        row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataLoadError(path + " has no data rows");

  LoadedCsv out;
  out.data.values.resize(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < names.size(); ++j)
      out.data.values(static_cast<Eigen::Index>(i),
                      static_cast<Eigen::Index>(j)) = rows[i][j];
  out.data.col_names = std::move(names);
  out.has_labels = label_col >= 0;
  out.labels = std::move(labels);
  return out;
}

void write_dataset_csv(const std::string& path, const DataMatrix& data,
                       const std::vector<int>* labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);

  for (Eigen::Index j = 0; j < data.p(); ++j) {
    if (j) out << ',';
    out << (data.col_names.empty() ? "V" + std::to_string(j + 1)
                                   : data.col_names[j]);
  }
  if (labels) out << ",label";
  out << '\n';

  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      if (j) out << ',';
      out << format_double(data.values(i, j));
    }
    if (labels) out << ',' << (*labels)[i];
    out << '\n';
  }
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out << ',';
    out << header[j];
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      out << row[j];
    }
    out << '\n';
  }
}

}  // namespace selclust
