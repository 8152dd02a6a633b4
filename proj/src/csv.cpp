#include "csv.hpp"

#include "errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace imlmm {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  s = s.substr(first, last - first + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      cell.push_back(c);
    } else if (c == ',' && !quoted) {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc() || ptr != end) {
    std::ostringstream msg;
    msg << "non-numeric value '" << cell << "' in column '" << column << "' at data row " << row;
    fail(ErrorCode::NonNumeric, msg.str());
  }
  return value;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  fail(ErrorCode::MissingColumn, "missing column '" + name + "'");
}

}  // namespace

Dataset parse_dataset(const std::string& text, const CsvSchema& schema) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    header = split_row(line);
    break;
  }
  if (header.empty()) fail(ErrorCode::Parse, "CSV input has no header row");
  if (!header.front().empty() && header.front().rfind("\xEF\xBB\xBF", 0) == 0)
    header.front().erase(0, 3);

  const std::size_t iy = column_index(header, schema.response);
  const std::size_t ig = column_index(header, schema.group);
  std::vector<std::size_t> ix, iz;
  for (const auto& c : schema.covariates) ix.push_back(column_index(header, c));
  for (const auto& c : schema.random_covariates) iz.push_back(column_index(header, c));

  std::vector<double> y;
  std::vector<std::vector<double>> xrows, zrows;
  std::vector<std::string> groups;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_row(line);
    if (cells.size() != header.size()) {
      std::ostringstream msg;
      msg << "data row " << row << " has " << cells.size() << " cells, header has "
          << header.size();
      fail(ErrorCode::Parse, msg.str());
    }
    y.push_back(parse_number(cells[iy], row, schema.response));
    groups.push_back(cells[ig]);
    if (cells[ig].empty()) {
      std::ostringstream msg;
      msg << "blank group label at data row " << row;
      fail(ErrorCode::EmptyGroup, msg.str());
    }
    std::vector<double> xr;
    if (schema.intercept) xr.push_back(1.0);
    for (std::size_t k = 0; k < ix.size(); ++k)
      xr.push_back(parse_number(cells[ix[k]], row, schema.covariates[k]));
    xrows.push_back(std::move(xr));
    std::vector<double> zr;
    if (iz.empty()) zr.push_back(1.0);
    for (std::size_t k = 0; k < iz.size(); ++k)
      zr.push_back(parse_number(cells[iz[k]], row, schema.random_covariates[k]));
    zrows.push_back(std::move(zr));
  }
  if (y.empty()) fail(ErrorCode::Parse, "CSV input has no data rows");

  const auto n = static_cast<Eigen::Index>(y.size());
  const auto p = static_cast<Eigen::Index>(xrows.front().size());
  const auto a = static_cast<Eigen::Index>(zrows.front().size());
  if (p == 0) fail(ErrorCode::Usage, "fixed-effects design is empty (no intercept, no covariates)");
  VectorXd yv(n);
  MatrixXd X(n, p), Z(n, a);
  for (Eigen::Index i = 0; i < n; ++i) {
    yv(i) = y[i];
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = xrows[i][j];
    for (Eigen::Index j = 0; j < a; ++j) Z(i, j) = zrows[i][j];
  }
  return make_dataset(std::move(yv), std::move(X), std::move(Z), MatrixXd::Identity(a, a),
                      groups);
}

Dataset load_dataset(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), schema);
}

}  // namespace imlmm
