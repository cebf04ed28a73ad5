#include "seqsel/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "seqsel/errors.hpp"

namespace seqsel {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Quoted cells keep commas and surrounding spaces; a doubled quote inside them is a literal quote.
std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  bool was_quoted = false;
  const auto flush = [&] {
    cells.push_back(was_quoted ? cell : trim(cell));
    cell.clear();
    was_quoted = false;
  };
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch != '"') {
        cell += ch;
      } else if (i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else {
        quoted = false;
      }
    } else if (ch == '"') {
      quoted = was_quoted = true;
      cell = trim(cell);
    } else if (ch == ',') {
      flush();
    } else {
      cell += ch;
    }
  }
  flush();
  return cells;
}

double parse_number(const std::string& text, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw ParseError("row " + std::to_string(row + 1) + ", column '" + column + "': '" + text + "' is not a finite number");
  }
  return value;
}

}  // namespace

std::size_t CsvTable::column(const std::string& key) const {
  const auto it = std::find(header.begin(), header.end(), key);
  if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
  if (!key.empty() && std::all_of(key.begin(), key.end(), [](unsigned char c) { return std::isdigit(c); })) {
    const std::size_t c = std::stoul(key);
    if (c < header.size()) return c;
  }
  throw ParseError("column '" + key + "' not found");
}

std::vector<double> CsvTable::numeric_column(std::size_t c) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) out.push_back(parse_number(rows[r][c], r, header[c]));
  return out;
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || line[0] == '#') continue;
    auto cells = split(line);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw ParseError("line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) + " fields, expected " +
                       std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (!have_header) throw ParseError("empty CSV input");
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_csv(in);
}

Dataset dataset_from_csv(const CsvTable& table, const DatasetCsvOptions& options) {
  const std::size_t resp = table.column(options.response);
  if (table.header.size() < 2) throw ParseError("need a response and at least one predictor column");
  if (table.rows.empty()) throw ParseError("no data rows");
  const Index n = static_cast<Index>(table.rows.size());
  const Index p = static_cast<Index>(table.header.size() - 1);
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < table.header.size(); ++c)
    if (c != resp) names.push_back(table.header[c]);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    Index j = 0;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      const double v = parse_number(table.rows[r][c], r, table.header[c]);
      if (c == resp) {
        y[static_cast<Index>(r)] = v;
      } else {
        X(static_cast<Index>(r), j++) = v;
      }
    }
  }
  Dataset data(std::move(X), std::move(y), options.sigma2, std::move(names));
  return options.intercept ? data.with_intercept() : data;
}

Series series_from_csv(const CsvTable& table, const std::string& column) {
  std::size_t c = 0;
  if (!column.empty()) {
    c = table.column(column);
  } else if (table.header.size() != 1) {
    c = table.column("y");
  }
  return Series(table.numeric_column(c));
}

void write_path_csv(const ModelPath& path, const Dataset& data, std::ostream& out) {
  out << "step,variable,statistic\n";
  out.precision(10);
  for (const PathStep& s : path.steps) out << s.k << ',' << data.column_name(s.entered) << ',' << s.statistic << '\n';
}

}  // namespace seqsel
