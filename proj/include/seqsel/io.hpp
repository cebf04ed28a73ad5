#pragma once
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "seqsel/changepoint.hpp"
#include "seqsel/core_model.hpp"
#include "seqsel/paths.hpp"

namespace seqsel {

/// Comma-separated table with a header row; cells are kept as text.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a column given by name, or by 0-based position when `key` is
  /// all digits. ParseError naming the column when absent.
  std::size_t column(const std::string& key) const;
  std::vector<double> numeric_column(std::size_t c) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

struct DatasetCsvOptions {
  /// Column name or 0-based index.
  std::string response = "y";
  bool intercept = false;
  std::optional<double> sigma2;
};

/// Every column except the response is a predictor, named by the header.
Dataset dataset_from_csv(const CsvTable& table, const DatasetCsvOptions& options = {});

/// Column `column` (default: the only column, else "y").
Series series_from_csv(const CsvTable& table, const std::string& column = "");

/// Columns step, variable, statistic.
void write_path_csv(const ModelPath& path, const Dataset& data, std::ostream& out);

}  // namespace seqsel
