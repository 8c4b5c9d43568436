#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "metagen/harness.hpp"

namespace metagen {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One parsed CSV summary row.
struct CsvRow {
  std::string config_hash;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t t1 = 0;
  std::size_t t2 = 0;
  std::string trainer;
  std::string bound;
  double value = 0.0;
  double empirical_risk = 0.0;
  double gap = 0.0;
  double gap_stderr = 0.0;
  std::size_t failures = 0;
};

const std::vector<std::string>& csv_columns();

std::string format_csv(const std::vector<BoundReport>& reports);
void write_csv(const std::vector<BoundReport>& reports, const std::filesystem::path& path);
std::vector<CsvRow> parse_csv(const std::string& text);
std::vector<CsvRow> read_csv(const std::filesystem::path& path);

// One line per cell: hash n m t1 t2 i j s~ s l00 l11 l10 l01.
std::string format_loss_tables(const ExperimentResult& result);
void write_loss_tables(const ExperimentResult& result, const std::filesystem::path& path);

struct ArchivedTables {
  std::string config_hash;
  std::vector<LossTable> tables;
};

std::vector<ArchivedTables> parse_loss_tables(const std::string& text);
std::vector<ArchivedTables> read_loss_tables(const std::filesystem::path& path);

std::string format_report_json(const ExperimentConfig& cfg, const ExperimentResult& result);

// results.csv, loss_tables.txt and report.json under dir.
void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result,
                   const std::filesystem::path& dir);

}  // namespace metagen
