#include "metagen/report_io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace metagen {
namespace {

std::string g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void dump(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(line);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "config_hash", "n", "m", "t1", "t2", "trainer", "bound", "value",
      "empirical_risk", "gap", "gap_stderr", "failures",
  };
  return cols;
}

std::string format_csv(const std::vector<BoundReport>& reports) {
  std::string out;
  const auto& cols = csv_columns();
  for (std::size_t k = 0; k < cols.size(); ++k) out += (k ? "," : "") + cols[k];
  out += '\n';
  for (const auto& r : reports) {
    for (const auto& b : r.bounds) {
      out += r.config_hash + ',' + std::to_string(r.n) + ',' + std::to_string(r.m) + ',' +
             std::to_string(r.t1) + ',' + std::to_string(r.t2) + ',' +
             std::string(to_string(r.trainer)) + ',' + b.name + ',' + g9(b.value) + ',' +
             g9(r.empirical_risk) + ',' + g9(r.gap.gap) + ',' + g9(r.gap.std_err) + ',' +
             std::to_string(r.failures) + '\n';
    }
  }
  return out;
}

void write_csv(const std::vector<BoundReport>& reports, const std::filesystem::path& path) {
  dump(format_csv(reports), path);
}

std::vector<CsvRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("csv: missing header");
  const auto& cols = csv_columns();
  if (split(line, ',') != cols) throw IoError("csv: unexpected header '" + line + "'");
  std::vector<CsvRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != cols.size()) {
      throw IoError("csv line " + std::to_string(line_no) + ": expected " +
                    std::to_string(cols.size()) + " fields");
    }
    try {
      rows.push_back({f[0], std::stoul(f[1]), std::stoul(f[2]), std::stoul(f[3]), std::stoul(f[4]),
                      f[5], f[6], std::stod(f[7]), std::stod(f[8]), std::stod(f[9]),
                      std::stod(f[10]), std::stoul(f[11])});
    } catch (const std::logic_error&) {
      throw IoError("csv line " + std::to_string(line_no) + ": malformed field");
    }
  }
  return rows;
}

std::vector<CsvRow> read_csv(const std::filesystem::path& path) { return parse_csv(slurp(path)); }

std::string format_loss_tables(const ExperimentResult& result) {
  std::string out = "# config_hash n m t1 t2 i j s_tilde s l00 l11 l10 l01\n";
  for (const auto& p : result.points) {
    for (const auto& rec : p.records) {
      if (rec.failed) continue;
      const auto& t = rec.table;
      for (std::size_t i = 0; i < t.n; ++i) {
        for (std::size_t j = 0; j < t.m; ++j) {
          const auto& q = t.quad(i, j);
          out += p.report.config_hash + ' ' + std::to_string(t.n) + ' ' + std::to_string(t.m) +
                 ' ' + std::to_string(rec.t1_index) + ' ' + std::to_string(rec.t2_index) + ' ' +
                 std::to_string(i) + ' ' + std::to_string(j) + ' ' +
                 std::to_string(t.masks.task_bit(i)) + ' ' + std::to_string(t.masks.sample_bit(j)) +
                 ' ' + g9(q.l00) + ' ' + g9(q.l11) + ' ' + g9(q.l10) + ' ' + g9(q.l01) + '\n';
        }
      }
    }
  }
  return out;
}

void write_loss_tables(const ExperimentResult& result, const std::filesystem::path& path) {
  dump(format_loss_tables(result), path);
}

std::vector<ArchivedTables> parse_loss_tables(const std::string& text) {
  std::vector<ArchivedTables> out;
  std::map<std::string, std::size_t> by_hash;
  std::map<std::pair<std::size_t, std::tuple<std::size_t, std::size_t>>, std::size_t> by_run;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream f(line);
    std::string hash;
    std::size_t n, m, t1, t2, i, j;
    int st, s;
    LossQuad q;
    if (!(f >> hash >> n >> m >> t1 >> t2 >> i >> j >> st >> s >> q.l00 >> q.l11 >> q.l10 >> q.l01) ||
        i >= n || j >= m || (st & ~1) || (s & ~1)) {
      throw IoError("loss tables line " + std::to_string(line_no) + ": malformed");
    }
    auto [hit, fresh] = by_hash.emplace(hash, out.size());
    if (fresh) out.push_back({hash, {}});
    const std::size_t point = hit->second;
    auto [rit, new_run] = by_run.emplace(std::make_pair(point, std::make_tuple(t1, t2)),
                                         out[point].tables.size());
    if (new_run) {
      LossTable t;
      t.n = n;
      t.m = m;
      t.t1_index = t1;
      t.t2_index = t2;
      t.quads.assign(n * m, LossQuad{});
      t.masks.s_tilde.assign(n, 0);
      t.masks.s.assign(m, 0);
      out[point].tables.push_back(std::move(t));
    }
    auto& t = out[point].tables[rit->second];
    if (t.n != n || t.m != m) throw IoError("loss tables line " + std::to_string(line_no) + ": shape");
    t.masks.s_tilde[i] = static_cast<std::uint8_t>(st);
    t.masks.s[j] = static_cast<std::uint8_t>(s);
    t.quad(i, j) = q;
  }
  return out;
}

std::vector<ArchivedTables> read_loss_tables(const std::filesystem::path& path) {
  return parse_loss_tables(slurp(path));
}

std::string format_report_json(const ExperimentConfig& cfg, const ExperimentResult& result) {
  using nlohmann::ordered_json;
  ordered_json root;
  root["seed"] = cfg.seed;
  root["t1"] = cfg.t1;
  root["t2"] = cfg.t2;
  root["trainer"] = std::string(to_string(cfg.trainer));
  root["task_mode"] = std::string(to_string(cfg.env.mode));
  root["estimator"] = cfg.estimator.miller_madow ? "plug-in + Miller-Madow" : "plug-in";
  root["constant_variant"] = std::string(to_string(cfg.params.variant));
  root["covariance_estimate"] =
      "single realized trajectory, " + std::to_string(cfg.sgld.cov_resamples) +
      " Monte-Carlo gradient resamples per step";
  ordered_json points = ordered_json::array();
  for (const auto& p : result.points) {
    const auto& r = p.report;
    ordered_json j;
    j["config_hash"] = r.config_hash;
    j["environment"] = r.environment;
    j["n"] = r.n;
    j["m"] = r.m;
    j["runs"] = r.runs;
    j["failures"] = r.failures;
    j["empirical_risk"] = r.empirical_risk;
    j["test_risk"] = r.test_risk;
    j["gap"] = r.gap.gap;
    j["gap_stderr"] = r.gap.std_err;
    ordered_json bounds = ordered_json::array();
    for (const auto& b : r.bounds) {
      bounds.push_back({{"name", b.name}, {"value", b.value}, {"estimator", b.estimator}});
    }
    j["bounds"] = bounds;
    j["components"] = r.components;
    ordered_json failures = ordered_json::array();
    for (const auto& rec : p.records) {
      if (rec.failed) {
        failures.push_back({{"t1", rec.t1_index}, {"t2", rec.t2_index}, {"reason", rec.failure}});
      }
    }
    j["failed_runs"] = failures;
    points.push_back(j);
  }
  root["points"] = points;
  return root.dump(2) + "\n";
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result,
                   const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<BoundReport> reports;
  for (const auto& p : result.points) reports.push_back(p.report);
  write_csv(reports, dir / "results.csv");
  write_loss_tables(result, dir / "loss_tables.txt");
  dump(format_report_json(cfg, result), dir / "report.json");
}

}  // namespace metagen
