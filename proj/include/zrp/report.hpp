#ifndef ZRP_REPORT_HPP
#define ZRP_REPORT_HPP

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "zrp/errors.hpp"
#include "zrp/rate_function.hpp"

namespace zrp {

/// 17 significant digits: enough to round-trip IEEE doubles exactly.
inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {
inline std::string csv_cell(double v) { return format_g17(v); }
inline std::string csv_cell(int v) { return std::to_string(v); }
inline std::string csv_cell(long v) { return std::to_string(v); }
inline std::string csv_cell(unsigned long v) { return std::to_string(v); }
inline std::string csv_cell(unsigned long long v) { return std::to_string(v); }
inline std::string csv_cell(bool v) { return v ? "1" : "0"; }
inline std::string csv_cell(const std::string& v) { return v; }
inline std::string csv_cell(const char* v) { return v; }
}  // namespace detail

/// Deterministic CSV emission; every line (including the last) is
/// newline-terminated.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path,
            const std::vector<std::string>& header)
      : path_(path), out_(path) {
    if (!out_) throw Error("cannot open for writing: " + path.string());
    write_cells(header);
  }

  template <typename... Ts>
  void row(const Ts&... vals) {
    write_cells({detail::csv_cell(vals)...});
  }

  void close() { out_.close(); }

 private:
  void write_cells(const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out_ << ',';
      out_ << cells[c];
    }
    out_ << '\n';
    if (!out_) throw Error("write failed: " + path_.string());
  }

  std::filesystem::path path_;
  std::ofstream out_;
};

/// FNV-1a over the canonical (sorted-key, no-whitespace) JSON dump.
inline std::uint64_t config_hash(const nlohmann::json& config) {
  std::string dump = config.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

struct ExperimentConfig {
  std::string experiment;
  RateFunction rate = RateFunction::power(1.0);
  int n = 0;
  int m = 0;
  std::vector<int> m_grid;
  std::optional<double> rho;
  std::string engine = "gillespie";
  long paths = 1000;
  std::vector<double> t_grid;
  double epsilon = 0.25;
  std::uint64_t seed = 1;
  std::filesystem::path out = ".";
  nlohmann::json raw;  // config echo for the manifest
};

inline RateFunction parse_rate(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("form"))
    throw InvalidArgument("rate spec must be an object with a 'form' field");
  std::string form = j.at("form").get<std::string>();
  if (form == "power") return RateFunction::power(j.at("alpha").get<double>());
  if (form == "table")
    return RateFunction::table(j.at("values").get<std::vector<double>>());
  throw InvalidArgument("unknown rate form: " + form);
}

inline nlohmann::json rate_to_json(const RateFunction& r) {
  if (r.is_power()) return {{"form", "power"}, {"alpha", r.alpha()}};
  return {{"form", "table"}, {"values", r.table_values()}};
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  ExperimentConfig c;
  c.raw = j;
  if (j.contains("schema_version") &&
      j.at("schema_version").get<int>() != kSchemaVersion)
    throw InvalidArgument("unsupported schema_version");
  if (!j.contains("experiment"))
    throw InvalidArgument("config missing 'experiment'");
  c.experiment = j.at("experiment").get<std::string>();
  if (j.contains("rate")) c.rate = parse_rate(j.at("rate"));
  if (j.contains("n")) c.n = j.at("n").get<int>();
  if (j.contains("m")) c.m = j.at("m").get<int>();
  if (j.contains("m_grid")) c.m_grid = j.at("m_grid").get<std::vector<int>>();
  if (j.contains("rho")) c.rho = j.at("rho").get<double>();
  if (j.contains("engine")) c.engine = j.at("engine").get<std::string>();
  if (j.contains("paths")) c.paths = j.at("paths").get<long>();
  if (j.contains("t_grid"))
    c.t_grid = j.at("t_grid").get<std::vector<double>>();
  if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out")) c.out = j.at("out").get<std::string>();
  if (c.engine != "c1" && c.engine != "c2" && c.engine != "gillespie")
    throw InvalidArgument("engine must be one of c1, c2, gillespie");
  if (c.paths <= 0) throw InvalidArgument("paths must be positive");
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0))
    throw InvalidArgument("epsilon must lie in (0, 1)");
  return c;
}

inline void write_manifest(const ExperimentConfig& config,
                           const nlohmann::json& summary) {
  nlohmann::json manifest;
  manifest["schema_version"] = kSchemaVersion;
  manifest["experiment"] = config.experiment;
  manifest["config"] = config.raw;
  manifest["config_hash"] = config_hash(config.raw);
  manifest["seed"] = config.seed;
  manifest["version"] = kArtifactVersion;
  auto now = std::chrono::system_clock::now();
  manifest["wall_clock_unix_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(
          now.time_since_epoch())
          .count();
  manifest["summary"] = summary;
  std::ofstream out(config.out / "manifest.json");
  if (!out) throw Error("cannot write manifest in " + config.out.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace zrp

#endif
