#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lrvga/errors.hpp"
#include "lrvga/experiments.hpp"

namespace lrvga {

namespace {

using nlohmann::json;

const char* const kCsvHeader = "checkpoint,method,p,K,kl,stderr,wall_ms";

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T get_as(const json& value, const char* key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

template <typename T>
std::vector<T> scalar_or_list(const json& value, const char* key) {
  if (value.is_array()) return get_as<std::vector<T>>(value, key);
  return {get_as<T>(value, key)};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

double parse_number(const std::string& field, std::size_t line) {
  if (field == "nan") return std::nan("");
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw ParseError("bad number '" + field + "'", static_cast<long>(line));
    return v;
  } catch (const std::logic_error&) {
    throw ParseError("bad number '" + field + "'", static_cast<long>(line));
  }
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["experiment"] = to_string(cfg.kind);
  j["d"] = cfg.d;
  j["p"] = cfg.p;
  j["n"] = cfg.n;
  j["k_hess"] = cfg.k_hess;
  j["k_grad"] = cfg.k_grad;
  j["inner_loops"] = cfg.inner_loops;
  j["inner_tolerance"] = cfg.inner_tolerance;
  j["sigma0"] = cfg.sigma0;
  j["eps_init"] = cfg.eps_init;
  j["c"] = cfg.c;
  j["seed"] = cfg.seed;
  j["scheme"] = to_string(cfg.scheme);
  j["fresh_samples"] = cfg.fresh_samples;
  j["dataset"] = cfg.dataset;
  j["map_signed_labels"] = cfg.map_signed_labels;
  j["checkpoints"] = cfg.checkpoints;
  j["out"] = cfg.out;
  j["methods"] = cfg.methods;
  j["p_true"] = cfg.p_true;
  j["batch_passes"] = cfg.batch_passes;
  j["theta_scale"] = cfg.theta_scale;
  j["kl_samples"] = cfg.kl_samples;
  j["record_timing"] = cfg.record_timing;
  return j.dump(2) + "\n";
}

ExperimentConfig apply_config_json(ExperimentConfig cfg, std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const char* k = key.c_str();
    if (key == "experiment") cfg.kind = parse_experiment_kind(get_as<std::string>(value, k));
    else if (key == "d") cfg.d = get_as<Index>(value, k);
    else if (key == "p") cfg.p = scalar_or_list<Index>(value, k);
    else if (key == "n") cfg.n = get_as<long>(value, k);
    else if (key == "k_hess") cfg.k_hess = scalar_or_list<Index>(value, k);
    else if (key == "k_grad") cfg.k_grad = scalar_or_list<Index>(value, k);
    else if (key == "inner_loops") cfg.inner_loops = get_as<int>(value, k);
    else if (key == "inner_tolerance") cfg.inner_tolerance = get_as<double>(value, k);
    else if (key == "sigma0") cfg.sigma0 = scalar_or_list<double>(value, k);
    else if (key == "eps_init") cfg.eps_init = get_as<double>(value, k);
    else if (key == "c") cfg.c = get_as<double>(value, k);
    else if (key == "seed") cfg.seed = get_as<std::uint64_t>(value, k);
    else if (key == "scheme") cfg.scheme = parse_scheme(get_as<std::string>(value, k));
    else if (key == "fresh_samples") cfg.fresh_samples = get_as<bool>(value, k);
    else if (key == "dataset") cfg.dataset = get_as<std::string>(value, k);
    else if (key == "map_signed_labels") cfg.map_signed_labels = get_as<bool>(value, k);
    else if (key == "checkpoints") cfg.checkpoints = get_as<long>(value, k);
    else if (key == "out") cfg.out = get_as<std::string>(value, k);
    else if (key == "methods") cfg.methods = scalar_or_list<std::string>(value, k);
    else if (key == "p_true") cfg.p_true = get_as<Index>(value, k);
    else if (key == "batch_passes") cfg.batch_passes = get_as<int>(value, k);
    else if (key == "theta_scale") cfg.theta_scale = get_as<double>(value, k);
    else if (key == "kl_samples") cfg.kl_samples = get_as<Index>(value, k);
    else if (key == "record_timing") cfg.record_timing = get_as<bool>(value, k);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  return cfg;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const ResultRow& r : rows) {
    if (r.method.find_first_of(",\n\"") != std::string::npos) {
      throw std::invalid_argument("method names may not contain commas, quotes or newlines");
    }
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.3f", r.wall_ms);
    out += std::to_string(r.checkpoint) + "," + r.method + "," + std::to_string(r.p) + "," +
           std::to_string(r.k) + "," + num(r.kl) + "," + num(r.std_error) + "," + wall + "\n";
  }
  return out;
}

std::vector<ResultRow> parse_results_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ParseError("missing results header", 1);
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7) throw ParseError("expected 7 fields", static_cast<long>(line_no));
    ResultRow r;
    r.checkpoint = static_cast<long>(parse_number(fields[0], line_no));
    r.method = fields[1];
    r.p = static_cast<Index>(parse_number(fields[2], line_no));
    r.k = static_cast<Index>(parse_number(fields[3], line_no));
    r.kl = parse_number(fields[4], line_no);
    r.std_error = parse_number(fields[5], line_no);
    r.wall_ms = parse_number(fields[6], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

void emit_report(const RunReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  write_file(dir / "results.csv", results_csv(report.rows));
  write_file(dir / "config.json", config_to_json(report.config));

  if (!report.sampling.empty()) {
    std::string csv =
        "sigma0,K,probit,ensemble,dense,trace_exact,trace_ensemble,trace_dense\n";
    for (const SamplingRow& s : report.sampling) {
      csv += num(s.sigma0) + "," + std::to_string(s.k) + "," + num(s.probit) + "," +
             num(s.ensemble) + "," + num(s.dense) + "," + num(s.trace_exact) + "," +
             num(s.trace_ensemble) + "," + num(s.trace_dense) + "\n";
    }
    write_file(dir / "sampling.csv", csv);
  }

  std::ostringstream s;
  s << "experiment: " << to_string(report.config.kind) << "\n";
  s << "rows: " << report.rows.size() << "\n";
  s << "input_scale: " << num(report.input_scale) << "\n";
  s << "memory_analytic_bytes: " << report.memory.analytic_bytes << "\n";
  if (report.memory.peak_aux_bytes >= 0) {
    s << "memory_peak_aux_bytes: " << report.memory.peak_aux_bytes << "\n";
    s << "memory_largest_allocation: " << report.memory.largest_allocation << "\n";
  }
  for (const auto& [method, ms] : report.time_per_step_ms) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.4f", ms);
    s << "ms_per_step " << method << ": " << buf << "\n";
  }
  // Final values per method (last checkpoint).
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const ResultRow& r = report.rows[i];
    bool last = true;
    for (std::size_t j = i + 1; j < report.rows.size(); ++j) {
      const ResultRow& o = report.rows[j];
      if (o.method == r.method && o.p == r.p && o.k == r.k) {
        last = false;
        break;
      }
    }
    if (last) {
      s << "final " << r.method << " p=" << r.p << " K=" << r.k << ": kl=" << num(r.kl)
        << " stderr=" << num(r.std_error) << "\n";
    }
  }
  for (const auto& [key, value] : report.summary) s << key << ": " << value << "\n";
  write_file(dir / "summary.txt", s.str());
}

}  // namespace lrvga
