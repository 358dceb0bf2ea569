#include "lrvga/libsvm.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lrvga/errors.hpp"
#include "lrvga/log.hpp"

namespace lrvga {

namespace {

bool parse_double(const std::string& token, double& out) {
  if (token.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(token.c_str(), &end);
  return errno == 0 && end == token.c_str() + token.size() && std::isfinite(out);
}

bool parse_index(const std::string& token, long& out) {
  if (token.empty() || token[0] == '-' || token[0] == '+') return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtol(token.c_str(), &end, 10);
  return errno == 0 && end == token.c_str() + token.size();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

LibsvmData parse_libsvm(std::istream& in, const LibsvmOptions& options) {
  struct Row {
    std::vector<std::pair<long, double>> entries;
    double label;
  };
  std::vector<Row> rows;
  long max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  bool warned = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string token;
    if (!(tokens >> token)) continue;

    Row row;
    if (!parse_double(token, row.label)) throw ParseError("bad label '" + token + "'", line_no);
    if (options.map_signed_labels) {
      if (row.label == -1.0) row.label = 0.0;
      else if (row.label == 1.0) row.label = 1.0;
    }
    long prev = 0;
    while (tokens >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos) throw ParseError("expected idx:val, got '" + token + "'", line_no);
      long idx = 0;
      double val = 0.0;
      if (!parse_index(token.substr(0, colon), idx) || idx < 1) {
        throw ParseError("bad feature index in '" + token + "'", line_no);
      }
      if (!parse_double(token.substr(colon + 1), val)) {
        throw ParseError("bad feature value in '" + token + "'", line_no);
      }
      if (idx <= prev && !warned) {
        log::warn("parse_libsvm: line " + std::to_string(line_no) +
                  " has non-ascending feature indices");
        warned = true;
      }
      prev = idx;
      row.entries.emplace_back(idx, val);
      max_index = std::max(max_index, idx);
    }
    std::sort(row.entries.begin(), row.entries.end());
    for (std::size_t i = 1; i < row.entries.size(); ++i) {
      if (row.entries[i].first == row.entries[i - 1].first) {
        throw ParseError("duplicate feature index " + std::to_string(row.entries[i].first), line_no);
      }
    }
    rows.push_back(std::move(row));
  }
  if (in.bad()) throw IoError("parse_libsvm: read failure");

  LibsvmData data;
  data.dim = max_index;
  data.observations.reserve(rows.size());
  for (Row& row : rows) {
    SparseVector x(max_index);
    x.reserve(static_cast<Index>(row.entries.size()));
    for (const auto& [idx, val] : row.entries) x.insertBack(idx - 1) = val;
    data.observations.push_back(Observation{std::move(x), row.label});
  }
  return data;
}

LibsvmData parse_libsvm(const std::filesystem::path& path, const LibsvmOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_libsvm(in, options);
}

void write_libsvm(std::ostream& out, const std::vector<Observation>& observations) {
  for (const Observation& obs : observations) {
    out << fmt(obs.label.value_or(0.0));
    if (obs.is_sparse()) {
      for (SparseVector::InnerIterator it(std::get<SparseVector>(obs.input)); it; ++it) {
        out << ' ' << it.index() + 1 << ':' << fmt(it.value());
      }
    } else {
      const VectorXd& x = std::get<VectorXd>(obs.input);
      for (Index i = 0; i < x.size(); ++i) {
        if (x(i) != 0.0) out << ' ' << i + 1 << ':' << fmt(x(i));
      }
    }
    out << '\n';
  }
}

void write_libsvm(const std::filesystem::path& path, const std::vector<Observation>& observations) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_libsvm(out, observations);
  if (!out) throw IoError("write failed: " + path.string());
}

void write_metadata(const std::filesystem::path& path, const Metadata& meta) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [key, value] : meta) {
    if (key.find('=') != std::string::npos || key.find('\n') != std::string::npos ||
        value.find('\n') != std::string::npos) {
      throw std::invalid_argument("metadata keys may not contain '=' or newlines");
    }
    out << key << '=' << value << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Metadata read_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Metadata meta;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line_no);
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

}  // namespace lrvga
