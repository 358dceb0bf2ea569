#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "lrvga/gaussian.hpp"

namespace lrvga {

struct LibsvmOptions {
  // Map labels -1/+1 to 0/1 (other labels are left alone).
  bool map_signed_labels = false;
};

struct LibsvmData {
  std::vector<Observation> observations;  // sparse inputs
  Index dim = 0;                          // largest feature index seen
};

// Lines "label idx:val idx:val ..." with 1-based indices. Blank lines and
// '#' comments are skipped. Throws ParseError with the 1-based line number on
// malformed input, IoError if the file cannot be read. Out-of-order indices
// are accepted with a warning; duplicates are a parse error.
LibsvmData parse_libsvm(std::istream& in, const LibsvmOptions& options = {});
LibsvmData parse_libsvm(const std::filesystem::path& path, const LibsvmOptions& options = {});

// Writes with %.17g so that a re-parse is exact. Unlabelled rows get 0.
void write_libsvm(std::ostream& out, const std::vector<Observation>& observations);
void write_libsvm(const std::filesystem::path& path, const std::vector<Observation>& observations);

// key=value sidecar for generated datasets.
using Metadata = std::map<std::string, std::string>;
void write_metadata(const std::filesystem::path& path, const Metadata& meta);
Metadata read_metadata(const std::filesystem::path& path);

}  // namespace lrvga
