#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "countlab/dyck.hpp"

namespace countlab::dyck {

// One word per line, '(' and ')' only, LF endings, no header.
void write_split(std::ostream& out, const DatasetSplit& split);
std::string format_split(const DatasetSplit& split);

// Throws ParseError (1-based line) on unknown symbols, negative depth,
// unbalanced or empty lines.
DatasetSplit read_split(std::istream& in, SplitName name);
DatasetSplit load_split(const std::filesystem::path& path, SplitName name);
void save_split(const std::filesystem::path& path, const DatasetSplit& split);

struct SplitManifest {
  std::string name;
  std::size_t count = 0;
  std::size_t min_len = 0;
  std::size_t max_len = 0;
  double pcfg_p = 0.0;
  double pcfg_q = 0.0;
  std::uint64_t seed = 0;
  std::string file;
};

std::string manifest_to_json(const SplitManifest& m);
SplitManifest manifest_from_json(const std::string& text);

}  // namespace countlab::dyck
