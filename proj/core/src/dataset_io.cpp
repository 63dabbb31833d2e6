#include "countlab/dataset_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "countlab/errors.hpp"
#include "countlab/file_util.hpp"

namespace countlab::dyck {

void write_split(std::ostream& out, const DatasetSplit& split) {
  for (const auto& w : split.words) out << w.str() << '\n';
}

std::string format_split(const DatasetSplit& split) {
  std::ostringstream out;
  write_split(out, split);
  return out.str();
}

DatasetSplit read_split(std::istream& in, SplitName name) {
  DatasetSplit split{name, {}};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) throw ParseError(lineno, "empty line");
    try {
      split.words.push_back(DyckWord::parse(line));
    } catch (const NegativeDepth& e) {
      throw ParseError(lineno, "negative depth at index " + std::to_string(e.index()));
    } catch (const UnbalancedWord& e) {
      throw ParseError(lineno, "unbalanced word (final depth " +
                                   std::to_string(e.final_depth()) + ")");
    } catch (const InvalidArgument& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return split;
}

DatasetSplit load_split(const std::filesystem::path& path, SplitName name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  return read_split(in, name);
}

void save_split(const std::filesystem::path& path, const DatasetSplit& split) {
  write_file_atomic(path, format_split(split));
}

std::string manifest_to_json(const SplitManifest& m) {
  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["count"] = m.count;
  j["minLen"] = m.min_len;
  j["maxLen"] = m.max_len;
  j["pcfgP"] = m.pcfg_p;
  j["pcfgQ"] = m.pcfg_q;
  j["seed"] = m.seed;
  j["file"] = m.file;
  return j.dump(2) + "\n";
}

SplitManifest manifest_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SplitManifest m;
    m.name = j.at("name").get<std::string>();
    m.count = j.at("count").get<std::size_t>();
    m.min_len = j.at("minLen").get<std::size_t>();
    m.max_len = j.at("maxLen").get<std::size_t>();
    m.pcfg_p = j.at("pcfgP").get<double>();
    m.pcfg_q = j.at("pcfgQ").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.file = j.at("file").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed split manifest: ") + e.what());
  }
}

}  // namespace countlab::dyck
