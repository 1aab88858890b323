#pragma once

#include <cstdint>
#include <map>
#include <string>

// UTF-8 key=value configuration files. Lines starting with '#' and blank
// lines are ignored; keys are kept sorted so serialization is canonical.

namespace mtk::config {

using Map = std::map<std::string, std::string>;

Map parse_string(const std::string& text);
Map parse_file(const std::string& path);
std::string to_string(const Map& m);
void write_file(const std::string& path, const Map& m);

int64_t get_int(const Map& m, const std::string& key, int64_t fallback);
uint64_t get_u64(const Map& m, const std::string& key, uint64_t fallback);
double get_double(const Map& m, const std::string& key, double fallback);
std::string get_str(const Map& m, const std::string& key, const std::string& fallback);

// canonical FNV-1a digest of the serialized map, reported beside metrics
uint64_t digest(const Map& m);

}  // namespace mtk::config
