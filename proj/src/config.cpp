#include "mtk/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mtk/io.hpp"

namespace mtk::config {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

Map parse_string(const std::string& text) {
  Map m;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value, got \"" + t + "\"");
    m[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return m;
}

Map parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrorKind::open_failed, path, "cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

std::string to_string(const Map& m) {
  std::string out;
  for (const auto& [k, v] : m) out += k + "=" + v + "\n";
  return out;
}

void write_file(const std::string& path, const Map& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, path, "cannot write config");
  out << to_string(m);
}

int64_t get_int(const Map& m, const std::string& key, int64_t fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : std::stoll(it->second);
}

uint64_t get_u64(const Map& m, const std::string& key, uint64_t fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : std::stoull(it->second);
}

double get_double(const Map& m, const std::string& key, double fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : std::stod(it->second);
}

std::string get_str(const Map& m, const std::string& key, const std::string& fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : it->second;
}

uint64_t digest(const Map& m) {
  std::string s = to_string(m);
  return fnv1a(s.data(), s.size());
}

}  // namespace mtk::config
