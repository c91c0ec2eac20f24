#pragma once

// One JSON-lines record per served round:
//   {"t": int, "user": string, "slate": [ids], "impressed": int,
//    "clicks": [ids], "true_p": [reals]}
// true_p is aligned with slate and may be empty for logs without ground truth.

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "slaterank/errors.hpp"

namespace slaterank {

struct RoundLog {
  long long t = 0;
  std::string user;
  std::vector<std::string> slate;
  std::size_t impressed = 0;
  std::vector<std::string> clicks;
  std::vector<double> true_p;

  friend bool operator==(const RoundLog&, const RoundLog&) = default;
};

inline nlohmann::json to_json(const RoundLog& log) {
  return {{"t", log.t},
          {"user", log.user},
          {"slate", log.slate},
          {"impressed", log.impressed},
          {"clicks", log.clicks},
          {"true_p", log.true_p}};
}

inline RoundLog round_log_from_json(const nlohmann::json& j, std::size_t line = 0) {
  RoundLog log;
  try {
    if (!j.is_object()) throw SchemaError(line, "expected a JSON object");
    log.t = j.at("t").get<long long>();
    log.user = j.at("user").get<std::string>();
    log.slate = j.at("slate").get<std::vector<std::string>>();
    const auto impressed = j.at("impressed").get<long long>();
    if (impressed < 0) throw SchemaError(line, "impressed must be >= 0");
    log.impressed = static_cast<std::size_t>(impressed);
    log.clicks = j.at("clicks").get<std::vector<std::string>>();
    if (auto it = j.find("true_p"); it != j.end()) log.true_p = it->get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(line, std::string("round log: ") + e.what());
  }
  if (log.impressed > log.slate.size())
    throw SchemaError(line, "impressed exceeds slate length");
  if (!log.true_p.empty() && log.true_p.size() != log.slate.size())
    throw SchemaError(line, "true_p must align with slate");
  for (const auto& c : log.clicks) {
    bool seen = false;
    for (std::size_t pos = 0; pos < log.impressed; ++pos) seen = seen || log.slate[pos] == c;
    if (!seen) throw SchemaError(line, "click on non-impressed widget " + c);
  }
  return log;
}

inline void write_round_log(std::ostream& out, const RoundLog& log) {
  out << to_json(log).dump() << '\n';
}

inline std::vector<RoundLog> read_round_logs(std::istream& in) {
  std::vector<RoundLog> logs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(lineno, std::string("invalid JSON: ") + e.what());
    }
    logs.push_back(round_log_from_json(j, lineno));
  }
  return logs;
}

}  // namespace slaterank
