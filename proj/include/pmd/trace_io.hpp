#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "pmd/mirror_descent.hpp"

namespace pmd {

/// One JSON object per recorded iteration:
///   {"t", "gamma", "m", "ess", "data_visited", <metric>...}
/// Wall-clock time is left out so that reruns are byte-identical.
inline nlohmann::ordered_json trace_record_json(const TraceRecord& rec) {
  nlohmann::ordered_json j;
  j["t"] = rec.t;
  j["gamma"] = rec.gamma;
  j["m"] = rec.m;
  j["ess"] = rec.ess;
  j["data_visited"] = rec.data_visited;
  for (const auto& [name, value] : rec.metrics) j[name] = value;
  return j;
}

inline void write_trace_jsonl(std::ostream& os, const InferenceTrace& trace) {
  for (const auto& rec : trace.records) os << trace_record_json(rec).dump() << '\n';
}

inline void write_state_csv(std::ostream& os, const DensityState& state) {
  std::visit([&os](const auto& s) { write_cloud_csv(os, s); }, state);
}

/// Writes via a temporary sibling file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorKind::Io, "cannot open " + tmp.string());
    body(os);
    os.flush();
    if (!os) throw Error(ErrorKind::Io, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace pmd
