// SPDX-License-Identifier: Apache-2.0
#include "hopformer/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "hopformer/common.hpp"

namespace hopformer {

namespace {

std::string iso_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json entries_json(const std::vector<ManifestEntry>& entries) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    arr.push_back({{"path", e.path}, {"fnv1a64", hex64(e.content_hash)}});
  }
  return arr;
}

}  // namespace

void write_manifest(const std::string& path, const std::string& command, std::uint64_t seed,
                    const nlohmann::json& config, const std::vector<ManifestEntry>& inputs,
                    const std::vector<ManifestEntry>& outputs) {
  nlohmann::json m;
  m["command"] = command;
  m["seed"] = seed;
  m["timestamp"] = iso_utc_now();
  m["config"] = config;
  m["inputs"] = entries_json(inputs);
  m["outputs"] = entries_json(outputs);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << m.dump(2) << "\n";
}

}  // namespace hopformer
