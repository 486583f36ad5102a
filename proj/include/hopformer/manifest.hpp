// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace hopformer {

struct ManifestEntry {
  std::string path;
  std::uint64_t content_hash;
};

/// Writes a run manifest: command, seed, timestamp, the full config snapshot,
/// and content hashes of every input and produced artifact. Enough to
/// reproduce the run and to detect stale caches.
void write_manifest(const std::string& path, const std::string& command, std::uint64_t seed,
                    const nlohmann::json& config, const std::vector<ManifestEntry>& inputs,
                    const std::vector<ManifestEntry>& outputs);

}  // namespace hopformer
