#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mgmt {

inline constexpr const char* kManifestHeader = "case_id,image_path,mask_path,label,split";

struct ManifestRow {
    std::string case_id;
    std::string image_path;
    std::string mask_path;
    int label = 0;
    std::string split;  // train, val or test
};

/// CSV case list. Relative paths resolve against the manifest's directory.
struct Manifest {
    std::filesystem::path base_dir;
    std::vector<ManifestRow> rows;

    std::filesystem::path resolve(const std::string& p) const;
    std::vector<ManifestRow> split(const std::string& name) const;
};

/// Throws ConfigError on a missing file, wrong header, duplicate case ids,
/// labels other than 0/1 or unknown splits.
Manifest read_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);

} // namespace mgmt
