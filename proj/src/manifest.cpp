#include "mgmt/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "mgmt/errors.hpp"

namespace mgmt {
namespace {

std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    return s.substr(i);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

} // namespace

std::filesystem::path Manifest::resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
}

std::vector<ManifestRow> Manifest::split(const std::string& name) const {
    std::vector<ManifestRow> out;
    for (const auto& r : rows)
        if (r.split == name) out.push_back(r);
    return out;
}

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
    Manifest m;
    m.base_dir = base_dir;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != kManifestHeader)
        throw ConfigError(std::string("manifest header must be '") + kManifestHeader + "'");
    std::set<std::string> ids;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(trim(line));
        const std::string where = "manifest line " + std::to_string(lineno);
        if (cells.size() != 5) throw ConfigError(where + ": expected 5 columns");
        ManifestRow r{cells[0], cells[1], cells[2], 0, cells[4]};
        if (r.case_id.empty()) throw ConfigError(where + ": empty case_id");
        if (!ids.insert(r.case_id).second) throw ConfigError(where + ": duplicate case_id " + r.case_id);
        if (cells[3] != "0" && cells[3] != "1") throw ConfigError(where + ": label must be 0 or 1");
        r.label = cells[3] == "1";
        if (r.split != "train" && r.split != "val" && r.split != "test")
            throw ConfigError(where + ": split must be train, val or test");
        m.rows.push_back(std::move(r));
    }
    return m;
}

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read manifest " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str(), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write manifest " + path.string());
    out << kManifestHeader << '\n';
    for (const auto& r : rows)
        out << r.case_id << ',' << r.image_path << ',' << r.mask_path << ',' << r.label << ',' << r.split << '\n';
}

} // namespace mgmt
