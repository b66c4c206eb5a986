#pragma once

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace graphik {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestName = "manifest.json";

/// Hex FNV-1a 64 of the file contents. Throws IoError if unreadable.
std::string file_digest(const std::string& path);

/// Record of one CLI invocation, written as manifest.json into its output
/// directory.
struct RunManifest {
    std::string subcommand;
    nlohmann::json config = nlohmann::json::object();  ///< resolved options
    std::vector<std::string> argv;  ///< options that reproduce the run (threads excluded)
    std::uint64_t seed = 0;
    struct File {
        std::string path;
        std::string digest;
    };
    std::vector<File> inputs;
    std::vector<File> outputs;  ///< relative to the output directory
    std::string tool_version = kToolVersion;
    double wall_clock_s = 0.0;
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);
RunManifest read_manifest(const std::string& path);
void write_manifest(const RunManifest& manifest, const std::string& dir);

/// Checks `path` against the manifest in its directory, if there is one.
/// Throws PreconditionError on a digest mismatch.
void verify_input(const std::string& path);

/// Runs one subcommand (argv[0] is the program name). Returns 0 on success,
/// 1 on runtime or precondition failures and 2 on usage errors.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace graphik
