#pragma once

#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "coverlab/config.hpp"
#include "coverlab/errors.hpp"

namespace coverlab::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,       // anything not classified below
    kUsage = 2,         // bad command line
    kConfig = 3,        // config file unreadable or fails the schema
    kMissingInput = 4,  // upstream artifact not found
    kFormat = 5,        // artifact unreadable or from another format version
    kWrite = 6,         // output could not be written
    kRuntime = 7,       // numeric failure or violated output invariant
};

/// An upstream artifact (dataset, checkpoint) does not exist.
class MissingArtifact : public Error {
public:
    using Error::Error;
};

/// A freshly written output failed its sanity checks.
class InvariantViolation : public Error {
public:
    using Error::Error;
};

int exit_code_for(const std::exception& e);

/// --out wins, then COVERLAB_OUT, then the config's output_dir.
std::filesystem::path output_root(const std::optional<std::string>& out_flag, const RunConfig& config);

/// Parses argv and runs one subcommand. Reports to `out`/`err` and never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace coverlab::cli
