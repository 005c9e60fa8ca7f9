#pragma once

// Command implementations behind the `etobs` executable. Each returns the
// process exit code and writes human-readable output to `out`, diagnostics to
// `err`.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

namespace etobs::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 1,
    kDesignError = 2,
    kSimulationError = 3,
};

struct Options {
    std::filesystem::path config;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;  // overrides profile and initial-condition seeds
    bool no_plots = false;
};

/// Prints alpha, gamma, P, d, epsilon* and, if an M bound is configured, the
/// dwell-time bound. Writes design.json when an output directory is set.
int design(const Options& opt, std::ostream& out, std::ostream& err);

/// Writes arc.csv, certificate.csv, iet.csv, input.csv, summary.txt and
/// (unless disabled) plots.svg.
int simulate(const Options& opt, std::ostream& out, std::ostream& err);

/// Battery sweep; writes sweep.csv and prints the table and trend checks.
int sweep(const Options& opt, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to one of the commands above.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace etobs::cli
