#pragma once

namespace spathmm {

/// Full command-line entry point (subcommands: fit, simulate, decode, predict,
/// changepoint, elpd, report). Never throws; returns the process exit code:
/// 0 success, 2 configuration error, 3 data error, 4 numerical failure,
/// 5 missing artifacts. Errors print one machine-parsable line to stderr.
int run_cli(int argc, const char* const* argv);

}  // namespace spathmm
