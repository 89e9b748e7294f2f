#pragma once

#include <filesystem>
#include <string>

namespace freqpatch::cli {

// Entry point behind the freqpatch tool. Returns the process exit code:
// 0 success, 1 runtime error, 2 usage error, 3 detector training failed.
int run_cli(int argc, const char* const* argv);

// Explicit run_dir when given, else the first unused
// $FREQPATCH_RUN_DIR/<command>-NNN (FREQPATCH_RUN_DIR defaults to "runs").
std::filesystem::path resolve_run_dir(const std::string& explicit_dir, const std::string& command);

}  // namespace freqpatch::cli
