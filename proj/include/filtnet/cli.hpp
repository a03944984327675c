#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "filtnet/core_model.hpp"
#include "filtnet/stream_engine.hpp"

namespace filtnet::cli {

/// Runs one subcommand. `args` excludes the program name. Returns the exit code;
/// diagnostics go to `err`, results to `out` unless a path was given.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

/// 14967 -> "14,967"
std::string with_thousands(long long v);

/// Human-readable per-stage parameter and operation table.
void print_complexity_table(std::ostream& out, const Dims& dims);
std::string complexity_json(const Dims& dims);

}  // namespace filtnet::cli
