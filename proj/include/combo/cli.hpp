// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "combo/jsonl.hpp"

namespace combo::cli {

/// Defaults for every configuration key. Flags are the dotted key paths with
/// '_' spelled '-', e.g. `--scorer.backend`, `--scoring-mode`, `--sim.p-llm-hallucinated`.
Json default_config();

/// Layers: defaults < environment endpoints < config file < flag overrides.
/// Overrides are keyed by dotted path and parsed to the type of the default.
Json resolve_config(const std::filesystem::path& config_file, const std::map<std::string, std::string>& overrides);

/// Runs `fn(i)` for i in [0, count) on at most `workers` threads. Returns the
/// error message of every item that threw, keyed by index.
std::map<std::size_t, std::string> parallel_for(std::size_t count, std::size_t workers,
                                                const std::function<void(std::size_t)>& fn);

/// Entry point shared by the executable and the tests. Returns the exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace combo::cli
