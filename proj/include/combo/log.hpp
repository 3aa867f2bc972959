// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

namespace combo {

/// Thread-safe warning sink on stderr. Silenced sinks still count.
void log_warning(std::string_view message);
std::size_t warning_count();
void set_warnings_quiet(bool quiet);

}  // namespace combo
