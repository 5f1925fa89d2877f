// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace loadcast::csv {

/// Splits one record. Double-quoted fields may contain the delimiter and
/// escaped quotes ("").
std::vector<std::string> split_line(std::string_view line, char delimiter = ',');

/// Quotes the field only when it contains the delimiter, a quote or a line
/// break.
std::string quote(std::string_view field, char delimiter = ',');

/// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

/// Strict full-field parse; surrounding blanks are tolerated.
std::optional<double> parse_double(std::string_view field);
std::optional<long long> parse_int(std::string_view field);

std::string join(const std::vector<std::string> &fields, char delimiter = ',');

} // namespace loadcast::csv
