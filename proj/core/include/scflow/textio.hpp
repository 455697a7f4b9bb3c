#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace scflow::textio {

/// Locale-independent decimal with 9 significant digits. Non-finite values
/// are written as "inf", "-inf" or "nan".
std::string format_number(double v);

/// Parses a locale-independent decimal; throws InvalidArgument on junk.
double parse_number(std::string_view text);

/// One vector per line, comma separated. Blank lines are skipped.
std::vector<std::vector<double>> read_vectors_csv(const std::filesystem::path& path);
std::vector<std::vector<double>> parse_vectors_csv(std::string_view text);
std::string format_vectors_csv(const std::vector<std::vector<double>>& rows);

/// Writes the whole string or throws IoError.
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace scflow::textio
