#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace synood {

std::string ascii_lower(std::string_view s);
std::string_view trim(std::string_view s, std::string_view chars = " \t\r\n");
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace synood
