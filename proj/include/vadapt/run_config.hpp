#pragma once

#include <map>
#include <string>

namespace vadapt {

// Line-based `key = value` file with '#' comments. Later keys override
// earlier ones.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_run_config(const std::string& text);
KeyValues read_run_config(const std::string& path);

}  // namespace vadapt
