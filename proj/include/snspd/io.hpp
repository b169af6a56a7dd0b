// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace snspd {

// Write-then-rename so readers never observe a partial file.
void write_text_atomic(const std::string& path, const std::string& content);

std::string read_text(const std::string& path);

bool file_exists(const std::string& path);

void ensure_directory(const std::string& path);

std::string path_join(const std::string& dir, const std::string& name);

}  // namespace snspd
