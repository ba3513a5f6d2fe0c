#pragma once

#include "unifix/layers.hpp"

#include <filesystem>

namespace unifix {

/// Binary parameter archive: magic, scalar width, then (name, rows, cols,
/// column-major values) per tensor in list order.
template <typename Scalar>
void save_params(const std::filesystem::path& path, const ParamList<Scalar>& params);

/// Loads into an existing list; names, order and shapes must match exactly.
template <typename Scalar>
void load_params(const std::filesystem::path& path, const ParamList<Scalar>& params);

/// Writes `text` to `path` atomically (temporary file + rename).
void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string read_text_file(const std::filesystem::path& path);

} // namespace unifix
