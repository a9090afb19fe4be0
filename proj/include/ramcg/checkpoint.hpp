#pragma once

#include "ramcg/trainer.hpp"

#include <filesystem>

namespace ramcg {

/// One tensor per file: text header (format tag, name, rows cols) followed by
/// row-major little-endian 64-bit floats.
void save_tensor(const std::filesystem::path& file, const std::string& name, const Mat& m);
Mat load_tensor(const std::filesystem::path& file, std::string* name_out = nullptr);

/// Directory layout: checkpoint.tsv manifest, tensors/<name>.bin per
/// parameter, masks.tsv (n_theta header, per-task hex bitsets).
void save_checkpoint(const std::filesystem::path& dir, RamCgModel& model);

/// Loads values and committed masks into a model freshly built with the same
/// plan. Restores freeze flags implied by the committed task count.
void load_checkpoint(const std::filesystem::path& dir, RamCgModel& model);

}  // namespace ramcg
