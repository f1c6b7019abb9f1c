#pragma once

#include <filesystem>

#include "json.hpp"

#include "pseg/model.hpp"

namespace pseg {

// JSON model descriptions. Three forms, switched on "type":
//   "block"         -> build_block_model convenience (load only)
//   "pointwise"     -> general per-pixel mixture tables
//   "latent_source" -> canonical label images (inline or by file path) with
//                      perturbation strength alpha
// Relative label-image paths resolve against `base_dir`. Unknown keys are
// rejected at every level. save_model always emits the general forms with
// label images inline, so a saved file is self-contained.

GenerativeModel parse_model_json(const nlohmann::json& doc,
                                 const std::filesystem::path& base_dir);
GenerativeModel load_model(const std::filesystem::path& file);

nlohmann::json model_json(const GenerativeModel& model);
void save_model(const std::filesystem::path& file, const GenerativeModel& model);

}  // namespace pseg
