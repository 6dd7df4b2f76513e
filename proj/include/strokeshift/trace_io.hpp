#pragma once

#include <filesystem>

#include <json.hpp>

#include "strokeshift/optimizer.hpp"

namespace strokeshift {

nlohmann::json theta_to_json(const Strokes& strokes);
Strokes theta_from_json(const nlohmann::json& doc);

void write_theta(const std::filesystem::path& path, const Strokes& strokes);
Strokes read_theta(const std::filesystem::path& path);

/// trace.json (scalars per snapshot) plus theta_<iteration>.json per snapshot.
void write_run_trace(const std::filesystem::path& run_dir, const RunTrace& trace,
                     const PhasePlan& plan);

/// The theta_<iteration>.json with the largest iteration. Throws if none exists.
std::filesystem::path final_theta_path(const std::filesystem::path& run_dir);

}  // namespace strokeshift
