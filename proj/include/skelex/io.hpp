#pragma once

// io.hpp - JSON serialization of every file format: demonstrations,
// events, labels, assignments, task models, scenes, plans and configs.
// All writers use insertion-ordered JSON so outputs are byte-stable.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skelex/demo.hpp"
#include "skelex/graph.hpp"
#include "skelex/inference.hpp"
#include "skelex/matcher.hpp"
#include "skelex/skeleton.hpp"
#include "skelex/synthgen.hpp"

namespace skelex {

using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "skelex/1";

ordered_json demo_to_json(const Demonstration& demo);
Demonstration demo_from_json(const nlohmann::json& j);

ordered_json events_to_json(const std::vector<Event>& events);
std::vector<Event> events_from_json(const nlohmann::json& j);

ordered_json labels_to_json(const GroundTruth& truth);
GroundTruth labels_from_json(const nlohmann::json& j);

ordered_json assignment_to_json(const Assignment& a, const std::vector<DemoFeatures>& demos);

ordered_json skeleton_to_json(const TaskSkeleton& skeleton);
TaskSkeleton skeleton_from_json(const nlohmann::json& j);

ordered_json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

ordered_json plan_to_json(const std::vector<ActionStep>& actions);

ordered_json config_to_json(const Config& cfg);
Config config_from_json(const nlohmann::json& j, Config base = {});

TaskTemplate template_from_json(const nlohmann::json& j);
ordered_json template_to_json(const TaskTemplate& tmpl);

/// Writes with a trailing newline, creating parent directories.
void write_json(const std::filesystem::path& path, const ordered_json& j);

/// Parses a file; errors mention the path. Rejects schema fields other
/// than "skelex/1".
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace skelex
