#pragma once

#include <cstdint>
#include <string>

#include "cangat/model.hpp"
#include "cangat/train.hpp"

namespace cangat {

// Everything a pipeline run needs, loadable from one JSON file; command-line
// flags override individual fields after loading.
struct RunConfig {
    TrainConfig train;
    ArchConfig teacher = teacher_arch();
    ArchConfig student = student_arch();
    double threshold = 0.5; // detection decision threshold
};

// Strict parse: unknown keys are configuration errors.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text, const std::string& origin);

// Canonical single-line JSON echo (sorted keys) of the effective config.
std::string config_to_json(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

// Relative paths resolve against $CANGAT_DATA_DIR when it is set.
std::string resolve_path(const std::string& path);

} // namespace cangat
