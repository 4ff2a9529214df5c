#pragma once

#include <filesystem>

#include "crowd/config.hpp"

namespace crowd {

// Exit codes shared by the CLI: 0 success, 2 configuration error,
// 3 numerical/stability error, 4 I/O error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerics = 3;
inline constexpr int kExitIo = 4;

int cmd_simulate(const RunConfig& cfg);
int cmd_make_synthetic(const RunConfig& cfg);
int cmd_estimate(const RunConfig& cfg, const std::filesystem::path& observations_dir);
int cmd_compare(const std::filesystem::path& run_a, const std::filesystem::path& run_b,
                const std::filesystem::path& out_dir);

}  // namespace crowd
