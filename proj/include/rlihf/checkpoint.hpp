#pragma once

#include <filesystem>
#include <stdexcept>

#include "rlihf/sac.hpp"

namespace rlihf::agent {

/// Policy file:
///   { "SACP", version u32, action_dim u32, layer_count u32, widths u32[layer_count + 1],
///     hidden activation u8, output activation u8, param_count u64, float32 params[param_count] }
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void save_policy(const std::filesystem::path& path, const Actor& actor);
/// Parameters come back as the stored float32 values widened to double.
Actor load_policy(const std::filesystem::path& path);

}  // namespace rlihf::agent
