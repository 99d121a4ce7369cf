#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "rlihf/signal.hpp"

namespace rlihf::signal {

/// Flat little-endian epoch file:
///   header  { "ERRP", version u32, C u32, T u32, count u32 }
///   records { label u8, onset u64, C x T float32 row-major }
inline constexpr std::uint32_t kEpochFileVersion = 1;

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_epochs(const std::filesystem::path& path, const std::vector<EEGEpoch>& epochs);
/// subject_id of every epoch is set to the file stem.
std::vector<EEGEpoch> read_epochs(const std::filesystem::path& path);

}  // namespace rlihf::signal
