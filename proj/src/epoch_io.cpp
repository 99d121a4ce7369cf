#include "rlihf/epoch_io.hpp"

#include <fstream>

#include "binary_io.hpp"

namespace rlihf::signal {
namespace {

template <typename T>
T get(std::istream& is) {
    return io::get<T, FormatError>(is, "epoch file truncated");
}
using io::put;

}  // namespace

void write_epochs(const std::filesystem::path& path, const std::vector<EEGEpoch>& epochs) {
    const std::uint32_t C = epochs.empty() ? 0 : static_cast<std::uint32_t>(epochs.front().data.rows());
    const std::uint32_t T = epochs.empty() ? 0 : static_cast<std::uint32_t>(epochs.front().data.cols());
    for (const auto& e : epochs) {
        if (e.data.rows() != C || e.data.cols() != T)
            throw FormatError("all epochs in a file must share dimensions");
        if (!e.label) throw FormatError("epoch file records need a label");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os.write("ERRP", 4);
    put<std::uint32_t>(os, kEpochFileVersion);
    put<std::uint32_t>(os, C);
    put<std::uint32_t>(os, T);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(epochs.size()));
    for (const auto& e : epochs) {
        put<std::uint8_t>(os, *e.label ? 1 : 0);
        put<std::uint64_t>(os, static_cast<std::uint64_t>(e.onset));
        for (std::uint32_t c = 0; c < C; ++c)
            for (std::uint32_t t = 0; t < T; ++t) put<float>(os, static_cast<float>(e.data(c, t)));
    }
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

std::vector<EEGEpoch> read_epochs(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "ERRP", 4) != 0)
        throw FormatError(path.string() + ": bad magic");
    const auto version = get<std::uint32_t>(is);
    if (version != kEpochFileVersion)
        throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
    const auto C = get<std::uint32_t>(is);
    const auto T = get<std::uint32_t>(is);
    const auto count = get<std::uint32_t>(is);
    std::vector<EEGEpoch> out;
    out.reserve(count);
    const std::string subject = path.stem().string();
    for (std::uint32_t i = 0; i < count; ++i) {
        EEGEpoch e;
        const auto label = get<std::uint8_t>(is);
        if (label > 1) throw FormatError(path.string() + ": label byte must be 0 or 1");
        e.label = label == 1;
        e.onset = static_cast<std::int64_t>(get<std::uint64_t>(is));
        e.subject_id = subject;
        e.data.resize(C, T);
        for (std::uint32_t c = 0; c < C; ++c)
            for (std::uint32_t t = 0; t < T; ++t) e.data(c, t) = get<float>(is);
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace rlihf::signal
