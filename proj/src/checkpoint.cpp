#include "rlihf/checkpoint.hpp"

#include <fstream>

#include "binary_io.hpp"

namespace rlihf::agent {
namespace {

template <typename T>
T get(std::istream& is) {
    return io::get<T, CheckpointError>(is, "checkpoint truncated");
}
using io::put;

nn::Activation activation_from(std::uint8_t code) {
    if (code > static_cast<std::uint8_t>(nn::Activation::tanh)) throw CheckpointError("unknown activation code");
    return static_cast<nn::Activation>(code);
}

}  // namespace

void save_policy(const std::filesystem::path& path, const Actor& actor) {
    const nn::Mlp& net = actor.network();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os.write("SACP", 4);
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(actor.action_dim()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(net.layer_count()));
    for (int w : net.widths()) put<std::uint32_t>(os, static_cast<std::uint32_t>(w));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(net.hidden_activation()));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(net.output_activation()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(net.parameter_count()));
    for (Eigen::Index i = 0; i < net.parameters().size(); ++i) put<float>(os, static_cast<float>(net.parameters()[i]));
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

Actor load_policy(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    char magic[4];
    if (!is.read(magic, 4) || std::string_view(magic, 4) != "SACP") throw CheckpointError("not a policy checkpoint");
    const auto version = get<std::uint32_t>(is);
    if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    const auto action_dim = static_cast<int>(get<std::uint32_t>(is));
    const auto layers = get<std::uint32_t>(is);
    if (layers < 1 || layers > 64) throw CheckpointError("implausible layer count");
    std::vector<int> widths(layers + 1);
    for (auto& w : widths) w = static_cast<int>(get<std::uint32_t>(is));
    const auto hidden_act = activation_from(get<std::uint8_t>(is));
    const auto output_act = activation_from(get<std::uint8_t>(is));
    if (action_dim < 1 || widths.back() != 2 * action_dim) throw CheckpointError("layer spec does not match action dim");

    Actor actor(widths.front(), action_dim, std::vector<int>(widths.begin() + 1, widths.end() - 1));
    nn::Mlp& net = actor.network();
    if (net.hidden_activation() != hidden_act || net.output_activation() != output_act)
        throw CheckpointError("checkpoint activations do not match the actor layout");
    const auto count = get<std::uint64_t>(is);
    if (count != net.parameter_count()) throw CheckpointError("parameter count does not match layer spec");
    for (Eigen::Index i = 0; i < net.parameters().size(); ++i) net.parameters()[i] = get<float>(is);
    if (is.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes after parameters");
    return actor;
}

}  // namespace rlihf::agent
