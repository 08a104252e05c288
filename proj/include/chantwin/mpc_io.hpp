#pragma once

#include <filesystem>
#include <string>

#include "chantwin/engine.hpp"

namespace chantwin {

inline constexpr int kMpcSchemaVersion = 1;

/// MPC list document; powers are |a|^2 in dB for unit Tx power.
std::string mpc_json(const ChannelRealization& r, int indent = -1);

/// Inverse of mpc_json. Interaction points are not stored; only kinds and surface ids.
ChannelRealization parse_mpc_json(const std::string& text);
ChannelRealization load_mpc_json(const std::filesystem::path& path);

}  // namespace chantwin
