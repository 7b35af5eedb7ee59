#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "gasflow/network.hpp"

namespace gasflow {

inline constexpr int kFormatVersion = 1;

/// Parse a network document. Non-ideal compressors are split at load time and
/// the result is validated; any finding raises GasFlowError.
GasNetwork parse_network(std::string_view text);

/// Canonical JSON form: nodes and edges in index order, format_version 1.
std::string serialize_network(const GasNetwork& net);

/// Parse {"injections": {node: value}}; omitted nodes default to 0.
Injections parse_scenario(std::string_view text, const GasNetwork& net,
                          bool require_balanced = true);
std::string serialize_scenario(const GasNetwork& net, const Injections& q);

/// Parse {"psi": {node: value}}; omitted nodes take the reference pressure.
std::vector<double> parse_pressures(std::string_view text, const GasNetwork& net);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

GasNetwork load_network(const std::filesystem::path& path);
Injections load_scenario(const std::filesystem::path& path, const GasNetwork& net);

}  // namespace gasflow
