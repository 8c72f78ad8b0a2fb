#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lungnet/nn/Network.h"

namespace lungnet::nn {

/**
 * Binary model container. Layout, all integers little-endian:
 *
 *   "RMDL" | u8 version | str architecture | u32 layer count
 *   per layer: str descriptor | u8 stage
 *              | u32 params  | (str name | u32 rank | u32 dims... | f64 values...)*
 *              | u32 buffers | same as params
 *
 * where str is a u32 byte length followed by the bytes. Values are stored as
 * raw IEEE-754 doubles, so load(save(net)) is bit-exact. Trainable flags are
 * training state and are not stored; loaded layers are all trainable.
 */
inline constexpr std::uint8_t kModelFormatVersion = 1;

std::string serializeNetwork(const Network& net);
/// Throws FormatError on a bad magic, version, truncation or shape mismatch.
Network deserializeNetwork(const std::string& bytes);

/// Parameters and buffers of the layers in one stage, in the container's
/// per-layer encoding. Equal strings mean bit-identical stage weights.
std::string serializeStage(const Network& net, int stage);

/// 64-bit FNV-1a over the architecture text, layer descriptors and every
/// parameter name and shape. Weight values do not enter the fingerprint.
std::uint64_t architectureFingerprint(const Network& net);

/// Writes through a temporary file and a rename.
void writeFileAtomic(const std::filesystem::path& path, const std::string& bytes);
/// Throws InputError when the file cannot be read.
std::string readFile(const std::filesystem::path& path);

void saveNetwork(const Network& net, const std::filesystem::path& path);
Network loadNetwork(const std::filesystem::path& path);

} // namespace lungnet::nn
