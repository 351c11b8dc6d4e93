#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "regscore/fusion.hpp"
#include "regscore/train.hpp"

namespace regscore {

inline constexpr std::uint32_t kBundleFormatVersion = 1;

/// A trained model plus the settings needed to re-derive any verdict.
struct ModelBundle {
    std::uint32_t format_version = kBundleFormatVersion;
    FusionModel model;
    Hyperparams hyperparams;  ///< hyperparams.seed also seeds the data split
    std::size_t best_epoch = 0;
};

/// Layout: "RGSCBNDL" | u32 version | u64 payload size | payload | u32 crc32.
/// All integers little-endian; doubles stored as raw IEEE-754 bits, so a
/// loaded model reproduces the saved logits exactly.
std::string serialize_bundle(const ModelBundle& bundle);
/// Throws Error{CorruptBundle} / Error{VersionMismatch}.
ModelBundle deserialize_bundle(std::string_view bytes);

void save_model(const ModelBundle& bundle, const std::filesystem::path& path);
/// Throws Error{IoError}, Error{CorruptBundle}, Error{VersionMismatch}.
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace regscore
