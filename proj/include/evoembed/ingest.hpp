#ifndef EVOEMBED_INGEST_HPP
#define EVOEMBED_INGEST_HPP

#include "evoembed/model.hpp"

#include <filesystem>
#include <string>

namespace evoembed {

inline constexpr const char* manifest_version = "evoembed-manifest/1";

/**
 * Reads a manifest (JSON) and its raw little-endian f32 payload.
 *
 * The payload is row-major with shape (T, N, D), grouped iteration-major then instance.
 * Values are widened to double without any normalization. The result is validated;
 * failures throw FormatError (unreadable or mis-sized files) or ValidationError.
 */
EvolutionDataset load_dataset(const std::filesystem::path& manifest_path);

/**
 * Writes `dataset` as a manifest plus payload. `feature_file` is stored relative to the
 * manifest directory. Features are narrowed to f32.
 */
void write_dataset(const EvolutionDataset& dataset, const std::filesystem::path& manifest_path,
                   const std::string& feature_file = "features.f32");

} // namespace evoembed

#endif
