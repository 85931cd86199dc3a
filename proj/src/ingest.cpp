#include "evoembed/ingest.hpp"

#include "evoembed/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace evoembed {

namespace {

using nlohmann::json;

std::uint32_t to_little_endian(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
    return v;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open manifest " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("manifest " + path.string() + ": " + e.what());
    }
}

} // namespace

EvolutionDataset load_dataset(const std::filesystem::path& manifest_path) {
    const json manifest = read_json(manifest_path);

    EvolutionDataset dataset;
    std::filesystem::path feature_path;
    std::size_t T = 0;
    try {
        if (manifest.value("dtype", std::string("f32le")) != "f32le") {
            throw FormatError("manifest: unsupported dtype '" + manifest.at("dtype").get<std::string>() + "'");
        }
        const auto shape = manifest.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 3) {
            throw FormatError("manifest: shape must have 3 entries (T, N, D)");
        }
        T = shape[0];
        dataset.num_instances = shape[1];
        dataset.feature_dim = shape[2];
        dataset.iteration_labels = manifest.at("iteration_labels").get<std::vector<int>>();
        if (dataset.iteration_labels.size() != T) {
            throw FormatError("manifest: iteration_labels has " + std::to_string(dataset.iteration_labels.size()) +
                              " entries but shape says T = " + std::to_string(T));
        }
        dataset.representation = parse_representation(manifest.value("representation_kind", std::string("noisy")));
        for (const auto& entry : manifest.at("instances")) {
            InstanceMeta meta;
            meta.instance_id = entry.at("instance_id").get<std::string>();
            meta.prompt = entry.value("prompt", std::string());
            meta.keywords = entry.value("keywords", std::vector<std::string>{});
            std::sort(meta.keywords.begin(), meta.keywords.end());
            meta.keywords.erase(std::unique(meta.keywords.begin(), meta.keywords.end()), meta.keywords.end());
            if (entry.contains("thumbnail_dir") && !entry["thumbnail_dir"].is_null()) {
                meta.thumbnail_dir = entry["thumbnail_dir"].get<std::string>();
            }
            dataset.instances.push_back(std::move(meta));
        }
        feature_path = manifest_path.parent_path() / manifest.at("feature_file").get<std::string>();
    } catch (const json::exception& e) {
        throw FormatError("manifest " + manifest_path.string() + ": " + e.what());
    }

    const std::size_t count = T * dataset.num_instances * dataset.feature_dim;
    const std::uintmax_t expected_bytes = count * sizeof(float);
    std::error_code ec;
    const auto actual_bytes = std::filesystem::file_size(feature_path, ec);
    if (ec) {
        throw FormatError("cannot stat feature file " + feature_path.string() + ": " + ec.message());
    }
    if (actual_bytes != expected_bytes) {
        throw FormatError("feature file " + feature_path.string() + ": size mismatch, expected " +
                          std::to_string(expected_bytes) + " bytes, got " + std::to_string(actual_bytes));
    }

    std::ifstream in(feature_path, std::ios::binary);
    std::vector<std::uint32_t> raw(count);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(expected_bytes))) {
        throw FormatError("failed to read feature file " + feature_path.string());
    }
    dataset.features.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        dataset.features[i] = static_cast<double>(std::bit_cast<float>(to_little_endian(raw[i])));
    }

    require_valid(dataset);
    return dataset;
}

void write_dataset(const EvolutionDataset& dataset, const std::filesystem::path& manifest_path,
                   const std::string& feature_file) {
    json instances = json::array();
    for (const auto& meta : dataset.instances) {
        json entry = {{"instance_id", meta.instance_id}, {"prompt", meta.prompt}, {"keywords", meta.keywords}};
        if (meta.thumbnail_dir) {
            entry["thumbnail_dir"] = *meta.thumbnail_dir;
        }
        instances.push_back(std::move(entry));
    }
    json manifest = {
        {"version", manifest_version},
        {"feature_file", feature_file},
        {"dtype", "f32le"},
        {"shape", {dataset.num_iterations(), dataset.num_instances, dataset.feature_dim}},
        {"iteration_labels", dataset.iteration_labels},
        {"representation_kind", std::string(to_string(dataset.representation))},
        {"instances", std::move(instances)},
    };

    if (!manifest_path.parent_path().empty()) {
        std::filesystem::create_directories(manifest_path.parent_path());
    }
    std::ofstream out(manifest_path);
    if (!out) {
        throw FormatError("cannot write manifest " + manifest_path.string());
    }
    out << manifest.dump(2) << '\n';

    std::vector<std::uint32_t> raw(dataset.features.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        raw[i] = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(dataset.features[i])));
    }
    const auto feature_path = manifest_path.parent_path() / feature_file;
    std::ofstream bin(feature_path, std::ios::binary);
    if (!bin) {
        throw FormatError("cannot write feature file " + feature_path.string());
    }
    bin.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
}

} // namespace evoembed
