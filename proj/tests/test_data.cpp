#include "evoembed/error.hpp"
#include "evoembed/ingest.hpp"
#include "evoembed/model.hpp"
#include "evoembed/synth.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

using namespace evoembed;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("evoembed_test_data_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("layout names") {
    CHECK(parse_layout("radial") == Layout::radial);
    CHECK(parse_layout("rectilinear") == Layout::rectilinear);
    CHECK(to_string(Layout::radial) == "radial");
    CHECK_THROWS_AS(parse_layout("polar"), ConfigError);
}

TEST_CASE("dataset validation lists every violation") {
    auto d = test::random_dataset(4, 3, 2, 1);
    CHECK(validate_dataset(d).empty());
    d.iteration_labels = {10, 20, 5};
    d.instances[1].instance_id = d.instances[0].instance_id;
    d.features[7] = std::nan("");
    const auto v = validate_dataset(d);
    CHECK(v.size() == 3);
    try {
        require_valid(d);
        FAIL("expected a ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.violations() == v);
    }
    auto small = test::random_dataset(1, 1, 2, 1);
    CHECK(validate_dataset(small).size() == 2);
}

TEST_CASE("manifest round trip keeps f32 values and metadata") {
    auto d = test::random_dataset(5, 3, 4, 2);
    d.instances[2].thumbnail_dir = "thumbs/inst2";
    d.instances[3].keywords = {"cat", "dog"};
    const auto dir = scratch("roundtrip");
    write_dataset(d, dir / "manifest.json");
    const auto back = load_dataset(dir / "manifest.json");
    CHECK(back.num_instances == 5);
    CHECK(back.feature_dim == 4);
    CHECK(back.iteration_labels == d.iteration_labels);
    REQUIRE(back.features.size() == d.features.size());
    for (std::size_t i = 0; i < d.features.size(); ++i) {
        CHECK(back.features[i] == static_cast<double>(static_cast<float>(d.features[i])));
    }
    CHECK(back.instances[2].thumbnail_dir == std::optional<std::string>("thumbs/inst2"));
    CHECK(back.instances[3].keywords == std::vector<std::string>{"cat", "dog"});
    CHECK(back.instances[0].prompt == d.instances[0].prompt);
}

TEST_CASE("malformed manifests and payloads are format errors") {
    const auto d = test::random_dataset(3, 2, 2, 3);
    const auto dir = scratch("malformed");
    write_dataset(d, dir / "manifest.json");
    {
        std::ofstream trunc(dir / "features.f32", std::ios::binary | std::ios::trunc);
        trunc << "abc";
    }
    CHECK_THROWS_AS(load_dataset(dir / "manifest.json"), FormatError);
    {
        std::ofstream bad(dir / "manifest.json", std::ios::trunc);
        bad << "{ not json";
    }
    CHECK_THROWS_AS(load_dataset(dir / "manifest.json"), FormatError);
    CHECK_THROWS_AS(load_dataset(dir / "missing.json"), FormatError);
    {
        std::ofstream shape(dir / "manifest.json", std::ios::trunc);
        shape << R"({"feature_file":"features.f32","shape":[2,3],"iteration_labels":[1,0],"instances":[]})";
    }
    CHECK_THROWS_AS(load_dataset(dir / "manifest.json"), FormatError);
}

TEST_CASE("invalid datasets on disk are validation errors") {
    auto d = test::random_dataset(3, 2, 2, 3);
    d.iteration_labels = {0, 10};
    const auto dir = scratch("invalid");
    write_dataset(d, dir / "manifest.json");
    CHECK_THROWS_AS(load_dataset(dir / "manifest.json"), ValidationError);
}

TEST_CASE("synthetic data is reproducible per seed") {
    SynthSpec spec;
    spec.num_instances = 30;
    spec.num_iterations = 5;
    spec.num_modes = 3;
    spec.branch_schedule = default_branch_schedule(3, 5);
    const auto a = generate_synthetic(spec);
    const auto b = generate_synthetic(spec);
    CHECK(a.dataset.features == b.dataset.features);
    CHECK(a.labels == b.labels);
    spec.seed = 43;
    CHECK(generate_synthetic(spec).dataset.features != a.dataset.features);
    CHECK(validate_dataset(a.dataset).empty());
}

TEST_CASE("synthetic labels follow the branch tree") {
    SynthSpec spec;
    spec.num_instances = 200;
    spec.num_iterations = 6;
    spec.num_modes = 4;
    spec.branch_schedule = default_branch_schedule(4, 6);
    const auto s = generate_synthetic(spec);
    std::map<int, int> parent = {{0, 0}};
    std::map<int, std::size_t> birth = {{0, 0}};
    for (const auto& e : spec.branch_schedule) {
        for (int c : e.children) {
            if (c != e.parent) {
                parent[c] = e.parent;
                birth[c] = e.rank;
            }
        }
    }
    for (std::size_t i = 0; i < 200; ++i) {
        for (std::size_t k = 1; k < 6; ++k) {
            const int before = s.labels[(k - 1) * 200 + i];
            const int now = s.labels[k * 200 + i];
            if (before != now) {
                CHECK(parent[now] == before);
                CHECK(birth[now] == k);
            }
        }
        CHECK(s.labels[i] == 0);
        CHECK(s.dataset.instances[i].keywords == std::vector<std::string>{"mode" + std::to_string(s.labels[5 * 200 + i])});
    }
    std::set<int> final_modes(s.labels.begin() + 1000, s.labels.end());
    CHECK(final_modes.size() == 4);
}

TEST_CASE("single mode data has no branches") {
    SynthSpec spec;
    spec.num_modes = 1;
    const auto s = generate_synthetic(spec);
    CHECK(std::all_of(s.labels.begin(), s.labels.end(), [](int l) { return l == 0; }));
}

TEST_CASE("default schedule for four modes over six ranks") {
    const auto sch = default_branch_schedule(4, 6);
    REQUIRE(sch.size() == 3);
    CHECK(sch[0].rank == 2);
    CHECK(sch[0].children == std::vector<int>{0, 1});
    CHECK(sch[1].rank == 3);
    CHECK(sch[2].rank == 3);
    CHECK(sch[2].parent == 1);
    CHECK(default_branch_schedule(1, 6).empty());
}

TEST_CASE("schedule text round trip and errors") {
    const auto sch = parse_branch_schedule("2:0>0,1;3:1>1,2,3");
    REQUIRE(sch.size() == 2);
    CHECK(sch[1].children == std::vector<int>{1, 2, 3});
    CHECK(parse_branch_schedule(format_branch_schedule(sch))[1].children == sch[1].children);
    CHECK_THROWS_AS(parse_branch_schedule("2:0-1"), ConfigError);
    CHECK_THROWS_AS(parse_branch_schedule("x:0>1"), ConfigError);

    SynthSpec spec;
    spec.num_modes = 2;
    spec.branch_schedule = parse_branch_schedule("0:0>0,1");
    CHECK_THROWS_AS(validate_synth_spec(spec), ConfigError);
    spec.branch_schedule = parse_branch_schedule("2:1>1,0");
    CHECK_THROWS_AS(validate_synth_spec(spec), ConfigError);
    spec.branch_schedule = {};
    CHECK_THROWS_AS(validate_synth_spec(spec), ConfigError);
    spec.num_modes = 1;
    spec.num_iterations = 1;
    CHECK_THROWS_AS(validate_synth_spec(spec), ConfigError);
}

TEST_CASE("written synthetic datasets are byte-identical for a seed") {
    SynthSpec spec;
    spec.num_instances = 10;
    spec.num_iterations = 3;
    const auto a = scratch("bytes_a");
    const auto b = scratch("bytes_b");
    write_dataset(generate_synthetic(spec).dataset, a / "manifest.json");
    write_dataset(generate_synthetic(spec).dataset, b / "manifest.json");
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
    CHECK(slurp(a / "features.f32") == slurp(b / "features.f32"));
}
