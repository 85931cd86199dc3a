#include "evoembed/bundle.hpp"
#include "evoembed/error.hpp"
#include "evoembed/optimizer.hpp"
#include "evoembed/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "json.hpp"

using namespace evoembed;

namespace {

struct Fixture {
    EvolutionDataset data;
    EmbedConfig config;
    EmbedResult result;
};

Fixture run(Layout layout) {
    SynthSpec spec;
    spec.num_instances = 24;
    spec.num_iterations = 3;
    spec.feature_dim = 6;
    spec.num_modes = 2;
    spec.branch_schedule = default_branch_schedule(2, 3);
    Fixture f;
    f.data = generate_synthetic(spec).dataset;
    f.data.instances[5].thumbnail_dir = "thumbs/5";
    f.config = EmbedConfig::defaults(layout);
    f.config.opt_iters = 80;
    f.config.perplexity = 6;
    f.result = embed(f.data, f.config, {.threads = 1});
    return f;
}

LayoutBundle full_bundle(const Fixture& f) {
    auto b = make_bundle(f.data, f.config, f.result.state);
    PathwayOptions opt;
    opt.eps = 5;
    opt.min_pts = 3;
    opt.render.interpolation = 0.4;
    opt.render.tension = 0.25;
    opt.render.length_pct_lo = 10;
    opt.render.length_pct_hi = 90;
    attach_pathways(b, f.data, f.result.state, opt);
    b.quality = {quality_report(f.result.features, f.result.state.cartesian_coords(), "radial", 7)};
    return b;
}

} // namespace

TEST_CASE("bundle JSON round-trips exactly for both layouts") {
    for (auto layout : {Layout::rectilinear, Layout::radial}) {
        const auto f = run(layout);
        const auto b = full_bundle(f);
        const auto text = serialize_bundle(b);
        const auto back = parse_bundle(text);
        CHECK(back == b);
        CHECK(serialize_bundle(back) == text);
    }
}

TEST_CASE("awkward doubles survive the text form") {
    const auto f = run(Layout::rectilinear);
    auto b = make_bundle(f.data, f.config, f.result.state);
    b.elements[0].x = -0.0;
    b.elements[0].y = 5e-324;
    b.elements[1].x = 1e300;
    b.elements[1].y = 0.1 + 0.2;
    b.elements[2].x = 40;
    const auto back = parse_bundle(serialize_bundle(b));
    CHECK(std::signbit(back.elements[0].x));
    CHECK(back.elements[0].y == 5e-324);
    CHECK(back.elements[1].x == 1e300);
    CHECK(back.elements[1].y == 0.1 + 0.2);
    CHECK(back == b);
    // Integral doubles keep a fractional part so they re-parse as floats.
    const auto j = nlohmann::json::parse(serialize_bundle(b));
    CHECK(j["elements"][2]["x"].is_number_float());
    CHECK(j["offsets"][0].is_number_float());
}

TEST_CASE("non-finite coordinates are refused") {
    const auto f = run(Layout::rectilinear);
    auto b = make_bundle(f.data, f.config, f.result.state);
    b.elements[3].y = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(serialize_bundle(b), NumericError);
}

TEST_CASE("elements are ordered by rank then instance id and carry both views") {
    const auto f = run(Layout::radial);
    const auto b = make_bundle(f.data, f.config, f.result.state);
    REQUIRE(b.elements.size() == 72);
    for (std::size_t e = 1; e < b.elements.size(); ++e) {
        const auto& p = b.elements[e - 1];
        const auto& q = b.elements[e];
        CHECK((p.rank < q.rank || (p.rank == q.rank && p.instance_id < q.instance_id)));
    }
    for (const auto& e : b.elements) {
        CHECK(e.x == doctest::Approx(e.r * std::cos(e.theta)));
        CHECK(e.y == doctest::Approx(e.r * std::sin(e.theta)));
        CHECK(e.iteration_label == f.data.iteration_labels[e.rank]);
    }
    CHECK(b.offsets == std::vector<double>{0, 20, 40});
    CHECK(b.format_version == "evoembed/1");
}

TEST_CASE("pathway attachment honors the render settings") {
    const auto f = run(Layout::rectilinear);
    const auto b = full_bundle(f);
    REQUIRE(b.pathways.size() == 24);
    std::size_t kept = 0;
    for (const auto& p : b.pathways) {
        kept += p.in_length_range;
        CHECK(p.control_points.size() == 3);
        CHECK(p.interpolated_points.size() == 3);
        CHECK_FALSE(p.angular_length.has_value());
    }
    std::vector<Pathway> raw = extract_pathways(f.result.state, f.data);
    CHECK(kept == filter_by_length_percentile(raw, 10, 90).size());
    REQUIRE(b.clusters.has_value());
    CHECK(b.clusters->eps == 5);
    CHECK(b.render.tension == 0.25);

    auto bad = make_bundle(f.data, f.config, f.result.state);
    PathwayOptions opt;
    opt.render.interpolation = 2;
    CHECK_THROWS_AS(attach_pathways(bad, f.data, f.result.state, opt), ConfigError);
    opt.render.interpolation = 0;
    opt.render.length_pct_lo = 60;
    opt.render.length_pct_hi = 50;
    CHECK_THROWS_AS(attach_pathways(bad, f.data, f.result.state, opt), ConfigError);
}

TEST_CASE("state reconstruction from a bundle") {
    for (auto layout : {Layout::rectilinear, Layout::radial}) {
        const auto f = run(layout);
        const auto b = parse_bundle(serialize_bundle(make_bundle(f.data, f.config, f.result.state)));
        const auto s = state_from_bundle(b, f.data);
        CHECK(s.params == f.result.state.params);
        CHECK(s.layout == layout);
        CHECK(s.offsets == f.result.state.offsets);
    }
    auto f = run(Layout::rectilinear);
    auto b = make_bundle(f.data, f.config, f.result.state);
    auto other = f.data;
    other.instances[0].instance_id = "someone-else";
    CHECK_THROWS_AS(state_from_bundle(b, other), FormatError);
    b.elements.pop_back();
    CHECK_THROWS_AS(state_from_bundle(b, f.data), FormatError);
}

TEST_CASE("malformed bundle text is a format error") {
    CHECK_THROWS_AS(parse_bundle("{"), FormatError);
    CHECK_THROWS_AS(parse_bundle("{}"), FormatError);
    const auto f = run(Layout::rectilinear);
    auto text = serialize_bundle(make_bundle(f.data, f.config, f.result.state));
    const auto at = text.find("evoembed/1");
    text.replace(at, 10, "evoembed/9");
    CHECK_THROWS_AS(parse_bundle(text), FormatError);
}

TEST_CASE("bundle files") {
    const auto f = run(Layout::radial);
    const auto b = full_bundle(f);
    const auto dir = std::filesystem::temp_directory_path() / "evoembed_test_bundle";
    std::filesystem::remove_all(dir);
    write_bundle(b, dir / "nested" / "bundle.json");
    CHECK(read_bundle(dir / "nested" / "bundle.json") == b);
    CHECK_THROWS_AS(read_bundle(dir / "missing.json"), FormatError);
}
