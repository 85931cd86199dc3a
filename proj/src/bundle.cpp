#include "evoembed/bundle.hpp"

#include "evoembed/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace evoembed {

using Json = nlohmann::ordered_json;

namespace {

Json points_json(const std::vector<Vec2>& points) {
    Json out = Json::array();
    for (const auto& p : points) {
        out.push_back(Json::array({p.x, p.y}));
    }
    return out;
}

std::vector<Vec2> points_from(const Json& j) {
    std::vector<Vec2> out;
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 2) {
            throw FormatError("bundle: point must be a [x, y] pair");
        }
        out.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return out;
}

Json config_json(const EmbedConfig& c) {
    Json j;
    j["layout"] = std::string(to_string(c.layout));
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["gamma"] = c.gamma;
    j["perplexity"] = c.perplexity;
    j["sigma_start"] = c.sigma_start;
    j["sigma_end"] = c.sigma_end;
    j["spacing"] = c.spacing;
    j["opt_iters"] = c.opt_iters;
    j["pca_dims"] = c.pca_dims ? Json(*c.pca_dims) : Json(nullptr);
    j["seed"] = c.seed;
    j["learning_rate"] = c.learning_rate;
    j["momentum_initial"] = c.momentum_initial;
    j["momentum_final"] = c.momentum_final;
    j["momentum_switch_iter"] = c.momentum_switch_iter;
    j["exaggeration_factor"] = c.exaggeration_factor;
    j["exaggeration_iters"] = c.exaggeration_iters;
    j["use_gains"] = c.use_gains;
    j["min_gain"] = c.min_gain;
    j["penalty_scale"] = c.penalty_scale;
    j["alignment_prox"] = c.alignment_prox;
    j["loss_interval"] = c.loss_interval;
    return j;
}

EmbedConfig config_from(const Json& j) {
    EmbedConfig c;
    c.layout = parse_layout(j.at("layout").get<std::string>());
    c.alpha = j.at("alpha").get<double>();
    c.beta = j.at("beta").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.perplexity = j.at("perplexity").get<double>();
    c.sigma_start = j.at("sigma_start").get<double>();
    c.sigma_end = j.at("sigma_end").get<double>();
    c.spacing = j.at("spacing").get<double>();
    c.opt_iters = j.at("opt_iters").get<int>();
    if (j.at("pca_dims").is_null()) {
        c.pca_dims.reset();
    } else {
        c.pca_dims = j.at("pca_dims").get<std::size_t>();
    }
    c.seed = j.at("seed").get<std::uint64_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.momentum_initial = j.at("momentum_initial").get<double>();
    c.momentum_final = j.at("momentum_final").get<double>();
    c.momentum_switch_iter = j.at("momentum_switch_iter").get<int>();
    c.exaggeration_factor = j.at("exaggeration_factor").get<double>();
    c.exaggeration_iters = j.at("exaggeration_iters").get<int>();
    c.use_gains = j.at("use_gains").get<bool>();
    c.min_gain = j.at("min_gain").get<double>();
    c.penalty_scale = j.at("penalty_scale").get<double>();
    c.alignment_prox = j.at("alignment_prox").get<bool>();
    c.loss_interval = j.at("loss_interval").get<int>();
    return c;
}

Json to_json(const LayoutBundle& b) {
    Json j;
    j["format_version"] = b.format_version;
    j["config"] = config_json(b.config);
    j["iteration_labels"] = b.iteration_labels;
    j["offsets"] = b.offsets;

    Json elements = Json::array();
    for (const auto& e : b.elements) {
        Json je;
        je["instance_id"] = e.instance_id;
        je["rank"] = e.rank;
        je["iteration_label"] = e.iteration_label;
        je["x"] = e.x;
        je["y"] = e.y;
        je["r"] = e.r;
        je["theta"] = e.theta;
        je["prompt"] = e.prompt;
        je["keywords"] = e.keywords;
        if (e.thumbnail_dir) {
            je["thumbnail_dir"] = *e.thumbnail_dir;
        }
        elements.push_back(std::move(je));
    }
    j["elements"] = std::move(elements);

    Json pathways = Json::array();
    for (const auto& p : b.pathways) {
        Json jp;
        jp["instance_id"] = p.instance_id;
        jp["keywords"] = p.keywords;
        jp["control_points"] = points_json(p.control_points);
        jp["path_length"] = p.path_length;
        if (p.angular_length) {
            jp["angular_length"] = *p.angular_length;
        }
        jp["in_length_range"] = p.in_length_range;
        if (!p.interpolated_points.empty()) {
            jp["interpolated_points"] = points_json(p.interpolated_points);
        }
        pathways.push_back(std::move(jp));
    }
    j["pathways"] = std::move(pathways);

    if (b.clusters) {
        Json jc;
        jc["eps"] = b.clusters->eps;
        jc["min_pts"] = b.clusters->min_pts;
        Json groups = Json::array();
        for (const auto& g : b.clusters->groups) {
            Json jg;
            jg["rank"] = g.rank;
            jg["keyword"] = g.keyword;
            Json members = Json::array();
            for (const auto& m : g.members) {
                members.push_back(Json{{"instance_id", m.instance_id}, {"cluster", m.cluster}});
            }
            jg["members"] = std::move(members);
            jg["centroids"] = points_json(g.centroids);
            groups.push_back(std::move(jg));
        }
        jc["groups"] = std::move(groups);
        j["clusters"] = std::move(jc);
    } else {
        j["clusters"] = nullptr;
    }

    j["render"] = Json{{"tension", b.render.tension},
                       {"interpolation", b.render.interpolation},
                       {"length_pct_lo", b.render.length_pct_lo},
                       {"length_pct_hi", b.render.length_pct_hi}};

    Json quality = Json::array();
    for (const auto& q : b.quality) {
        Json jq;
        jq["baseline_label"] = q.baseline_label;
        jq["k"] = q.k;
        Json rows = Json::array();
        for (const auto& row : q.iterations) {
            rows.push_back(Json{{"rank", row.rank},
                                {"iteration_label", row.iteration_label},
                                {"trust", row.trust},
                                {"cont", row.cont}});
        }
        jq["iterations"] = std::move(rows);
        quality.push_back(std::move(jq));
    }
    j["quality"] = std::move(quality);
    return j;
}

LayoutBundle from_json(const Json& j) {
    LayoutBundle b;
    b.format_version = j.at("format_version").get<std::string>();
    if (b.format_version != bundle_format_version) {
        throw FormatError("bundle: unsupported format_version '" + b.format_version + "' (expected " +
                          bundle_format_version + ")");
    }
    b.config = config_from(j.at("config"));
    b.iteration_labels = j.at("iteration_labels").get<std::vector<int>>();
    b.offsets = j.at("offsets").get<std::vector<double>>();

    for (const auto& je : j.at("elements")) {
        BundleElement e;
        e.instance_id = je.at("instance_id").get<std::string>();
        e.rank = je.at("rank").get<std::size_t>();
        e.iteration_label = je.at("iteration_label").get<int>();
        e.x = je.at("x").get<double>();
        e.y = je.at("y").get<double>();
        e.r = je.at("r").get<double>();
        e.theta = je.at("theta").get<double>();
        e.prompt = je.at("prompt").get<std::string>();
        e.keywords = je.at("keywords").get<std::vector<std::string>>();
        if (je.contains("thumbnail_dir")) {
            e.thumbnail_dir = je.at("thumbnail_dir").get<std::string>();
        }
        b.elements.push_back(std::move(e));
    }

    for (const auto& jp : j.at("pathways")) {
        BundlePathway p;
        p.instance_id = jp.at("instance_id").get<std::string>();
        p.keywords = jp.at("keywords").get<std::vector<std::string>>();
        p.control_points = points_from(jp.at("control_points"));
        p.path_length = jp.at("path_length").get<double>();
        if (jp.contains("angular_length")) {
            p.angular_length = jp.at("angular_length").get<double>();
        }
        p.in_length_range = jp.at("in_length_range").get<bool>();
        if (jp.contains("interpolated_points")) {
            p.interpolated_points = points_from(jp.at("interpolated_points"));
        }
        b.pathways.push_back(std::move(p));
    }

    if (const auto& jc = j.at("clusters"); !jc.is_null()) {
        BundleClusters c;
        c.eps = jc.at("eps").get<double>();
        c.min_pts = jc.at("min_pts").get<std::size_t>();
        for (const auto& jg : jc.at("groups")) {
            BundleClusterGroup g;
            g.rank = jg.at("rank").get<std::size_t>();
            g.keyword = jg.at("keyword").get<std::string>();
            for (const auto& m : jg.at("members")) {
                g.members.push_back({m.at("instance_id").get<std::string>(), m.at("cluster").get<int>()});
            }
            g.centroids = points_from(jg.at("centroids"));
            c.groups.push_back(std::move(g));
        }
        b.clusters = std::move(c);
    }

    const auto& jr = j.at("render");
    b.render.tension = jr.at("tension").get<double>();
    b.render.interpolation = jr.at("interpolation").get<double>();
    b.render.length_pct_lo = jr.at("length_pct_lo").get<double>();
    b.render.length_pct_hi = jr.at("length_pct_hi").get<double>();

    for (const auto& jq : j.at("quality")) {
        QualityReport q;
        q.baseline_label = jq.at("baseline_label").get<std::string>();
        q.k = jq.at("k").get<std::size_t>();
        for (const auto& row : jq.at("iterations")) {
            q.iterations.push_back({row.at("rank").get<std::size_t>(), row.at("iteration_label").get<int>(),
                                    row.at("trust").get<double>(), row.at("cont").get<double>()});
        }
        b.quality.push_back(std::move(q));
    }
    return b;
}

// Doubles are written with 17 significant digits so that every value round-trips exactly.
void write_number(std::string& out, double v) {
    if (!std::isfinite(v)) {
        throw NumericError("bundle: non-finite value cannot be serialized");
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
    // Keep integral values typed as floats (and -0 signed) on re-parse.
    if (std::string_view(buf).find_first_of(".e") == std::string_view::npos) {
        out += ".0";
    }
}

void write_json(std::string& out, const Json& j, int depth) {
    const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(depth + 1) * 2, ' ');
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (const auto& [key, value] : j.items()) {
            if (!first) {
                out += ",\n";
            }
            first = false;
            out += inner;
            out += Json(key).dump();
            out += ": ";
            write_json(out, value, depth + 1);
        }
        out += "\n" + indent + "}";
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        // Arrays of scalars stay on one line.
        const bool flat = std::none_of(j.begin(), j.end(), [](const Json& v) { return v.is_structured(); });
        out += flat ? "[" : "[\n";
        bool first = true;
        for (const auto& value : j) {
            if (!first) {
                out += flat ? ", " : ",\n";
            }
            first = false;
            if (!flat) {
                out += inner;
            }
            write_json(out, value, depth + 1);
        }
        out += flat ? "]" : "\n" + indent + "]";
        return;
    }
    case Json::value_t::number_float:
        write_number(out, j.get<double>());
        return;
    default:
        out += j.dump();
        return;
    }
}

} // namespace

LayoutBundle make_bundle(const EvolutionDataset& dataset, const EmbedConfig& config, const EmbeddingState& state) {
    const std::size_t N = dataset.num_instances;
    const std::size_t T = dataset.num_iterations();
    if (state.num_instances != N || state.num_iterations != T) {
        throw FormatError("bundle: state and dataset shapes differ");
    }
    LayoutBundle b;
    b.config = config;
    b.iteration_labels = dataset.iteration_labels;
    b.offsets = state.offsets;

    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
        return dataset.instances[a].instance_id < dataset.instances[c].instance_id;
    });

    b.elements.reserve(N * T);
    for (std::size_t k = 0; k < T; ++k) {
        for (std::size_t i : order) {
            const std::size_t e = state.index(k, i);
            const auto& meta = dataset.instances[i];
            BundleElement el;
            el.instance_id = meta.instance_id;
            el.rank = k;
            el.iteration_label = dataset.iteration_labels[k];
            if (state.layout == Layout::radial) {
                el.r = state.params[e].x;
                el.theta = state.params[e].y;
                const auto c = to_cartesian({el.r, el.theta});
                el.x = c.x;
                el.y = c.y;
            } else {
                el.x = state.params[e].x;
                el.y = state.params[e].y;
                const auto p = to_polar(state.params[e]);
                el.r = p.r;
                el.theta = p.theta;
            }
            el.prompt = meta.prompt;
            el.keywords = meta.keywords;
            if (meta.thumbnail_dir) {
                el.thumbnail_dir = meta.thumbnail_dir;
            }
            b.elements.push_back(std::move(el));
        }
    }
    return b;
}

void attach_pathways(LayoutBundle& bundle, const EvolutionDataset& dataset, const EmbeddingState& state,
                     const PathwayOptions& options) {
    const auto& render = options.render;
    if (!(render.interpolation >= 0 && render.interpolation <= 1)) {
        throw ConfigError("pathways: interpolation must lie in [0, 1]");
    }
    if (!(render.tension >= 0 && render.tension <= 1)) {
        throw ConfigError("pathways: tension must lie in [0, 1]");
    }
    if (!(render.length_pct_lo >= 0 && render.length_pct_lo <= render.length_pct_hi && render.length_pct_hi <= 100)) {
        throw ConfigError("pathways: length percentiles need 0 <= lo <= hi <= 100");
    }

    const auto paths = extract_pathways(state, dataset);
    const auto kept = filter_by_length_percentile(paths, render.length_pct_lo, render.length_pct_hi);
    std::vector<bool> in_range(paths.size(), false);
    for (const auto& p : kept) {
        in_range[p.instance] = true;
    }

    const auto table = cluster_by_iteration_keyword(state, dataset, options.eps, options.min_pts);
    std::vector<Vec2> overlay;
    if (render.interpolation > 0) {
        overlay = interpolate_to_centroids(state, dataset, table, render.interpolation);
    }

    bundle.pathways.clear();
    for (const auto& p : paths) {
        BundlePathway bp;
        bp.instance_id = p.instance_id;
        bp.keywords = p.keywords;
        bp.control_points = p.points;
        bp.path_length = p.path_length;
        bp.angular_length = p.angular_length;
        bp.in_length_range = in_range[p.instance];
        if (!overlay.empty()) {
            bp.interpolated_points = spline_control(overlay, dataset, p.instance, render.tension).control_points;
        }
        bundle.pathways.push_back(std::move(bp));
    }
    std::sort(bundle.pathways.begin(), bundle.pathways.end(),
              [](const BundlePathway& a, const BundlePathway& b) { return a.instance_id < b.instance_id; });

    BundleClusters clusters;
    clusters.eps = table.eps;
    clusters.min_pts = table.min_pts;
    for (const auto& g : table.groups) {
        BundleClusterGroup bg;
        bg.rank = g.rank;
        bg.keyword = g.keyword;
        for (std::size_t m = 0; m < g.instances.size(); ++m) {
            bg.members.push_back({dataset.instances[g.instances[m]].instance_id, g.labels[m]});
        }
        bg.centroids = g.centroids;
        clusters.groups.push_back(std::move(bg));
    }
    bundle.clusters = std::move(clusters);
    bundle.render = render;
}

EmbeddingState state_from_bundle(const LayoutBundle& bundle, const EvolutionDataset& dataset) {
    const std::size_t N = dataset.num_instances;
    const std::size_t T = dataset.num_iterations();
    if (bundle.elements.size() != N * T) {
        throw FormatError("bundle: " + std::to_string(bundle.elements.size()) + " elements but the dataset has " +
                          std::to_string(N) + " instances x " + std::to_string(T) + " iterations");
    }
    if (bundle.iteration_labels != dataset.iteration_labels) {
        throw FormatError("bundle: iteration labels differ from the dataset's");
    }
    if (bundle.offsets.size() != T) {
        throw FormatError("bundle: expected " + std::to_string(T) + " offsets, got " +
                          std::to_string(bundle.offsets.size()));
    }
    std::map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < N; ++i) {
        index_of.emplace(dataset.instances[i].instance_id, i);
    }

    EmbeddingState state;
    state.layout = bundle.config.layout;
    state.num_instances = N;
    state.num_iterations = T;
    state.offsets = bundle.offsets;
    state.params.assign(N * T, Vec2{});
    state.velocity.assign(N * T, Vec2{});
    state.gains.assign(N * T, Vec2{1, 1});
    state.rng.seed(bundle.config.seed);

    std::vector<bool> filled(N * T, false);
    for (const auto& e : bundle.elements) {
        const auto it = index_of.find(e.instance_id);
        if (it == index_of.end()) {
            throw FormatError("bundle: element '" + e.instance_id + "' is not an instance of the dataset");
        }
        if (e.rank >= T) {
            throw FormatError("bundle: element '" + e.instance_id + "' has rank " + std::to_string(e.rank) +
                              " beyond " + std::to_string(T) + " iterations");
        }
        const std::size_t idx = state.index(e.rank, it->second);
        if (filled[idx]) {
            throw FormatError("bundle: duplicate element '" + e.instance_id + "' at rank " + std::to_string(e.rank));
        }
        filled[idx] = true;
        state.params[idx] = state.layout == Layout::radial ? Vec2{e.r, e.theta} : Vec2{e.x, e.y};
    }
    return state;
}

std::string serialize_bundle(const LayoutBundle& bundle) {
    std::string out;
    write_json(out, to_json(bundle), 0);
    out += "\n";
    return out;
}

LayoutBundle parse_bundle(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        throw FormatError(std::string("bundle: invalid JSON: ") + e.what());
    }
    try {
        return from_json(j);
    } catch (const Json::exception& e) {
        throw FormatError(std::string("bundle: schema mismatch: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("bundle: ") + e.what());
    }
}

void write_bundle(const LayoutBundle& bundle, const std::filesystem::path& path) {
    const auto text = serialize_bundle(bundle);
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("bundle: cannot open '" + path.string() + "' for writing");
    }
    out << text;
    if (!out) {
        throw FormatError("bundle: failed writing '" + path.string() + "'");
    }
}

LayoutBundle read_bundle(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("bundle: cannot open '" + path.string() + "'");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_bundle(text.str());
}

} // namespace evoembed
