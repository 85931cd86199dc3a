#include "evoembed/cli.hpp"

#include "evoembed/bundle.hpp"
#include "evoembed/error.hpp"
#include "evoembed/ingest.hpp"
#include "evoembed/parallel.hpp"
#include "evoembed/pathway.hpp"
#include "evoembed/quality.hpp"
#include "evoembed/synth.hpp"

#include "CLI11.hpp"
#include "httplib.h"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <utility>

namespace fs = std::filesystem;

namespace evoembed {

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot open '" + path.string() + "' for writing");
    }
    out << text;
    if (!out) {
        throw FormatError("failed writing '" + path.string() + "'");
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open '" + path.string() + "'");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

struct RenderFlags {
    std::optional<double> eps;
    std::size_t min_pts = 4;
    double interp = 0;
    double tension = default_spline_tension;
    std::pair<double, double> len_pct{0, 100};

    void add_to(CLI::App& app) {
        app.add_option("--eps", eps, "DBSCAN radius (default: spacing / 4)");
        app.add_option("--min-pts", min_pts, "DBSCAN minimum neighborhood size, self included")
            ->check(CLI::PositiveNumber);
        app.add_option("--interp", interp, "Centroid interpolation factor for rendering")->check(CLI::Range(0.0, 1.0));
        app.add_option("--tension", tension, "Cardinal spline tension")->check(CLI::Range(0.0, 1.0));
        app.add_option("--len-pct", len_pct, "Path-length percentile range LO HI");
    }

    PathwayOptions options(double spacing) const {
        PathwayOptions o;
        o.eps = eps.value_or(default_cluster_eps(spacing));
        o.min_pts = min_pts;
        o.render.tension = tension;
        o.render.interpolation = interp;
        o.render.length_pct_lo = len_pct.first;
        o.render.length_pct_hi = len_pct.second;
        return o;
    }
};

struct EmbedFlags {
    fs::path input;
    fs::path out;
    std::string layout = "rectilinear";
    double alpha = 1;
    double beta = 5;
    std::optional<double> gamma;
    double penalty_scale = EmbedConfig{}.penalty_scale;
    bool alignment_prox = false;
    double perplexity = 30;
    int iters = 2000;
    double spacing = 20;
    double sigma_start = 20;
    double sigma_end = 10;
    std::size_t pca_dims = 50;
    std::uint64_t seed = 42;
    int threads = 0;
    bool no_pathways = false;
    std::optional<fs::path> loss_csv;
    RenderFlags render;
};

struct MetricsFlags {
    fs::path bundle;
    fs::path input;
    std::size_t k = default_quality_k;
    std::string baseline = "none";
    std::optional<fs::path> out;
    int threads = 0;
};

struct PathwaysFlags {
    fs::path bundle;
    fs::path input;
    std::optional<fs::path> out;
    RenderFlags render;
};

struct SynthFlags {
    std::size_t instances = 100;
    std::size_t iterations = 6;
    std::size_t dims = 16;
    int modes = 1;
    std::string schedule;
    double noise = 0.5;
    std::uint64_t seed = 42;
    fs::path out_dir;
};

struct ServeFlags {
    fs::path bundle_dir;
    int port = 8080;
    std::string host = "127.0.0.1";
};

int cmd_embed(const EmbedFlags& f, std::ostream& out, std::ostream& err) {
    const auto dataset = load_dataset(f.input);
    EmbedConfig config = EmbedConfig::defaults(parse_layout(f.layout));
    config.alpha = f.alpha;
    config.beta = f.beta;
    if (f.gamma) {
        config.gamma = *f.gamma;
    }
    config.penalty_scale = f.penalty_scale;
    config.alignment_prox = f.alignment_prox;
    config.perplexity = f.perplexity;
    config.opt_iters = f.iters;
    config.spacing = f.spacing;
    config.sigma_start = f.sigma_start;
    config.sigma_end = f.sigma_end;
    config.pca_dims = f.pca_dims == 0 ? std::nullopt : std::optional<std::size_t>(f.pca_dims);
    config.seed = f.seed;
    validate_config(config, dataset.num_instances);

    EmbedOptions options;
    options.threads = f.threads;
    options.progress = [&err](const EmbedProgress& p) {
        const auto& l = *p.losses;
        err << "iter " << p.opt_iter << " sigma " << p.sigma << " total " << l.total << " semantic " << l.semantic
            << " displacement " << l.displacement << " alignment " << l.alignment << '\n';
    };
    const auto result = embed(dataset, config, options);

    auto bundle = make_bundle(dataset, config, result.state);
    if (!f.no_pathways) {
        attach_pathways(bundle, dataset, result.state, f.render.options(config.spacing));
    }
    write_bundle(bundle, f.out);
    const fs::path loss_path = f.loss_csv.value_or(fs::path(f.out).replace_extension(".loss.csv"));
    write_text(loss_path, loss_csv(result.history));
    out << "wrote " << f.out.string() << " (" << bundle.elements.size() << " elements) and " << loss_path.string()
        << '\n';
    return exit_ok;
}

int cmd_metrics(const MetricsFlags& f, std::ostream& out) {
    const auto dataset = load_dataset(f.input);
    auto bundle = read_bundle(f.bundle);
    const auto state = state_from_bundle(bundle, dataset);
    const auto features = prepare_features(dataset, bundle.config);
    const int threads = resolve_threads(f.threads);

    std::vector<QualityReport> reports;
    reports.push_back(
        quality_report(features, state.cartesian_coords(), std::string(to_string(bundle.config.layout)), f.k, threads));

    std::optional<EmbedConfig> baseline;
    if (f.baseline == "vanilla") {
        baseline = vanilla_config(bundle.config);
    } else if (f.baseline == "noalign") {
        baseline = bundle.config;
        baseline->gamma = 0;
    }
    if (baseline) {
        EmbedOptions options;
        options.threads = threads;
        const auto rerun = embed(dataset, *baseline, options);
        reports.push_back(quality_report(rerun.features, rerun.state.cartesian_coords(), f.baseline, f.k, threads));
    }

    const auto csv = quality_csv(reports);
    const fs::path csv_path = f.out.value_or(fs::path(f.bundle).replace_extension(".quality.csv"));
    write_text(csv_path, csv);
    bundle.quality = std::move(reports);
    write_bundle(bundle, f.bundle);
    out << csv;
    return exit_ok;
}

int cmd_pathways(const PathwaysFlags& f, std::ostream& out) {
    const auto dataset = load_dataset(f.input);
    auto bundle = read_bundle(f.bundle);
    const auto state = state_from_bundle(bundle, dataset);
    attach_pathways(bundle, dataset, state, f.render.options(bundle.config.spacing));
    const fs::path target = f.out.value_or(f.bundle);
    write_bundle(bundle, target);
    std::size_t kept = 0;
    for (const auto& p : bundle.pathways) {
        kept += p.in_length_range ? 1 : 0;
    }
    out << "wrote " << target.string() << " (" << bundle.pathways.size() << " pathways, " << kept
        << " in length range)\n";
    return exit_ok;
}

int cmd_synth(const SynthFlags& f, std::ostream& out) {
    SynthSpec spec;
    spec.num_instances = f.instances;
    spec.num_iterations = f.iterations;
    spec.feature_dim = f.dims;
    spec.num_modes = f.modes;
    spec.noise_scale = f.noise;
    spec.seed = f.seed;
    spec.branch_schedule =
        f.schedule.empty() ? default_branch_schedule(f.modes, f.iterations) : parse_branch_schedule(f.schedule);
    const auto data = generate_synthetic(spec);

    fs::create_directories(f.out_dir);
    write_dataset(data.dataset, f.out_dir / "manifest.json");
    std::ostringstream labels;
    labels << "rank,iteration_label,instance_id,mode\n";
    const std::size_t N = data.dataset.num_instances;
    for (std::size_t k = 0; k < data.dataset.num_iterations(); ++k) {
        for (std::size_t i = 0; i < N; ++i) {
            labels << k << ',' << data.dataset.iteration_labels[k] << ',' << data.dataset.instances[i].instance_id << ','
                   << data.labels[k * N + i] << '\n';
        }
    }
    write_text(f.out_dir / "labels.csv", labels.str());
    out << "wrote " << (f.out_dir / "manifest.json").string() << " with schedule '"
        << format_branch_schedule(spec.branch_schedule) << "'\n";
    return exit_ok;
}

int cmd_serve(const ServeFlags& f, std::ostream& out) {
    BundleServer server(f.bundle_dir);
    const int port = server.bind(f.host, f.port);
    out << "serving " << f.bundle_dir.string() << " at http://" << f.host << ':' << port << "/\n" << std::flush;
    server.listen();
    return exit_ok;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Trajectory embedding of diffusion-model iterates", "evoembed"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    EmbedFlags ef;
    auto* embed_cmd = app.add_subcommand("embed", "Embed a dataset into a layout bundle");
    embed_cmd->add_option("--input", ef.input, "Dataset manifest")->required()->check(CLI::ExistingFile);
    embed_cmd->add_option("--out", ef.out, "Output bundle path")->required();
    embed_cmd->add_option("--layout", ef.layout, "Layout")->check(CLI::IsMember({"rectilinear", "radial"}));
    embed_cmd->add_option("--alpha", ef.alpha, "Semantic loss weight");
    embed_cmd->add_option("--beta", ef.beta, "Displacement loss weight");
    embed_cmd->add_option("--gamma", ef.gamma, "Alignment loss weight (default: 0.2 rectilinear, 0.05 radial)");
    embed_cmd->add_option("--penalty-scale", ef.penalty_scale, "Scale of displacement and alignment terms")
        ->check(CLI::PositiveNumber);
    embed_cmd->add_flag("--alignment-prox", ef.alignment_prox, "Rectilinear: proximal step for the alignment term");
    embed_cmd->add_option("--perplexity", ef.perplexity, "Affinity perplexity");
    embed_cmd->add_option("--iters", ef.iters, "Optimization iterations")->check(CLI::PositiveNumber);
    embed_cmd->add_option("--spacing", ef.spacing, "Offset between consecutive iterations");
    embed_cmd->add_option("--sigma-start", ef.sigma_start, "Initial band width");
    embed_cmd->add_option("--sigma-end", ef.sigma_end, "Final band width");
    embed_cmd->add_option("--pca-dims", ef.pca_dims, "PCA target dimension (0 disables PCA)");
    embed_cmd->add_option("--seed", ef.seed, "Random seed");
    embed_cmd->add_option("--threads", ef.threads, "Worker threads (0: EVOEMBED_THREADS or all cores)");
    embed_cmd->add_flag("--no-pathways", ef.no_pathways, "Skip pathway extraction and clustering");
    embed_cmd->add_option("--loss-csv", ef.loss_csv, "Loss history CSV (default: <out>.loss.csv)");
    ef.render.add_to(*embed_cmd);

    MetricsFlags mf;
    auto* metrics_cmd = app.add_subcommand("metrics", "Trustworthiness and continuity of a bundle");
    metrics_cmd->add_option("--bundle", mf.bundle, "Bundle to evaluate and update")->required()->check(CLI::ExistingFile);
    metrics_cmd->add_option("--input", mf.input, "Dataset manifest the bundle was made from")
        ->required()
        ->check(CLI::ExistingFile);
    metrics_cmd->add_option("--k", mf.k, "Neighborhood size")->check(CLI::PositiveNumber);
    metrics_cmd->add_option("--baseline", mf.baseline, "Baseline to rerun with the bundle's seed")
        ->check(CLI::IsMember({"none", "vanilla", "noalign"}));
    metrics_cmd->add_option("--out", mf.out, "CSV path (default: <bundle>.quality.csv)");
    metrics_cmd->add_option("--threads", mf.threads, "Worker threads (0: EVOEMBED_THREADS or all cores)");

    PathwaysFlags pf;
    auto* pathways_cmd = app.add_subcommand("pathways", "Recompute pathways and clusters of a bundle");
    pathways_cmd->add_option("--bundle", pf.bundle, "Bundle to update")->required()->check(CLI::ExistingFile);
    pathways_cmd->add_option("--input", pf.input, "Dataset manifest the bundle was made from")
        ->required()
        ->check(CLI::ExistingFile);
    pathways_cmd->add_option("--out", pf.out, "Output bundle (default: overwrite --bundle)");
    pf.render.add_to(*pathways_cmd);

    SynthFlags sf;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic branching dataset");
    synth_cmd->add_option("--instances", sf.instances, "Instances per iteration")->check(CLI::Range(2, 1 << 24));
    synth_cmd->add_option("--iterations", sf.iterations, "Sampled iterations")->check(CLI::Range(2, 1 << 16));
    synth_cmd->add_option("--dims", sf.dims, "Feature dimension")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--modes", sf.modes, "Number of final modes")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--schedule", sf.schedule,
                          "Branch schedule 'rank:parent>c1,c2;...' (default: binary hierarchy)");
    synth_cmd->add_option("--noise", sf.noise, "Per-element noise scale")->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--seed", sf.seed, "Random seed");
    synth_cmd->add_option("--out-dir", sf.out_dir, "Output directory")->required();

    ServeFlags vf;
    auto* serve_cmd = app.add_subcommand("serve", "Serve a bundle directory over HTTP (read-only)");
    serve_cmd->add_option("--bundle-dir", vf.bundle_dir, "Directory holding bundle.json")
        ->required()
        ->check(CLI::ExistingDirectory);
    serve_cmd->add_option("--port", vf.port, "TCP port")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--host", vf.host, "Bind address");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return exit_usage;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        if (*embed_cmd) {
            return cmd_embed(ef, out, err);
        }
        if (*metrics_cmd) {
            return cmd_metrics(mf, out);
        }
        if (*pathways_cmd) {
            return cmd_pathways(pf, out);
        }
        if (*synth_cmd) {
            return cmd_synth(sf, out);
        }
        return cmd_serve(vf, out);
    } catch (const ConfigError& e) {
        err << "evoembed " << name << ": " << e.what() << '\n';
        return exit_usage;
    } catch (const ValidationError& e) {
        err << "evoembed " << name << ": " << e.what() << '\n';
        for (const auto& v : e.violations()) {
            err << "  " << v << '\n';
        }
        return exit_data;
    } catch (const FormatError& e) {
        err << "evoembed " << name << ": " << e.what() << '\n';
        return exit_data;
    } catch (const NumericError& e) {
        err << "evoembed " << name << ": " << e.what() << '\n';
        return exit_numeric;
    } catch (const fs::filesystem_error& e) {
        err << "evoembed " << name << ": " << e.what() << '\n';
        return exit_data;
    } catch (const std::exception& e) {
        err << "evoembed " << name << ": internal error: " << e.what() << '\n';
        return exit_numeric;
    }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"evoembed"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::string loss_csv(const std::vector<LossBreakdown>& history) {
    std::ostringstream out;
    out.precision(17);
    const std::size_t T = history.empty() ? 0 : history.front().semantic_per_iteration.size();
    out << "opt_iter,sigma,semantic,displacement,alignment,total";
    for (std::size_t k = 0; k < T; ++k) {
        out << ",kl_rank" << k;
    }
    out << '\n';
    for (const auto& l : history) {
        out << l.opt_iter << ',' << l.sigma << ',' << l.semantic << ',' << l.displacement << ',' << l.alignment << ','
            << l.total;
        for (double kl : l.semantic_per_iteration) {
            out << ',' << kl;
        }
        out << '\n';
    }
    return out.str();
}

StaticResolution resolve_static(const fs::path& root, std::string_view url_path) {
    std::string rel(url_path);
    while (!rel.empty() && rel.front() == '/') {
        rel.erase(rel.begin());
    }
    const fs::path requested = fs::path(rel).lexically_normal();
    if (requested.is_absolute() || rel.find('\0') != std::string::npos ||
        (!requested.empty() && *requested.begin() == "..")) {
        return {StaticStatus::forbidden, {}};
    }

    std::error_code ec;
    const fs::path base = fs::weakly_canonical(root, ec);
    if (ec) {
        return {StaticStatus::not_found, {}};
    }
    const fs::path full = fs::weakly_canonical(base / requested, ec);
    if (ec) {
        return {StaticStatus::not_found, {}};
    }
    // Symlinks may still point outside the root.
    const auto [root_end, unused] = std::mismatch(base.begin(), base.end(), full.begin(), full.end());
    if (root_end != base.end()) {
        return {StaticStatus::forbidden, {}};
    }
    if (!fs::is_regular_file(full, ec)) {
        return {StaticStatus::not_found, {}};
    }
    return {StaticStatus::ok, full};
}

std::string_view media_type(const fs::path& file) {
    std::string ext = file.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    static const std::pair<std::string_view, std::string_view> table[] = {
        {".json", "application/json"}, {".html", "text/html; charset=utf-8"}, {".htm", "text/html; charset=utf-8"},
        {".js", "text/javascript"},    {".mjs", "text/javascript"},           {".css", "text/css"},
        {".csv", "text/csv"},          {".txt", "text/plain; charset=utf-8"}, {".png", "image/png"},
        {".jpg", "image/jpeg"},        {".jpeg", "image/jpeg"},               {".webp", "image/webp"},
        {".gif", "image/gif"},         {".svg", "image/svg+xml"},             {".ico", "image/x-icon"},
        {".wasm", "application/wasm"},
    };
    for (const auto& [e, type] : table) {
        if (ext == e) {
            return type;
        }
    }
    return "application/octet-stream";
}

struct BundleServer::Impl {
    fs::path root;
    std::string bundle_text;
    httplib::Server server;
    bool bound = false;
};

BundleServer::BundleServer(fs::path dir) : impl_(std::make_unique<Impl>()) {
    impl_->root = std::move(dir);
    impl_->bundle_text = read_text(impl_->root / "bundle.json");
    parse_bundle(impl_->bundle_text);

    auto* impl = impl_.get();
    impl->server.Get("/api/bundle", [impl](const httplib::Request&, httplib::Response& res) {
        res.set_content(impl->bundle_text, "application/json");
    });
    impl->server.Get(R"(/.*)", [impl](const httplib::Request& req, httplib::Response& res) {
        const auto found = resolve_static(impl->root, req.path == "/" ? "/index.html" : req.path);
        if (found.status == StaticStatus::forbidden) {
            res.status = 403;
            res.set_content("forbidden\n", "text/plain");
            return;
        }
        if (found.status == StaticStatus::not_found) {
            res.status = 404;
            res.set_content("not found\n", "text/plain");
            return;
        }
        try {
            res.set_content(read_text(found.file), std::string(media_type(found.file)));
        } catch (const FormatError&) {
            res.status = 404;
            res.set_content("not found\n", "text/plain");
        }
    });
    const auto reject = [](const httplib::Request&, httplib::Response& res) {
        res.status = 405;
        res.set_content("read-only\n", "text/plain");
    };
    impl->server.Post(R"(/.*)", reject);
    impl->server.Put(R"(/.*)", reject);
    impl->server.Patch(R"(/.*)", reject);
    impl->server.Delete(R"(/.*)", reject);
}

BundleServer::~BundleServer() {
    impl_->server.stop();
}

int BundleServer::bind(const std::string& host, int port) {
    // Exclusive port: the library default of SO_REUSEPORT would let a second server share it.
    impl_->server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    int bound_port = port;
    if (port == 0) {
        bound_port = impl_->server.bind_to_any_port(host);
        impl_->bound = bound_port > 0;
    } else {
        impl_->bound = impl_->server.bind_to_port(host, port);
    }
    if (!impl_->bound) {
        throw ConfigError("serve: cannot bind " + host + ":" + std::to_string(port));
    }
    return bound_port;
}

void BundleServer::listen() {
    if (!impl_->bound) {
        throw ConfigError("serve: listen() before bind()");
    }
    impl_->server.listen_after_bind();
}

void BundleServer::stop() {
    impl_->server.stop();
}

void BundleServer::wait_until_ready() {
    impl_->server.wait_until_ready();
}

} // namespace evoembed
