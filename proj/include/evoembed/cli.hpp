#ifndef EVOEMBED_CLI_HPP
#define EVOEMBED_CLI_HPP

#include "evoembed/optimizer.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace evoembed {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_data = 2,
    exit_numeric = 3,
};

/// Runs the `evoembed` command line (argv[0] is the program name). Never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload for tests: `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Columns `opt_iter,sigma,semantic,displacement,alignment,total,kl_rank0..kl_rank{T-1}`.
std::string loss_csv(const std::vector<LossBreakdown>& history);

enum class StaticStatus { ok, forbidden, not_found };

struct StaticResolution {
    StaticStatus status = StaticStatus::not_found;
    std::filesystem::path file;
};

/// Maps a URL path onto a regular file under `root`. Paths escaping `root` are forbidden.
StaticResolution resolve_static(const std::filesystem::path& root, std::string_view url_path);

/// Content type served for a file, by extension.
std::string_view media_type(const std::filesystem::path& file);

/**
 * Read-only HTTP service over a bundle directory: `GET /api/bundle` returns `bundle.json`
 * and every other GET path is served as a static file from the directory.
 */
class BundleServer {
public:
    /// Throws FormatError if `dir/bundle.json` is missing or not a valid bundle.
    explicit BundleServer(std::filesystem::path dir);
    ~BundleServer();
    BundleServer(const BundleServer&) = delete;
    BundleServer& operator=(const BundleServer&) = delete;

    /// Binds the listening socket and returns the bound port (`port == 0` picks a free one).
    /// Throws ConfigError when the address cannot be bound.
    int bind(const std::string& host, int port);

    /// Serves requests until `stop()` is called. Requires a successful `bind`.
    void listen();
    void stop();
    /// Blocks until the server accepts connections.
    void wait_until_ready();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace evoembed

#endif
