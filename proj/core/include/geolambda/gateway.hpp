#pragma once

// The machine-facing presentation layer: configuration, dataset export and
// the HTTP/1.1 JSON API.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include "geolambda/engine.hpp"
#include "geolambda/formats.hpp"

namespace geolambda {

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path data_dir = "data";
    double recompute_interval_s = 30.0;
    std::size_t segment_entries = 100'000;
    bool sync = false;
};

/// Reads a flat key=value file (# comments, blank lines allowed). Keys:
/// listen (host:port), data_dir, recompute_interval, segment_entries, fsync.
/// Environment variables PS_LISTEN, PS_DATA_DIR, PS_RECOMPUTE_INTERVAL,
/// PS_SEGMENT_ENTRIES and PS_FSYNC override the file. An empty path reads
/// the environment only. Throws Error{InvalidArgument}.
ServerConfig load_config(const std::filesystem::path& path);

/// Parses the key=value text with the given environment overrides applied.
ServerConfig parse_config(std::string_view text, const std::map<std::string, std::string>& env = {});

enum class ExportLayer { raw, kde, final };

std::optional<ExportLayer> parse_export_layer(std::string_view s) noexcept;

struct ExportRequest {
    std::string view;
    ExportFormat format = ExportFormat::asc;
    ExportLayer layer = ExportLayer::raw;
    int radius = 2;
    /// Required for layer=final.
    std::optional<double> population;
    std::optional<std::string> baseline;
};

/// A fully prepared export bound to one merged snapshot; write_chunk emits
/// the file piecewise so callers can stream it.
class ExportJob {
public:
    /// Throws Error{UnknownView}, Error{InvalidArgument} (format/layer
    /// combination, missing population or baseline), Error{NotFound} for an
    /// unknown baseline, Error{SpecMismatch}.
    ExportJob(const Engine& engine, const ExportRequest& request);
    ~ExportJob();
    ExportJob(ExportJob&&) noexcept;

    /// Appends the next piece to out; false once everything was written.
    bool write_chunk(std::ostream& out);
    void write_all(std::ostream& out);

    std::string content_type() const;
    std::string file_name() const;
    Seq as_of_seq() const;

private:
    struct State;
    std::unique_ptr<State> state_;
};

/// Maps an engine error code to its HTTP status.
int http_status(ErrorCode code) noexcept;

/// HTTP API over an engine.
///   POST /events, GET /views, POST /views, POST /query,
///   GET /export/{view}, GET /occupancy/{venue}, GET /health
class HttpGateway {
public:
    explicit HttpGateway(Engine& engine);
    ~HttpGateway();

    /// Binds and serves until stop(); returns false if the bind failed.
    bool listen(const std::string& host, int port);
    /// Binds to an ephemeral port and returns it (or -1).
    int bind_any_port(const std::string& host);
    /// Serves on a socket bound by bind_any_port.
    bool listen_after_bind();
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace geolambda
