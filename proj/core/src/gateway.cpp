#include "geolambda/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "descriptor_json.hpp"
#include "event_json.hpp"

using nlohmann::json;

namespace geolambda {

// ---- configuration ---------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw Error(ErrorCode::InvalidArgument, fmt::format("{}: expected a boolean, got '{}'", key, v), key);
}

void apply_setting(ServerConfig& c, const std::string& key, const std::string& value) {
    try {
        if (key == "listen") {
            const auto colon = value.rfind(':');
            if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "listen must be host:port", key);
            c.host = value.substr(0, colon);
            c.port = std::stoi(value.substr(colon + 1));
            if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::InvalidArgument, "port out of range", key);
        } else if (key == "data_dir") {
            c.data_dir = value;
        } else if (key == "recompute_interval") {
            c.recompute_interval_s = std::stod(value);
            if (!(c.recompute_interval_s > 0.0)) {
                throw Error(ErrorCode::InvalidArgument, "recompute_interval must be positive", key);
            }
        } else if (key == "segment_entries") {
            c.segment_entries = std::stoull(value);
        } else if (key == "fsync") {
            c.sync = parse_bool(value, key);
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'", key);
        }
    } catch (const std::invalid_argument&) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("{}: cannot parse '{}'", key, value), key);
    } catch (const std::out_of_range&) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("{}: value '{}' out of range", key, value), key);
    }
}

const std::map<std::string, std::string> kEnvKeys = {
    {"PS_LISTEN", "listen"},
    {"PS_DATA_DIR", "data_dir"},
    {"PS_RECOMPUTE_INTERVAL", "recompute_interval"},
    {"PS_SEGMENT_ENTRIES", "segment_entries"},
    {"PS_FSYNC", "fsync"},
};

}  // namespace

ServerConfig parse_config(std::string_view text, const std::map<std::string, std::string>& env) {
    ServerConfig c;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::InvalidArgument, fmt::format("config line {}: expected key=value", line_no));
        }
        apply_setting(c, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    for (const auto& [var, key] : kEnvKeys) {
        if (auto it = env.find(var); it != env.end()) apply_setting(c, key, it->second);
    }
    return c;
}

ServerConfig load_config(const std::filesystem::path& path) {
    std::string text;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read config " + path.string(), "config");
        std::ostringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    std::map<std::string, std::string> env;
    for (const auto& [var, key] : kEnvKeys) {
        if (const char* v = std::getenv(var.c_str())) env.emplace(var, v);
    }
    return parse_config(text, env);
}

// ---- export ----------------------------------------------------------------

std::optional<ExportLayer> parse_export_layer(std::string_view s) noexcept {
    if (s == "raw") return ExportLayer::raw;
    if (s == "kde") return ExportLayer::kde;
    if (s == "final") return ExportLayer::final;
    return std::nullopt;
}

struct ExportJob::State {
    ExportFormat format;
    ExportLayer layer;
    std::string view;
    Seq as_of = 0;
    std::optional<RasterGrid> raster;
    std::vector<VenueBinRow> venue_rows;
    std::vector<ArchiveEntry> events;
    bool header_done = false;
    std::size_t cursor = 0;
};

ExportJob::ExportJob(const Engine& engine, const ExportRequest& request) : state_(std::make_unique<State>()) {
    auto& st = *state_;
    st.format = request.format;
    st.layer = request.layer;
    st.view = request.view;
    if (request.format != ExportFormat::asc && request.layer != ExportLayer::raw) {
        throw Error(ErrorCode::InvalidArgument, "layer kde/final is only available as asc", "layer");
    }
    const auto merged = engine.merge(request.view);
    st.as_of = merged.as_of_seq;

    switch (request.format) {
        case ExportFormat::asc: {
            if (request.layer == ExportLayer::raw) {
                st.raster = merged.counts;
            } else if (request.layer == ExportLayer::kde) {
                st.raster = kde(merged.counts, request.radius);
            } else {
                if (!request.population) {
                    throw Error(ErrorCode::InvalidArgument, "layer=final needs a population", "population");
                }
                if (!request.baseline) throw Error(ErrorCode::InvalidArgument, "layer=final needs a baseline", "baseline");
                const auto base = engine.references().get_reference(*request.baseline);
                st.raster = population_grid(merged.counts, base->raster, *request.population, request.radius);
            }
            break;
        }
        case ExportFormat::csv: {
            const auto& d = merged.descriptor;
            for (const auto& [venue, bins] : merged.venues) {
                for (std::size_t b = 0; b < bins.size(); ++b) {
                    st.venue_rows.push_back(
                        {venue, d.window.start() + static_cast<EpochSeconds>(b) * d.bin_width, bins[b]});
                }
            }
            break;
        }
        case ExportFormat::ndjson: st.events = engine.view_events(merged.descriptor, merged.as_of_seq); break;
    }
}

ExportJob::~ExportJob() = default;
ExportJob::ExportJob(ExportJob&&) noexcept = default;

bool ExportJob::write_chunk(std::ostream& out) {
    auto& st = *state_;
    constexpr std::size_t kRows = 256;
    switch (st.format) {
        case ExportFormat::asc: {
            if (!st.header_done) {
                write_asc_header(out, *st.raster);
                st.header_done = true;
            }
            const auto nrows = static_cast<std::size_t>(st.raster->spec().nrows());
            for (std::size_t n = 0; n < kRows && st.cursor < nrows; ++n, ++st.cursor) {
                write_asc_row(out, *st.raster, static_cast<std::int64_t>(st.cursor));
            }
            return st.cursor < nrows;
        }
        case ExportFormat::csv: {
            if (!st.header_done) {
                write_venue_csv_header(out);
                st.header_done = true;
            }
            for (std::size_t n = 0; n < 16 * kRows && st.cursor < st.venue_rows.size(); ++n, ++st.cursor) {
                write_venue_csv_row(out, st.venue_rows[st.cursor]);
            }
            return st.cursor < st.venue_rows.size();
        }
        case ExportFormat::ndjson: {
            for (std::size_t n = 0; n < 4 * kRows && st.cursor < st.events.size(); ++n, ++st.cursor) {
                out << to_ndjson(st.events[st.cursor].event) << '\n';
            }
            return st.cursor < st.events.size();
        }
    }
    return false;
}

void ExportJob::write_all(std::ostream& out) {
    while (write_chunk(out)) {
    }
}

std::string ExportJob::content_type() const {
    switch (state_->format) {
        case ExportFormat::asc: return "text/plain";
        case ExportFormat::csv: return "text/csv";
        case ExportFormat::ndjson: return "application/x-ndjson";
    }
    return "application/octet-stream";
}

std::string ExportJob::file_name() const {
    const auto ext = std::string(to_string(state_->format));
    if (state_->format != ExportFormat::asc) return state_->view + "." + ext;
    static constexpr const char* layers[] = {"raw", "kde", "final"};
    return state_->view + "_" + layers[static_cast<int>(state_->layer)] + "." + ext;
}

Seq ExportJob::as_of_seq() const { return state_->as_of; }

// ---- HTTP ------------------------------------------------------------------

int http_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ValidationError:
        case ErrorCode::InvalidArgument:
        case ErrorCode::ParseError:
        case ErrorCode::BinMismatch: return 400;
        case ErrorCode::NotFound:
        case ErrorCode::UnknownView:
        case ErrorCode::NoObservations: return 404;
        case ErrorCode::DuplicateEvent:
        case ErrorCode::NameTaken: return 409;
        case ErrorCode::OutOfBounds:
        case ErrorCode::SpecMismatch:
        case ErrorCode::DegenerateDensity:
        case ErrorCode::OverlappingScenarios: return 422;
        case ErrorCode::WatermarkMismatch: return 503;
        default: return 500;
    }
}

namespace {

json error_body(ErrorCode code, const std::string& message, const std::string& field) {
    json body = {{"code", std::string(to_string(code))}, {"message", message}};
    if (!field.empty()) body["field"] = field;
    return body;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
    send_json(res, http_status(e.code()), error_body(e.code(), e.what(), e.field()));
}

json grid_json(const RasterGrid& g) {
    json rows = json::array();
    for (std::int64_t r = 0; r < g.spec().nrows(); ++r) {
        json row = json::array();
        for (std::int64_t c = 0; c < g.spec().ncols(); ++c) row.push_back(g.at({r, c}));
        rows.push_back(std::move(row));
    }
    return {{"spec",
             {{"bbox", detail::bbox_to_json(g.spec().bbox())},
              {"cellsize", g.spec().cellsize()},
              {"ncols", g.spec().ncols()},
              {"nrows", g.spec().nrows()}}},
            {"nodata", g.nodata()},
            {"values", std::move(rows)}};
}

json status_json(const ViewStatus& s) {
    auto obj = detail::descriptor_to_json(s.descriptor);
    obj["watermark"] = s.watermark;
    obj["built_at"] = s.built_at;
    obj["realtime_ceiling"] = s.realtime_ceiling;
    obj["realtime_retained"] = s.realtime_retained;
    obj["ncols"] = s.descriptor.spec.ncols();
    obj["nrows"] = s.descriptor.spec.nrows();
    return obj;
}

QueryRequest parse_query(const json& body) {
    if (!body.is_object()) throw Error(ErrorCode::InvalidArgument, "query body must be an object", "body");
    QueryRequest q;
    std::string field = "view";
    try {
        q.view = body.at("view").get<std::string>();
        field = "aggregate";
        const auto agg = body.value("aggregate", std::string("total"));
        const auto parsed = parse_aggregate(agg);
        if (!parsed) throw Error(ErrorCode::InvalidArgument, "unknown aggregate '" + agg + "'", field);
        q.aggregate = *parsed;
        field = "k";
        q.k = body.value("k", std::int64_t{10});
        field = "sub_bbox";
        if (auto it = body.find("sub_bbox"); it != body.end() && !it->is_null()) {
            try {
                q.sub_bbox = detail::bbox_from_json(*it);
            } catch (const Error& e) {
                throw Error(ErrorCode::OutOfBounds, e.what(), field);
            }
        }
        field = "sub_window";
        if (auto it = body.find("sub_window"); it != body.end() && !it->is_null()) {
            try {
                q.sub_window =
                    TimeWindow::make(it->at("start").get<EpochSeconds>(), it->at("end").get<EpochSeconds>());
            } catch (const Error& e) {
                throw Error(ErrorCode::OutOfBounds, e.what(), field);
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, field + ": " + e.what(), field);
    }
    return q;
}

json result_json(const QueryResult& r) {
    json out = {{"aggregate", std::string(to_string(r.aggregate))},
                {"total", r.total},
                {"batch_watermark", r.batch_watermark},
                {"as_of_seq", r.as_of_seq},
                {"freshness", r.freshness}};
    switch (r.aggregate) {
        case Aggregate::grid: out["grid"] = grid_json(*r.grid); break;
        case Aggregate::total: break;
        case Aggregate::per_venue: {
            out["bin_start"] = r.venue_bin_start;
            out["bin_width"] = r.bin_width;
            json venues = json::array();
            std::int64_t total = 0;
            for (const auto& [id, bins] : r.venues) {
                std::int64_t t = 0;
                for (auto b : bins) t += b;
                total += t;
                venues.push_back({{"venue_id", id}, {"total", t}, {"bins", bins}});
            }
            out["venues"] = std::move(venues);
            out["total"] = total;
            break;
        }
        case Aggregate::top_k: {
            json cells = json::array();
            for (const auto& c : r.cells) {
                cells.push_back(
                    {{"row", c.cell.row}, {"col", c.cell.col}, {"lat", c.lat}, {"lon", c.lon}, {"count", c.count}});
            }
            out["cells"] = std::move(cells);
            break;
        }
    }
    return out;
}

template <typename T>
T param(const httplib::Request& req, const char* name, T fallback) {
    if (!req.has_param(name)) return fallback;
    const auto v = req.get_param_value(name);
    try {
        if constexpr (std::is_same_v<T, double>) {
            return std::stod(v);
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            return std::stoull(v);
        } else {
            return static_cast<T>(std::stoll(v));
        }
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("{}: cannot parse '{}'", name, v), name);
    }
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_error(res, e);
        } catch (const json::exception& e) {
            send_json(res, 400, error_body(ErrorCode::ParseError, e.what(), "body"));
        } catch (const std::exception& e) {
            spdlog::error("request {} {} failed: {}", req.method, req.path, e.what());
            send_json(res, 500, error_body(ErrorCode::StorageFailure, e.what(), ""));
        }
    };
}

}  // namespace

struct HttpGateway::Impl {
    Engine& engine;
    httplib::Server server;

    explicit Impl(Engine& e) : engine(e) { routes(); }

    void routes() {
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });

        server.Get("/health", guarded([this](const httplib::Request&, httplib::Response& res) {
                       send_json(res, 200, {{"status", "ok"}, {"high_watermark", engine.archive().high_watermark()}});
                   }));

        server.Post("/events", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto report = engine.ingest_ndjson(req.body);
                        if (report.accepted == 0 && report.unparseable == report.rejected) {
                            send_json(res, 400,
                                      error_body(ErrorCode::ParseError,
                                                 req.body.empty() ? "empty body" : "body is not NDJSON", "body"));
                            return;
                        }
                        json errors = json::array();
                        for (const auto& e : report.errors) {
                            json item = {{"line", e.line},
                                         {"code", std::string(to_string(e.code))},
                                         {"message", e.message}};
                            if (!e.field.empty()) item["field"] = e.field;
                            errors.push_back(std::move(item));
                        }
                        send_json(res, 200,
                                  {{"accepted", report.accepted},
                                   {"rejected", report.rejected},
                                   {"last_seq", report.last_seq},
                                   {"errors", errors}});
                    }));

        server.Get("/views", guarded([this](const httplib::Request&, httplib::Response& res) {
                       json views = json::array();
                       for (const auto& s : engine.views()) views.push_back(status_json(s));
                       send_json(res, 200, {{"views", views}, {"high_watermark", engine.archive().high_watermark()}});
                   }));

        server.Post("/views", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto d = detail::descriptor_from_json(json::parse(req.body));
                        send_json(res, 201, status_json(engine.register_view(d)));
                    }));

        server.Post("/query", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        send_json(res, 200, result_json(engine.query(parse_query(json::parse(req.body)))));
                    }));

        server.Get(R"(/export/([A-Za-z0-9_.\-]+))",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       ExportRequest er;
                       er.view = req.matches[1];
                       er.format = parse_export_format(req.has_param("format") ? req.get_param_value("format") : "asc");
                       const auto layer = req.has_param("layer") ? req.get_param_value("layer") : "raw";
                       const auto parsed = parse_export_layer(layer);
                       if (!parsed) throw Error(ErrorCode::InvalidArgument, "unknown layer '" + layer + "'", "layer");
                       er.layer = *parsed;
                       er.radius = param<int>(req, "radius", 2);
                       if (req.has_param("population")) er.population = param<double>(req, "population", 0.0);
                       if (req.has_param("baseline")) er.baseline = req.get_param_value("baseline");

                       auto job = std::make_shared<ExportJob>(engine, er);
                       res.set_header("Content-Disposition", "attachment; filename=\"" + job->file_name() + "\"");
                       res.set_header("X-As-Of-Seq", std::to_string(job->as_of_seq()));
                       res.set_chunked_content_provider(job->content_type(),
                                                        [job](std::size_t, httplib::DataSink& sink) {
                                                            std::ostringstream chunk;
                                                            const bool more = job->write_chunk(chunk);
                                                            const auto s = chunk.str();
                                                            if (!s.empty() && !sink.write(s.data(), s.size())) {
                                                                return false;
                                                            }
                                                            if (!more) sink.done();
                                                            return true;
                                                        });
                   }));

        server.Get(R"(/occupancy/([A-Za-z0-9_.\-]+))",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       OccupancyQuery q;
                       q.venue_id = req.matches[1];
                       q.bin_width = param<EpochSeconds>(req, "bin", 1800);
                       q.day_length = param<EpochSeconds>(req, "day_length", 86400);
                       q.origin = param<EpochSeconds>(req, "origin", 0);
                       q.confidence = param<double>(req, "confidence", 0.95);
                       q.resamples = param<int>(req, "resamples", 1000);
                       q.seed = param<std::uint64_t>(req, "seed", 0);
                       if (req.has_param("source")) {
                           const auto s = parse_source(req.get_param_value("source"));
                           if (!s) throw Error(ErrorCode::InvalidArgument, "unknown source", "source");
                           q.source = *s;
                       }
                       const auto curve = engine.occupancy(q);
                       const auto fmt = req.has_param("format") ? req.get_param_value("format") : "json";
                       if (fmt == "csv") {
                           std::vector<OccupancyRow> rows;
                           for (const auto& b : curve.bins) rows.push_back({b.start, b.estimate, b.ci_low, b.ci_high});
                           std::ostringstream out;
                           write_occupancy_csv(out, rows);
                           res.set_content(out.str(), "text/csv");
                           return;
                       }
                       json bins = json::array();
                       for (const auto& b : curve.bins) {
                           bins.push_back(
                               {{"start", b.start}, {"estimate", b.estimate}, {"ci_low", b.ci_low}, {"ci_high", b.ci_high}});
                       }
                       send_json(res, 200,
                                 {{"venue_id", curve.venue_id},
                                  {"bin_width", curve.bin_width},
                                  {"n_days", curve.n_days},
                                  {"seed", curve.seed},
                                  {"confidence", q.confidence},
                                  {"bins", bins}});
                   }));
    }
};

HttpGateway::HttpGateway(Engine& engine) : impl_(std::make_unique<Impl>(engine)) {}
HttpGateway::~HttpGateway() { stop(); }

bool HttpGateway::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }
int HttpGateway::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool HttpGateway::listen_after_bind() { return impl_->server.listen_after_bind(); }
void HttpGateway::stop() {
    if (impl_) impl_->server.stop();
}
bool HttpGateway::running() const { return impl_->server.is_running(); }

}  // namespace geolambda
