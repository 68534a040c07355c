// Operator command line: serve the HTTP API, replay event files, build and
// export views offline, load reference rasters and generate the synthetic
// game-day scenario.

#include <pthread.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "geolambda/engine.hpp"
#include "geolambda/formats.hpp"
#include "geolambda/gameday.hpp"
#include "geolambda/gateway.hpp"

namespace gl = geolambda;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw gl::Error(gl::ErrorCode::InvalidArgument, "cannot read " + path, "file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Common {
    std::string config;
    std::string data_dir;

    gl::ServerConfig resolve() const {
        auto c = gl::load_config(config);
        if (!data_dir.empty()) c.data_dir = data_dir;
        return c;
    }

    gl::EngineOptions engine_options() const {
        const auto c = resolve();
        gl::EngineOptions o;
        o.data_dir = c.data_dir;
        o.segment_entries = c.segment_entries;
        o.sync = c.sync;
        return o;
    }
};

void add_common(CLI::App* cmd, Common& common) {
    cmd->add_option("--config", common.config, "key=value config file");
    cmd->add_option("--data-dir", common.data_dir, "data directory (overrides the config)");
}

int serve(const Common& common) {
    const auto config = common.resolve();
    // Termination signals go to a watcher thread rather than a handler, so
    // the server can be stopped outside signal context.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    gl::Engine engine(common.engine_options());
    engine.start_recompute_loop(
        std::chrono::milliseconds(static_cast<std::int64_t>(config.recompute_interval_s * 1000.0)));
    gl::HttpGateway gateway(engine);

    std::thread watcher([&gateway, &signals] {
        int sig = 0;
        sigwait(&signals, &sig);
        if (sig == SIGINT || sig == SIGTERM) spdlog::info("signal {} received, shutting down", sig);
        gateway.stop();
    });
    spdlog::info("listening on {}:{} (data dir {})", config.host, config.port, config.data_dir.string());
    const bool ok = gateway.listen(config.host, config.port);
    if (!ok) {
        spdlog::error("cannot listen on {}:{}", config.host, config.port);
        pthread_kill(watcher.native_handle(), SIGTERM);
    }
    watcher.join();
    engine.stop_recompute_loop();
    return ok ? 0 : 1;
}

int replay_file(const Common& common, const std::string& file, double speed, const std::string& url) {
    const gl::ReplaySpec spec{file, speed, false};
    gl::ReplayReport report;
    if (!url.empty()) {
        httplib::Client client(url);
        client.set_read_timeout(30, 0);
        report = gl::replay(spec, [&client](gl::GeoEvent event) -> gl::Seq {
            auto res = client.Post("/events", gl::to_ndjson(event), "application/x-ndjson");
            if (!res) throw gl::Error(gl::ErrorCode::IngestFailed, "cannot reach the server");
            const auto body = nlohmann::json::parse(res->body, nullptr, false);
            if (res->status != 200 || body.is_discarded() || body.value("accepted", 0) != 1) {
                throw gl::Error(gl::ErrorCode::IngestFailed, res->body);
            }
            return body.at("last_seq").get<gl::Seq>();
        });
    } else {
        gl::Engine engine(common.engine_options());
        report = gl::replay(spec, [&engine](gl::GeoEvent event) { return engine.ingest(std::move(event)); });
    }
    std::cout << fmt::format("accepted {} rejected {} last_seq {}\n", report.accepted, report.rejected,
                             report.last_seq);
    return 0;
}

void print_status(const gl::ViewStatus& s) {
    std::cout << fmt::format("{} watermark {} grid {}x{} bins {}\n", s.descriptor.name, s.watermark,
                             s.descriptor.spec.ncols(), s.descriptor.spec.nrows(), s.descriptor.bin_count());
}

int register_views(const Common& common, const std::string& file) {
    gl::Engine engine(common.engine_options());
    for (const auto& d : gl::parse_view_descriptors(read_file(file))) print_status(engine.register_view(d));
    return 0;
}

int build_view(const Common& common, const std::string& name) {
    gl::Engine engine(common.engine_options());
    engine.build_view(name);
    print_status(engine.view_status(name));
    return 0;
}

int load_reference(const Common& common, const std::string& name, const std::string& file) {
    gl::Engine engine(common.engine_options());
    std::ifstream in(file);
    if (!in) throw gl::Error(gl::ErrorCode::InvalidArgument, "cannot read " + file, "file");
    auto raster = gl::read_asc(in);
    std::cout << fmt::format("{} {}x{} total {:.10g}\n", name, raster.spec().ncols(), raster.spec().nrows(),
                             raster.sum());
    engine.references().register_reference(name, std::move(raster), {{"source_file", file}});
    return 0;
}

int export_view(const Common& common, const gl::ExportRequest& request, const std::string& out_path) {
    const gl::Engine engine(common.engine_options());
    gl::ExportJob job(engine, request);
    if (out_path.empty() || out_path == "-") {
        job.write_all(std::cout);
        return 0;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw gl::Error(gl::ErrorCode::InvalidArgument, "cannot write " + out_path, "out");
    job.write_all(out);
    out.close();
    if (!out) throw gl::Error(gl::ErrorCode::StorageFailure, "write to " + out_path + " failed", "out");
    return 0;
}

int gen_gameday(const std::string& out, std::uint64_t seed) {
    gl::GameDayConfig config;
    config.seed = seed;
    const auto day = gl::generate_gameday(config);
    gl::write_gameday(day, out);
    std::cout << fmt::format("{} events, {} venues, grid {}x{} written to {}\n", day.events.size(),
                             day.venues.size(), day.grid.ncols(), day.grid.nrows(), out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geolambda: spatio-temporal event analytics"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");

    Common common;

    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP API");
    add_common(serve_cmd, common);

    std::string replay_path;
    double speed = 0.0;
    std::string url;
    auto* replay_cmd = app.add_subcommand("replay", "feed an NDJSON event file into ingestion");
    add_common(replay_cmd, common);
    replay_cmd->add_option("--file", replay_path, "NDJSON event file")->required();
    replay_cmd->add_option("--speed", speed, "event-time to wall-time ratio, 0 = unpaced")->check(CLI::NonNegativeNumber);
    replay_cmd->add_option("--url", url, "post to a running server instead of the local data dir");

    std::string views_file;
    auto* register_cmd = app.add_subcommand("register-view", "register view descriptors from a JSON file");
    add_common(register_cmd, common);
    register_cmd->add_option("--file", views_file, "descriptor JSON")->required();

    std::string view_name;
    auto* build_cmd = app.add_subcommand("build-view", "one-shot batch build of a registered view");
    add_common(build_cmd, common);
    build_cmd->add_option("--name", view_name, "view name")->required();

    std::string ref_name, ref_file;
    auto* ref_cmd = app.add_subcommand("load-reference", "register an ESRI ASCII grid as a reference raster");
    add_common(ref_cmd, common);
    ref_cmd->add_option("--name", ref_name, "reference name")->required();
    ref_cmd->add_option("--file", ref_file, ".asc file")->required();

    gl::ExportRequest export_request;
    std::string format = "asc", layer = "raw", out_path;
    double population = 0.0;
    std::string baseline;
    auto* export_cmd = app.add_subcommand("export", "write a view's merged dataset to a file");
    add_common(export_cmd, common);
    export_cmd->add_option("--view", export_request.view, "view name")->required();
    export_cmd->add_option("--format", format, "asc|csv|ndjson")->check(CLI::IsMember({"asc", "csv", "ndjson"}));
    export_cmd->add_option("--out", out_path, "output path, - for stdout");
    export_cmd->add_option("--layer", layer, "raw|kde|final")->check(CLI::IsMember({"raw", "kde", "final"}));
    export_cmd->add_option("--radius", export_request.radius, "kernel radius in cells");
    auto* population_opt = export_cmd->add_option("--population", population, "population for layer=final");
    auto* baseline_opt = export_cmd->add_option("--baseline", baseline, "reference raster for layer=final");

    std::string gameday_out;
    std::uint64_t seed = 7;
    auto* gameday_cmd = app.add_subcommand("gen-gameday", "write the synthetic game-day scenario");
    gameday_cmd->add_option("--out", gameday_out, "output directory")->required();
    gameday_cmd->add_option("--seed", seed, "random seed");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_default_logger(spdlog::stderr_color_mt("geolambda"));
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*serve_cmd) return serve(common);
        if (*replay_cmd) return replay_file(common, replay_path, speed, url);
        if (*register_cmd) return register_views(common, views_file);
        if (*build_cmd) return build_view(common, view_name);
        if (*ref_cmd) return load_reference(common, ref_name, ref_file);
        if (*export_cmd) {
            export_request.format = gl::parse_export_format(format);
            export_request.layer = *gl::parse_export_layer(layer);
            if (*population_opt) export_request.population = population;
            if (*baseline_opt) export_request.baseline = baseline;
            return export_view(common, export_request, out_path);
        }
        if (*gameday_cmd) return gen_gameday(gameday_out, seed);
    } catch (const gl::Error& e) {
        std::cerr << fmt::format("error [{}]{}: {}\n", gl::to_string(e.code()),
                                 e.field().empty() ? "" : " " + e.field(), e.what());
        return 2;
    }
    return 0;
}
