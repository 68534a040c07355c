#include "descriptor_json.hpp"

namespace geolambda::detail {

using nlohmann::json;

json bbox_to_json(const BoundingBox& b) {
    return {{"min_lat", b.min_lat()}, {"min_lon", b.min_lon()}, {"max_lat", b.max_lat()}, {"max_lon", b.max_lon()}};
}

BoundingBox bbox_from_json(const json& obj) {
    try {
        return BoundingBox::make(obj.at("min_lat").get<double>(), obj.at("min_lon").get<double>(),
                                 obj.at("max_lat").get<double>(), obj.at("max_lon").get<double>());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bbox: ") + e.what(), "bbox");
    }
}

json descriptor_to_json(const ViewDescriptor& d) {
    json obj = {
        {"name", d.name},
        {"bbox", bbox_to_json(d.spec.bbox())},
        {"cellsize", d.spec.cellsize()},
        {"window", {{"start", d.window.start()}, {"end", d.window.end()}}},
        {"bin_width", d.bin_width},
        {"venues", d.venues},
    };
    obj["source"] = d.source_filter ? json(std::string(to_string(*d.source_filter))) : json(nullptr);
    obj["scenario"] = d.scenario ? json{{"name", d.scenario->name},
                                        {"start", d.scenario->window.start()},
                                        {"end", d.scenario->window.end()}}
                                 : json(nullptr);
    return obj;
}

ViewDescriptor descriptor_from_json(const json& obj) {
    std::string field = "descriptor";
    try {
        if (!obj.is_object()) throw Error(ErrorCode::InvalidArgument, "descriptor must be an object", field);
        field = "name";
        const auto name = obj.at("name").get<std::string>();
        field = "bbox";
        const auto bbox = bbox_from_json(obj.at("bbox"));
        field = "cellsize";
        const double cellsize = obj.value("cellsize", kThreeArcSeconds);
        const auto spec = GridSpec::make(bbox, cellsize);
        field = "window";
        const auto& w = obj.at("window");
        const auto window = TimeWindow::make(w.at("start").get<EpochSeconds>(), w.at("end").get<EpochSeconds>());

        ViewDescriptor d{name, spec, window, std::nullopt, std::nullopt, kDefaultBinWidth, {}};
        field = "source";
        if (auto it = obj.find("source"); it != obj.end() && !it->is_null()) {
            const auto s = parse_source(it->get<std::string>());
            if (!s) throw Error(ErrorCode::InvalidArgument, "unknown source filter", field);
            d.source_filter = *s;
        }
        field = "scenario";
        if (auto it = obj.find("scenario"); it != obj.end() && !it->is_null()) {
            d.scenario = ScenarioSpec{it->at("name").get<std::string>(),
                                      TimeWindow::make(it->at("start").get<EpochSeconds>(),
                                                       it->at("end").get<EpochSeconds>())};
        }
        field = "bin_width";
        d.bin_width = obj.value("bin_width", kDefaultBinWidth);
        field = "venues";
        if (auto it = obj.find("venues"); it != obj.end() && !it->is_null()) {
            d.venues = it->get<std::vector<std::string>>();
        }
        return d;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, field + ": " + e.what(), field);
    } catch (const Error& e) {
        if (!e.field().empty()) throw;
        throw Error(e.code(), e.what(), field);
    }
}

}  // namespace geolambda::detail

namespace geolambda {

std::string to_json(const ViewDescriptor& d) { return detail::descriptor_to_json(d).dump(); }

std::vector<ViewDescriptor> parse_view_descriptors(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
    if (doc.is_object() && doc.contains("views")) doc = doc.at("views");
    std::vector<ViewDescriptor> out;
    if (doc.is_array()) {
        for (const auto& item : doc) out.push_back(detail::descriptor_from_json(item));
    } else {
        out.push_back(detail::descriptor_from_json(doc));
    }
    return out;
}

}  // namespace geolambda
