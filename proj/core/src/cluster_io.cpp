#include <set>

#include <json.hpp>

#include "pipeplan/cost_model.hpp"
#include "pipeplan/errors.hpp"

namespace pipeplan {

namespace {
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr double kBytesPerMbps = 125000.0;

double require_number(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ParseError("missing field '" + std::string(key) + "' in " + where);
    if (!obj.at(key).is_number()) throw ParseError("field '" + std::string(key) + "' in " + where + " must be a number");
    return obj.at(key).get<double>();
}
} // namespace

Cluster parse_cluster(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("cluster file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("cluster file must be a JSON object");
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (it.key() != "bandwidth_mbps" && it.key() != "bytes_per_element" && it.key() != "devices")
            throw ParseError("unknown field '" + it.key() + "' in cluster file");

    Cluster c;
    double mbps = require_number(doc, "bandwidth_mbps", "cluster file");
    if (mbps <= 0) throw ValidationError("bandwidth_mbps must be positive");
    c.bandwidth_bytes_per_s = mbps * kBytesPerMbps;

    if (doc.contains("bytes_per_element")) {
        if (!doc.at("bytes_per_element").is_number_integer())
            throw ParseError("bytes_per_element must be an integer");
        c.bytes_per_element = doc.at("bytes_per_element").get<int>();
        if (c.bytes_per_element < 1) throw ValidationError("bytes_per_element must be >= 1");
    }

    if (!doc.contains("devices") || !doc.at("devices").is_array() || doc.at("devices").empty())
        throw ValidationError("cluster file needs a non-empty 'devices' array");
    std::set<std::string> names;
    for (const json& jd : doc.at("devices")) {
        if (!jd.is_object()) throw ParseError("each device must be an object");
        for (auto it = jd.begin(); it != jd.end(); ++it)
            if (it.key() != "name" && it.key() != "flops" && it.key() != "alpha")
                throw ParseError("unknown field '" + it.key() + "' in device");
        if (!jd.contains("name") || !jd.at("name").is_string())
            throw ParseError("each device needs a string 'name'");
        DeviceSpec d;
        d.name = jd.at("name").get<std::string>();
        d.capacity_flops = require_number(jd, "flops", "device " + d.name);
        if (jd.contains("alpha")) d.alpha = require_number(jd, "alpha", "device " + d.name);
        if (d.capacity_flops <= 0) throw ValidationError("device " + d.name + " needs positive flops");
        if (d.alpha <= 0) throw ValidationError("device " + d.name + " needs positive alpha");
        if (!names.insert(d.name).second) throw ValidationError("duplicate device name " + d.name);
        c.devices.push_back(d);
    }
    return c;
}

std::string write_cluster(const Cluster& c) {
    ordered_json doc;
    doc["bandwidth_mbps"] = c.bandwidth_bytes_per_s / kBytesPerMbps;
    doc["bytes_per_element"] = c.bytes_per_element;
    doc["devices"] = ordered_json::array();
    for (const auto& d : c.devices) {
        ordered_json jd;
        jd["name"] = d.name;
        jd["flops"] = d.capacity_flops;
        jd["alpha"] = d.alpha;
        doc["devices"].push_back(jd);
    }
    return doc.dump(2) + "\n";
}

} // namespace pipeplan
