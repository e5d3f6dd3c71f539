#include <json.hpp>

#include "pipeplan/model_graph.hpp"

namespace pipeplan {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) throw ParseError("unknown field '" + it.key() + "' in " + where);
    }
}

int require_int(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ParseError("missing field '" + std::string(key) + "' in " + where);
    const json& v = obj.at(key);
    if (!v.is_number_integer()) throw ParseError("field '" + std::string(key) + "' in " + where + " must be an integer");
    return v.get<int>();
}

std::pair<int, int> require_int_pair(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ParseError("missing field '" + std::string(key) + "' in " + where);
    const json& v = obj.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
        throw ParseError("field '" + std::string(key) + "' in " + where + " must be a pair of integers");
    return {v[0].get<int>(), v[1].get<int>()};
}

void forbid(const json& obj, const char* key, const std::string& where) {
    if (obj.contains(key))
        throw ParseError("field '" + std::string(key) + "' is not allowed in " + where);
}

} // namespace

ModelGraph parse_model(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("model file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("model file must be a JSON object");
    reject_unknown(doc, {"name", "input", "layers", "edges"}, "model file");

    if (!doc.contains("name") || !doc.at("name").is_string())
        throw ParseError("model file needs a string 'name'");
    std::string name = doc.at("name").get<std::string>();

    if (!doc.contains("input") || !doc.at("input").is_object())
        throw ParseError("model file needs an 'input' object");
    const json& in = doc.at("input");
    reject_unknown(in, {"channels", "height", "width"}, "input");
    InputShape input{require_int(in, "channels", "input"), require_int(in, "height", "input"),
                     require_int(in, "width", "input")};

    if (!doc.contains("layers") || !doc.at("layers").is_array())
        throw ParseError("model file needs a 'layers' array");
    std::vector<LayerSpec> layers;
    for (const json& jl : doc.at("layers")) {
        if (!jl.is_object()) throw ParseError("each layer must be an object");
        int id = require_int(jl, "id", "layer");
        std::string where = "layer " + std::to_string(id);
        reject_unknown(jl, {"id", "type", "kernel", "stride", "padding", "in_channels", "out_channels"},
                       where);
        if (!jl.contains("type") || !jl.at("type").is_string())
            throw ParseError(where + " needs a string 'type'");
        LayerSpec l;
        l.id = id;
        l.kind = layer_kind_from_string(jl.at("type").get<std::string>());
        if (l.is_compute()) {
            auto [kh, kw] = require_int_pair(jl, "kernel", where);
            l.kernel_h = kh;
            l.kernel_w = kw;
            auto [sh, sw] = require_int_pair(jl, "stride", where);
            l.stride_h = sh;
            l.stride_w = sw;
            auto [ph, pw] = require_int_pair(jl, "padding", where);
            l.pad_h = ph;
            l.pad_w = pw;
        } else {
            forbid(jl, "kernel", where);
            forbid(jl, "stride", where);
            forbid(jl, "padding", where);
        }
        if (l.is_conv()) {
            l.in_channels = require_int(jl, "in_channels", where);
            l.out_channels = require_int(jl, "out_channels", where);
        } else {
            forbid(jl, "in_channels", where);
            forbid(jl, "out_channels", where);
        }
        layers.push_back(l);
    }

    if (!doc.contains("edges") || !doc.at("edges").is_array())
        throw ParseError("model file needs an 'edges' array");
    std::vector<std::pair<int, int>> edges;
    for (const json& je : doc.at("edges")) {
        if (!je.is_array() || je.size() != 2 || !je[0].is_number_integer() || !je[1].is_number_integer())
            throw ParseError("each edge must be a pair of layer ids");
        edges.emplace_back(je[0].get<int>(), je[1].get<int>());
    }

    return ModelGraph::from_parts(std::move(name), input, std::move(layers), std::move(edges));
}

std::string write_model(const ModelGraph& g) {
    ordered_json doc;
    doc["name"] = g.name();
    doc["input"] = {{"channels", g.input_shape().channels},
                    {"height", g.input_shape().height},
                    {"width", g.input_shape().width}};
    doc["layers"] = ordered_json::array();
    for (const auto& l : g.layers()) {
        ordered_json jl;
        jl["id"] = l.id;
        jl["type"] = to_string(l.kind);
        if (l.is_compute()) {
            jl["kernel"] = {l.kernel_h, l.kernel_w};
            jl["stride"] = {l.stride_h, l.stride_w};
            jl["padding"] = {l.pad_h, l.pad_w};
        }
        if (l.is_conv()) {
            jl["in_channels"] = l.in_channels;
            jl["out_channels"] = l.out_channels;
        }
        doc["layers"].push_back(jl);
    }
    doc["edges"] = ordered_json::array();
    for (auto [from, to] : g.edges()) doc["edges"].push_back({from, to});
    return doc.dump(2) + "\n";
}

} // namespace pipeplan
