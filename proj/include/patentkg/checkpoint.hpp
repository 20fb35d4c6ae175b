#pragma once

// JSON (de)serialization for ParamStore contents. nlohmann::json emits
// shortest round-trip representations for doubles, so 64-bit values
// survive a save/load cycle exactly.

#include <fstream>
#include <string>

#include <json.hpp>

#include "patentkg/autodiff.hpp"
#include "patentkg/common.hpp"

namespace patentkg {

inline nlohmann::json param_store_to_json(const ParamStore& store) {
    nlohmann::json params = nlohmann::json::object();
    for (const std::string& name : store.names()) {
        const Array& a = store.value(name);
        params[name] = {{"shape", a.shape}, {"values", a.data}};
    }
    return {{"version", kModelFormatVersion}, {"seed", store.seed()}, {"params", params}};
}

inline ParamStore param_store_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("version"))
        throw format_error("parameter checkpoint: missing version header");
    int version = j.at("version").get<int>();
    if (version != kModelFormatVersion)
        throw format_error("parameter checkpoint: expected version " +
                           std::to_string(kModelFormatVersion) + ", found " +
                           std::to_string(version));
    ParamStore store(j.value("seed", std::uint64_t{0}));
    const auto& params = j.at("params");
    // JSON objects iterate in key order; restore sorted by name.
    for (auto it = params.begin(); it != params.end(); ++it) {
        std::vector<std::size_t> shape = it.value().at("shape").get<std::vector<std::size_t>>();
        std::vector<double> values = it.value().at("values").get<std::vector<double>>();
        store.insert(it.key(), Array(std::move(shape), std::move(values)));
    }
    return store;
}

inline void save_param_store(const ParamStore& store, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << param_store_to_json(store).dump(2) << "\n";
    if (!out) throw io_error("write failed: " + path);
}

inline ParamStore load_param_store(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("parameter checkpoint " + path + ": " + e.what());
    }
    return param_store_from_json(j);
}

}  // namespace patentkg
