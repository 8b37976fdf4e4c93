#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbg4eth/graphs.hpp"

namespace dbg4eth {

inline constexpr const char* kDatasetVersionLine = "dbg4eth-dataset v1";

enum class Split { Train, Val, Test };

inline std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        default: return "test";
    }
}

inline Split split_from_name(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw ValidationError("unknown split name '" + s + "'");
}

struct DatasetInstance {
    StaticSubgraph static_graph;
    DynamicGraphSequence dynamic_graph;
    Split split = Split::Train;
};

struct SamplingParams {
    int k = 2000;
    int hops = 2;
    int T = 10;
};

struct Dataset {
    SamplingParams params;
    std::vector<DatasetInstance> instances;
};

namespace detail {

using nlohmann::json;

inline json node_to_json(const GraphNode& n) {
    json j;
    j["addr"] = n.address;
    j["x"] = std::vector<double>(n.features.begin(), n.features.end());
    return j;
}

inline GraphNode node_from_json(const json& j) {
    GraphNode n;
    n.address = j.at("addr").get<std::string>();
    auto x = j.at("x").get<std::vector<double>>();
    if (x.size() != kFeatureCount)
        throw ValidationError("dataset: node feature vector must have 15 entries");
    std::copy(x.begin(), x.end(), n.features.begin());
    return n;
}

inline json static_to_json(const StaticSubgraph& g) {
    json j;
    j["kind"] = "static";
    j["center"] = g.center;
    j["center_index"] = g.center_index;
    j["label"] = g.label;
    j["label_name"] = g.label_name;
    j["nodes"] = json::array();
    for (const GraphNode& n : g.nodes) j["nodes"].push_back(node_to_json(n));
    j["edges"] = json::array();
    for (const StaticEdge& e : g.edges) j["edges"].push_back({e.src, e.dst, e.w, e.t});
    return j;
}

inline StaticSubgraph static_from_json(const json& j) {
    StaticSubgraph g;
    g.center = j.at("center").get<std::string>();
    g.center_index = j.at("center_index").get<int>();
    g.label = j.at("label").get<int>();
    g.label_name = j.at("label_name").get<std::string>();
    for (const json& n : j.at("nodes")) g.nodes.push_back(node_from_json(n));
    for (const json& e : j.at("edges"))
        g.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>(),
                           e.at(3).get<double>()});
    return g;
}

inline json dynamic_to_json(const DynamicGraphSequence& g) {
    json j;
    j["kind"] = "dynamic";
    j["center"] = g.center;
    j["center_index"] = g.center_index;
    j["label"] = g.label;
    j["label_name"] = g.label_name;
    j["nodes"] = json::array();
    for (const GraphNode& n : g.nodes) j["nodes"].push_back(node_to_json(n));
    j["slices"] = json::array();
    for (const auto& slice : g.slices) {
        json s = json::array();
        for (const SliceEdge& e : slice) s.push_back({e.src, e.dst, e.w});
        j["slices"].push_back(std::move(s));
    }
    return j;
}

inline DynamicGraphSequence dynamic_from_json(const json& j) {
    DynamicGraphSequence g;
    g.center = j.at("center").get<std::string>();
    g.center_index = j.at("center_index").get<int>();
    g.label = j.at("label").get<int>();
    g.label_name = j.at("label_name").get<std::string>();
    for (const json& n : j.at("nodes")) g.nodes.push_back(node_from_json(n));
    for (const json& s : j.at("slices")) {
        std::vector<SliceEdge> slice;
        for (const json& e : s)
            slice.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
        g.slices.push_back(std::move(slice));
    }
    return g;
}

inline void expect_version_line(std::istream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line) || std::string(trim(line)) != kDatasetVersionLine)
        throw ValidationError(path + ": missing or wrong version header, expected '" +
                              std::string(kDatasetVersionLine) + "'");
}

}  // namespace detail

// Writes static.jsonl, dynamic.jsonl and manifest.jsonl under dir. Each file
// starts with the dataset version line; every following line is one
// self-describing JSON object.
inline void persist_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    using detail::json;

    std::ofstream st(dir / "static.jsonl");
    std::ofstream dy(dir / "dynamic.jsonl");
    std::ofstream mf(dir / "manifest.jsonl");
    if (!st || !dy || !mf)
        throw StageError("persist_dataset: cannot open output files under " + dir.string());
    st << kDatasetVersionLine << "\n";
    dy << kDatasetVersionLine << "\n";
    mf << kDatasetVersionLine << "\n";

    json manifest;
    manifest["kind"] = "manifest";
    manifest["k"] = ds.params.k;
    manifest["hops"] = ds.params.hops;
    manifest["T"] = ds.params.T;
    manifest["instances"] = json::array();
    for (const DatasetInstance& inst : ds.instances) {
        st << detail::static_to_json(inst.static_graph).dump() << "\n";
        dy << detail::dynamic_to_json(inst.dynamic_graph).dump() << "\n";
        json m;
        m["center"] = inst.static_graph.center;
        m["label"] = inst.static_graph.label;
        m["label_name"] = inst.static_graph.label_name;
        m["split"] = split_name(inst.split);
        m["static_path"] = "static.jsonl";
        m["dynamic_path"] = "dynamic.jsonl";
        manifest["instances"].push_back(std::move(m));
    }
    mf << manifest.dump() << "\n";
}

// Loads a dataset written by persist_dataset. A missing directory or missing
// manifest yields an empty dataset. Split assignments are validated: a center
// appearing under two different splits is an error.
inline Dataset load_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    using detail::json;
    Dataset ds;
    if (!fs::exists(dir / "manifest.jsonl")) return ds;

    std::ifstream mf(dir / "manifest.jsonl");
    detail::expect_version_line(mf, (dir / "manifest.jsonl").string());
    std::string line;
    if (!std::getline(mf, line))
        throw ValidationError("manifest.jsonl: missing manifest object");
    json manifest = json::parse(line);
    ds.params.k = manifest.at("k").get<int>();
    ds.params.hops = manifest.at("hops").get<int>();
    ds.params.T = manifest.at("T").get<int>();

    std::map<std::string, std::string> split_of;
    std::vector<std::pair<std::string, Split>> order;
    for (const json& m : manifest.at("instances")) {
        std::string center = m.at("center").get<std::string>();
        std::string split = m.at("split").get<std::string>();
        auto it = split_of.find(center);
        if (it != split_of.end() && it->second != split)
            throw ValidationError("manifest.jsonl: center '" + center +
                                  "' assigned to two splits ('" + it->second + "', '" + split +
                                  "')");
        split_of[center] = split;
        order.emplace_back(center, split_from_name(split));
    }

    std::map<std::string, StaticSubgraph> statics;
    std::map<std::string, DynamicGraphSequence> dynamics;
    {
        std::ifstream st(dir / "static.jsonl");
        if (st) {
            detail::expect_version_line(st, (dir / "static.jsonl").string());
            while (std::getline(st, line)) {
                if (trim(line).empty()) continue;
                StaticSubgraph g = detail::static_from_json(json::parse(line));
                statics[g.center] = std::move(g);
            }
        }
        std::ifstream dy(dir / "dynamic.jsonl");
        if (dy) {
            detail::expect_version_line(dy, (dir / "dynamic.jsonl").string());
            while (std::getline(dy, line)) {
                if (trim(line).empty()) continue;
                DynamicGraphSequence g = detail::dynamic_from_json(json::parse(line));
                dynamics[g.center] = std::move(g);
            }
        }
    }

    for (const auto& [center, split] : order) {
        auto si = statics.find(center);
        auto di = dynamics.find(center);
        if (si == statics.end() || di == dynamics.end())
            throw ValidationError("dataset: manifest lists center '" + center +
                                  "' but graph records are missing");
        ds.instances.push_back({std::move(si->second), std::move(di->second), split});
    }
    return ds;
}

}  // namespace dbg4eth
