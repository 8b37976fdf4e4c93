#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "dbg4eth/features.hpp"
#include "dbg4eth/sampling.hpp"

namespace dbg4eth {

struct GraphNode {
    std::string address;
    AccountFeatureVector features{};
};

// Directed merged edge: total ETH value and transaction count.
struct StaticEdge {
    int src = 0;
    int dst = 0;
    double w = 0.0;
    double t = 0.0;
};

struct StaticSubgraph {
    std::string center;
    int center_index = 0;
    std::vector<GraphNode> nodes;  // sorted by address
    std::vector<StaticEdge> edges;
    int label = 0;
    std::string label_name;
};

// Directed per-slice edge: total ETH value within the slice.
struct SliceEdge {
    int src = 0;
    int dst = 0;
    double w = 0.0;
};

struct DynamicGraphSequence {
    std::string center;
    int center_index = 0;
    std::vector<GraphNode> nodes;  // same set and order as the static graph
    std::vector<std::vector<SliceEdge>> slices;  // exactly T entries
    int label = 0;
    std::string label_name;
};

namespace detail {

inline std::vector<GraphNode> build_nodes(const std::vector<std::string>& addresses,
                                          const std::vector<TransactionRecord>& retained) {
    std::unordered_map<std::string, std::vector<TransactionRecord>> touching;
    for (const TransactionRecord& tx : retained) {
        touching[tx.sender].push_back(tx);
        if (tx.receiver != tx.sender) touching[tx.receiver].push_back(tx);
    }
    std::vector<GraphNode> nodes;
    nodes.reserve(addresses.size());
    for (const std::string& a : addresses)
        nodes.push_back({a, extract_node_features(a, touching[a])});
    return nodes;
}

inline std::unordered_map<std::string, int> index_of(const std::vector<GraphNode>& nodes) {
    std::unordered_map<std::string, int> idx;
    for (size_t i = 0; i < nodes.size(); ++i) idx[nodes[i].address] = static_cast<int>(i);
    return idx;
}

}  // namespace detail

// Merges retained transactions into directed [w, t] edges over the sampled
// node set. Node order is the sorted address order from sampling; edges are
// sorted by (src, dst).
inline StaticSubgraph build_static_subgraph(const SampledSubgraph& sampled, int label,
                                            const std::string& label_name) {
    StaticSubgraph g;
    g.center = sampled.center;
    g.label = label;
    g.label_name = label_name;
    g.nodes = detail::build_nodes(sampled.nodes, sampled.retained);
    auto idx = detail::index_of(g.nodes);
    g.center_index = idx.at(g.center);

    std::map<std::pair<int, int>, std::pair<u128, int>> merged;
    for (const TransactionRecord& tx : sampled.retained) {
        auto& agg = merged[{idx.at(tx.sender), idx.at(tx.receiver)}];
        agg.first += tx.value_wei;
        agg.second += 1;
    }
    for (const auto& [key, agg] : merged)
        g.edges.push_back({key.first, key.second, wei_to_eth(agg.first),
                           static_cast<double>(agg.second)});
    return g;
}

// Splits retained transactions into T slices by normalized evolution time
// (computed over the retained set) and merges per-slice directed edges by
// total ETH value. Slice index floor(time * T) with the right endpoint
// clamped into the last slice.
inline DynamicGraphSequence build_dynamic_sequence(const SampledSubgraph& sampled, int T,
                                                   int label, const std::string& label_name) {
    if (T < 1) throw ValidationError("build_dynamic_sequence: T must be >= 1");
    DynamicGraphSequence g;
    g.center = sampled.center;
    g.label = label;
    g.label_name = label_name;
    g.nodes = detail::build_nodes(sampled.nodes, sampled.retained);
    auto idx = detail::index_of(g.nodes);
    g.center_index = idx.at(g.center);
    g.slices.assign(T, {});

    if (sampled.retained.empty()) return g;
    std::vector<int64_t> ts;
    ts.reserve(sampled.retained.size());
    for (const TransactionRecord& tx : sampled.retained) ts.push_back(tx.timestamp);
    std::vector<double> evo = evolution_time(ts);

    std::vector<std::map<std::pair<int, int>, u128>> merged(T);
    for (size_t i = 0; i < sampled.retained.size(); ++i) {
        const TransactionRecord& tx = sampled.retained[i];
        int slice = std::min(static_cast<int>(evo[i] * T), T - 1);
        merged[slice][{idx.at(tx.sender), idx.at(tx.receiver)}] += tx.value_wei;
    }
    for (int k = 0; k < T; ++k)
        for (const auto& [key, total] : merged[k])
            g.slices[k].push_back({key.first, key.second, wei_to_eth(total)});
    return g;
}

}  // namespace dbg4eth
