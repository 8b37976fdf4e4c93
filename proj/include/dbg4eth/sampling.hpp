#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dbg4eth/transactions.hpp"

namespace dbg4eth {

struct SampledSubgraph {
    std::string center;
    std::vector<std::string> nodes;             // sorted, includes center
    std::vector<TransactionRecord> retained;    // deduped, input order
};

namespace detail {

struct PairStat {
    u128 total = 0;  // wei over both directions
    int count = 0;
};

// Neighbor ranking key: average value desc, then total desc, then address asc.
struct RankedNeighbor {
    double avg_eth;
    u128 total;
    const std::string* addr;

    bool operator<(const RankedNeighbor& o) const {
        if (avg_eth != o.avg_eth) return avg_eth > o.avg_eth;
        if (total != o.total) return total > o.total;
        return *addr < *o.addr;
    }
};

}  // namespace detail

// Importance-based k-hop neighborhood sampling. Starting from `center`, each
// hop expands every frontier node by its top-K counterparties ranked by
// average transaction value over the merged (undirected) pair; ties fall back
// to total value, then lexicographic address. Retaining a counterparty
// retains every transaction of that pair. Self-transactions of sampled nodes
// are always retained; they do not compete in the ranking.
inline SampledSubgraph sample_khop(const std::string& center,
                                   const std::vector<TransactionRecord>& ledger, int k,
                                   int hops) {
    if (k < 1) throw ValidationError("sample_khop: K must be >= 1");
    if (hops < 0) throw ValidationError("sample_khop: hops must be >= 0");

    // Adjacency: per node, merged pair stats and tx indices per counterparty.
    std::unordered_map<std::string, std::map<std::string, detail::PairStat>> stats;
    std::unordered_map<std::string, std::map<std::string, std::vector<size_t>>> pair_txs;
    std::unordered_map<std::string, std::vector<size_t>> self_txs;
    bool center_seen = false;
    for (size_t i = 0; i < ledger.size(); ++i) {
        const TransactionRecord& tx = ledger[i];
        if (tx.sender == center || tx.receiver == center) center_seen = true;
        if (tx.sender == tx.receiver) {
            self_txs[tx.sender].push_back(i);
            continue;
        }
        for (int dir = 0; dir < 2; ++dir) {
            const std::string& a = dir == 0 ? tx.sender : tx.receiver;
            const std::string& b = dir == 0 ? tx.receiver : tx.sender;
            detail::PairStat& ps = stats[a][b];
            ps.total += tx.value_wei;
            ps.count += 1;
            pair_txs[a][b].push_back(i);
        }
    }
    if (!center_seen) throw ValidationError("sample_khop: center '" + center + "' not in ledger");

    std::set<std::string> visited{center};
    std::vector<std::string> frontier{center};
    std::set<size_t> retained_idx;
    for (int hop = 0; hop < hops && !frontier.empty(); ++hop) {
        std::set<std::string> next;
        for (const std::string& v : frontier) {
            auto it = stats.find(v);
            if (it == stats.end()) continue;
            std::vector<detail::RankedNeighbor> ranked;
            ranked.reserve(it->second.size());
            for (const auto& [addr, ps] : it->second)
                ranked.push_back({wei_to_eth(ps.total) / ps.count, ps.total, &addr});
            std::sort(ranked.begin(), ranked.end());
            int take = std::min<int>(k, static_cast<int>(ranked.size()));
            for (int i = 0; i < take; ++i) {
                const std::string& u = *ranked[i].addr;
                for (size_t idx : pair_txs[v][u]) retained_idx.insert(idx);
                if (!visited.count(u)) {
                    visited.insert(u);
                    next.insert(u);
                }
            }
        }
        frontier.assign(next.begin(), next.end());
    }

    for (const std::string& v : visited) {
        auto it = self_txs.find(v);
        if (it == self_txs.end()) continue;
        for (size_t idx : it->second) retained_idx.insert(idx);
    }

    SampledSubgraph out;
    out.center = center;
    out.nodes.assign(visited.begin(), visited.end());
    out.retained.reserve(retained_idx.size());
    for (size_t idx : retained_idx) out.retained.push_back(ledger[idx]);
    return out;
}

}  // namespace dbg4eth
