#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "dbg4eth/common.hpp"
#include "dbg4eth/transactions.hpp"

namespace dbg4eth {

struct SyntheticOptions {
    std::vector<std::string> archetypes{"exchange", "phishing", "mining"};
    int accounts_per_archetype = 200;
    uint64_t seed = 17;
};

struct SyntheticRow {
    std::string sender, receiver;
    u128 value_wei = 0;
    int64_t timestamp = 0;
    u128 gas_price_wei = 0;
    uint64_t gas_used = 21000;
    bool submitted = true;
};

struct SyntheticCorpus {
    std::vector<SyntheticRow> rows;           // timestamp-sorted, ids implicit by position
    std::vector<LabelRecord> labels;
    std::set<std::string> contract_addresses;
};

namespace detail {

inline std::string tagged(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%04d", prefix, i);
    return buf;
}

constexpr int64_t kWindowStart = 1600000000;
constexpr int64_t kWindowSeconds = 90LL * 24 * 3600;
constexpr u128 kCentiEth = u128(10000000000000000ULL);  // 0.01 ETH
constexpr u128 kGwei = u128(1000000000ULL);

inline u128 centi_eth(int64_t hundredths) { return kCentiEth * u128(hundredths); }

}  // namespace detail

// Deterministic three-archetype ledger. Partner rules keep center features
// clean: only exchange centers receive organic background traffic; phishing
// and mining centers interact with their own victims/mules/pools alone.
inline SyntheticCorpus generate_synthetic_corpus(const SyntheticOptions& opt) {
    for (const std::string& a : opt.archetypes)
        if (a != "exchange" && a != "phishing" && a != "mining")
            throw ValidationError("synthetic: unknown archetype " + a);
    if (opt.archetypes.empty()) throw ValidationError("synthetic: no archetypes requested");
    if (opt.accounts_per_archetype < 10)
        throw ValidationError("synthetic: need at least 10 accounts per archetype");

    using detail::centi_eth;
    using detail::kGwei;
    using detail::kWindowSeconds;
    using detail::kWindowStart;
    using detail::tagged;

    SyntheticCorpus corpus;
    int n = opt.accounts_per_archetype;
    bool has_exchange = false;
    for (const std::string& a : opt.archetypes) has_exchange |= a == "exchange";

    const int n_contracts = 20;
    for (int i = 0; i < n_contracts; ++i) corpus.contract_addresses.insert(tagged("ctr", i));

    const int n_background = std::max(200, 3 * n);
    std::vector<std::string> background;
    for (int i = 0; i < n_background; ++i) background.push_back(tagged("user", i));

    std::vector<std::string> exchange_centers;
    if (has_exchange)
        for (int i = 0; i < n; ++i) exchange_centers.push_back(tagged("exch", i));

    auto push = [&](std::string sender, std::string receiver, u128 value, int64_t ts,
                    u128 gas_price, uint64_t gas_used) {
        corpus.rows.push_back(
            {std::move(sender), std::move(receiver), value, ts, gas_price, gas_used, true});
    };

    for (const std::string& archetype : opt.archetypes) {
        if (archetype == "exchange") {
            for (int i = 0; i < n; ++i) {
                Rng rng(derive_seed(opt.seed, "synth.exch." + std::to_string(i)));
                std::string center = exchange_centers[i];
                corpus.labels.push_back({center, "exchange"});
                int n_cp = static_cast<int>(rng.uniform_int(40, 70));
                int n_tx = static_cast<int>(rng.uniform_int(n_cp, 90));
                std::vector<std::string> cps;
                for (int c = 0; c < n_cp; ++c) {
                    if (rng.uniform() < 0.08)
                        cps.push_back(tagged("ctr", static_cast<int>(rng.uniform_int(0, n_contracts - 1))));
                    else
                        cps.push_back(background[rng.uniform_int(0, background.size() - 1)]);
                }
                for (int t = 0; t < n_tx; ++t) {
                    const std::string& cp =
                        t < n_cp ? cps[t] : cps[rng.uniform_int(0, cps.size() - 1)];
                    int64_t ts = kWindowStart + static_cast<int64_t>(rng.uniform_int(0, kWindowSeconds));
                    u128 value = centi_eth(rng.uniform_int(5, 500));
                    u128 gp = kGwei * u128(rng.uniform_int(10, 100));
                    bool to_contract = corpus.contract_addresses.count(cp) > 0;
                    uint64_t gas = to_contract ? 60000 : 21000;
                    if (!to_contract && rng.uniform() < 0.5)
                        push(cp, center, value, ts, gp, gas);
                    else
                        push(center, cp, value, ts, gp, gas);
                }
            }
        } else if (archetype == "phishing") {
            int victim_id = 0, mule_id = 0;
            for (int i = 0; i < n; ++i) {
                Rng rng(derive_seed(opt.seed, "synth.phis." + std::to_string(i)));
                std::string center = tagged("phis", i);
                corpus.labels.push_back({center, "phishing"});
                int64_t lifetime = rng.uniform_int(2 * 3600, 48 * 3600);
                int64_t start =
                    kWindowStart + static_cast<int64_t>(rng.uniform_int(0, kWindowSeconds - lifetime - 1));
                int n_in = static_cast<int>(rng.uniform_int(8, 20));
                int n_out = static_cast<int>(rng.uniform_int(5, 12));
                u128 total_in = 0;
                for (int t = 0; t < n_in; ++t) {
                    int64_t ts = start + static_cast<int64_t>(
                                             rng.uniform_int(0, (lifetime * 6) / 10));
                    u128 value = centi_eth(rng.uniform_int(10, 200));
                    total_in += value;
                    push(tagged("vic", victim_id++), center, value, ts,
                         kGwei * u128(rng.uniform_int(20, 200)), 21000);
                }
                // Drain ~95% of the take through fresh mules in the tail of
                // the lifetime.
                std::vector<double> shares(n_out);
                double share_sum = 0.0;
                for (double& s : shares) {
                    s = rng.uniform(0.2, 1.0);
                    share_sum += s;
                }
                u128 drained = 0;
                u128 drain_total = total_in / u128(100) * u128(95);
                for (int t = 0; t < n_out; ++t) {
                    int64_t ts = start + (lifetime * 6) / 10 +
                                 static_cast<int64_t>(
                                     rng.uniform_int(1, (lifetime * 4) / 10 - 1));
                    u128 value;
                    if (t + 1 == n_out) {
                        value = drain_total - drained;
                    } else {
                        value = u128(static_cast<uint64_t>(
                                    static_cast<double>(uint64_t(drain_total / u128(1000000000000ULL))) *
                                    shares[t] / share_sum)) *
                                u128(1000000000000ULL);
                        drained += value;
                    }
                    push(center, tagged("mule", mule_id++), value, ts,
                         kGwei * u128(rng.uniform_int(20, 200)), 21000);
                }
            }
        } else {  // mining
            const int n_pools = 8;
            for (int i = 0; i < n; ++i) {
                Rng rng(derive_seed(opt.seed, "synth.mine." + std::to_string(i)));
                std::string center = tagged("mine", i);
                corpus.labels.push_back({center, "mining"});
                int n_pool = rng.uniform() < 0.5 ? 1 : 2;
                std::vector<std::string> pools;
                for (int k = 0; k < n_pool; ++k)
                    pools.push_back(tagged("pool", static_cast<int>(rng.uniform_int(0, n_pools - 1))));
                int64_t period = rng.uniform_int(1800, 7200);
                int n_pay = static_cast<int>(rng.uniform_int(30, 80));
                int64_t span = period * n_pay;
                int64_t start =
                    kWindowStart + static_cast<int64_t>(rng.uniform_int(0, kWindowSeconds - span - 1));
                u128 payout = centi_eth(rng.uniform_int(50, 200));
                int64_t jitter_cap = std::max<int64_t>(1, period / 100);
                u128 balance = 0;
                int64_t last_ts = start;
                int n_consol = static_cast<int>(rng.uniform_int(2, 6));
                int consol_every = std::max(1, n_pay / (n_consol + 1));
                std::string cold = tagged("cold", i);
                for (int t = 0; t < n_pay; ++t) {
                    int64_t jitter = rng.uniform_int(-jitter_cap, jitter_cap);
                    int64_t ts = start + period * t + jitter;
                    push(pools[t % pools.size()], center, payout, ts,
                         kGwei * u128(rng.uniform_int(5, 30)), 21000);
                    balance += payout;
                    last_ts = ts;
                    if (t > 0 && t % consol_every == 0 && balance > 0) {
                        // Consolidation leaves received-interval structure
                        // untouched; only sends move value out.
                        push(center, cold, balance, ts + period / 4,
                             kGwei * u128(rng.uniform_int(5, 30)), 21000);
                        balance = 0;
                    }
                }
                if (balance > 0)
                    push(center, cold, balance, last_ts + period / 4,
                         kGwei * u128(rng.uniform_int(5, 30)), 21000);
            }
        }
    }

    // Background chatter gives the ingest stage an unlabeled high-activity
    // pool and the exchanges organic neighbors.
    for (int i = 0; i < n_background; ++i) {
        Rng rng(derive_seed(opt.seed, "synth.user." + std::to_string(i)));
        int n_tx = static_cast<int>(rng.uniform_int(2, 10));
        for (int t = 0; t < n_tx; ++t) {
            int64_t ts = kWindowStart + static_cast<int64_t>(rng.uniform_int(0, kWindowSeconds));
            u128 value = centi_eth(rng.uniform_int(1, 300));
            u128 gp = kGwei * u128(rng.uniform_int(10, 100));
            double pick = rng.uniform();
            if (pick < 0.10) {
                push(background[i], tagged("ctr", static_cast<int>(rng.uniform_int(0, n_contracts - 1))),
                     value, ts, gp, 60000);
            } else if (pick < 0.30 && !exchange_centers.empty()) {
                const std::string& ex = exchange_centers[rng.uniform_int(0, exchange_centers.size() - 1)];
                if (rng.uniform() < 0.5)
                    push(background[i], ex, value, ts, gp, 21000);
                else
                    push(ex, background[i], value, ts, gp, 21000);
            } else {
                size_t j = rng.uniform_int(0, background.size() - 1);
                if (j == static_cast<size_t>(i)) j = (j + 1) % background.size();
                push(background[i], background[j], value, ts, gp, 21000);
            }
        }
    }

    // ~1% unsubmitted noise rows; the parser must drop them.
    {
        Rng rng(derive_seed(opt.seed, "synth.unsubmitted"));
        size_t n_noise = corpus.rows.size() / 100 + 1;
        size_t n_submitted = corpus.rows.size();
        for (size_t t = 0; t < n_noise; ++t) {
            const SyntheticRow& src = corpus.rows[rng.uniform_int(0, n_submitted - 1)];
            SyntheticRow noisy = src;
            noisy.timestamp =
                kWindowStart + static_cast<int64_t>(rng.uniform_int(0, kWindowSeconds));
            noisy.value_wei = centi_eth(rng.uniform_int(1, 500));
            noisy.submitted = false;
            corpus.rows.push_back(noisy);
        }
    }

    std::sort(corpus.rows.begin(), corpus.rows.end(), [](const SyntheticRow& a, const SyntheticRow& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        if (a.sender != b.sender) return a.sender < b.sender;
        if (a.receiver != b.receiver) return a.receiver < b.receiver;
        return a.value_wei < b.value_wei;
    });
    std::sort(corpus.labels.begin(), corpus.labels.end(),
              [](const LabelRecord& a, const LabelRecord& b) { return a.address < b.address; });
    return corpus;
}

inline void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::string& tx_path,
                                   const std::string& labels_path) {
    std::ofstream tx(tx_path);
    if (!tx) throw StageError("synthetic: cannot write " + tx_path);
    tx << "tx_id,sender,receiver,value_wei,timestamp,gas_price_wei,gas_used,"
          "sender_is_contract,receiver_is_contract,status\n";
    int id = 0;
    char buf[16];
    for (const SyntheticRow& r : corpus.rows) {
        std::snprintf(buf, sizeof(buf), "tx_%06d", id++);
        tx << buf << ',' << r.sender << ',' << r.receiver << ',' << u128_to_string(r.value_wei)
           << ',' << r.timestamp << ',' << u128_to_string(r.gas_price_wei) << ',' << r.gas_used
           << ',' << (corpus.contract_addresses.count(r.sender) ? 1 : 0) << ','
           << (corpus.contract_addresses.count(r.receiver) ? 1 : 0) << ','
           << (r.submitted ? "submitted" : "unsubmitted") << '\n';
    }
    std::ofstream lb(labels_path);
    if (!lb) throw StageError("synthetic: cannot write " + labels_path);
    lb << "address,label_name\n";
    for (const LabelRecord& l : corpus.labels) lb << l.address << ',' << l.label_name << '\n';
}

}  // namespace dbg4eth
