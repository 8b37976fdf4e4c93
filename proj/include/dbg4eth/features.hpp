#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "dbg4eth/transactions.hpp"

namespace dbg4eth {

// 15-dim behavioral feature vector of an account over a transaction set.
// Index layout follows the feature table: sender block, receiver block,
// fee block, contract count.
enum FeatureIndex : int {
    kNTS = 0,   // transactions sent
    kSTV,       // send total value (ETH)
    kSAV,       // send average value (ETH)
    kMinSTI,    // min send interval (s)
    kMaxSTI,    // max send interval (s)
    kNTR,       // transactions received
    kRTV,       // receive total value (ETH)
    kRAV,       // receive average value (ETH)
    kMinRTI,    // min receive interval (s)
    kMaxRTI,    // max receive interval (s)
    kSETF,      // send total fee (ETH)
    kRETF,      // receive total fee (ETH)
    kSAETF,     // send average fee (ETH)
    kRAETF,     // receive average fee (ETH)
    kNC,        // transactions touching a contract endpoint
    kFeatureCount
};

using AccountFeatureVector = std::array<double, kFeatureCount>;

inline const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = {
        "NTS", "STV", "SAV", "min_STI", "max_STI", "NTR", "RTV", "RAV",
        "min_RTI", "max_RTI", "SETF", "RETF", "SAETF", "RAETF", "NC"};
    return names;
}

// Normalized evolution time of each timestamp: (t - t_min) / (t_max - t_min).
// Degenerate span maps everything to 0.
inline std::vector<double> evolution_time(const std::vector<int64_t>& timestamps) {
    if (timestamps.empty())
        throw ValidationError("evolution_time: at least one timestamp required");
    auto [lo, hi] = std::minmax_element(timestamps.begin(), timestamps.end());
    std::vector<double> out(timestamps.size());
    int64_t span = *hi - *lo;
    if (span == 0) return out;
    for (size_t i = 0; i < timestamps.size(); ++i)
        out[i] = static_cast<double>(timestamps[i] - *lo) / static_cast<double>(span);
    return out;
}

namespace detail {

// Consecutive-gap extrema over ascending-sorted timestamps; {0,0} below 2.
inline std::pair<double, double> interval_extrema(std::vector<int64_t>& ts) {
    if (ts.size() < 2) return {0.0, 0.0};
    std::sort(ts.begin(), ts.end());
    int64_t mn = INT64_MAX, mx = 0;
    for (size_t i = 0; i + 1 < ts.size(); ++i) {
        int64_t gap = ts[i + 1] - ts[i];
        mn = std::min(mn, gap);
        mx = std::max(mx, gap);
    }
    return {static_cast<double>(mn), static_cast<double>(mx)};
}

}  // namespace detail

// Computes the 15 features of `account` over `txs` (the transactions that
// touch the account; callers pass the retained set). A self-transaction
// counts on both the send and receive side.
inline AccountFeatureVector extract_node_features(const std::string& account,
                                                  const std::vector<TransactionRecord>& txs) {
    AccountFeatureVector f{};
    int nts = 0, ntr = 0, nc = 0;
    double stv = 0, rtv = 0, setf = 0, retf = 0;
    std::vector<int64_t> sent_ts, recv_ts;
    for (const TransactionRecord& tx : txs) {
        bool is_sender = tx.sender == account;
        bool is_receiver = tx.receiver == account;
        if (!is_sender && !is_receiver) continue;
        if (is_sender) {
            ++nts;
            stv += tx.value_eth();
            setf += tx.fee_eth();
            sent_ts.push_back(tx.timestamp);
        }
        if (is_receiver) {
            ++ntr;
            rtv += tx.value_eth();
            retf += tx.fee_eth();
            recv_ts.push_back(tx.timestamp);
        }
        if (tx.sender_is_contract || tx.receiver_is_contract) ++nc;
    }
    f[kNTS] = nts;
    f[kSTV] = stv;
    f[kSAV] = nts > 0 ? stv / nts : 0.0;
    auto [smin, smax] = detail::interval_extrema(sent_ts);
    f[kMinSTI] = smin;
    f[kMaxSTI] = smax;
    f[kNTR] = ntr;
    f[kRTV] = rtv;
    f[kRAV] = ntr > 0 ? rtv / ntr : 0.0;
    auto [rmin, rmax] = detail::interval_extrema(recv_ts);
    f[kMinRTI] = rmin;
    f[kMaxRTI] = rmax;
    f[kSETF] = setf;
    f[kRETF] = retf;
    f[kSAETF] = nts > 0 ? setf / nts : 0.0;
    f[kRAETF] = ntr > 0 ? retf / ntr : 0.0;
    f[kNC] = nc;
    return f;
}

}  // namespace dbg4eth
