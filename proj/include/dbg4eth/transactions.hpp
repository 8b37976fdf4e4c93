#pragma once

#include <istream>
#include <string>
#include <vector>

#include "dbg4eth/common.hpp"

namespace dbg4eth {

struct TransactionRecord {
    std::string tx_id;
    std::string sender;
    std::string receiver;
    u128 value_wei = 0;
    int64_t timestamp = 0;
    u128 gas_price_wei = 0;
    uint64_t gas_used = 0;
    bool sender_is_contract = false;
    bool receiver_is_contract = false;

    double value_eth() const { return wei_to_eth(value_wei); }
    double fee_eth() const { return wei_to_eth(gas_price_wei * static_cast<u128>(gas_used)); }
};

struct RowIssue {
    size_t line = 0;  // 1-based, header is line 1
    std::string message;
};

struct ParseResult {
    std::vector<TransactionRecord> records;
    std::vector<RowIssue> skipped;
};

namespace detail {

inline const std::vector<std::string>& tx_columns() {
    static const std::vector<std::string> cols = {
        "tx_id",         "sender",       "receiver", "value_wei",
        "timestamp",     "gas_price_wei", "gas_used", "sender_is_contract",
        "receiver_is_contract", "status"};
    return cols;
}

inline std::optional<bool> parse_bool(std::string_view s) {
    if (s == "0" || s == "false" || s == "False" || s == "FALSE") return false;
    if (s == "1" || s == "true" || s == "True" || s == "TRUE") return true;
    return std::nullopt;
}

}  // namespace detail

// Reads the fixed 10-column transaction CSV. The header must match the schema
// exactly; a bad header is fatal. Bad rows are skipped and reported with their
// line number. Rows with status "unsubmitted" are dropped silently;
// "submitted" rows are kept.
inline ParseResult parse_transactions(std::istream& in) {
    ParseResult result;
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("transactions csv: empty input, header required");
    {
        auto cols = split(trim(line), ',');
        const auto& want = detail::tx_columns();
        if (cols.size() != want.size())
            throw SchemaError("transactions csv: expected " + std::to_string(want.size()) +
                              " columns, got " + std::to_string(cols.size()));
        for (size_t i = 0; i < want.size(); ++i)
            if (std::string(trim(cols[i])) != want[i])
                throw SchemaError("transactions csv: column " + std::to_string(i + 1) +
                                  " must be '" + want[i] + "', got '" + cols[i] + "'");
    }

    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = trim(line);
        if (sv.empty()) continue;
        auto f = split(sv, ',');
        auto bad = [&](const std::string& why) { result.skipped.push_back({lineno, why}); };
        if (f.size() != 10) {
            bad("expected 10 fields, got " + std::to_string(f.size()));
            continue;
        }
        for (auto& s : f) s = std::string(trim(s));

        const std::string& status = f[9];
        if (status != "submitted" && status != "unsubmitted") {
            bad("unknown status '" + status + "'");
            continue;
        }
        if (status == "unsubmitted") continue;

        TransactionRecord r;
        r.tx_id = f[0];
        r.sender = f[1];
        r.receiver = f[2];
        if (r.tx_id.empty() || r.sender.empty() || r.receiver.empty()) {
            bad("tx_id/sender/receiver must be nonempty");
            continue;
        }
        auto value = parse_u128(f[3]);
        if (!value) {
            bad("value_wei not a non-negative integer: '" + f[3] + "'");
            continue;
        }
        auto ts = parse_i64(f[4]);
        if (!ts) {
            bad("timestamp not an integer: '" + f[4] + "'");
            continue;
        }
        auto gas_price = parse_u128(f[5]);
        if (!gas_price) {
            bad("gas_price_wei not a non-negative integer: '" + f[5] + "'");
            continue;
        }
        auto gas_used = parse_u128(f[6]);
        if (!gas_used || *gas_used > UINT64_MAX) {
            bad("gas_used not a non-negative integer: '" + f[6] + "'");
            continue;
        }
        auto sc = detail::parse_bool(f[7]);
        auto rc = detail::parse_bool(f[8]);
        if (!sc || !rc) {
            bad("contract flags must be 0/1/true/false");
            continue;
        }
        r.value_wei = *value;
        r.timestamp = *ts;
        r.gas_price_wei = *gas_price;
        r.gas_used = static_cast<uint64_t>(*gas_used);
        r.sender_is_contract = *sc;
        r.receiver_is_contract = *rc;
        result.records.push_back(std::move(r));
    }
    return result;
}

struct LabelRecord {
    std::string address;
    std::string label_name;
};

// labels.csv: header "address,label_name", one labeled account per row.
inline std::vector<LabelRecord> parse_labels(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("labels csv: empty input, header required");
    auto cols = split(trim(line), ',');
    if (cols.size() != 2 || std::string(trim(cols[0])) != "address" ||
        std::string(trim(cols[1])) != "label_name")
        throw SchemaError("labels csv: header must be 'address,label_name'");
    std::vector<LabelRecord> out;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = trim(line);
        if (sv.empty()) continue;
        auto f = split(sv, ',');
        if (f.size() != 2 || trim(f[0]).empty() || trim(f[1]).empty())
            throw SchemaError("labels csv line " + std::to_string(lineno) +
                              ": expected 'address,label_name'");
        out.push_back({std::string(trim(f[0])), std::string(trim(f[1]))});
    }
    return out;
}

}  // namespace dbg4eth
