#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "chaincast/errors.hpp"
#include "chaincast/trace.hpp"

namespace chaincast {

// Probability distribution over composite-state indices.
using BeliefVector = std::vector<double>;

inline bool is_belief(const BeliefVector& belief, double tol = 1e-9) {
    double sum = 0.0;
    for (double p : belief) {
        if (!(p >= 0.0)) return false;
        sum += p;
    }
    return std::abs(sum - 1.0) <= tol;
}

// Bit-order convention, fixed repo-wide: index 0 of any pattern or sensed
// vector is the MOST RECENT slot. A composite state of order M' is the
// vector [q_t, q_{t-1}, ..., q_{t-M'+1}].
using Pattern = std::vector<std::uint8_t>;

enum class SpaceVariant { Full, Simple, Smart };

inline const char* variant_name(SpaceVariant v) {
    switch (v) {
        case SpaceVariant::Full: return "full";
        case SpaceVariant::Simple: return "simple";
        case SpaceVariant::Smart: return "smart";
    }
    return "?";
}

// An indexed set of composite states. Three variants:
//   full   - all 2^M' binary vectors; index = pattern read as a binary
//            number with the most recent bit as the most significant bit.
//   simple - run-length states (q, r): current level q in {0,1} and length
//            r in [1, M'] of the trailing constant run, capped at M'.
//            Index layout: q * M' + (r - 1).
//   smart  - dictionary of distinct M'-windows discovered in training
//            order (first come first added), optionally capped at l_max.
// Immutable after construction.
class StateSpace {
public:
    SpaceVariant variant() const noexcept { return variant_; }
    std::size_t order() const noexcept { return order_; }
    std::size_t size() const noexcept { return size_; }
    std::size_t l_max() const noexcept { return l_max_; }  // 0 = unlimited

    static StateSpace full(std::size_t order) {
        if (order < 1 || order > 24)
            throw std::invalid_argument(
                "full state space needs 1 <= order <= 24 (2^order states); "
                "use the smart space for larger orders");
        StateSpace s;
        s.variant_ = SpaceVariant::Full;
        s.order_ = order;
        s.size_ = std::size_t{1} << order;
        return s;
    }

    static StateSpace simple(std::size_t order) {
        if (order < 1) throw std::invalid_argument("simple state space needs order >= 1");
        StateSpace s;
        s.variant_ = SpaceVariant::Simple;
        s.order_ = order;
        s.size_ = 2 * order;
        return s;
    }

    // Slides an order-length window over the trace in time order; each
    // previously unseen pattern is appended to the table until l_max
    // entries exist (l_max = 0 means unlimited).
    static StateSpace smart(const Trace& training, std::size_t order, std::size_t l_max = 0) {
        if (order < 1) throw std::invalid_argument("smart state space needs order >= 1");
        if (training.size() < order)
            throw DataError("smart state space: trace shorter than the model order");
        StateSpace s;
        s.variant_ = SpaceVariant::Smart;
        s.order_ = order;
        s.l_max_ = l_max;
        for (std::size_t t = order - 1; t < training.size(); ++t) {
            Pattern p = window_at(training, t, order);
            const std::uint64_t key = pattern_key(p);
            if (s.smart_index_.count(key)) continue;
            if (l_max != 0 && s.table_.size() >= l_max) continue;
            s.smart_index_.emplace(key, s.table_.size());
            s.table_.push_back(std::move(p));
        }
        s.size_ = s.table_.size();
        return s;
    }

    static StateSpace smart_from_table(std::vector<Pattern> table, std::size_t order,
                                       std::size_t l_max = 0) {
        StateSpace s;
        s.variant_ = SpaceVariant::Smart;
        s.order_ = order;
        s.l_max_ = l_max;
        for (auto& p : table) {
            if (p.size() != order)
                throw DataError("smart table entry length does not match the order");
            const std::uint64_t key = pattern_key(p);
            if (s.smart_index_.count(key))
                throw DataError("duplicate pattern in smart table");
            s.smart_index_.emplace(key, s.table_.size());
            s.table_.push_back(std::move(p));
        }
        s.size_ = s.table_.size();
        return s;
    }

    // The window [q_t, ..., q_{t-len+1}], most recent first.
    static Pattern window_at(const Trace& trace, std::size_t t, std::size_t len) {
        Pattern p(len);
        for (std::size_t k = 0; k < len; ++k) p[k] = trace.states[t - k];
        return p;
    }

    Pattern pattern_of(std::size_t index) const {
        check_index(index);
        switch (variant_) {
            case SpaceVariant::Full: {
                Pattern p(order_);
                for (std::size_t k = 0; k < order_; ++k)
                    p[k] = static_cast<std::uint8_t>((index >> (order_ - 1 - k)) & 1u);
                return p;
            }
            case SpaceVariant::Smart:
                return table_[index];
            case SpaceVariant::Simple: {
                // Representative pattern only; a simple state stands for all
                // histories with the same trailing run.
                const auto [q, r] = simple_unpack(index);
                Pattern p(order_, static_cast<std::uint8_t>(1 - q));
                for (std::size_t k = 0; k < r; ++k) p[k] = static_cast<std::uint8_t>(q);
                return p;
            }
        }
        throw std::logic_error("unreachable");
    }

    int most_recent_bit(std::size_t index) const {
        check_index(index);
        switch (variant_) {
            case SpaceVariant::Full:
                return static_cast<int>((index >> (order_ - 1)) & 1u);
            case SpaceVariant::Simple:
                return index < order_ ? 0 : 1;
            case SpaceVariant::Smart:
                return table_[index][0];
        }
        throw std::logic_error("unreachable");
    }

    // Index of the exact pattern, if the space contains it.
    std::optional<std::size_t> find(const Pattern& pattern) const {
        if (pattern.size() != order_) return std::nullopt;
        switch (variant_) {
            case SpaceVariant::Full:
                return full_index(pattern);
            case SpaceVariant::Simple:
                return simple_pack(pattern[0], trailing_run(pattern));
            case SpaceVariant::Smart: {
                auto it = smart_index_.find(pattern_key(pattern));
                if (it == smart_index_.end()) return std::nullopt;
                return it->second;
            }
        }
        return std::nullopt;
    }

    // Structural successor under shifting in next_bit at the most recent
    // position: [b, q_t, ..., q_{t-M'+2}]. Always present for full and
    // simple spaces; for smart spaces the shifted pattern is looked up in
    // the table and may be absent.
    std::optional<std::size_t> successor(std::size_t index, int next_bit) const {
        check_index(index);
        if (next_bit != 0 && next_bit != 1)
            throw std::invalid_argument("successor: next_bit must be 0 or 1");
        switch (variant_) {
            case SpaceVariant::Full: {
                const std::size_t shifted =
                    ((static_cast<std::size_t>(next_bit) << (order_ - 1)) | (index >> 1));
                return shifted;
            }
            case SpaceVariant::Simple: {
                const auto [q, r] = simple_unpack(index);
                if (next_bit == q) return simple_pack(q, std::min(r + 1, order_));
                return simple_pack(next_bit, 1);
            }
            case SpaceVariant::Smart: {
                Pattern shifted = shift_pattern(table_[index], next_bit);
                auto it = smart_index_.find(pattern_key(shifted));
                if (it == smart_index_.end()) return std::nullopt;
                return it->second;
            }
        }
        throw std::logic_error("unreachable");
    }

    // All table entries minimizing the Hamming distance over the k most
    // recent bits, k = pattern length. Smart spaces only.
    std::vector<std::size_t> match_hamming(const Pattern& pattern) const {
        if (variant_ != SpaceVariant::Smart)
            throw std::invalid_argument("match_hamming applies to the smart space only");
        if (table_.empty()) throw std::invalid_argument("match_hamming: empty smart table");
        if (pattern.empty() || pattern.size() > order_)
            throw std::invalid_argument("match_hamming: pattern length must be in [1, order]");
        std::size_t best = std::numeric_limits<std::size_t>::max();
        std::vector<std::size_t> ties;
        for (std::size_t i = 0; i < table_.size(); ++i) {
            std::size_t d = 0;
            for (std::size_t k = 0; k < pattern.size(); ++k)
                d += static_cast<std::size_t>(table_[i][k] != pattern[k]);
            if (d < best) {
                best = d;
                ties.assign(1, i);
            } else if (d == best) {
                ties.push_back(i);
            }
        }
        return ties;
    }

    // Candidate states for a full-length window, with weights. Exact match
    // where possible; a smart space missing the window falls back to the
    // Hamming tie set with the count split uniformly.
    std::vector<std::pair<std::size_t, double>> map_window(const Pattern& window) const {
        if (window.size() != order_)
            throw std::invalid_argument("map_window: window length must equal the order");
        if (auto idx = find(window)) return {{*idx, 1.0}};
        const auto ties = match_hamming(window);
        std::vector<std::pair<std::size_t, double>> out;
        out.reserve(ties.size());
        const double w = 1.0 / static_cast<double>(ties.size());
        for (auto i : ties) out.emplace_back(i, w);
        return out;
    }

    // Encodes a sensed vector of length M (1 <= M <= M', most recent
    // first) into a belief: uniform 1/N over the N candidate states whose
    // M most recent bits equal the sensed vector. One-hot when M = M' and
    // the state exists. A smart space with no suffix match falls back to
    // the Hamming tie set.
    BeliefVector encode(const Pattern& sensed) const {
        if (sensed.empty() || sensed.size() > order_)
            throw std::invalid_argument("encode: sensing length must be in [1, order]");
        for (auto b : sensed)
            if (b != 0 && b != 1) throw std::invalid_argument("encode: sensed bits must be 0/1");

        BeliefVector belief(size_, 0.0);
        const std::size_t m = sensed.size();
        switch (variant_) {
            case SpaceVariant::Full: {
                // Candidates share the top m index bits; they form one
                // contiguous block of 2^(M'-m) indices.
                std::size_t prefix = 0;
                for (std::size_t k = 0; k < m; ++k)
                    prefix = (prefix << 1) | sensed[k];
                const std::size_t block = std::size_t{1} << (order_ - m);
                const double w = 1.0 / static_cast<double>(block);
                for (std::size_t i = prefix * block; i < (prefix + 1) * block; ++i)
                    belief[i] = w;
                return belief;
            }
            case SpaceVariant::Simple: {
                const int q = sensed[0];
                const std::size_t run = trailing_run(sensed);
                if (run < m) {
                    // The run breaks inside the window, so its length is known.
                    belief[simple_pack(q, run)] = 1.0;
                } else if (m == order_) {
                    belief[simple_pack(q, order_)] = 1.0;
                } else {
                    // Saturated window: the true run may be any r in [m, M'].
                    const double w = 1.0 / static_cast<double>(order_ - m + 1);
                    for (std::size_t r = m; r <= order_; ++r) belief[simple_pack(q, r)] = w;
                }
                return belief;
            }
            case SpaceVariant::Smart: {
                std::vector<std::size_t> candidates;
                for (std::size_t i = 0; i < table_.size(); ++i) {
                    bool match = true;
                    for (std::size_t k = 0; k < m && match; ++k)
                        match = table_[i][k] == sensed[k];
                    if (match) candidates.push_back(i);
                }
                if (candidates.empty()) candidates = match_hamming(sensed);
                const double w = 1.0 / static_cast<double>(candidates.size());
                for (auto i : candidates) belief[i] = w;
                return belief;
            }
        }
        throw std::logic_error("unreachable");
    }

    // Total belief mass on states whose most recent bit (level q, for the
    // simple space) is 1.
    double active_probability(const BeliefVector& belief) const {
        if (belief.size() != size_)
            throw std::invalid_argument("active_probability: belief dimension mismatch");
        double p = 0.0;
        for (std::size_t i = 0; i < size_; ++i)
            if (most_recent_bit(i) == 1) p += belief[i];
        return p;
    }

    const std::vector<Pattern>& table() const {
        if (variant_ != SpaceVariant::Smart)
            throw std::invalid_argument("table() applies to the smart space only");
        return table_;
    }

    // Sidecar format: one pattern per line, most recent bit first,
    // as a run of '0'/'1' characters.
    void save_table(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write state table: " + path);
        for (const auto& p : table()) {
            for (auto b : p) out << static_cast<int>(b);
            out << '\n';
        }
        if (!out) throw DataError("write failed: " + path);
    }

    static StateSpace load_table(const std::string& path, std::size_t order,
                                 std::size_t l_max = 0) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open state table: " + path);
        std::vector<Pattern> table;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            Pattern p;
            p.reserve(line.size());
            for (char c : line) {
                if (c != '0' && c != '1')
                    throw DataError(path + ":" + std::to_string(lineno) +
                                    ": expected 0/1 pattern, got '" + line + "'");
                p.push_back(static_cast<std::uint8_t>(c - '0'));
            }
            table.push_back(std::move(p));
        }
        return smart_from_table(std::move(table), order, l_max);
    }

    static Pattern shift_pattern(const Pattern& p, int next_bit) {
        Pattern shifted(p.size());
        shifted[0] = static_cast<std::uint8_t>(next_bit);
        std::copy(p.begin(), p.end() - 1, shifted.begin() + 1);
        return shifted;
    }

private:
    StateSpace() = default;

    void check_index(std::size_t index) const {
        if (index >= size_) throw std::invalid_argument("state index out of range");
    }

    std::size_t full_index(const Pattern& p) const {
        std::size_t idx = 0;
        for (std::size_t k = 0; k < order_; ++k) idx = (idx << 1) | p[k];
        return idx;
    }

    // (q, r) <-> index = q * M' + (r - 1)
    std::size_t simple_pack(int q, std::size_t r) const {
        return static_cast<std::size_t>(q) * order_ + (r - 1);
    }
    std::pair<int, std::size_t> simple_unpack(std::size_t index) const {
        return {static_cast<int>(index / order_), index % order_ + 1};
    }

    static std::size_t trailing_run(const Pattern& p) {
        std::size_t r = 1;
        while (r < p.size() && p[r] == p[0]) ++r;
        return r;
    }

    static std::uint64_t pattern_key(const Pattern& p) {
        // Patterns are at most 64 bits in practice; orders beyond that are
        // rejected by the builders long before (full caps at 24, smart
        // tables of longer orders are unrealistic but guard anyway).
        if (p.size() > 63) throw std::invalid_argument("pattern too long to index");
        std::uint64_t key = 1;  // leading 1 guards against length aliasing
        for (auto b : p) key = (key << 1) | b;
        return key;
    }

    SpaceVariant variant_ = SpaceVariant::Full;
    std::size_t order_ = 1;
    std::size_t size_ = 2;
    std::size_t l_max_ = 0;
    std::vector<Pattern> table_;
    std::unordered_map<std::uint64_t, std::size_t> smart_index_;
};

}  // namespace chaincast
