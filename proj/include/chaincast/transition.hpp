#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "chaincast/errors.hpp"
#include "chaincast/state_space.hpp"
#include "chaincast/trace.hpp"

namespace chaincast {

// Row-stochastic transition matrix over composite-state indices.
// Dense row-major up to kDenseLimit states, compressed sparse rows beyond
// (a freshly estimated full/simple matrix has at most 2 nonzeros per row;
// fine-tuning may densify, and operates on dense matrices only).
class TransitionMatrix {
public:
    static constexpr std::size_t kDenseLimit = 4096;

    static TransitionMatrix dense_zero(std::size_t n) {
        TransitionMatrix m;
        m.n_ = n;
        m.dense_ = true;
        m.values_.assign(n * n, 0.0);
        return m;
    }

    static TransitionMatrix from_dense(std::size_t n, std::vector<double> values) {
        if (values.size() != n * n)
            throw std::invalid_argument("from_dense: expected n*n values");
        TransitionMatrix m;
        m.n_ = n;
        m.dense_ = true;
        m.values_ = std::move(values);
        return m;
    }

    // rows[i] must be sorted by column and free of duplicates.
    static TransitionMatrix from_sparse_rows(
        std::size_t n, const std::vector<std::vector<std::pair<std::uint32_t, double>>>& rows) {
        if (rows.size() != n) throw std::invalid_argument("from_sparse_rows: row count mismatch");
        TransitionMatrix m;
        m.n_ = n;
        m.dense_ = false;
        m.row_offsets_.reserve(n + 1);
        m.row_offsets_.push_back(0);
        for (const auto& row : rows) {
            for (const auto& cell : row) m.cells_.push_back(cell);
            m.row_offsets_.push_back(m.cells_.size());
        }
        return m;
    }

    std::size_t size() const noexcept { return n_; }
    bool is_dense() const noexcept { return dense_; }

    double at(std::size_t i, std::size_t j) const {
        if (dense_) return values_[i * n_ + j];
        const auto begin = cells_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i]);
        const auto end = cells_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i + 1]);
        auto it = std::lower_bound(begin, end, j, [](const auto& cell, std::size_t col) {
            return cell.first < col;
        });
        if (it != end && it->first == j) return it->second;
        return 0.0;
    }

    std::vector<double>& dense_values() {
        if (!dense_) throw std::invalid_argument("matrix is stored sparse");
        return values_;
    }
    const std::vector<double>& dense_values() const {
        if (!dense_) throw std::invalid_argument("matrix is stored sparse");
        return values_;
    }

    double row_sum(std::size_t i) const {
        double s = 0.0;
        if (dense_) {
            for (std::size_t j = 0; j < n_; ++j) s += values_[i * n_ + j];
        } else {
            for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
                s += cells_[k].second;
        }
        return s;
    }

    // out = s . P   (row vector times matrix)
    void apply(const BeliefVector& s, BeliefVector& out) const {
        out.assign(n_, 0.0);
        if (dense_) {
            for (std::size_t i = 0; i < n_; ++i) {
                const double si = s[i];
                if (si == 0.0) continue;
                const double* row = values_.data() + i * n_;
                for (std::size_t j = 0; j < n_; ++j) out[j] += si * row[j];
            }
        } else {
            for (std::size_t i = 0; i < n_; ++i) {
                const double si = s[i];
                if (si == 0.0) continue;
                for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
                    out[cells_[k].first] += si * cells_[k].second;
            }
        }
    }

    void write_rows(std::ostream& out) const {
        char buf[32];
        if (dense_) {
            for (std::size_t i = 0; i < n_; ++i) {
                for (std::size_t j = 0; j < n_; ++j) {
                    std::snprintf(buf, sizeof buf, "%.17g", values_[i * n_ + j]);
                    out << (j ? " " : "") << buf;
                }
                out << '\n';
            }
        } else {
            for (std::size_t i = 0; i < n_; ++i) {
                out << i << ' ' << (row_offsets_[i + 1] - row_offsets_[i]);
                for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
                    std::snprintf(buf, sizeof buf, "%.17g", cells_[k].second);
                    out << ' ' << cells_[k].first << ' ' << buf;
                }
                out << '\n';
            }
        }
    }

    static TransitionMatrix read_rows(std::istream& in, std::size_t n, bool dense) {
        TransitionMatrix m;
        m.n_ = n;
        m.dense_ = dense;
        std::string line;
        if (dense) {
            m.values_.reserve(n * n);
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::getline(in, line)) throw DataError("model file: missing matrix row");
                std::istringstream row(line);
                double v;
                for (std::size_t j = 0; j < n; ++j) {
                    if (!(row >> v)) throw DataError("model file: short matrix row");
                    m.values_.push_back(v);
                }
            }
        } else {
            m.row_offsets_.push_back(0);
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::getline(in, line)) throw DataError("model file: missing matrix row");
                std::istringstream row(line);
                std::size_t idx, nnz;
                if (!(row >> idx >> nnz) || idx != i)
                    throw DataError("model file: bad sparse row header");
                for (std::size_t k = 0; k < nnz; ++k) {
                    std::uint32_t col;
                    double v;
                    if (!(row >> col >> v)) throw DataError("model file: short sparse row");
                    m.cells_.emplace_back(col, v);
                }
                m.row_offsets_.push_back(m.cells_.size());
            }
        }
        return m;
    }

private:
    std::size_t n_ = 0;
    bool dense_ = true;
    std::vector<double> values_;
    std::vector<std::size_t> row_offsets_;
    std::vector<std::pair<std::uint32_t, double>> cells_;
};

struct ModelMeta {
    std::string trace_name;
    std::size_t l_max = 0;
};

struct MarkovModel {
    StateSpace space;
    TransitionMatrix matrix;
    ModelMeta meta;
};

// One observed (or fractionally split) transition between state indices.
struct WeightedTransition {
    std::size_t from = 0;
    std::size_t to = 0;
    double weight = 1.0;
};

namespace detail {

// Accumulates weighted transition counts into a row-normalized matrix.
// Contributions are sorted into a canonical order before summation, so the
// result is bit-identical no matter how the observations were ordered.
inline TransitionMatrix normalize_counts(const StateSpace& space,
                                         std::vector<WeightedTransition> contributions) {
    const std::size_t n = space.size();
    std::sort(contributions.begin(), contributions.end(),
              [](const WeightedTransition& a, const WeightedTransition& b) {
                  if (a.from != b.from) return a.from < b.from;
                  if (a.to != b.to) return a.to < b.to;
                  return a.weight < b.weight;
              });

    // Uniform fallback row over structural successors; if a smart state has
    // no successor in the table, over the Hamming tie sets of both shifted
    // patterns instead.
    auto fallback_row = [&](std::size_t i) {
        std::vector<std::pair<std::uint32_t, double>> row;
        std::vector<std::size_t> targets;
        for (int b = 0; b < 2; ++b)
            if (auto next = space.successor(i, b)) targets.push_back(*next);
        if (targets.empty()) {
            const Pattern p = space.pattern_of(i);
            for (int b = 0; b < 2; ++b) {
                const auto ties = space.match_hamming(StateSpace::shift_pattern(p, b));
                targets.insert(targets.end(), ties.begin(), ties.end());
            }
            std::sort(targets.begin(), targets.end());
            targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
        } else if (targets.size() == 2 && targets[0] == targets[1]) {
            targets.pop_back();
        }
        std::sort(targets.begin(), targets.end());
        const double w = 1.0 / static_cast<double>(targets.size());
        for (auto t : targets) row.emplace_back(static_cast<std::uint32_t>(t), w);
        return row;
    };

    const bool dense = n <= TransitionMatrix::kDenseLimit;
    if (dense) {
        auto matrix = TransitionMatrix::dense_zero(n);
        auto& values = matrix.dense_values();
        std::vector<double> row_totals(n, 0.0);
        for (const auto& c : contributions) {
            values[c.from * n + c.to] += c.weight;
            row_totals[c.from] += c.weight;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (row_totals[i] > 0.0) {
                for (std::size_t j = 0; j < n; ++j) values[i * n + j] /= row_totals[i];
            } else {
                for (const auto& [j, w] : fallback_row(i)) values[i * n + j] = w;
            }
        }
        return matrix;
    }

    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(n);
    std::size_t k = 0;
    while (k < contributions.size()) {
        const std::size_t i = contributions[k].from;
        double total = 0.0;
        std::size_t row_end = k;
        while (row_end < contributions.size() && contributions[row_end].from == i) {
            total += contributions[row_end].weight;
            ++row_end;
        }
        auto& row = rows[i];
        while (k < row_end) {
            const std::size_t j = contributions[k].to;
            double cell = 0.0;
            while (k < row_end && contributions[k].to == j) cell += contributions[k++].weight;
            row.emplace_back(static_cast<std::uint32_t>(j), cell / total);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (rows[i].empty()) rows[i] = fallback_row(i);
    return TransitionMatrix::from_sparse_rows(n, rows);
}

}  // namespace detail

// Empirical estimation from explicit consecutive-window pairs. Each pair
// needs only the next-step label, and the result does not depend on the
// order the pairs are presented in.
inline TransitionMatrix estimate_from_pairs(const StateSpace& space,
                                            const std::vector<std::pair<Pattern, Pattern>>& pairs) {
    std::vector<WeightedTransition> contributions;
    contributions.reserve(pairs.size());
    for (const auto& [from, to] : pairs) {
        const auto sources = space.map_window(from);
        const auto targets = space.map_window(to);
        for (const auto& [i, wi] : sources)
            for (const auto& [j, wj] : targets)
                contributions.push_back({i, j, wi * wj});
    }
    return detail::normalize_counts(space, std::move(contributions));
}

// Empirical estimation (transition counting + row normalization) over all
// consecutive composite-state pairs of the trace. Rows never observed as a
// source fall back to a uniform structural-successor fill.
inline TransitionMatrix estimate(const StateSpace& space, const Trace& trace) {
    const std::size_t order = space.order();
    if (trace.size() < order + 1)
        throw DataError("estimate: trace shorter than order + 1");

    std::vector<WeightedTransition> contributions;
    contributions.reserve(trace.size() - order);
    auto from = space.map_window(StateSpace::window_at(trace, order - 1, order));
    for (std::size_t t = order; t < trace.size(); ++t) {
        auto to = space.map_window(StateSpace::window_at(trace, t, order));
        for (const auto& [i, wi] : from)
            for (const auto& [j, wj] : to)
                contributions.push_back({i, j, wi * wj});
        from = std::move(to);
    }
    return detail::normalize_counts(space, std::move(contributions));
}

inline MarkovModel estimate_model(StateSpace space, const Trace& trace) {
    TransitionMatrix matrix = estimate(space, trace);
    ModelMeta meta{trace.name, space.l_max()};
    return MarkovModel{std::move(space), std::move(matrix), std::move(meta)};
}

// s_{t+T} = s_t . P^T, computed as T iterated vector-matrix products.
inline BeliefVector propagate(const MarkovModel& model, BeliefVector belief,
                              std::size_t horizon) {
    if (horizon < 1) throw std::invalid_argument("propagate: horizon must be >= 1");
    if (belief.size() != model.matrix.size())
        throw std::invalid_argument("propagate: belief dimension mismatch");
    BeliefVector next(belief.size());
    for (std::size_t step = 0; step < horizon; ++step) {
        model.matrix.apply(belief, next);
        belief.swap(next);
    }
    return belief;
}

struct PredictionOutcome {
    double prob = 0.0;  // probability that the slot at t + T is active
    int hard = 0;       // 1 iff prob > 0.5; the tie goes to idle
};

inline PredictionOutcome predict(const MarkovModel& model, const Pattern& sensed,
                                 std::size_t horizon) {
    const BeliefVector start = model.space.encode(sensed);
    const BeliefVector end = propagate(model, start, horizon);
    PredictionOutcome out;
    out.prob = model.space.active_probability(end);
    out.hard = out.prob > 0.5 ? 1 : 0;
    return out;
}

// --- model file format ------------------------------------------------
//
//   chaincast model 1
//   kind markov
//   variant full|simple|smart
//   order <M'>
//   states <n>
//   l_max <k>            (0 = unlimited)
//   trace <name>
//   storage dense|sparse
//   matrix
//   <n rows>             dense: n space-separated values per row
//                        sparse: "<row> <nnz> <col> <value> ..."
//
// A smart model also writes its state table to "<path>.states", one
// pattern per line, most recent bit first.

inline void save_model(const MarkovModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model file: " + path);
    out << "chaincast model 1\n";
    out << "kind markov\n";
    out << "variant " << variant_name(model.space.variant()) << '\n';
    out << "order " << model.space.order() << '\n';
    out << "states " << model.space.size() << '\n';
    out << "l_max " << model.meta.l_max << '\n';
    out << "trace " << (model.meta.trace_name.empty() ? "-" : model.meta.trace_name) << '\n';
    out << "storage " << (model.matrix.is_dense() ? "dense" : "sparse") << '\n';
    out << "matrix\n";
    model.matrix.write_rows(out);
    if (!out) throw DataError("write failed: " + path);
    if (model.space.variant() == SpaceVariant::Smart) model.space.save_table(path + ".states");
}

namespace detail {

inline std::string expect_field(std::istream& in, const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("model file: truncated header");
    if (line.rfind(key + " ", 0) != 0)
        throw DataError("model file: expected '" + key + "', got '" + line + "'");
    return line.substr(key.size() + 1);
}

}  // namespace detail

inline MarkovModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "chaincast model 1")
        throw DataError("not a chaincast model file: " + path);
    if (detail::expect_field(in, "kind") != "markov")
        throw DataError("not a markov model: " + path);
    const std::string variant = detail::expect_field(in, "variant");
    const std::size_t order = std::stoul(detail::expect_field(in, "order"));
    const std::size_t states = std::stoul(detail::expect_field(in, "states"));
    const std::size_t l_max = std::stoul(detail::expect_field(in, "l_max"));
    std::string trace_name = detail::expect_field(in, "trace");
    if (trace_name == "-") trace_name.clear();
    const std::string storage = detail::expect_field(in, "storage");
    if (!std::getline(in, line) || line != "matrix")
        throw DataError("model file: expected 'matrix' marker");

    std::optional<StateSpace> space;
    if (variant == "full")
        space = StateSpace::full(order);
    else if (variant == "simple")
        space = StateSpace::simple(order);
    else if (variant == "smart")
        space = StateSpace::load_table(path + ".states", order, l_max);
    else
        throw DataError("model file: unknown variant '" + variant + "'");
    if (space->size() != states) throw DataError("model file: state count mismatch");

    TransitionMatrix matrix = TransitionMatrix::read_rows(in, states, storage == "dense");
    return MarkovModel{std::move(*space), std::move(matrix), ModelMeta{trace_name, l_max}};
}

}  // namespace chaincast
