#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chaincast/errors.hpp"

namespace chaincast {

// A binary PU occupancy sequence: 1 = active (transmitting), 0 = idle.
// slot_duration_ms is metadata only and never enters any computation.
struct Trace {
    std::vector<std::uint8_t> states;
    double slot_duration_ms = 0.5;
    std::string name;

    std::size_t size() const noexcept { return states.size(); }
    std::uint8_t operator[](std::size_t t) const { return states[t]; }
};

// Deterministic block traffic: block_size actives, block_size idles,
// repeating, optionally corrupted by independent per-slot flips.
struct SyntheticSpec {
    std::size_t block_size = 3;
    std::size_t n_slots = 0;
    int start_state = 1;
    double outlier_rate = 0.0;
    std::uint64_t rng_seed = 0;
};

// Raw per-slot energy measurements plus the decision threshold.
struct EnergyTrace {
    std::vector<double> levels;
    double threshold = 0.0;
};

inline void validate_trace(const Trace& trace) {
    if (trace.states.empty())
        throw DataError("trace '" + trace.name + "' is empty");
    for (std::size_t t = 0; t < trace.states.size(); ++t)
        if (trace.states[t] != 0 && trace.states[t] != 1)
            throw DataError("trace '" + trace.name + "' has non-binary state at slot " +
                            std::to_string(t));
}

inline double activation_fraction(const Trace& trace) {
    if (trace.states.empty()) return 0.0;
    std::size_t active = 0;
    for (auto q : trace.states) active += q;
    return static_cast<double>(active) / static_cast<double>(trace.states.size());
}

inline Trace generate_synthetic(const SyntheticSpec& spec) {
    if (spec.block_size == 0)
        throw std::invalid_argument("generate_synthetic: block_size must be >= 1");
    if (spec.n_slots == 0)
        throw std::invalid_argument("generate_synthetic: n_slots must be >= 1");
    if (spec.start_state != 0 && spec.start_state != 1)
        throw std::invalid_argument("generate_synthetic: start_state must be 0 or 1");
    if (spec.outlier_rate < 0.0 || spec.outlier_rate > 1.0)
        throw std::invalid_argument("generate_synthetic: outlier_rate must be in [0,1]");

    Trace trace;
    trace.name = "synthetic-b" + std::to_string(spec.block_size);
    trace.states.resize(spec.n_slots);
    for (std::size_t t = 0; t < spec.n_slots; ++t) {
        const bool in_start_block = (t / spec.block_size) % 2 == 0;
        trace.states[t] =
            static_cast<std::uint8_t>(in_start_block ? spec.start_state : 1 - spec.start_state);
    }
    if (spec.outlier_rate > 0.0) {
        std::mt19937_64 rng(spec.rng_seed);
        std::bernoulli_distribution flip(spec.outlier_rate);
        for (auto& q : trace.states)
            if (flip(rng)) q ^= 1u;
    }
    return trace;
}

// state = 1 iff level > threshold. Equality maps to idle, so an all-zero
// energy file with threshold 0 yields an all-idle trace.
inline Trace threshold_energy(const EnergyTrace& energy) {
    if (energy.levels.empty())
        throw DataError("threshold_energy: empty energy trace");
    Trace trace;
    trace.name = "thresholded";
    trace.states.reserve(energy.levels.size());
    for (std::size_t t = 0; t < energy.levels.size(); ++t) {
        const double level = energy.levels[t];
        if (!std::isfinite(level))
            throw DataError("threshold_energy: non-finite level at slot " + std::to_string(t));
        trace.states.push_back(level > energy.threshold ? 1 : 0);
    }
    return trace;
}

enum class TraceFormat { BinaryLines, CsvEnergy };

// binary-lines: one "0"/"1" token per line, trailing newline optional.
// csv-energy: one decimal real per line (or several comma-separated per
// line), thresholded via threshold_energy.
inline Trace load_trace(const std::string& path, TraceFormat format, double threshold = 0.0) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open trace file: " + path);

    Trace trace;
    trace.name = path;
    EnergyTrace energy;
    energy.threshold = threshold;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        // A blank final line from a trailing newline is fine; blank lines in
        // the middle of the file are not.
        std::string stripped = line;
        stripped.erase(0, stripped.find_first_not_of(" \t"));
        stripped.erase(stripped.find_last_not_of(" \t") + 1);
        if (stripped.empty()) {
            if (in.peek() == std::char_traits<char>::eof()) break;
            throw DataError(path + ":" + std::to_string(lineno) + ": blank line");
        }
        if (format == TraceFormat::BinaryLines) {
            if (stripped == "0")
                trace.states.push_back(0);
            else if (stripped == "1")
                trace.states.push_back(1);
            else
                throw DataError(path + ":" + std::to_string(lineno) +
                                ": expected '0' or '1', got '" + stripped + "'");
        } else {
            std::stringstream cells(stripped);
            std::string cell;
            while (std::getline(cells, cell, ',')) {
                std::size_t pos = 0;
                double value = 0.0;
                try {
                    value = std::stod(cell, &pos);
                } catch (const std::exception&) {
                    throw DataError(path + ":" + std::to_string(lineno) +
                                    ": not a number: '" + cell + "'");
                }
                while (pos < cell.size() && (cell[pos] == ' ' || cell[pos] == '\t')) ++pos;
                if (pos != cell.size())
                    throw DataError(path + ":" + std::to_string(lineno) +
                                    ": trailing garbage in '" + cell + "'");
                if (!std::isfinite(value))
                    throw DataError(path + ":" + std::to_string(lineno) +
                                    ": non-finite energy level");
                energy.levels.push_back(value);
            }
        }
    }

    if (format == TraceFormat::CsvEnergy) {
        Trace out = threshold_energy(energy);
        out.name = path;
        return out;
    }
    validate_trace(trace);
    return trace;
}

inline void save_trace(const std::string& path, const Trace& trace) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write trace file: " + path);
    for (auto q : trace.states) out << static_cast<int>(q) << '\n';
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace chaincast
