#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <string>

#include "chaincast/trace.hpp"

using namespace chaincast;

namespace {

std::string temp_path(const char* stem) {
    return std::string("chaincast_test_") + stem;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

}  // namespace

TEST_CASE("generate_synthetic produces exact periodic blocks") {
    SyntheticSpec spec;
    spec.block_size = 3;
    spec.n_slots = 14;
    spec.start_state = 1;
    Trace trace = generate_synthetic(spec);
    const std::uint8_t want[] = {1, 1, 1, 0, 0, 0, 1, 1, 1, 0, 0, 0, 1, 1};
    REQUIRE(trace.size() == 14);
    for (std::size_t t = 0; t < trace.size(); ++t) REQUIRE(trace[t] == want[t]);

    spec.start_state = 0;
    Trace inverted = generate_synthetic(spec);
    for (std::size_t t = 0; t < inverted.size(); ++t) REQUIRE(inverted[t] == 1 - want[t]);
}

TEST_CASE("generate_synthetic outliers flip roughly rate*n slots") {
    SyntheticSpec clean_spec;
    clean_spec.block_size = 4;
    clean_spec.n_slots = 20000;
    Trace clean = generate_synthetic(clean_spec);

    SyntheticSpec noisy_spec = clean_spec;
    noisy_spec.outlier_rate = 0.05;
    noisy_spec.rng_seed = 7;
    Trace noisy = generate_synthetic(noisy_spec);

    std::size_t flips = 0;
    for (std::size_t t = 0; t < clean.size(); ++t) flips += clean[t] != noisy[t];
    // Binomial(20000, 0.05): mean 1000, sd ~30.8; allow six sigma.
    REQUIRE(flips > 800);
    REQUIRE(flips < 1200);

    // Same seed, same trace: generation is deterministic.
    Trace again = generate_synthetic(noisy_spec);
    REQUIRE(again.states == noisy.states);
}

TEST_CASE("generate_synthetic rejects degenerate specs") {
    SyntheticSpec spec;
    spec.block_size = 0;
    spec.n_slots = 10;
    REQUIRE_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
    spec.block_size = 3;
    spec.n_slots = 0;
    REQUIRE_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
    spec.n_slots = 10;
    spec.outlier_rate = -0.1;
    REQUIRE_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
}

TEST_CASE("threshold_energy uses a strict greater-than test") {
    EnergyTrace energy;
    energy.levels = {0.4, 0.5, 0.6, 0.0, 2.5};
    energy.threshold = 0.5;
    Trace trace = threshold_energy(energy);
    REQUIRE(trace.states == std::vector<std::uint8_t>{0, 0, 1, 0, 1});
}

TEST_CASE("threshold_energy rejects empty and non-finite input") {
    EnergyTrace empty;
    REQUIRE_THROWS_AS(threshold_energy(empty), DataError);
    EnergyTrace bad;
    bad.levels = {1.0, std::numeric_limits<double>::quiet_NaN()};
    REQUIRE_THROWS_AS(threshold_energy(bad), DataError);
}

TEST_CASE("activation_fraction counts active slots") {
    Trace trace{{1, 1, 0, 0}, 0.5, "t"};
    REQUIRE(activation_fraction(trace) == 0.5);
}

TEST_CASE("binary-lines traces round-trip through save and load") {
    const std::string path = temp_path("roundtrip.txt");
    Trace trace{{1, 0, 0, 1, 1, 0}, 0.5, "rt"};
    save_trace(path, trace);
    Trace back = load_trace(path, TraceFormat::BinaryLines);
    REQUIRE(back.states == trace.states);
    REQUIRE(back.name == path);
    std::remove(path.c_str());
}

TEST_CASE("binary-lines loader tolerates CRLF and a trailing blank line") {
    const std::string path = temp_path("crlf.txt");
    write_file(path, "1\r\n0\r\n1\r\n");
    Trace trace = load_trace(path, TraceFormat::BinaryLines);
    REQUIRE(trace.states == std::vector<std::uint8_t>{1, 0, 1});
    std::remove(path.c_str());
}

TEST_CASE("binary-lines loader reports the offending line") {
    const std::string path = temp_path("badline.txt");
    write_file(path, "1\n0\n2\n");
    REQUIRE_THROWS_WITH(load_trace(path, TraceFormat::BinaryLines),
                        Catch::Matchers::ContainsSubstring(":3:"));

    write_file(path, "1\n\n0\n");
    REQUIRE_THROWS_WITH(load_trace(path, TraceFormat::BinaryLines),
                        Catch::Matchers::ContainsSubstring("blank line"));
    std::remove(path.c_str());
}

TEST_CASE("csv-energy loader thresholds comma-separated levels") {
    const std::string path = temp_path("energy.csv");
    write_file(path, "0.1, 0.9\n0.4,0.6\n");
    Trace trace = load_trace(path, TraceFormat::CsvEnergy, 0.5);
    REQUIRE(trace.states == std::vector<std::uint8_t>{0, 1, 0, 1});
    std::remove(path.c_str());
}

TEST_CASE("csv-energy loader rejects garbage cells with line numbers") {
    const std::string path = temp_path("badenergy.csv");
    write_file(path, "0.5\nnope\n");
    REQUIRE_THROWS_WITH(load_trace(path, TraceFormat::CsvEnergy, 0.0),
                        Catch::Matchers::ContainsSubstring(":2:"));
    std::remove(path.c_str());
}

TEST_CASE("missing trace files raise DataError") {
    REQUIRE_THROWS_AS(load_trace("does_not_exist.txt", TraceFormat::BinaryLines), DataError);
}
