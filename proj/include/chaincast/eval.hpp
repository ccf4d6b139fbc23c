#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "chaincast/errors.hpp"
#include "chaincast/mlp.hpp"
#include "chaincast/trace.hpp"
#include "chaincast/transition.hpp"

namespace chaincast {

// A predictor, as the harness sees it: given the sensed window (most
// recent slot first), produce P(active) for every horizon 1..t_max in
// one call so multi-horizon evaluation stays O(t_max) per position.
using CurveFn = std::function<std::vector<double>(const Pattern& sensed, std::size_t t_max)>;

struct Predictor {
    std::string name;
    CurveFn curve;
};

inline Predictor make_markov_predictor(const MarkovModel& model, std::string name = "markov") {
    const MarkovModel* m = &model;
    return Predictor{std::move(name), [m](const Pattern& sensed, std::size_t t_max) {
                         BeliefVector belief = m->space.encode(sensed);
                         std::vector<double> probs(t_max);
                         BeliefVector next;
                         for (std::size_t step = 0; step < t_max; ++step) {
                             m->matrix.apply(belief, next);
                             belief.swap(next);
                             probs[step] = m->space.active_probability(belief);
                         }
                         return probs;
                     }};
}

inline Predictor make_mlp_predictor(const MlpModel& model, std::string name = "mlp") {
    const MlpModel* m = &model;
    return Predictor{std::move(name), [m](const Pattern& sensed, std::size_t t_max) {
                         if (t_max > m->config.output_size)
                             throw std::invalid_argument(
                                 "mlp predictor: horizon outside the trained range "
                                 "[1, t_train]");
                         std::vector<double> input(sensed.begin(), sensed.end());
                         auto out = mlp_output(*m, input);
                         out.resize(t_max);
                         return out;
                     }};
}

struct EvalSpec {
    std::size_t m = 0;       // sensed slots per position
    std::size_t t_max = 0;   // horizons 1..t_max
    std::size_t stride = 1;  // spacing between sensing positions
    std::string train_trace;
    std::string test_trace;
};

struct HorizonStats {
    std::size_t horizon = 0;
    std::size_t n_correct = 0;
    std::size_t n_positions = 0;
    double brier = 0.0;
    double log_loss = 0.0;

    double success_rate() const {
        return static_cast<double>(n_correct) / static_cast<double>(n_positions);
    }
};

struct EvalReport {
    std::string predictor_name;
    EvalSpec spec;
    std::string provenance;  // free-form: model file, seeds, config hash
    std::vector<HorizonStats> rows;

    double mean_success() const {
        double acc = 0.0;
        for (const auto& row : rows) acc += row.success_rate();
        return acc / static_cast<double>(rows.size());
    }
};

// First/second half split used for the shared-trace protocol: when a
// model must be trained and tested on the same recording, train on the
// first half and evaluate on the second so no label is reused.
inline std::pair<Trace, Trace> split_trace(const Trace& trace) {
    const std::size_t half = trace.size() / 2;
    Trace first{std::vector<std::uint8_t>(trace.states.begin(),
                                          trace.states.begin() + static_cast<std::ptrdiff_t>(half)),
                trace.slot_duration_ms, trace.name + "#first-half"};
    Trace second{std::vector<std::uint8_t>(trace.states.begin() + static_cast<std::ptrdiff_t>(half),
                                           trace.states.end()),
                 trace.slot_duration_ms, trace.name + "#second-half"};
    return {std::move(first), std::move(second)};
}

// Slide sensing positions over the test trace and score hard decisions
// at every horizon. Success rates are exact counts; Brier and log-loss
// come along as auxiliary columns. If the spec names the same trace for
// training and testing, only second-half positions are scored, keeping
// the test labels out of the training range.
inline EvalReport evaluate(const EvalSpec& spec, const Trace& test, const Predictor& predictor) {
    if (spec.m < 1) throw std::invalid_argument("evaluate: m must be >= 1");
    if (spec.t_max < 1) throw std::invalid_argument("evaluate: t_max must be >= 1");
    if (spec.stride < 1) throw std::invalid_argument("evaluate: stride must be >= 1");

    std::size_t first = spec.m - 1;
    if (!spec.train_trace.empty() && spec.train_trace == spec.test_trace)
        first = std::max(first, test.size() / 2);
    if (test.size() < spec.m + spec.t_max || first + spec.t_max >= test.size())
        throw DataError("evaluate: test trace too short for m + t_max sensing positions");

    EvalReport report;
    report.predictor_name = predictor.name;
    report.spec = spec;
    report.rows.resize(spec.t_max);
    for (std::size_t t = 0; t < spec.t_max; ++t) report.rows[t].horizon = t + 1;

    constexpr double kProbFloor = 1e-12;
    for (std::size_t t = first; t + spec.t_max < test.size(); t += spec.stride) {
        const Pattern sensed = StateSpace::window_at(test, t, spec.m);
        const std::vector<double> probs = predictor.curve(sensed, spec.t_max);
        if (probs.size() != spec.t_max)
            throw std::invalid_argument("evaluate: predictor returned a short curve");
        for (std::size_t k = 0; k < spec.t_max; ++k) {
            HorizonStats& row = report.rows[k];
            const int truth = test.states[t + k + 1];
            const double p = probs[k];
            const int hard = p > 0.5 ? 1 : 0;
            row.n_positions += 1;
            row.n_correct += (hard == truth) ? 1 : 0;
            const double err = p - static_cast<double>(truth);
            row.brier += err * err;
            const double pc = std::min(std::max(p, kProbFloor), 1.0 - kProbFloor);
            row.log_loss += truth ? -std::log(pc) : -std::log(1.0 - pc);
        }
    }
    for (auto& row : report.rows) {
        row.brier /= static_cast<double>(row.n_positions);
        row.log_loss /= static_cast<double>(row.n_positions);
    }
    return report;
}

inline void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report: " + path);
    out << "T,success_rate,n_positions,brier,log_loss\n";
    char buf[160];
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%zu,%.17g,%.17g\n", row.horizon,
                      row.success_rate(), row.n_positions, row.brier, row.log_loss);
        out << buf;
    }
    if (!out) throw DataError("write failed: " + path);
}

inline EvalReport read_report_csv(const std::string& path, std::string name = "") {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open report: " + path);
    if (name.empty()) {
        // default the predictor name to the file stem
        name = path;
        if (auto slash = name.find_last_of("/\\"); slash != std::string::npos)
            name.erase(0, slash + 1);
        if (auto dot = name.rfind('.'); dot != std::string::npos) name.erase(dot);
    }
    std::string line;
    if (!std::getline(in, line) || line.rfind("T,success_rate,n_positions", 0) != 0)
        throw DataError("not a report CSV: " + path);
    EvalReport report;
    report.predictor_name = std::move(name);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        HorizonStats row;
        double rate = 0.0;
        char comma;
        std::istringstream cells(line);
        if (!(cells >> row.horizon >> comma >> rate >> comma >> row.n_positions))
            throw DataError(path + ":" + std::to_string(line_no) + ": malformed report row");
        if (cells >> comma >> row.brier >> comma >> row.log_loss) {
            // auxiliary columns present
        }
        row.n_correct = static_cast<std::size_t>(std::llround(rate * static_cast<double>(row.n_positions)));
        report.rows.push_back(row);
    }
    if (report.rows.empty()) throw DataError("empty report: " + path);
    return report;
}

namespace detail {

inline void require_shared_horizons(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("compare: no reports");
    for (const auto& report : reports) {
        if (report.rows.size() != reports.front().rows.size())
            throw std::invalid_argument("compare: reports cover different horizon ranges");
        for (std::size_t k = 0; k < report.rows.size(); ++k)
            if (report.rows[k].horizon != reports.front().rows[k].horizon)
                throw std::invalid_argument("compare: reports cover different horizon ranges");
    }
}

}  // namespace detail

// One column per predictor, one row per horizon.
inline std::string comparison_csv(const std::vector<EvalReport>& reports) {
    detail::require_shared_horizons(reports);
    std::ostringstream out;
    out << "T";
    for (const auto& report : reports) out << ',' << report.predictor_name;
    out << '\n';
    char buf[48];
    for (std::size_t k = 0; k < reports.front().rows.size(); ++k) {
        out << reports.front().rows[k].horizon;
        for (const auto& report : reports) {
            std::snprintf(buf, sizeof buf, ",%.17g", report.rows[k].success_rate());
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

inline void write_comparison_csv(const std::vector<EvalReport>& reports, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write comparison: " + path);
    out << comparison_csv(reports);
    if (!out) throw DataError("write failed: " + path);
}

namespace detail {

inline std::string xml_escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace detail

// Minimal self-contained line chart: success rate vs horizon, one
// polyline per report, fixed [0,1] y axis. No external assets.
inline std::string comparison_svg(const std::vector<EvalReport>& reports,
                                  const std::string& title = "prediction success rate") {
    detail::require_shared_horizons(reports);
    static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                     "#9467bd", "#ff7f0e", "#8c564b"};
    constexpr std::size_t kPaletteSize = sizeof kPalette / sizeof kPalette[0];
    const double width = 640, height = 420;
    const double left = 64, right = 24, top = 40, bottom = 48;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    const auto& horizons = reports.front().rows;
    const double t_min = static_cast<double>(horizons.front().horizon);
    const double t_max = static_cast<double>(horizons.back().horizon);
    const double t_span = t_max > t_min ? t_max - t_min : 1.0;
    auto x_of = [&](double t) { return left + (t - t_min) / t_span * plot_w; };
    auto y_of = [&](double rate) { return top + (1.0 - rate) * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << detail::xml_escape(title)
        << "</text>\n";

    // gridlines + y ticks at 0, 0.25, …, 1
    for (int k = 0; k <= 4; ++k) {
        const double rate = 0.25 * k;
        const double y = y_of(rate);
        svg << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + plot_w
            << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
        svg << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << rate
            << "</text>\n";
    }
    // x ticks: at most 10, integer horizons
    const std::size_t n_pts = horizons.size();
    const std::size_t tick_step = n_pts > 10 ? (n_pts + 9) / 10 : 1;
    for (std::size_t k = 0; k < n_pts; k += tick_step) {
        const double t = static_cast<double>(horizons[k].horizon);
        const double x = x_of(t);
        svg << "<line x1=\"" << x << "\" y1=\"" << top + plot_h << "\" x2=\"" << x << "\" y2=\""
            << top + plot_h + 5 << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << x << "\" y=\"" << top + plot_h + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << horizons[k].horizon << "</text>\n";
    }
    // axes
    svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
        << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << "prediction horizon T</text>\n";
    svg << "<text x=\"16\" y=\"" << top + plot_h / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 16 " << top + plot_h / 2 << ")\">success rate</text>\n";

    for (std::size_t r = 0; r < reports.size(); ++r) {
        const char* color = kPalette[r % kPaletteSize];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
        for (const auto& row : reports[r].rows)
            svg << x_of(static_cast<double>(row.horizon)) << ',' << y_of(row.success_rate())
                << ' ';
        svg << "\"/>\n";
        // legend entry
        const double ly = top + 16 + 16 * static_cast<double>(r);
        svg << "<line x1=\"" << left + plot_w - 150 << "\" y1=\"" << ly << "\" x2=\""
            << left + plot_w - 128 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"1.8\"/>\n";
        svg << "<text x=\"" << left + plot_w - 122 << "\" y=\"" << ly + 4
            << "\" font-family=\"sans-serif\" font-size=\"11\">"
            << detail::xml_escape(reports[r].predictor_name) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

inline void write_comparison_svg(const std::vector<EvalReport>& reports, const std::string& path,
                                 const std::string& title = "prediction success rate") {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write chart: " + path);
    out << comparison_svg(reports, title);
    if (!out) throw DataError("write failed: " + path);
}

struct SweepRow {
    std::size_t l_max = 0;  // 0 = uncapped
    std::size_t n_states = 0;
    double mean_success = 0.0;
};

// Dictionary-size study: rebuild the smart space under each cap,
// re-estimate, evaluate, one row per cap.
inline std::vector<SweepRow> sweep_l(const Trace& train, const Trace& test, std::size_t order,
                                     const EvalSpec& base_spec,
                                     const std::vector<std::size_t>& l_values) {
    std::vector<SweepRow> rows;
    rows.reserve(l_values.size());
    for (std::size_t l : l_values) {
        MarkovModel model = estimate_model(StateSpace::smart(train, order, l), train);
        SweepRow row;
        row.l_max = l;
        row.n_states = model.space.size();
        EvalSpec spec = base_spec;
        spec.train_trace = train.name;
        spec.test_trace = test.name;
        row.mean_success =
            evaluate(spec, test, make_markov_predictor(model, "smart")).mean_success();
        rows.push_back(row);
    }
    return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write sweep: " + path);
    out << "L,n_states,mean_success\n";
    char buf[96];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g\n", row.l_max, row.n_states,
                      row.mean_success);
        out << buf;
    }
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace chaincast
