// chaincast — spectrum occupancy prediction experiments from the shell.
//
// Subcommands: gen, ingest, train, finetune, eval, sweep-l, compare.
// Every subcommand takes an optional JSON config (--config); explicit
// flags override config keys, config keys override built-in defaults.
// Unknown config keys are rejected before any work starts. Relative
// output paths are placed under --out-dir, which defaults to
// $CHAINCAST_OUT_DIR, then ".". Each artifact <out> is accompanied by
// <out>.summary.json embedding the fully resolved configuration; the
// same summary goes to stdout. On failure stdout carries one JSON
// object with an "error" field.
//
// Exit codes: 0 success, 2 config/usage error, 3 data error,
// 4 numerical divergence.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chaincast/chaincast.hpp"

using nlohmann::json;
namespace cc = chaincast;

namespace {

constexpr double kUnsetReal = -1.0;
constexpr std::size_t kUnsetCount = static_cast<std::size_t>(-1);

// ---------------------------------------------------------------- config

json load_config(const std::string& path, const std::vector<std::string>& allowed) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::exception& e) {
        throw std::invalid_argument("config " + path + ": " + e.what());
    }
    if (!cfg.is_object()) throw std::invalid_argument("config " + path + ": not a JSON object");
    for (const auto& item : cfg.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw std::invalid_argument("config " + path + ": unknown key '" + item.key() +
                                        "'");
    }
    return cfg;
}

// flag > file > default: leave `value` alone when the flag was given,
// otherwise take the config key if present.
template <typename T>
void overlay(const CLI::App& cmd, const std::string& flag, const json& cfg,
             const std::string& key, T& value) {
    if (cmd.count(flag) > 0) return;
    if (!cfg.contains(key)) return;
    try {
        value = cfg.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument("config key '" + key + "' has the wrong type");
    }
}

std::string default_out_dir() {
    const char* env = std::getenv("CHAINCAST_OUT_DIR");
    return (env && *env) ? env : ".";
}

// Relative artifact paths land under out_dir; parents are created.
std::string resolve_out(const std::string& out_dir, const std::string& path) {
    if (path.empty()) return path;
    std::filesystem::path p(path);
    std::filesystem::path full = p.is_absolute() ? p : std::filesystem::path(out_dir) / p;
    if (full.has_parent_path()) std::filesystem::create_directories(full.parent_path());
    return full.string();
}

void require_arg(const std::string& value, const char* what) {
    if (value.empty())
        throw std::invalid_argument(std::string(what) + " is required (flag or config key)");
}

void emit_summary(const std::string& artifact, const json& summary) {
    if (!artifact.empty()) {
        std::ofstream out(artifact + ".summary.json");
        if (!out) throw cc::DataError("cannot write summary: " + artifact + ".summary.json");
        out << summary.dump(2) << '\n';
    }
    std::cout << summary.dump(2) << '\n';
}

std::string replace_extension(const std::string& path, const char* ext) {
    std::filesystem::path p(path);
    p.replace_extension(ext);
    return p.string();
}

// ---------------------------------------------------------------- enums

cc::Optimizer parse_optimizer(const std::string& s) {
    if (s == "adam") return cc::Optimizer::Adam;
    if (s == "sgd") return cc::Optimizer::Sgd;
    throw std::invalid_argument("optimizer must be adam|sgd, got '" + s + "'");
}

cc::LossKind parse_loss(const std::string& s) {
    if (s == "mse") return cc::LossKind::Mse;
    if (s == "ce") return cc::LossKind::CrossEntropy;
    throw std::invalid_argument("loss must be mse|ce, got '" + s + "'");
}

cc::Parameterization parse_parameterization(const std::string& s) {
    if (s == "logits") return cc::Parameterization::LogitsSoftmax;
    if (s == "project") return cc::Parameterization::Project;
    throw std::invalid_argument("parameterization must be logits|project, got '" + s + "'");
}

cc::StateSpace make_space(const std::string& variant, std::size_t order, std::size_t l_max,
                          const cc::Trace& train) {
    if (variant == "full") return cc::StateSpace::full(order);
    if (variant == "simple") return cc::StateSpace::simple(order);
    if (variant == "smart") return cc::StateSpace::smart(train, order, l_max);
    throw std::invalid_argument("space must be full|simple|smart, got '" + variant + "'");
}

std::string sniff_model_kind(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw cc::DataError("cannot open model file: " + path);
    std::string magic, kind;
    std::getline(in, magic);
    std::getline(in, kind);
    if (magic != "chaincast model 1" || kind.rfind("kind ", 0) != 0)
        throw cc::DataError("not a chaincast model file: " + path);
    return kind.substr(5);
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
        .count();
}

// ---------------------------------------------------------------- gen

struct GenOpts {
    std::string config, out, out_dir = default_out_dir();
    std::size_t block = 3, slots = 0;
    int start = 1;
    double outlier = 0.0, slot_ms = 0.5;
    std::uint64_t seed = 0;
};

void add_gen(CLI::App& app, GenOpts& o) {
    auto* cmd = app.add_subcommand("gen", "generate a synthetic periodic traffic trace");
    cmd->add_option("--config", o.config, "JSON config file");
    cmd->add_option("--block", o.block, "active/idle block size B");
    cmd->add_option("--slots", o.slots, "number of slots to generate");
    cmd->add_option("--start", o.start, "initial state (0 or 1)");
    cmd->add_option("--outlier", o.outlier, "per-slot flip probability");
    cmd->add_option("--seed", o.seed, "RNG seed");
    cmd->add_option("--slot-ms", o.slot_ms, "slot duration in ms");
    cmd->add_option("--out", o.out, "output trace file (binary lines)");
    cmd->add_option("--out-dir", o.out_dir, "directory for relative outputs");
}

int run_gen(const CLI::App& cmd, GenOpts& o) {
    const json cfg = load_config(o.config, {"block_size", "n_slots", "start_state",
                                            "outlier_rate", "rng_seed", "slot_ms", "out",
                                            "out_dir"});
    overlay(cmd, "--block", cfg, "block_size", o.block);
    overlay(cmd, "--slots", cfg, "n_slots", o.slots);
    overlay(cmd, "--start", cfg, "start_state", o.start);
    overlay(cmd, "--outlier", cfg, "outlier_rate", o.outlier);
    overlay(cmd, "--seed", cfg, "rng_seed", o.seed);
    overlay(cmd, "--slot-ms", cfg, "slot_ms", o.slot_ms);
    overlay(cmd, "--out", cfg, "out", o.out);
    overlay(cmd, "--out-dir", cfg, "out_dir", o.out_dir);
    require_arg(o.out, "gen: --out");

    cc::SyntheticSpec spec{o.block, o.slots, o.start, o.outlier, o.seed};
    cc::Trace trace = cc::generate_synthetic(spec);
    trace.slot_duration_ms = o.slot_ms;
    const std::string out = resolve_out(o.out_dir, o.out);
    cc::save_trace(out, trace);

    emit_summary(out, json{{"command", "gen"},
                           {"out", out},
                           {"n_slots", trace.size()},
                           {"activation_fraction", cc::activation_fraction(trace)},
                           {"config",
                            {{"block_size", o.block},
                             {"n_slots", o.slots},
                             {"start_state", o.start},
                             {"outlier_rate", o.outlier},
                             {"rng_seed", o.seed},
                             {"slot_ms", o.slot_ms},
                             {"out_dir", o.out_dir}}}});
    return 0;
}

// ---------------------------------------------------------------- ingest

struct IngestOpts {
    std::string config, in, out, out_dir = default_out_dir();
    double threshold = 0.0, slot_ms = 0.5;
};

void add_ingest(CLI::App& app, IngestOpts& o) {
    auto* cmd = app.add_subcommand("ingest",
                                   "threshold an energy CSV into a binary occupancy trace");
    cmd->add_option("--config", o.config, "JSON config file");
    cmd->add_option("--in", o.in, "energy CSV (one or more levels per line)");
    cmd->add_option("--threshold", o.threshold, "activity decision threshold");
    cmd->add_option("--slot-ms", o.slot_ms, "slot duration in ms");
    cmd->add_option("--out", o.out, "output trace file (binary lines)");
    cmd->add_option("--out-dir", o.out_dir, "directory for relative outputs");
}

int run_ingest(const CLI::App& cmd, IngestOpts& o) {
    const json cfg =
        load_config(o.config, {"in", "threshold", "slot_ms", "out", "out_dir"});
    overlay(cmd, "--in", cfg, "in", o.in);
    overlay(cmd, "--threshold", cfg, "threshold", o.threshold);
    overlay(cmd, "--slot-ms", cfg, "slot_ms", o.slot_ms);
    overlay(cmd, "--out", cfg, "out", o.out);
    overlay(cmd, "--out-dir", cfg, "out_dir", o.out_dir);
    require_arg(o.in, "ingest: --in");
    require_arg(o.out, "ingest: --out");

    cc::Trace trace = cc::load_trace(o.in, cc::TraceFormat::CsvEnergy, o.threshold);
    trace.slot_duration_ms = o.slot_ms;
    const std::string out = resolve_out(o.out_dir, o.out);
    cc::save_trace(out, trace);

    emit_summary(out, json{{"command", "ingest"},
                           {"out", out},
                           {"n_slots", trace.size()},
                           {"activation_fraction", cc::activation_fraction(trace)},
                           {"config",
                            {{"in", o.in},
                             {"threshold", o.threshold},
                             {"slot_ms", o.slot_ms},
                             {"out_dir", o.out_dir}}}});
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainOpts {
    std::string config, predictor, train, space = "full", out, loss_csv;
    std::string optimizer = "adam", loss = "mse", parameterization = "logits";
    std::string out_dir = default_out_dir();
    std::size_t order = 0, m = 0, l_max = 0;
    std::size_t t_train = 0, epochs = kUnsetCount, batch = 32;
    double lr = kUnsetReal, plateau_tol = 1e-4;
    std::vector<std::size_t> hidden = {80, 80, 80};
    std::uint64_t seed = 0;
};

void add_train(CLI::App& app, TrainOpts& o) {
    auto* cmd = app.add_subcommand("train", "estimate or train a predictor on a trace");
    cmd->add_option("--config", o.config, "JSON config file");
    cmd->add_option("--predictor", o.predictor, "markov | ft-markov | mlp");
    cmd->add_option("--train", o.train, "training trace (binary lines)");
    cmd->add_option("--space", o.space, "state space: full | simple | smart");
    cmd->add_option("--order", o.order, "model memory M'");
    cmd->add_option("--m", o.m, "sensing window width M (mlp input size)");
    cmd->add_option("--l-max", o.l_max, "smart dictionary cap (0 = uncapped)");
    cmd->add_option("--t-train", o.t_train, "supervised horizon T_train");
    cmd->add_option("--epochs", o.epochs, "training epochs");
    cmd->add_option("--lr", o.lr, "learning rate");
    cmd->add_option("--optimizer", o.optimizer, "adam | sgd (ft-markov)");
    cmd->add_option("--loss", o.loss, "mse | ce (ft-markov)");
    cmd->add_option("--param", o.parameterization, "logits | project (ft-markov)");
    cmd->add_option("--plateau-tol", o.plateau_tol, "early-stop relative loss tolerance");
    cmd->add_option("--batch", o.batch, "mini-batch size (mlp)");
    cmd->add_option("--hidden", o.hidden, "hidden layer sizes (mlp)")->delimiter(',');
    cmd->add_option("--seed", o.seed, "RNG seed (mlp)");
    cmd->add_option("--loss-csv", o.loss_csv, "write per-epoch loss CSV here");
    cmd->add_option("--out", o.out, "output model file");
    cmd->add_option("--out-dir", o.out_dir, "directory for relative outputs");
}

int run_train(const CLI::App& cmd, TrainOpts& o) {
    const json cfg = load_config(
        o.config, {"predictor", "train", "space", "order", "m", "l_max", "t_train", "epochs",
                   "learning_rate", "optimizer", "loss", "parameterization", "plateau_tol",
                   "batch_size", "hidden_sizes", "rng_seed", "loss_csv", "out", "out_dir"});
    overlay(cmd, "--predictor", cfg, "predictor", o.predictor);
    overlay(cmd, "--train", cfg, "train", o.train);
    overlay(cmd, "--space", cfg, "space", o.space);
    overlay(cmd, "--order", cfg, "order", o.order);
    overlay(cmd, "--m", cfg, "m", o.m);
    overlay(cmd, "--l-max", cfg, "l_max", o.l_max);
    overlay(cmd, "--t-train", cfg, "t_train", o.t_train);
    overlay(cmd, "--epochs", cfg, "epochs", o.epochs);
    overlay(cmd, "--lr", cfg, "learning_rate", o.lr);
    overlay(cmd, "--optimizer", cfg, "optimizer", o.optimizer);
    overlay(cmd, "--loss", cfg, "loss", o.loss);
    overlay(cmd, "--param", cfg, "parameterization", o.parameterization);
    overlay(cmd, "--plateau-tol", cfg, "plateau_tol", o.plateau_tol);
    overlay(cmd, "--batch", cfg, "batch_size", o.batch);
    overlay(cmd, "--hidden", cfg, "hidden_sizes", o.hidden);
    overlay(cmd, "--seed", cfg, "rng_seed", o.seed);
    overlay(cmd, "--loss-csv", cfg, "loss_csv", o.loss_csv);
    overlay(cmd, "--out", cfg, "out", o.out);
    overlay(cmd, "--out-dir", cfg, "out_dir", o.out_dir);
    require_arg(o.predictor, "train: --predictor");
    require_arg(o.train, "train: --train");
    require_arg(o.out, "train: --out");

    const cc::Trace trace = cc::load_trace(o.train, cc::TraceFormat::BinaryLines);
    const std::string out = resolve_out(o.out_dir, o.out);
    const std::string loss_csv =
        o.loss_csv.empty() ? std::string() : resolve_out(o.out_dir, o.loss_csv);
    const auto t0 = std::chrono::steady_clock::now();

    json summary{{"command", "train"}, {"predictor", o.predictor}, {"out", out}};
    json rc{{"train", o.train}, {"out_dir", o.out_dir}};

    if (o.predictor == "markov" || o.predictor == "ft-markov") {
        if (o.order < 1) throw std::invalid_argument("train: --order is required");
        cc::MarkovModel model =
            cc::estimate_model(make_space(o.space, o.order, o.l_max, trace), trace);
        rc["space"] = o.space;
        rc["order"] = o.order;
        rc["l_max"] = o.l_max;
        summary["states"] = model.space.size();

        if (o.predictor == "ft-markov") {
            if (o.t_train < 1)
                throw std::invalid_argument("train: ft-markov needs --t-train >= 1");
            cc::FinetuneConfig fc;
            fc.t_train = o.t_train;
            fc.epochs = o.epochs == kUnsetCount ? 50 : o.epochs;
            fc.learning_rate = o.lr == kUnsetReal ? 0.01 : o.lr;
            fc.optimizer = parse_optimizer(o.optimizer);
            fc.loss = parse_loss(o.loss);
            fc.plateau_tol = o.plateau_tol;
            fc.parameterization = parse_parameterization(o.parameterization);
            const auto pairs = cc::build_pairs(model.space, trace, fc.t_train);
            cc::FinetuneResult result = cc::finetune(model, pairs, fc);
            model = std::move(result.model);
            if (!loss_csv.empty()) cc::save_loss_csv(loss_csv, result.losses);
            summary["epochs_run"] = result.losses.size();
            summary["final_loss"] = result.losses.back();
            summary["n_pairs"] = pairs.size();
            rc["t_train"] = fc.t_train;
            rc["epochs"] = fc.epochs;
            rc["learning_rate"] = fc.learning_rate;
            rc["optimizer"] = o.optimizer;
            rc["loss"] = o.loss;
            rc["parameterization"] = o.parameterization;
            rc["plateau_tol"] = fc.plateau_tol;
        }
        cc::save_model(model, out);
    } else if (o.predictor == "mlp") {
        if (o.m < 1) throw std::invalid_argument("train: mlp needs --m >= 1");
        if (o.t_train < 1) throw std::invalid_argument("train: mlp needs --t-train >= 1");
        cc::MlpConfig mc;
        mc.input_size = o.m;
        mc.output_size = o.t_train;
        mc.hidden_sizes = o.hidden;
        mc.learning_rate = o.lr == kUnsetReal ? 0.001 : o.lr;
        mc.epochs = o.epochs == kUnsetCount ? 200 : o.epochs;
        mc.batch_size = o.batch;
        mc.rng_seed = o.seed;
        const auto pairs = cc::build_nn_pairs(trace, o.m, o.t_train);
        std::vector<double> losses;
        cc::MlpModel model = cc::train_mlp(mc, pairs, &losses);
        model.trace_name = trace.name;
        cc::save_mlp(model, out);
        if (!loss_csv.empty()) cc::save_loss_csv(loss_csv, losses);
        summary["epochs_run"] = losses.size();
        summary["final_loss"] = losses.back();
        summary["n_pairs"] = pairs.size();
        rc["m"] = o.m;
        rc["t_train"] = o.t_train;
        rc["hidden_sizes"] = o.hidden;
        rc["learning_rate"] = mc.learning_rate;
        rc["epochs"] = mc.epochs;
        rc["batch_size"] = o.batch;
        rc["rng_seed"] = o.seed;
    } else {
        throw std::invalid_argument("train: predictor must be markov|ft-markov|mlp, got '" +
                                    o.predictor + "'");
    }

    summary["train_ms"] = elapsed_ms(t0);
    summary["config"] = rc;
    emit_summary(out, summary);
    return 0;
}

// ---------------------------------------------------------------- finetune

struct FinetuneOpts {
    std::string config, model, train, out, loss_csv;
    std::string optimizer = "adam", loss = "mse", parameterization = "logits";
    std::string out_dir = default_out_dir();
    std::size_t t_train = 0, epochs = 50;
    double lr = 0.01, plateau_tol = 1e-4;
};

void add_finetune(CLI::App& app, FinetuneOpts& o) {
    auto* cmd =
        app.add_subcommand("finetune", "fine-tune an existing Markov model on a trace");
    cmd->add_option("--config", o.config, "JSON config file");
    cmd->add_option("--model", o.model, "input Markov model file");
    cmd->add_option("--train", o.train, "training trace (binary lines)");
    cmd->add_option("--t-train", o.t_train, "supervised horizon T_train");
    cmd->add_option("--epochs", o.epochs, "training epochs");
    cmd->add_option("--lr", o.lr, "learning rate");
    cmd->add_option("--optimizer", o.optimizer, "adam | sgd");
    cmd->add_option("--loss", o.loss, "mse | ce");
    cmd->add_option("--param", o.parameterization, "logits | project");
    cmd->add_option("--plateau-tol", o.plateau_tol, "early-stop relative loss tolerance");
    cmd->add_option("--loss-csv", o.loss_csv, "write per-epoch loss CSV here");
    cmd->add_option("--out", o.out, "output model file");
    cmd->add_option("--out-dir", o.out_dir, "directory for relative outputs");
}

int run_finetune(const CLI::App& cmd, FinetuneOpts& o) {
    const json cfg = load_config(
        o.config, {"model", "train", "t_train", "epochs", "learning_rate", "optimizer",
                   "loss", "parameterization", "plateau_tol", "loss_csv", "out", "out_dir"});
    overlay(cmd, "--model", cfg, "model", o.model);
    overlay(cmd, "--train", cfg, "train", o.train);
    overlay(cmd, "--t-train", cfg, "t_train", o.t_train);
    overlay(cmd, "--epochs", cfg, "epochs", o.epochs);
    overlay(cmd, "--lr", cfg, "learning_rate", o.lr);
    overlay(cmd, "--optimizer", cfg, "optimizer", o.optimizer);
    overlay(cmd, "--loss", cfg, "loss", o.loss);
    overlay(cmd, "--param", cfg, "parameterization", o.parameterization);
    overlay(cmd, "--plateau-tol", cfg, "plateau_tol", o.plateau_tol);
    overlay(cmd, "--loss-csv", cfg, "loss_csv", o.loss_csv);
    overlay(cmd, "--out", cfg, "out", o.out);
    overlay(cmd, "--out-dir", cfg, "out_dir", o.out_dir);
    require_arg(o.model, "finetune: --model");
    require_arg(o.train, "finetune: --train");
    require_arg(o.out, "finetune: --out");
    if (o.t_train < 1) throw std::invalid_argument("finetune: --t-train >= 1 is required");

    const cc::MarkovModel model = cc::load_model(o.model);
    const cc::Trace trace = cc::load_trace(o.train, cc::TraceFormat::BinaryLines);
    cc::FinetuneConfig fc;
    fc.t_train = o.t_train;
    fc.epochs = o.epochs;
    fc.learning_rate = o.lr;
    fc.optimizer = parse_optimizer(o.optimizer);
    fc.loss = parse_loss(o.loss);
    fc.plateau_tol = o.plateau_tol;
    fc.parameterization = parse_parameterization(o.parameterization);

    const auto t0 = std::chrono::steady_clock::now();
    const auto pairs = cc::build_pairs(model.space, trace, fc.t_train);
    cc::FinetuneResult result = cc::finetune(model, pairs, fc);
    const std::string out = resolve_out(o.out_dir, o.out);
    cc::save_model(result.model, out);
    if (!o.loss_csv.empty()) cc::save_loss_csv(resolve_out(o.out_dir, o.loss_csv), result.losses);

    emit_summary(out, json{{"command", "finetune"},
                           {"out", out},
                           {"states", result.model.space.size()},
                           {"epochs_run", result.losses.size()},
                           {"final_loss", result.losses.back()},
                           {"n_pairs", pairs.size()},
                           {"train_ms", elapsed_ms(t0)},
                           {"config",
                            {{"model", o.model},
                             {"train", o.train},
                             {"t_train", o.t_train},
                             {"epochs", o.epochs},
                             {"learning_rate", o.lr},
                             {"optimizer", o.optimizer},
                             {"loss", o.loss},
                             {"parameterization", o.parameterization},
                             {"plateau_tol", o.plateau_tol},
                             {"out_dir", o.out_dir}}}});
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
    std::string config, model, test, out, name, train_name;
    std::string out_dir = default_out_dir();
    std::size_t m = 0, t_max = 0, stride = 1;
    bool plot = false;
};

void add_eval(CLI::App& app, EvalOpts& o) {
    auto* cmd = app.add_subcommand("eval", "evaluate a saved model over sliding positions");
    cmd->add_option("--config", o.config, "JSON config file");
    cmd->add_option("--model", o.model, "model file (markov or mlp)");
    cmd->add_option("--test", o.test, "test trace (binary lines)");
    cmd->add_option("--m", o.m, "sensed slots per position (default: model order / input)");
    cmd->add_option("--t-max", o.t_max, "largest prediction horizon");
    cmd->add_option("--stride", o.stride, "spacing between sensing positions");
    cmd->add_option("--name", o.name, "predictor label in the report");
    cmd->add_option("--train-name", o.train_name,
                    "training trace name (default: recorded in the model)");
    cmd->add_flag("--plot", o.plot, "also render an SVG chart next to the report");
    cmd->add_option("--out", o.out, "output report CSV");
    cmd->add_option("--out-dir", o.out_dir, "directory for relative outputs");
}

int run_eval(const CLI::App& cmd, EvalOpts& o) {
    const json cfg = load_config(o.config, {"model", "test", "m", "t_max", "stride", "name",
                                            "train_name", "plot", "out", "out_dir"});
    overlay(cmd, "--model", cfg, "model", o.model);
    overlay(cmd, "--test", cfg, "test", o.test);
    overlay(cmd, "--m", cfg, "m", o.m);
    overlay(cmd, "--t-max", cfg, "t_max", o.t_max);
    overlay(cmd, "--stride", cfg, "stride", o.stride);
    overlay(cmd, "--name", cfg, "name", o.name);
    overlay(cmd, "--train-name", cfg, "train_name", o.train_name);
    overlay(cmd, "--plot", cfg, "plot", o.plot);
    overlay(cmd, "--out", cfg, "out", o.out);
    overlay(cmd, "--out-dir", cfg, "out_dir", o.out_dir);
    require_arg(o.model, "eval: --model");
    require_arg(o.test, "eval: --test");
    require_arg(o.out, "eval: --out");
    if (o.t_max < 1) throw std::invalid_argument("eval: --t-max >= 1 is required");

    const std::string kind = sniff_model_kind(o.model);
    cc::Predictor predictor;
    std::optional<cc::MarkovModel> markov;
    std::optional<cc::MlpModel> mlp;
    std::string train_name = o.train_name;
    if (kind == "markov") {
        markov = cc::load_model(o.model);
        if (o.m == 0) o.m = markov->space.order();
        if (train_name.empty()) train_name = markov->meta.trace_name;
        predictor = cc::make_markov_predictor(*markov, o.name.empty() ? "markov" : o.name);
    } else if (kind == "mlp") {
        mlp = cc::load_mlp(o.model);
        if (o.m == 0) o.m = mlp->config.input_size;
        if (o.m != mlp->config.input_size)
            throw std::invalid_argument("eval: --m must equal the mlp input size");
        if (train_name.empty()) train_name = mlp->trace_name;
        predictor = cc::make_mlp_predictor(*mlp, o.name.empty() ? "mlp" : o.name);
    } else {
        throw cc::DataError("eval: unsupported model kind '" + kind + "'");
    }

    const cc::Trace test = cc::load_trace(o.test, cc::TraceFormat::BinaryLines);
    cc::EvalSpec spec;
    spec.m = o.m;
    spec.t_max = o.t_max;
    spec.stride = o.stride;
    spec.train_trace = train_name;
    spec.test_trace = test.name;

    const auto t0 = std::chrono::steady_clock::now();
    cc::EvalReport report = cc::evaluate(spec, test, predictor);
    report.provenance = "model: " + o.model;
    const std::string out = resolve_out(o.out_dir, o.out);
    cc::write_report_csv(report, out);
    std::string svg_path;
    if (o.plot) {
        svg_path = replace_extension(out, ".svg");
        cc::write_comparison_svg({report}, svg_path);
    }

    json summary{{"command", "eval"},
                 {"out", out},
                 {"mean_success", report.mean_success()},
                 {"n_positions", report.rows.front().n_positions},
                 {"eval_ms", elapsed_ms(t0)},
                 {"config",
                  {{"model", o.model},
                   {"test", o.test},
                   {"m", o.m},
                   {"t_max", o.t_max},
                   {"stride", o.stride},
                   {"train_name", train_name},
                   {"plot", o.plot},
                   {"out_dir", o.out_dir}}}};
    if (!svg_path.empty()) summary["svg"] = svg_path;
    emit_summary(out, summary);
    return 0;
}

// ---------------------------------------------------------------- sweep-l

struct SweepOpts {
    std::string config, train, test, out;
    std::string out_dir = default_out_dir();
    std::size_t order = 0, m = 0, t_max = 0, stride = 1;
    std::vector<std::size_t> l_values;
};

void add_sweep(CLI::App& app, SweepOpts& o) {
    auto* cmd = app.add_subcommand(
        "sweep-l", "smart-dictionary cap study: re-estimate and evaluate per cap");
    cmd->add_option("--config", o.config, "JSON config file");
    cmd->add_option("--train", o.train, "training trace (binary lines)");
    cmd->add_option("--test", o.test, "test trace (binary lines)");
    cmd->add_option("--order", o.order, "model memory M'");
    cmd->add_option("--m", o.m, "sensed slots per position (default: order)");
    cmd->add_option("--t-max", o.t_max, "largest prediction horizon");
    cmd->add_option("--stride", o.stride, "spacing between sensing positions");
    cmd->add_option("--l", o.l_values, "dictionary caps to sweep (0 = uncapped)")
        ->delimiter(',');
    cmd->add_option("--out", o.out, "output CSV (L,n_states,mean_success)");
    cmd->add_option("--out-dir", o.out_dir, "directory for relative outputs");
}

int run_sweep(const CLI::App& cmd, SweepOpts& o) {
    const json cfg = load_config(o.config, {"train", "test", "order", "m", "t_max", "stride",
                                            "l_values", "out", "out_dir"});
    overlay(cmd, "--train", cfg, "train", o.train);
    overlay(cmd, "--test", cfg, "test", o.test);
    overlay(cmd, "--order", cfg, "order", o.order);
    overlay(cmd, "--m", cfg, "m", o.m);
    overlay(cmd, "--t-max", cfg, "t_max", o.t_max);
    overlay(cmd, "--stride", cfg, "stride", o.stride);
    overlay(cmd, "--l", cfg, "l_values", o.l_values);
    overlay(cmd, "--out", cfg, "out", o.out);
    overlay(cmd, "--out-dir", cfg, "out_dir", o.out_dir);
    require_arg(o.train, "sweep-l: --train");
    require_arg(o.test, "sweep-l: --test");
    require_arg(o.out, "sweep-l: --out");
    if (o.order < 1) throw std::invalid_argument("sweep-l: --order >= 1 is required");
    if (o.t_max < 1) throw std::invalid_argument("sweep-l: --t-max >= 1 is required");
    if (o.l_values.empty()) throw std::invalid_argument("sweep-l: --l needs at least one cap");
    if (o.m == 0) o.m = o.order;

    const cc::Trace train = cc::load_trace(o.train, cc::TraceFormat::BinaryLines);
    const cc::Trace test = cc::load_trace(o.test, cc::TraceFormat::BinaryLines);
    cc::EvalSpec spec;
    spec.m = o.m;
    spec.t_max = o.t_max;
    spec.stride = o.stride;

    const auto t0 = std::chrono::steady_clock::now();
    const auto rows = cc::sweep_l(train, test, o.order, spec, o.l_values);
    const std::string out = resolve_out(o.out_dir, o.out);
    cc::write_sweep_csv(rows, out);

    json table = json::array();
    for (const auto& row : rows)
        table.push_back({{"L", row.l_max},
                         {"n_states", row.n_states},
                         {"mean_success", row.mean_success}});
    emit_summary(out, json{{"command", "sweep-l"},
                           {"out", out},
                           {"rows", table},
                           {"sweep_ms", elapsed_ms(t0)},
                           {"config",
                            {{"train", o.train},
                             {"test", o.test},
                             {"order", o.order},
                             {"m", o.m},
                             {"t_max", o.t_max},
                             {"stride", o.stride},
                             {"l_values", o.l_values},
                             {"out_dir", o.out_dir}}}});
    return 0;
}

// ---------------------------------------------------------------- compare

struct CompareOpts {
    std::string config, out, title = "prediction success rate";
    std::string out_dir = default_out_dir();
    std::vector<std::string> reports, names;
    bool plot = false;
};

void add_compare(CLI::App& app, CompareOpts& o) {
    auto* cmd =
        app.add_subcommand("compare", "merge report CSVs into one table and optional chart");
    cmd->add_option("--config", o.config, "JSON config file");
    cmd->add_option("--report", o.reports, "report CSVs to merge (same horizon range)");
    cmd->add_option("--name", o.names, "column labels (default: file stems)");
    cmd->add_option("--title", o.title, "chart title");
    cmd->add_flag("--plot", o.plot, "also render an SVG chart next to the table");
    cmd->add_option("--out", o.out, "output comparison CSV");
    cmd->add_option("--out-dir", o.out_dir, "directory for relative outputs");
}

int run_compare(const CLI::App& cmd, CompareOpts& o) {
    const json cfg =
        load_config(o.config, {"reports", "names", "title", "plot", "out", "out_dir"});
    overlay(cmd, "--report", cfg, "reports", o.reports);
    overlay(cmd, "--name", cfg, "names", o.names);
    overlay(cmd, "--title", cfg, "title", o.title);
    overlay(cmd, "--plot", cfg, "plot", o.plot);
    overlay(cmd, "--out", cfg, "out", o.out);
    overlay(cmd, "--out-dir", cfg, "out_dir", o.out_dir);
    require_arg(o.out, "compare: --out");
    if (o.reports.empty())
        throw std::invalid_argument("compare: --report needs at least one CSV");
    if (!o.names.empty() && o.names.size() != o.reports.size())
        throw std::invalid_argument("compare: --name count must match --report count");

    std::vector<cc::EvalReport> reports;
    reports.reserve(o.reports.size());
    for (std::size_t k = 0; k < o.reports.size(); ++k)
        reports.push_back(
            cc::read_report_csv(o.reports[k], o.names.empty() ? "" : o.names[k]));

    const std::string out = resolve_out(o.out_dir, o.out);
    cc::write_comparison_csv(reports, out);
    std::string svg_path;
    if (o.plot) {
        svg_path = replace_extension(out, ".svg");
        cc::write_comparison_svg(reports, svg_path, o.title);
    }

    json summary{{"command", "compare"},
                 {"out", out},
                 {"config",
                  {{"reports", o.reports},
                   {"names", o.names},
                   {"title", o.title},
                   {"plot", o.plot},
                   {"out_dir", o.out_dir}}}};
    if (!svg_path.empty()) summary["svg"] = svg_path;
    emit_summary(out, summary);
    return 0;
}

int fail(const char* kind, const std::string& message, int code) {
    json err{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
    std::cout << err.dump() << '\n';
    std::cerr << "chaincast: " << message << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectrum occupancy prediction: generate, train, fine-tune, evaluate"};
    app.require_subcommand(1);

    GenOpts gen_opts;
    IngestOpts ingest_opts;
    TrainOpts train_opts;
    FinetuneOpts finetune_opts;
    EvalOpts eval_opts;
    SweepOpts sweep_opts;
    CompareOpts compare_opts;
    add_gen(app, gen_opts);
    add_ingest(app, ingest_opts);
    add_train(app, train_opts);
    add_finetune(app, finetune_opts);
    add_eval(app, eval_opts);
    add_sweep(app, sweep_opts);
    add_compare(app, compare_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return fail("usage", e.what(), 2);
    }

    try {
        const CLI::App* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "gen") return run_gen(*sub, gen_opts);
        if (name == "ingest") return run_ingest(*sub, ingest_opts);
        if (name == "train") return run_train(*sub, train_opts);
        if (name == "finetune") return run_finetune(*sub, finetune_opts);
        if (name == "eval") return run_eval(*sub, eval_opts);
        if (name == "sweep-l") return run_sweep(*sub, sweep_opts);
        if (name == "compare") return run_compare(*sub, compare_opts);
        return fail("usage", "unknown subcommand", 2);
    } catch (const cc::DivergenceError& e) {
        return fail("divergence", e.what(), 4);
    } catch (const cc::DataError& e) {
        return fail("data", e.what(), 3);
    } catch (const std::invalid_argument& e) {
        return fail("config", e.what(), 2);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 1);
    }
}
