#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chaincast/adam.hpp"
#include "chaincast/errors.hpp"
#include "chaincast/trace.hpp"
#include "chaincast/transition.hpp"

namespace chaincast {

// Feed-forward baseline: sensing vector in, one output unit per horizon
// T in [1, t_train]. ReLU hidden layers, sigmoid outputs trained with
// squared error against the 0/1 labels.
struct MlpConfig {
    std::size_t input_size = 0;               // M
    std::size_t output_size = 0;              // t_train
    std::vector<std::size_t> hidden_sizes = {80, 80, 80};
    double learning_rate = 0.001;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    std::uint64_t rng_seed = 0;
};

struct MlpLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;  // row-major out x in
    std::vector<double> bias;     // out
};

struct MlpModel {
    MlpConfig config;
    std::vector<MlpLayer> layers;
    std::string trace_name;  // training trace, for the same-trace eval protocol
};

struct NnPair {
    std::vector<double> input;   // M sensed states, most recent first
    std::vector<double> label;   // true states at t+1 .. t+t_train
};

// Sliding-window dataset. Input ordering matches the state spaces: the
// most recent slot first.
inline std::vector<NnPair> build_nn_pairs(const Trace& trace, std::size_t m,
                                          std::size_t t_train) {
    if (m < 1 || t_train < 1)
        throw std::invalid_argument("build_nn_pairs: m and t_train must be >= 1");
    if (trace.size() < m + t_train)
        throw DataError("build_nn_pairs: trace shorter than m + t_train");
    std::vector<NnPair> pairs;
    pairs.reserve(trace.size() - m - t_train + 1);
    for (std::size_t t = m - 1; t + t_train < trace.size(); ++t) {
        NnPair pair;
        pair.input.resize(m);
        for (std::size_t k = 0; k < m; ++k) pair.input[k] = trace.states[t - k];
        pair.label.resize(t_train);
        for (std::size_t k = 1; k <= t_train; ++k) pair.label[k - 1] = trace.states[t + k];
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

namespace detail {

struct MlpActivations {
    // pre[l] and post[l] for every layer; post of the last layer is the
    // sigmoid output.
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
};

inline void mlp_forward(const MlpModel& model, const std::vector<double>& input,
                        MlpActivations& acts) {
    const std::size_t n_layers = model.layers.size();
    acts.pre.resize(n_layers);
    acts.post.resize(n_layers);
    const std::vector<double>* x = &input;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const MlpLayer& layer = model.layers[l];
        auto& z = acts.pre[l];
        z.assign(layer.out, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* w = layer.weights.data() + o * layer.in;
            double acc = layer.bias[o];
            for (std::size_t i = 0; i < layer.in; ++i) acc += w[i] * (*x)[i];
            z[o] = acc;
        }
        auto& a = acts.post[l];
        a.resize(layer.out);
        if (l + 1 < n_layers) {
            for (std::size_t o = 0; o < layer.out; ++o) a[o] = z[o] > 0.0 ? z[o] : 0.0;
        } else {
            for (std::size_t o = 0; o < layer.out; ++o) a[o] = 1.0 / (1.0 + std::exp(-z[o]));
        }
        x = &a;
    }
}

}  // namespace detail

inline std::vector<double> mlp_output(const MlpModel& model, const std::vector<double>& input) {
    if (input.size() != model.config.input_size)
        throw std::invalid_argument("mlp_output: input size mismatch");
    detail::MlpActivations acts;
    detail::mlp_forward(model, input, acts);
    return acts.post.back();
}

struct MlpGradients {
    std::vector<std::vector<double>> weights;  // same shapes as the layers
    std::vector<std::vector<double>> bias;
    double loss = 0.0;
};

// Mean over the batch of the per-sample squared error
// sum_k (sigmoid(z_k) - y_k)^2, plus its exact gradients.
inline MlpGradients mlp_gradients(const MlpModel& model, const std::vector<NnPair>& batch) {
    if (batch.empty()) throw std::invalid_argument("mlp_gradients: empty batch");
    const std::size_t n_layers = model.layers.size();
    MlpGradients grads;
    grads.weights.resize(n_layers);
    grads.bias.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        grads.weights[l].assign(model.layers[l].weights.size(), 0.0);
        grads.bias[l].assign(model.layers[l].bias.size(), 0.0);
    }

    detail::MlpActivations acts;
    std::vector<double> delta, delta_prev;
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const auto& sample : batch) {
        detail::mlp_forward(model, sample.input, acts);
        const auto& out = acts.post.back();
        delta.assign(out.size(), 0.0);
        for (std::size_t k = 0; k < out.size(); ++k) {
            const double err = out[k] - sample.label[k];
            grads.loss += scale * err * err;
            // d/dz of (sigmoid(z) - y)^2
            delta[k] = 2.0 * err * out[k] * (1.0 - out[k]);
        }
        for (std::size_t l = n_layers; l-- > 0;) {
            const MlpLayer& layer = model.layers[l];
            const std::vector<double>& below =
                (l == 0) ? sample.input : acts.post[l - 1];
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double d = delta[o] * scale;
                grads.bias[l][o] += d;
                double* g = grads.weights[l].data() + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) g[i] += d * below[i];
            }
            if (l == 0) break;
            delta_prev.assign(layer.in, 0.0);
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double d = delta[o];
                const double* w = layer.weights.data() + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) delta_prev[i] += d * w[i];
            }
            // ReLU gate of the layer below
            for (std::size_t i = 0; i < layer.in; ++i)
                if (acts.pre[l - 1][i] <= 0.0) delta_prev[i] = 0.0;
            delta.swap(delta_prev);
        }
    }
    return grads;
}

inline MlpModel mlp_init(const MlpConfig& config) {
    if (config.input_size == 0 || config.output_size == 0)
        throw std::invalid_argument("mlp_init: input and output sizes must be positive");
    for (auto h : config.hidden_sizes)
        if (h == 0) throw std::invalid_argument("mlp_init: hidden sizes must be positive");

    MlpModel model;
    model.config = config;
    std::mt19937_64 rng(config.rng_seed);
    std::size_t in = config.input_size;
    std::vector<std::size_t> outs = config.hidden_sizes;
    outs.push_back(config.output_size);
    for (auto out : outs) {
        MlpLayer layer;
        layer.in = in;
        layer.out = out;
        std::normal_distribution<double> he(0.0, std::sqrt(2.0 / static_cast<double>(in)));
        layer.weights.resize(out * in);
        for (auto& w : layer.weights) w = he(rng);
        layer.bias.assign(out, 0.0);
        model.layers.push_back(std::move(layer));
        in = out;
    }
    return model;
}

// Mini-batch Adam with a 10% held-out split for early stopping (skipped
// for tiny datasets). Deterministic: the seed fixes the initialization,
// the split, and every shuffle. epoch_losses, when given, receives the
// mean per-sample training loss of each completed epoch.
inline MlpModel train_mlp(const MlpConfig& config, const std::vector<NnPair>& pairs,
                          std::vector<double>* epoch_losses = nullptr) {
    if (pairs.empty()) throw std::invalid_argument("train_mlp: no training pairs");
    for (const auto& pair : pairs)
        if (pair.input.size() != config.input_size || pair.label.size() != config.output_size)
            throw std::invalid_argument("train_mlp: pair dimensions do not match the config");

    MlpModel model = mlp_init(config);
    std::mt19937_64 rng(config.rng_seed + 1);

    std::vector<std::size_t> indices(pairs.size());
    std::iota(indices.begin(), indices.end(), 0);
    std::shuffle(indices.begin(), indices.end(), rng);
    const std::size_t n_val = pairs.size() >= 20 ? pairs.size() / 10 : 0;
    const std::size_t n_train = pairs.size() - n_val;

    std::vector<AdamState> adam_w, adam_b;
    for (const auto& layer : model.layers) {
        adam_w.emplace_back(layer.weights.size());
        adam_b.emplace_back(layer.bias.size());
    }
    AdamParams adam_params;
    adam_params.learning_rate = config.learning_rate;

    auto validation_loss = [&]() {
        double loss = 0.0;
        detail::MlpActivations acts;
        for (std::size_t k = n_train; k < pairs.size(); ++k) {
            const auto& sample = pairs[indices[k]];
            detail::mlp_forward(model, sample.input, acts);
            const auto& out = acts.post.back();
            for (std::size_t j = 0; j < out.size(); ++j) {
                const double err = out[j] - sample.label[j];
                loss += err * err;
            }
        }
        return loss / static_cast<double>(n_val);
    };

    constexpr std::size_t kPatience = 10;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t epochs_since_best = 0;
    std::vector<MlpLayer> best_layers = model.layers;

    long adam_t = 0;
    std::vector<NnPair> batch;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(n_train),
                     rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n_train; start += config.batch_size) {
            const std::size_t stop = std::min(start + config.batch_size, n_train);
            batch.clear();
            for (std::size_t k = start; k < stop; ++k) batch.push_back(pairs[indices[k]]);
            MlpGradients grads = mlp_gradients(model, batch);
            epoch_loss += grads.loss * static_cast<double>(batch.size());
            ++adam_t;
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                adam_w[l].step(model.layers[l].weights, grads.weights[l], adam_params, adam_t);
                adam_b[l].step(model.layers[l].bias, grads.bias[l], adam_params, adam_t);
            }
        }
        epoch_loss /= static_cast<double>(n_train);
        if (!std::isfinite(epoch_loss))
            throw DivergenceError("train_mlp: loss diverged", static_cast<int>(epoch));
        if (epoch_losses) epoch_losses->push_back(epoch_loss);

        if (n_val > 0) {
            const double val = validation_loss();
            if (val < best_val) {
                best_val = val;
                best_layers = model.layers;
                epochs_since_best = 0;
            } else if (++epochs_since_best >= kPatience) {
                model.layers = best_layers;
                return model;
            }
        }
    }
    if (n_val > 0) model.layers = best_layers;
    return model;
}

// prob = output unit T of the forward pass. The network is structurally
// unable to predict beyond its training range, so T > t_train is a
// contract error rather than an extrapolation.
inline PredictionOutcome predict_nn(const MlpModel& model, const Pattern& sensed,
                                    std::size_t horizon) {
    if (horizon < 1 || horizon > model.config.output_size)
        throw std::invalid_argument(
            "predict_nn: horizon outside the trained range [1, t_train]");
    if (sensed.size() != model.config.input_size)
        throw std::invalid_argument("predict_nn: sensed length must equal the input size");
    std::vector<double> input(sensed.begin(), sensed.end());
    const auto out = mlp_output(model, input);
    PredictionOutcome outcome;
    outcome.prob = out[horizon - 1];
    outcome.hard = outcome.prob > 0.5 ? 1 : 0;
    return outcome;
}

inline void save_mlp(const MlpModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model file: " + path);
    out << "chaincast model 1\n";
    out << "kind mlp\n";
    out << "input " << model.config.input_size << '\n';
    out << "t_train " << model.config.output_size << '\n';
    out << "hidden";
    for (auto h : model.config.hidden_sizes) out << ' ' << h;
    out << '\n';
    if (!model.trace_name.empty()) out << "trace " << model.trace_name << '\n';
    char buf[32];
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        out << "layer " << l << ' ' << layer.out << ' ' << layer.in << '\n';
        for (std::size_t o = 0; o < layer.out; ++o) {
            for (std::size_t i = 0; i < layer.in; ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", layer.weights[o * layer.in + i]);
                out << (i ? " " : "") << buf;
            }
            out << '\n';
        }
        for (std::size_t o = 0; o < layer.out; ++o) {
            std::snprintf(buf, sizeof buf, "%.17g", layer.bias[o]);
            out << (o ? " " : "") << buf;
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

inline MlpModel load_mlp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "chaincast model 1")
        throw DataError("not a chaincast model file: " + path);
    if (!std::getline(in, line) || line != "kind mlp")
        throw DataError("not an mlp model: " + path);

    MlpModel model;
    auto field = [&](const std::string& key) {
        if (!std::getline(in, line) || line.rfind(key + " ", 0) != 0)
            throw DataError("model file: expected '" + key + "'");
        return line.substr(key.size() + 1);
    };
    model.config.input_size = std::stoul(field("input"));
    model.config.output_size = std::stoul(field("t_train"));
    {
        std::istringstream hidden(field("hidden").insert(0, " "));
        model.config.hidden_sizes.clear();
        std::size_t h;
        while (hidden >> h) model.config.hidden_sizes.push_back(h);
    }
    if (!std::getline(in, line)) throw DataError("model file: expected 'layer'");
    if (line.rfind("trace ", 0) == 0) {  // optional: files saved untrained omit it
        model.trace_name = line.substr(6);
        if (!std::getline(in, line)) throw DataError("model file: expected 'layer'");
    }
    std::vector<std::size_t> outs = model.config.hidden_sizes;
    outs.push_back(model.config.output_size);
    for (std::size_t l = 0; l < outs.size(); ++l) {
        if (l > 0 && !std::getline(in, line))
            throw DataError("model file: expected 'layer'");
        if (line.rfind("layer ", 0) != 0)
            throw DataError("model file: expected 'layer'");
        std::istringstream header(line.substr(6));
        std::size_t idx, rows, cols;
        if (!(header >> idx >> rows >> cols) || idx != l)
            throw DataError("model file: bad layer header");
        MlpLayer layer;
        layer.out = rows;
        layer.in = cols;
        layer.weights.resize(rows * cols);
        for (std::size_t o = 0; o < rows; ++o) {
            if (!std::getline(in, line)) throw DataError("model file: missing weight row");
            std::istringstream row(line);
            for (std::size_t i = 0; i < cols; ++i)
                if (!(row >> layer.weights[o * cols + i]))
                    throw DataError("model file: short weight row");
        }
        if (!std::getline(in, line)) throw DataError("model file: missing bias row");
        std::istringstream brow(line);
        layer.bias.resize(rows);
        for (std::size_t o = 0; o < rows; ++o)
            if (!(brow >> layer.bias[o])) throw DataError("model file: short bias row");
        model.layers.push_back(std::move(layer));
    }
    return model;
}

}  // namespace chaincast
