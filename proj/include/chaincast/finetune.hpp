#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "chaincast/adam.hpp"
#include "chaincast/errors.hpp"
#include "chaincast/state_space.hpp"
#include "chaincast/transition.hpp"

namespace chaincast {

enum class Optimizer { Adam, Sgd };
enum class LossKind { Mse, CrossEntropy };

// Row-stochasticity under gradient updates:
//   LogitsSoftmax - optimize unconstrained row logits initialized to
//       log(P + eps) and map to P by a row-wise softmax each pass. Keeps
//       rows exactly stochastic and lets gradients revive zero-probability
//       transitions.
//   Project - raw gradient steps on P, then clamp negatives to zero and
//       renormalize each row. The literal reading of plain gradient
//       descent on the matrix entries.
enum class Parameterization { LogitsSoftmax, Project };

struct FinetuneConfig {
    std::size_t t_train = 1;
    std::size_t epochs = 50;
    double learning_rate = 0.01;
    Optimizer optimizer = Optimizer::Adam;
    LossKind loss = LossKind::Mse;
    double plateau_tol = 1e-4;
    Parameterization parameterization = Parameterization::LogitsSoftmax;
};

// One supervised sample: the belief at t plus the beliefs of the next
// t_train slots as labels.
struct TrainingPair {
    BeliefVector input;
    std::vector<BeliefVector> labels;
};

// Sliding-window pair construction. The input is the encoding of the full
// M'-window ending at t (one-hot unless a smart space misses the pattern,
// which splits mass over the Hamming tie set); the labels are the
// encodings of the next t_train windows.
inline std::vector<TrainingPair> build_pairs(const StateSpace& space, const Trace& trace,
                                             std::size_t t_train) {
    if (t_train < 1) throw std::invalid_argument("build_pairs: t_train must be >= 1");
    const std::size_t order = space.order();
    if (trace.size() < order + t_train)
        throw DataError("build_pairs: trace shorter than order + t_train");

    auto encode_window = [&](std::size_t t) {
        BeliefVector belief(space.size(), 0.0);
        for (const auto& [i, w] : space.map_window(StateSpace::window_at(trace, t, order)))
            belief[i] = w;
        return belief;
    };

    std::vector<TrainingPair> pairs;
    pairs.reserve(trace.size() - order - t_train + 1);
    for (std::size_t t = order - 1; t + t_train < trace.size(); ++t) {
        TrainingPair pair;
        pair.input = encode_window(t);
        pair.labels.reserve(t_train);
        for (std::size_t k = 1; k <= t_train; ++k) pair.labels.push_back(encode_window(t + k));
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

namespace detail {

constexpr double kCrossEntropyFloor = 1e-12;

inline double step_loss(LossKind kind, const BeliefVector& predicted, const BeliefVector& label) {
    double loss = 0.0;
    if (kind == LossKind::Mse) {
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            const double d = predicted[i] - label[i];
            loss += d * d;
        }
    } else {
        for (std::size_t i = 0; i < predicted.size(); ++i)
            if (label[i] != 0.0) loss -= label[i] * std::log(predicted[i] + kCrossEntropyFloor);
    }
    return loss;
}

// dLoss/dPredicted for one step.
inline void step_loss_grad(LossKind kind, const BeliefVector& predicted,
                           const BeliefVector& label, std::vector<double>& grad) {
    if (kind == LossKind::Mse) {
        for (std::size_t i = 0; i < predicted.size(); ++i)
            grad[i] += 2.0 * (predicted[i] - label[i]);
    } else {
        for (std::size_t i = 0; i < predicted.size(); ++i)
            if (label[i] != 0.0) grad[i] -= label[i] / (predicted[i] + kCrossEntropyFloor);
    }
}

}  // namespace detail

struct ForwardResult {
    std::vector<BeliefVector> predicted;  // s-hat at t+1 .. t+t_train
    double loss = 0.0;
};

// Iterates s-hat_{t+n+1} = s-hat_{t+n} P with s-hat_t = input, accumulating
// the loss over all t_train steps.
inline ForwardResult forward(const TransitionMatrix& matrix, const TrainingPair& pair,
                             LossKind loss_kind = LossKind::Mse) {
    const std::size_t n = matrix.size();
    if (pair.input.size() != n) throw std::invalid_argument("forward: dimension mismatch");
    ForwardResult result;
    result.predicted.reserve(pair.labels.size());
    BeliefVector state = pair.input;
    BeliefVector next(n);
    for (const auto& label : pair.labels) {
        matrix.apply(state, next);
        state = next;
        result.loss += detail::step_loss(loss_kind, state, label);
        result.predicted.push_back(state);
    }
    return result;
}

// Exact reverse-mode gradient dLoss/dP through the t_train-step recurrence:
// with g_n the full gradient of the loss with respect to s-hat_{t+n},
//
//   g_N     = dl_N,    g_n = dl_n + g_{n+1} P^T,
//   dL/dP   = sum_n outer(s-hat_{t+n-1}, g_n),
//
// accumulated into grad (row-major n x n), returning the pair's loss.
inline double backward(const TransitionMatrix& matrix, const TrainingPair& pair,
                       std::vector<double>& grad, LossKind loss_kind = LossKind::Mse) {
    const std::size_t n = matrix.size();
    const auto fwd = forward(matrix, pair, loss_kind);
    const std::size_t steps = pair.labels.size();

    std::vector<double> g(n, 0.0);
    std::vector<double> g_prev(n);
    for (std::size_t k = steps; k >= 1; --k) {
        const BeliefVector& upstream = (k == 1) ? pair.input : fwd.predicted[k - 2];
        detail::step_loss_grad(loss_kind, fwd.predicted[k - 1], pair.labels[k - 1], g);
        for (std::size_t i = 0; i < n; ++i) {
            const double si = upstream[i];
            if (si == 0.0) continue;
            double* row = grad.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += si * g[j];
        }
        if (k > 1) {
            // g <- g P^T
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += g[j] * matrix.at(i, j);
                g_prev[i] = acc;
            }
            g.swap(g_prev);
        }
    }
    return fwd.loss;
}

struct FinetuneResult {
    MarkovModel model;
    std::vector<double> losses;  // one entry per completed epoch
};

// Observer invoked after every optimizer step with the epoch index, the
// full-batch loss of that epoch, and the effective (row-stochastic) matrix.
using EpochCallback = std::function<void(std::size_t, double, const TransitionMatrix&)>;

// Supervised fine-tuning of the transition matrix over the t_train-step
// belief recurrence: full-batch gradients, Adam or plain SGD, early stop
// once the relative loss change drops below plateau_tol.
inline FinetuneResult finetune(const MarkovModel& model, const std::vector<TrainingPair>& pairs,
                               const FinetuneConfig& config, const EpochCallback& on_epoch = {}) {
    const std::size_t n = model.matrix.size();
    if (!model.matrix.is_dense())
        throw std::invalid_argument("finetune: requires a dense transition matrix");
    if (pairs.empty()) throw std::invalid_argument("finetune: no training pairs");
    for (const auto& pair : pairs)
        if (pair.input.size() != n || pair.labels.size() != config.t_train)
            throw std::invalid_argument("finetune: pair dimensions do not match the model");

    const bool use_logits = config.parameterization == Parameterization::LogitsSoftmax;
    constexpr double kLogitsEps = 1e-8;

    // params = row logits (LogitsSoftmax) or the matrix entries (Project).
    std::vector<double> params(n * n);
    if (use_logits) {
        const auto& p = model.matrix.dense_values();
        for (std::size_t k = 0; k < params.size(); ++k) params[k] = std::log(p[k] + kLogitsEps);
    } else {
        params = model.matrix.dense_values();
    }

    auto effective_matrix = [&]() {
        if (!use_logits) return TransitionMatrix::from_dense(n, params);
        std::vector<double> values(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            const double* z = params.data() + i * n;
            double zmax = z[0];
            for (std::size_t j = 1; j < n; ++j) zmax = std::max(zmax, z[j]);
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                values[i * n + j] = std::exp(z[j] - zmax);
                sum += values[i * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) values[i * n + j] /= sum;
        }
        return TransitionMatrix::from_dense(n, values);
    };

    AdamState adam(n * n);
    AdamParams adam_params;
    adam_params.learning_rate = config.learning_rate;

    FinetuneResult result{MarkovModel{model.space, effective_matrix(), model.meta}, {}};
    std::vector<double> grad(n * n);
    double prev_loss = 0.0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        TransitionMatrix matrix = effective_matrix();
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (const auto& pair : pairs) loss += backward(matrix, pair, grad, config.loss);

        if (!std::isfinite(loss))
            throw DivergenceError("finetune: loss diverged", static_cast<int>(epoch));

        if (use_logits) {
            // Chain through the row softmax: dz_j = p_j (g_j - sum_k g_k p_k).
            const auto& p = matrix.dense_values();
            for (std::size_t i = 0; i < n; ++i) {
                const double* gi = grad.data() + i * n;
                const double* pi = p.data() + i * n;
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += gi[j] * pi[j];
                double* zi = grad.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) zi[j] = pi[j] * (gi[j] - dot);
            }
        }

        if (config.optimizer == Optimizer::Adam) {
            adam.step(params, grad, adam_params, static_cast<long>(epoch) + 1);
        } else {
            for (std::size_t k = 0; k < params.size(); ++k)
                params[k] -= config.learning_rate * grad[k];
        }

        if (!use_logits) {
            // Project every row back onto the probability simplex.
            for (std::size_t i = 0; i < n; ++i) {
                double* row = params.data() + i * n;
                double sum = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    if (row[j] < 0.0) row[j] = 0.0;
                    sum += row[j];
                }
                if (sum <= 0.0) {
                    for (std::size_t j = 0; j < n; ++j) row[j] = 1.0 / static_cast<double>(n);
                } else {
                    for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
                }
            }
        }

        result.losses.push_back(loss);
        if (on_epoch) on_epoch(epoch, loss, effective_matrix());

        if (epoch > 0) {
            const double denom = std::max(std::abs(prev_loss), 1e-30);
            if (std::abs(prev_loss - loss) / denom < config.plateau_tol) break;
        }
        prev_loss = loss;
    }

    result.model.matrix = effective_matrix();
    return result;
}

inline void save_loss_csv(const std::string& path, const std::vector<double>& losses) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write loss csv: " + path);
    out << "epoch,loss\n";
    char buf[32];
    for (std::size_t e = 0; e < losses.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%.17g", losses[e]);
        out << e << ',' << buf << '\n';
    }
}

}  // namespace chaincast
