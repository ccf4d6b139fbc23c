#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <random>

#include "chaincast/mlp.hpp"
#include "chaincast/transition.hpp"

using namespace chaincast;

namespace {

Trace periodic_trace(std::size_t block, std::size_t n) {
    Trace t;
    t.name = "periodic";
    for (std::size_t k = 0; k < n; ++k)
        t.states.push_back(static_cast<std::uint8_t>((k / block) % 2 == 0 ? 1 : 0));
    return t;
}

double batch_loss(const MlpModel& model, const std::vector<NnPair>& batch) {
    double total = 0.0;
    for (const auto& pair : batch) {
        const auto out = mlp_output(model, pair.input);
        for (std::size_t k = 0; k < out.size(); ++k)
            total += (out[k] - pair.label[k]) * (out[k] - pair.label[k]);
    }
    return total / static_cast<double>(batch.size());
}

}  // namespace

TEST_CASE("build_nn_pairs slides most-recent-first windows") {
    Trace trace{{1, 1, 0, 0}, 0.5, "t"};
    const auto pairs = build_nn_pairs(trace, 2, 1);
    REQUIRE(pairs.size() == 2);
    // t=1: sensed [q1,q0] = [1,1], next state q2 = 0
    REQUIRE(pairs[0].input == std::vector<double>{1.0, 1.0});
    REQUIRE(pairs[0].label == std::vector<double>{0.0});
    // t=2: sensed [q2,q1] = [0,1], next state q3 = 0
    REQUIRE(pairs[1].input == std::vector<double>{0.0, 1.0});
    REQUIRE(pairs[1].label == std::vector<double>{0.0});

    REQUIRE(build_nn_pairs(periodic_trace(3, 40), 4, 6).size() == 40 - 4 - 6 + 1);
    REQUIRE_THROWS_AS(build_nn_pairs(trace, 4, 1), DataError);
    REQUIRE_THROWS_AS(build_nn_pairs(trace, 0, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(build_nn_pairs(trace, 2, 0), std::invalid_argument);
}

TEST_CASE("periodic traffic yields periodic training pairs") {
    const auto pairs = build_nn_pairs(periodic_trace(3, 60), 3, 2);
    // Block length 3 gives period 6; pairs six apart are identical.
    for (std::size_t k = 0; k + 6 < pairs.size(); ++k) {
        REQUIRE(pairs[k].input == pairs[k + 6].input);
        REQUIRE(pairs[k].label == pairs[k + 6].label);
    }
}

TEST_CASE("backprop matches central finite differences on a small net") {
    MlpConfig config;
    config.input_size = 3;
    config.output_size = 2;
    config.hidden_sizes = {4};
    config.rng_seed = 11;
    MlpModel model = mlp_init(config);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<NnPair> batch(6);
    for (auto& pair : batch) {
        pair.input = {unit(rng), unit(rng), unit(rng)};
        pair.label = {unit(rng) > 0.5 ? 1.0 : 0.0, unit(rng) > 0.5 ? 1.0 : 0.0};
    }

    const auto grads = mlp_gradients(model, batch);
    REQUIRE(grads.loss == Catch::Approx(batch_loss(model, batch)).margin(1e-12));

    constexpr double h = 1e-5;
    double worst = 0.0;
    auto check = [&](std::vector<double>& params, const std::vector<double>& grad) {
        for (std::size_t k = 0; k < params.size(); ++k) {
            const double keep = params[k];
            params[k] = keep + h;
            const double up = batch_loss(model, batch);
            params[k] = keep - h;
            const double down = batch_loss(model, batch);
            params[k] = keep;
            const double fd = (up - down) / (2.0 * h);
            worst = std::max(worst, std::abs(grad[k] - fd) / std::max(std::abs(fd), 1e-3));
        }
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        check(model.layers[l].weights, grads.weights[l]);
        check(model.layers[l].bias, grads.bias[l]);
    }
    REQUIRE(worst < 1e-4);
}

TEST_CASE("training drives outputs toward constant labels") {
    // All labels zero: the net should learn to answer near 0 everywhere.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<NnPair> pairs(40);
    for (auto& pair : pairs) {
        pair.input = {unit(rng), unit(rng)};
        pair.label = {0.0};
    }
    MlpConfig config;
    config.input_size = 2;
    config.output_size = 1;
    config.hidden_sizes = {8};
    config.learning_rate = 0.01;  // sigmoid tails need sizable bias shifts
    config.epochs = 300;
    config.rng_seed = 1;
    const MlpModel model = train_mlp(config, pairs);
    for (const auto& pair : pairs) REQUIRE(mlp_output(model, pair.input)[0] < 0.1);
}

TEST_CASE("training is bit-reproducible under a fixed seed") {
    const auto pairs = build_nn_pairs(periodic_trace(3, 120), 3, 4);
    MlpConfig config;
    config.input_size = 3;
    config.output_size = 4;
    config.hidden_sizes = {16, 16};
    config.epochs = 30;
    config.rng_seed = 77;
    const MlpModel a = train_mlp(config, pairs);
    const MlpModel b = train_mlp(config, pairs);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        REQUIRE(a.layers[l].weights == b.layers[l].weights);
        REQUIRE(a.layers[l].bias == b.layers[l].bias);
    }
    config.rng_seed = 78;
    const MlpModel c = train_mlp(config, pairs);
    REQUIRE(a.layers[0].weights != c.layers[0].weights);
}

TEST_CASE("full-batch training loss is non-increasing at a small learning rate") {
    const auto pairs = build_nn_pairs(periodic_trace(3, 80), 3, 2);
    MlpConfig config;
    config.input_size = 3;
    config.output_size = 2;
    config.hidden_sizes = {12};
    config.learning_rate = 1e-4;
    config.epochs = 60;
    config.batch_size = pairs.size();  // one exact gradient step per epoch
    config.rng_seed = 4;
    std::vector<double> losses;
    train_mlp(config, pairs, &losses);
    REQUIRE(losses.size() >= 2);
    for (std::size_t e = 1; e < losses.size(); ++e)
        REQUIRE(losses[e] <= losses[e - 1] + 1e-9);
}

TEST_CASE("an MLP masters the toy block pattern and matches the Markov answer") {
    Trace trace = periodic_trace(3, 400);
    const auto pairs = build_nn_pairs(trace, 3, 6);
    MlpConfig config;
    config.input_size = 3;
    config.output_size = 6;
    config.hidden_sizes = {24, 24};
    config.epochs = 400;
    config.rng_seed = 13;
    const MlpModel mlp = train_mlp(config, pairs);

    const MarkovModel markov = estimate_model(StateSpace::full(3), trace);
    for (std::size_t t = 2; t < 8; ++t) {
        const Pattern sensed = StateSpace::window_at(trace, t, 3);
        for (std::size_t horizon = 1; horizon <= 6; ++horizon) {
            const auto nn = predict_nn(mlp, sensed, horizon);
            REQUIRE(nn.prob >= 0.0);
            REQUIRE(nn.prob <= 1.0);
            REQUIRE(nn.hard == predict(markov, sensed, horizon).hard);
            REQUIRE(nn.hard == static_cast<int>(trace.states[t + horizon]));
        }
    }
}

TEST_CASE("predict_nn rejects out-of-contract queries") {
    MlpConfig config;
    config.input_size = 2;
    config.output_size = 3;
    config.hidden_sizes = {4};
    const MlpModel model = mlp_init(config);
    REQUIRE_THROWS_AS(predict_nn(model, {1, 0}, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(predict_nn(model, {1, 0}, 4), std::invalid_argument);
    REQUIRE_THROWS_AS(predict_nn(model, {1, 0, 1}, 1), std::invalid_argument);
}

TEST_CASE("a saved network reloads with bit-identical outputs") {
    const auto pairs = build_nn_pairs(periodic_trace(4, 100), 4, 3);
    MlpConfig config;
    config.input_size = 4;
    config.output_size = 3;
    config.hidden_sizes = {10};
    config.epochs = 20;
    config.rng_seed = 21;
    MlpModel model = train_mlp(config, pairs);
    save_mlp(model, "chaincast_test_mlp.txt");
    const MlpModel bare = load_mlp("chaincast_test_mlp.txt");
    REQUIRE(bare.trace_name.empty());

    model.trace_name = "toy-4.txt";
    save_mlp(model, "chaincast_test_mlp.txt");
    const MlpModel back = load_mlp("chaincast_test_mlp.txt");
    std::remove("chaincast_test_mlp.txt");

    REQUIRE(back.config.input_size == 4);
    REQUIRE(back.config.hidden_sizes == std::vector<std::size_t>{10});
    REQUIRE(back.trace_name == "toy-4.txt");
    for (const auto& pair : pairs)
        REQUIRE(mlp_output(back, pair.input) == mlp_output(model, pair.input));

    REQUIRE_THROWS_AS(load_mlp("chaincast_no_such_model.txt"), DataError);
}
