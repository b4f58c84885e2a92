#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bisimlab/analysis.hpp"
#include "bisimlab/representation.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <string>

using namespace bisim;

namespace {

std::vector<Transition> random_batch(Rng& rng, int n_states, int n_actions, int size) {
    std::vector<Transition> batch(size);
    for (Transition& t : batch) {
        t.s = rng.uniform_int(0, n_states - 1);
        t.a = rng.uniform_int(0, n_actions - 1);
        t.r = rng.uniform(-1.0, 1.0);
        t.s_next = rng.uniform_int(0, n_states - 1);
    }
    return batch;
}

double rel_err(double analytic, double fd, double floor_) {
    return std::abs(analytic - fd) / std::max(floor_, std::abs(analytic) + std::abs(fd));
}

// Encoder loss as a function of one parameter entry, with the target frozen at
// the base model: the stop-gradient semantics the analytic gradients implement.
double frozen_target_loss(EmbeddingModel model, const std::vector<Transition>& batch,
                          const TrainConfig& config, const std::vector<double>& target) {
    return reduce_loss(pairwise_prediction(model, batch, config), target, config.loss_kind);
}

}  // namespace

TEST_CASE("mico distance: clipped self-angle, orthogonal vectors, beta 0") {
    std::vector<double> e1 = {1.0, 0.0}, e2 = {0.0, 1.0};
    CHECK(distance_mico(e1, e1, 0.1) == doctest::Approx(1.0 + 0.1 * std::acos(0.9999)).epsilon(1e-12));
    CHECK(distance_mico(e1, e1, 0.1) == doctest::Approx(1.0014142).epsilon(1e-6));
    CHECK(distance_mico(e1, e2, 0.1) == doctest::Approx(1.0 + 0.1 * std::acos(0.0001)).epsilon(1e-12));
    CHECK(distance_mico(e1, e2, 0.1) == doctest::Approx(1.0 + 0.05 * std::numbers::pi).epsilon(1e-4));
    std::vector<double> x = {3.0, 4.0};
    CHECK(distance_mico(x, e2, 0.0) == doctest::Approx(3.0));  // (5 + 1)/2
    CHECK_THROWS_AS(distance_mico({0.0, 0.0}, e1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(distance_mico(e1, e2, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(distance_mico({1.0}, e2, 0.1), std::invalid_argument);
}

TEST_CASE("simsr distance: identical, orthogonal, opposite") {
    std::vector<double> e1 = {1.0, 0.0}, e2 = {0.0, 1.0}, neg = {-2.0, 0.0};
    CHECK(distance_simsr(e1, e1) == doctest::Approx(0.0));
    CHECK(distance_simsr(e1, e2) == doctest::Approx(1.0));
    CHECK(distance_simsr(e1, neg) == doctest::Approx(2.0));
    CHECK_THROWS_AS(distance_simsr({0.0, 0.0}, e1), std::invalid_argument);
}

TEST_CASE("distance ranges over random vectors") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        int dim = rng.uniform_int(2, 6);
        std::vector<double> x(dim), y(dim);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        for (double& v : y) v = rng.uniform(-2.0, 2.0);
        double nx = 0, ny = 0;
        for (double v : x) nx += v * v;
        for (double v : y) ny += v * v;
        if (nx == 0.0 || ny == 0.0) continue;
        double s = distance_simsr(x, y);
        CHECK(s >= 0.0);
        CHECK(s <= 2.0);
        CHECK(distance_mico(x, y, 0.1) >= 0.5 * (std::sqrt(nx) + std::sqrt(ny)));
    }
}

TEST_CASE("coefficient: softmax values, normalization, shift invariance") {
    Rng rng(1);
    EmbeddingModel model = EmbeddingModel::init(2, 2, 2, false, rng);
    auto [w0, w1] = coefficient(model);
    CHECK(w0 == 0.5);
    CHECK(w1 == 0.5);

    model.raw_c = {3.7, 3.7};
    auto [s0, s1] = coefficient(model);
    CHECK(s0 == 0.5);
    CHECK(s1 == 0.5);

    model.raw_c = {0.0, std::log(3.0)};
    auto [q0, q1] = coefficient(model);
    CHECK(q0 == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(q1 == doctest::Approx(0.75).epsilon(1e-14));

    for (int trial = 0; trial < 50; ++trial) {
        model.raw_c = {rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
        auto [a, b] = coefficient(model);
        CHECK(std::abs(a + b - 1.0) <= 1e-15);
        double shift = rng.uniform(-3.0, 3.0);
        EmbeddingModel shifted = model;
        shifted.raw_c = {model.raw_c[0] + shift, model.raw_c[1] + shift};
        auto [c, d] = coefficient(shifted);
        CHECK(c == doctest::Approx(a).epsilon(1e-12));
        CHECK(d == doctest::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("encoding: normalization contract, determinism, zero-vector error path") {
    Rng rng(2);
    EmbeddingModel simsr = EmbeddingModel::init(4, 3, 5, true, rng);
    for (int s = 0; s < 4; ++s) {
        std::vector<double> e = encode_state(simsr, s);
        double n = 0;
        for (double v : e) n += v * v;
        CHECK(std::abs(std::sqrt(n) - 1.0) <= 1e-9);
        std::vector<double> x = encode_state_action(simsr, s, 1);
        double nx = 0;
        for (double v : x) nx += v * v;
        CHECK(std::abs(std::sqrt(nx) - 1.0) <= 1e-9);
    }
    CHECK_THROWS_AS(encode_state(simsr, 4), std::out_of_range);
    CHECK_THROWS_AS(encode_state_action(simsr, 0, 3), std::out_of_range);

    // identical phi rows and the same action encode identically
    EmbeddingModel twin = EmbeddingModel::init(2, 2, 3, false, rng);
    for (int k = 0; k < 3; ++k) twin.phi[3 + k] = twin.phi[k];
    CHECK(encode_state_action(twin, 0, 1) == encode_state_action(twin, 1, 1));

    // zero psi weights and bias in MICo mode: zero output, distances reject it
    EmbeddingModel dead = EmbeddingModel::init(2, 2, 3, false, rng);
    std::fill(dead.psi_weights.begin(), dead.psi_weights.end(), 0.0);
    std::fill(dead.psi_bias.begin(), dead.psi_bias.end(), 0.0);
    std::vector<double> zero = encode_state_action(dead, 0, 0);
    for (double v : zero) CHECK(v == 0.0);
    CHECK_THROWS_AS(distance_mico(zero, zero, 0.1), std::invalid_argument);
}

TEST_CASE("encoder loss vanishes when predictions already match the target") {
    Rng rng(3);
    EmbeddingModel model = EmbeddingModel::init(3, 2, 4, true, rng);
    TrainConfig config;
    config.distance_kind = DistanceKind::simsr;
    std::vector<Transition> batch(4, Transition{1, 0, 0.7, 2});
    EncoderLossResult result = encoder_loss_and_grads(model, batch, config);
    // zero up to the rounding of cos(x,x); squaring puts the loss near 1e-32
    CHECK(result.loss <= 1e-30);
    for (double g : result.grads.phi) CHECK(std::abs(g) <= 1e-15);
    for (double g : result.grads.psi_weights) CHECK(std::abs(g) <= 1e-15);
    for (double g : result.grads.psi_bias) CHECK(std::abs(g) <= 1e-15);
}

TEST_CASE("mico diagonal target stays positive under the cosine clip") {
    Rng rng(4);
    EmbeddingModel model = EmbeddingModel::init(3, 2, 4, false, rng);
    TrainConfig config;
    config.distance_kind = DistanceKind::mico;
    std::vector<Transition> batch = {{0, 0, 0.5, 1}, {0, 0, 0.5, 1}};
    std::vector<double> target = pairwise_target(model, batch, config);
    auto [w0, w1] = coefficient(model);
    std::vector<double> next = encode_state(model, 1);
    CHECK(target[0] == doctest::Approx(w1 * distance_mico(next, next, config.beta)).epsilon(1e-14));
    CHECK(target[0] > 0.0);
}

TEST_CASE("analytic gradients match central finite differences across 20 seeds") {
    // criterion: <= 1e-4 relative error for phi/psi, <= 1e-6 for raw_c
    const double h = 1e-5;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(1000 + seed);
        bool simsr_mode = seed % 2 == 0;
        TrainConfig config;
        config.distance_kind = simsr_mode ? DistanceKind::simsr : DistanceKind::mico;
        config.loss_kind = LossKind::squared;
        EmbeddingModel model = EmbeddingModel::init(5, 3, 3, simsr_mode, rng);
        std::vector<Transition> batch = random_batch(rng, 5, 3, 4);

        EncoderLossResult analytic = encoder_loss_and_grads(model, batch, config);
        std::vector<double> target = pairwise_target(model, batch, config);

        double max_rel = 0.0;
        auto check_param = [&](std::vector<double> EmbeddingModel::* field, const std::vector<double>& grads) {
            for (size_t k = 0; k < grads.size(); ++k) {
                EmbeddingModel plus = model, minus = model;
                (plus.*field)[k] += h;
                (minus.*field)[k] -= h;
                double fd = (frozen_target_loss(plus, batch, config, target) -
                             frozen_target_loss(minus, batch, config, target)) /
                            (2 * h);
                max_rel = std::max(max_rel, rel_err(grads[k], fd, 1e-6));
            }
        };
        check_param(&EmbeddingModel::phi, analytic.grads.phi);
        check_param(&EmbeddingModel::psi_weights, analytic.grads.psi_weights);
        check_param(&EmbeddingModel::psi_bias, analytic.grads.psi_bias);
        CHECK(max_rel <= 1e-4);

        CLossResult c_analytic = c_loss_and_grad(model, batch, config);
        double c_max_rel = 0.0;
        for (int k = 0; k < 2; ++k) {
            EmbeddingModel plus = model, minus = model;
            plus.raw_c[k] += h;
            minus.raw_c[k] -= h;
            double fd = (c_loss_and_grad(plus, batch, config).loss -
                         c_loss_and_grad(minus, batch, config).loss) /
                        (2 * h);
            c_max_rel = std::max(c_max_rel, rel_err(c_analytic.raw_c_grad[k], fd, 1e-8));
        }
        CHECK(c_max_rel <= 1e-6);
    }
}

TEST_CASE("huber loss gradients also match finite differences") {
    Rng rng(77);
    TrainConfig config;
    config.distance_kind = DistanceKind::mico;
    config.loss_kind = LossKind::huber;
    EmbeddingModel model = EmbeddingModel::init(4, 2, 3, false, rng);
    // spread the rewards so some residuals sit beyond the huber threshold
    std::vector<Transition> batch = random_batch(rng, 4, 2, 4);
    for (size_t k = 0; k < batch.size(); ++k) batch[k].r = k % 2 == 0 ? -2.0 : 2.0;

    EncoderLossResult analytic = encoder_loss_and_grads(model, batch, config);
    std::vector<double> target = pairwise_target(model, batch, config);
    const double h = 1e-6;
    double max_rel = 0.0;
    for (size_t k = 0; k < model.phi.size(); ++k) {
        EmbeddingModel plus = model, minus = model;
        plus.phi[k] += h;
        minus.phi[k] -= h;
        double fd = (frozen_target_loss(plus, batch, config, target) -
                     frozen_target_loss(minus, batch, config, target)) /
                    (2 * h);
        max_rel = std::max(max_rel, rel_err(analytic.grads.phi[k], fd, 1e-6));
    }
    CHECK(max_rel <= 1e-3);
}

TEST_CASE("stop-gradient ledger: freeze boundaries leak nothing") {
    Rng rng(6);
    TrainConfig config;
    config.distance_kind = DistanceKind::simsr;
    EmbeddingModel model = EmbeddingModel::init(5, 2, 3, true, rng);

    // state 4 appears only as a next state: its phi row must get zero gradient
    std::vector<Transition> batch = {{0, 0, 0.3, 4}, {1, 1, -0.2, 4}, {2, 0, 0.9, 4}};
    EncoderLossResult enc = encoder_loss_and_grads(model, batch, config);
    for (int k = 0; k < 3; ++k) CHECK(enc.grads.phi[4 * 3 + k] == 0.0);
    bool any_nonzero = false;
    for (int s : {0, 1, 2})
        for (int k = 0; k < 3; ++k) any_nonzero = any_nonzero || enc.grads.phi[s * 3 + k] != 0.0;
    CHECK(any_nonzero);

    // the c loss moves only raw_c: applying its gradient leaves phi/psi bytes alone,
    // and the encoder gradient structure has no raw_c entry by construction
    CLossResult closs = c_loss_and_grad(model, batch, config);
    CHECK((closs.raw_c_grad[0] != 0.0 || closs.raw_c_grad[1] != 0.0));

    // perturbing phi changes the c-loss value (it is computed at the live
    // parameters) but the gradient still lands only in raw_c
    EmbeddingModel perturbed = model;
    perturbed.phi[0] += 0.05;
    CLossResult closs2 = c_loss_and_grad(perturbed, batch, config);
    CHECK(closs2.loss != closs.loss);

    // perturbing raw_c changes the encoder target, never the gradient owners
    EmbeddingModel shifted = model;
    shifted.raw_c = {0.4, -0.2};
    EncoderLossResult enc2 = encoder_loss_and_grads(shifted, batch, config);
    CHECK(enc2.loss != enc.loss);
    for (int k = 0; k < 3; ++k) CHECK(enc2.grads.phi[4 * 3 + k] == 0.0);
}

TEST_CASE("c gradient pushes the next-state weight down when targets overshoot") {
    TrainConfig config;
    config.distance_kind = DistanceKind::simsr;
    EmbeddingModel model;
    model.n_states = 2;
    model.n_actions = 1;
    model.embed_dim = 2;
    model.normalize_outputs = true;
    model.phi = {1.0, 0.0, 0.0, 1.0};  // orthogonal next-state embeddings
    model.psi_weights.assign(3 * 2, 0.0);
    model.psi_bias = {1.0, 0.0};  // all predictions collapse to the same point: pred = 0
    model.raw_c = {0.0, 0.0};

    std::vector<Transition> batch = {{0, 0, 0.0, 0}, {1, 0, 0.0, 1}};
    CLossResult result = c_loss_and_grad(model, batch, config);
    CHECK(result.raw_c_grad[1] > 0.0);  // descent lowers c
    CHECK(result.raw_c_grad[0] < 0.0);
}

TEST_CASE("train: determinism, trace shapes, c range") {
    auto [mdp, policy] = toy_example_mdp(0.9);
    TrainConfig config;
    config.steps = 400;
    config.batch_size = 8;
    config.c_record_interval = 50;
    config.seed = 7;

    Rng init_a(config.seed);
    EmbeddingModel model_a = EmbeddingModel::init(3, 3, 4, true, init_a);
    Rng init_b(config.seed);
    EmbeddingModel model_b = EmbeddingModel::init(3, 3, 4, true, init_b);

    TrainTrace ta = train(model_a, mdp, policy, config);
    TrainTrace tb = train(model_b, mdp, policy, config);
    CHECK(ta.encoder_losses == tb.encoder_losses);
    CHECK(ta.c_values == tb.c_values);
    CHECK(ta.c_deltas == tb.c_deltas);
    CHECK(ta.final_distance_table.d == tb.final_distance_table.d);
    CHECK(model_a.phi == model_b.phi);
    CHECK(model_a.raw_c == model_b.raw_c);

    CHECK(ta.encoder_losses.size() == 400);
    CHECK(ta.c_values.size() == 8);
    CHECK(ta.c_deltas.size() == 8);
    for (double c : ta.c_values) {
        CHECK(c > 0.0);
        CHECK(c < 1.0);
    }

    SUBCASE("zero steps leave the trace empty and report init distances") {
        Rng init_c(1);
        EmbeddingModel fresh = EmbeddingModel::init(3, 3, 4, true, init_c);
        TrainConfig none = config;
        none.steps = 0;
        TrainTrace trace = train(fresh, mdp, policy, none);
        CHECK(trace.encoder_losses.empty());
        CHECK(trace.c_values.empty());
        StateMetricTable expect = learned_distance_table(fresh, none);
        CHECK(trace.final_distance_table.d == expect.d);
    }
}

TEST_CASE("train surfaces distance errors with the step index") {
    auto [mdp, policy] = toy_example_mdp(0.9);
    Rng rng(5);
    EmbeddingModel model = EmbeddingModel::init(3, 3, 4, false, rng);
    std::fill(model.psi_weights.begin(), model.psi_weights.end(), 0.0);
    std::fill(model.psi_bias.begin(), model.psi_bias.end(), 0.0);
    TrainConfig config;
    config.distance_kind = DistanceKind::mico;
    config.steps = 3;
    config.batch_size = 2;
    try {
        train(model, mdp, policy, config);
        FAIL("expected a zero-vector error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("step 0") != std::string::npos);
    }
}

TEST_CASE("monitor_c: constant, geometric and alternating tails") {
    TrainTrace trace;
    SUBCASE("constant sequence satisfies any epsilon") {
        trace.c_values.assign(30, 0.42);
        AssumptionReport report = monitor_c(trace, 1e-12, 10);
        CHECK(report.satisfied);
        CHECK(report.max_tail_delta == 0.0);
        CHECK(report.final_c == 0.42);
    }
    SUBCASE("geometric approach satisfies 1e-3 once the tail is far enough") {
        for (int n = 0; n <= 24; ++n) trace.c_values.push_back(0.5 + 0.4 * (1.0 - std::pow(2.0, -n)));
        AssumptionReport tail = monitor_c(trace, 1e-3, 10);  // records n = 15..24
        CHECK(tail.satisfied);
        AssumptionReport all = monitor_c(trace, 1e-3, 25);  // early deltas are ~0.2
        CHECK_FALSE(all.satisfied);
    }
    SUBCASE("alternating tail fails below the swing size") {
        for (int n = 0; n < 20; ++n) trace.c_values.push_back(n % 2 == 0 ? 0.3 : 0.7);
        CHECK_FALSE(monitor_c(trace, 0.39, 10).satisfied);
        CHECK(monitor_c(trace, 0.41, 10).satisfied);
    }
    SUBCASE("window larger than the trace throws") {
        trace.c_values.assign(5, 0.5);
        CHECK_THROWS_AS(monitor_c(trace, 1e-3, 6), std::invalid_argument);
        CHECK_THROWS_AS(monitor_c(trace, 1e-3, 1), std::invalid_argument);
    }
}

TEST_CASE("frozen c at gamma/(1+gamma): target formula and fixed-point correlation") {
    // deterministic ring MDP with distinct rewards
    const double gamma = 0.8;
    TabularMdp mdp = TabularMdp::zeros(4, 1, gamma);
    const double rewards[4] = {0.0, 0.2, 0.5, 0.9};
    for (int s = 0; s < 4; ++s) {
        mdp.p(s, 0, (s + 1) % 4) = 1.0;
        mdp.r(s, 0) = rewards[s];
    }
    PolicyTable policy = PolicyTable::uniform(4, 1);

    const double c = gamma / (1.0 + gamma);
    TrainConfig config;
    config.distance_kind = DistanceKind::simsr;
    config.steps = 4000;
    config.batch_size = 16;
    config.learning_rate = 5e-2;
    config.c_learning_rate = 0.0;  // c frozen
    config.seed = 3;

    Rng init_rng(config.seed);
    EmbeddingModel model = EmbeddingModel::init(4, 1, 6, true, init_rng);
    model.raw_c = {0.0, std::log(gamma)};  // softmax -> (1-c, c) with c = gamma/(1+gamma)
    auto [w0, w1] = coefficient(model);
    REQUIRE(w1 == doctest::Approx(c).epsilon(1e-12));

    // the sampled training target is exactly the weighted operator form
    std::vector<Transition> batch = {{0, 0, rewards[0], 1}, {2, 0, rewards[2], 3}};
    std::vector<double> target = pairwise_target(model, batch, config);
    std::vector<double> n1 = encode_state(model, 1), n3 = encode_state(model, 3);
    CHECK(target[1] == doctest::Approx((1 - c) * std::abs(rewards[0] - rewards[2]) +
                                       c * distance_simsr(n1, n3)).epsilon(1e-12));

    TrainTrace trace = train(model, mdp, policy, config);
    CHECK(coefficient(model).second == doctest::Approx(c).epsilon(1e-12));  // untouched

    SolveResult exact = solve_fixed_point(OperatorKind::revised, mdp, policy);
    std::vector<double> reference, learned;
    for (int i = 0; i < 4; ++i) {
        std::vector<double> xi = encode_state_action(model, i, 0);
        for (int j = 0; j < 4; ++j) {
            std::vector<double> xj = encode_state_action(model, j, 0);
            reference.push_back(exact.g->at(i, j) / (1.0 + gamma));
            learned.push_back(distance_simsr(xi, xj));
        }
    }
    CHECK(oracle::spearman_vs_reference(reference, learned) >= 0.9);
}
