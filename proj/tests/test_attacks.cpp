#include <doctest.h>

#include <cmath>
#include <random>

#include "bfa/attacks.hpp"
#include "support.hpp"

using namespace bfa;
using bfa::testing::finite_difference;
using bfa::testing::layer_from_ints;
using bfa::testing::random_dataset;
using bfa::testing::random_network;
using bfa::testing::random_vector;
using bfa::testing::relative_error;

namespace {

// K=3 classifier whose logits on x=(1) are exactly (5, 3, 2)
Network small_logit_net() {
    Network net;
    DenseLayer layer;
    layer.weights = Eigen::MatrixXd::Identity(1, 1);
    layer.bias = Eigen::VectorXd::Zero(1);
    layer.act = Activation::identity;
    net.hidden.push_back(layer);
    net.output = layer_from_ints({{5}, {3}, {2}}, 1.0, 4);
    net.output_bias = Eigen::VectorXd::Zero(3);
    return net;
}

Eigen::VectorXd bits_for_rows(const Network& net, int r0, int r1) {
    const int rows[2] = {r0, r1};
    return BitVector::from_layer_rows(net.output, rows).to_real();
}

}  // namespace

TEST_CASE("margin tau") {
    const Network net = small_logit_net();
    const Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
    CHECK(compute_margin_tau(net, x, 0) == doctest::Approx(3.0));
    CHECK(compute_margin_tau(net, x, 1) == doctest::Approx(5.0));

    SUBCASE("two classes leave a single candidate") {
        Network two;
        DenseLayer layer;
        layer.weights = Eigen::MatrixXd::Identity(1, 1);
        layer.bias = Eigen::VectorXd::Zero(1);
        layer.act = Activation::identity;
        two.hidden.push_back(layer);
        two.output = layer_from_ints({{7}, {0}}, 1.0, 4);
        two.output_bias = Eigen::VectorXd::Zero(2);
        CHECK(compute_margin_tau(two, x, 1) == doctest::Approx(7.0));
    }

    SUBCASE("equal logits are symmetric") {
        Network eq;
        DenseLayer layer;
        layer.weights = Eigen::MatrixXd::Identity(1, 1);
        layer.bias = Eigen::VectorXd::Zero(1);
        layer.act = Activation::identity;
        eq.hidden.push_back(layer);
        eq.output = layer_from_ints({{4}, {4}, {4}}, 1.0, 4);
        eq.output_bias = Eigen::VectorXd::Zero(3);
        CHECK(compute_margin_tau(eq, x, 2) == doctest::Approx(4.0));
    }
}

TEST_CASE("ssa effectiveness loss") {
    const Network net = small_logit_net();
    const Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
    Dataset aux;
    aux.samples.push_back({x, 0});

    // source 0 (logit 5), target 1 (logit 3); tau = 3
    SsaProblem prob = make_ssa_problem(net, x, 0, 1, aux, 1.0);
    CHECK(prob.tau == doctest::Approx(3.0));

    SUBCASE("both hinges active") {
        // relaxed bits still decode to (5, 3): loss = (3-3+1) + (5-3+1) = 4
        CHECK(ssa_effectiveness_loss(prob, bits_for_rows(net, 0, 1)) == doctest::Approx(4.0));
    }

    SUBCASE("both hinges exactly at the boundary") {
        Network boundary = net;
        boundary.output = layer_from_ints({{2}, {4}, {2}}, 1.0, 4);  // p_s = tau-delta, p_t = tau+delta
        CHECK(ssa_effectiveness_loss(prob, bits_for_rows(boundary, 0, 1)) == doctest::Approx(0.0));
    }

    SUBCASE("hinges inactive") {
        Network far = net;
        far.output = layer_from_ints({{-7}, {7}, {2}}, 1.0, 4);
        CHECK(ssa_effectiveness_loss(prob, bits_for_rows(far, 0, 1)) == 0.0);
    }

    SUBCASE("wrong length is rejected") {
        CHECK_THROWS_AS(ssa_effectiveness_loss(prob, Eigen::VectorXd::Zero(3)), input_error);
    }
}

TEST_CASE("stealthiness loss") {
    SUBCASE("uniform predictions give N ln K") {
        Network net;
        DenseLayer layer;
        layer.weights = Eigen::MatrixXd::Zero(2, 2);
        layer.bias = Eigen::VectorXd::Zero(2);
        layer.act = Activation::relu;
        net.hidden.push_back(layer);
        net.output = layer_from_ints({{0, 0}, {0, 0}, {0, 0}, {0, 0}}, 1.0, 4);
        net.output_bias = Eigen::VectorXd::Zero(4);
        std::mt19937_64 rng(8);
        const Dataset aux = random_dataset(rng, 7, 2, 4);
        const int rows[2] = {0, 1};
        const Eigen::VectorXd b_hat = BitVector::from_layer_rows(net.output, rows).to_real();
        CHECK(stealthiness_loss(net, aux, b_hat, rows) == doctest::Approx(7.0 * std::log(4.0)));
    }

    SUBCASE("true-class probability one half gives ln 2") {
        Network net = small_logit_net();
        net.output = layer_from_ints({{0}, {0}}, 1.0, 4);
        net.output_bias = Eigen::VectorXd::Zero(2);
        Dataset aux;
        aux.samples.push_back({Eigen::VectorXd::Ones(1), 1});
        const int rows[2] = {0, 1};
        const Eigen::VectorXd b_hat = BitVector::from_layer_rows(net.output, rows).to_real();
        CHECK(stealthiness_loss(net, aux, b_hat, rows) == doctest::Approx(std::log(2.0)));
    }

    SUBCASE("near-perfect predictions give near-zero loss") {
        Network net = small_logit_net();
        net.output = layer_from_ints({{7}, {-7}}, 1.0, 4);
        net.output_bias = Eigen::VectorXd::Zero(2);
        Dataset aux;
        aux.samples.push_back({Eigen::VectorXd::Ones(1), 0});
        const int rows[2] = {0, 1};
        const Eigen::VectorXd b_hat = BitVector::from_layer_rows(net.output, rows).to_real();
        CHECK(stealthiness_loss(net, aux, b_hat, rows) < 1e-5);
    }
}

TEST_CASE("ssa gradients") {
    SUBCASE("inactive hinges give a zero effectiveness gradient") {
        const Network net = small_logit_net();
        const Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
        Dataset aux;
        aux.samples.push_back({x, 0});
        const SsaProblem prob = make_ssa_problem(net, x, 0, 1, aux, 1.0);
        Network far = net;
        far.output = layer_from_ints({{-7}, {7}, {2}}, 1.0, 4);
        const auto [g1, g2] = ssa_gradients(prob, bits_for_rows(far, 0, 1));
        CHECK(g1.cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("matches finite differences on random problems") {
        std::mt19937_64 rng(19);
        for (int trial = 0; trial < 8; ++trial) {
            const Network net = random_network(rng, 3, 4, 4, 4);
            const Eigen::VectorXd x = random_vector(rng, 3);
            const Dataset aux = random_dataset(rng, 6, 3, 4);
            const int s = 0, t = 2;
            const SsaProblem prob = make_ssa_problem(net, x, s, t, aux, 0.7);
            const Eigen::VectorXd b0 = prob.b0.to_real();
            const Eigen::VectorXd b_hat = b0 + 0.3 * random_vector(rng, static_cast<int>(b0.size()));

            const auto [g1, g2] = ssa_gradients(prob, b_hat);
            const Eigen::VectorXd fd1 = finite_difference(
                [&](const Eigen::VectorXd& v) { return ssa_effectiveness_loss(prob, v); }, b_hat);
            const int rows[2] = {s, t};
            const Eigen::VectorXd fd2 = finite_difference(
                [&](const Eigen::VectorXd& v) { return stealthiness_loss(net, aux, v, rows); },
                b_hat);
            CHECK(relative_error(g1, fd1) < 1e-5);
            CHECK(relative_error(g2, fd2) < 1e-5);
        }
    }
}

TEST_CASE("tsa losses and gradients") {
    std::mt19937_64 rng(29);

    SUBCASE("loss ignores masked-out input coordinates") {
        const Network net = random_network(rng, 4, 5, 3, 4);
        Dataset aux = random_dataset(rng, 5, 4, 3, 0.0, 1.0);
        Eigen::VectorXd mask(4);
        mask << 1, 0, 0, 1;
        const TriggerSpec trig{mask, random_vector(rng, 4, 0.1, 0.9)};
        const TsaProblem prob = make_tsa_problem(net, 1, trig, aux);
        const Eigen::VectorXd b_hat = prob.b0.to_real();
        const double before = tsa_effectiveness_loss(prob, b_hat, trig.pattern);

        Dataset moved = aux;
        for (auto& s : moved.samples) s.x[0] = 0.123;  // masked coordinate
        const TsaProblem prob2 = make_tsa_problem(net, 1, trig, moved);
        CHECK(tsa_effectiveness_loss(prob2, b_hat, trig.pattern) == doctest::Approx(before));
    }

    SUBCASE("zero mask kills the trigger gradient") {
        const Network net = random_network(rng, 4, 5, 3, 4);
        Dataset aux = random_dataset(rng, 5, 4, 3, 0.0, 1.0);
        const TriggerSpec trig{Eigen::VectorXd::Zero(4), random_vector(rng, 4, 0.1, 0.9)};
        const TsaProblem prob = make_tsa_problem(net, 1, trig, aux);
        const TsaGradients g = tsa_gradients(prob, prob.b0.to_real(), trig.pattern);
        CHECK(g.l1_q.cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("a confidently targeted model has a tiny effectiveness gradient") {
        Network net = small_logit_net();
        net.output = layer_from_ints({{-7}, {7}}, 1.0, 4);
        net.output_bias = Eigen::VectorXd::Zero(2);
        Dataset aux;
        aux.samples.push_back({Eigen::VectorXd::Ones(1), 0});
        Eigen::VectorXd mask = Eigen::VectorXd::Ones(1);
        const TriggerSpec trig{mask, Eigen::VectorXd::Ones(1)};
        const TsaProblem prob = make_tsa_problem(net, 1, trig, aux);
        const TsaGradients g = tsa_gradients(prob, prob.b0.to_real(), trig.pattern);
        CHECK(g.l1_b.cwiseAbs().maxCoeff() < 1e-4);
    }

    SUBCASE("all three gradients match finite differences") {
        for (int trial = 0; trial < 8; ++trial) {
            const Network net = random_network(rng, 4, 5, 3, 4);
            Dataset aux = random_dataset(rng, 5, 4, 3, 0.0, 1.0);
            Eigen::VectorXd mask(4);
            mask << 1, 0, 1, 0;
            // keep the pattern interior so the clamp gate stays open
            const TriggerSpec trig{mask, random_vector(rng, 4, 0.2, 0.8)};
            const TsaProblem prob = make_tsa_problem(net, 2, trig, aux);
            const Eigen::VectorXd b0 = prob.b0.to_real();
            const Eigen::VectorXd b_hat = b0 + 0.2 * random_vector(rng, static_cast<int>(b0.size()));
            const Eigen::VectorXd q = trig.pattern;

            const TsaGradients g = tsa_gradients(prob, b_hat, q);
            const Eigen::VectorXd fd_l1b = finite_difference(
                [&](const Eigen::VectorXd& v) { return tsa_effectiveness_loss(prob, v, q); }, b_hat);
            std::vector<int> all_rows(static_cast<std::size_t>(net.classes()));
            for (int r = 0; r < net.classes(); ++r) all_rows[static_cast<std::size_t>(r)] = r;
            const Eigen::VectorXd fd_l2b = finite_difference(
                [&](const Eigen::VectorXd& v) { return stealthiness_loss(net, aux, v, all_rows); },
                b_hat);
            const Eigen::VectorXd fd_l1q = finite_difference(
                [&](const Eigen::VectorXd& v) { return tsa_effectiveness_loss(prob, b_hat, v); }, q);
            CHECK(relative_error(g.l1_b, fd_l1b) < 1e-5);
            CHECK(relative_error(g.l2_b, fd_l2b) < 1e-5);
            CHECK(relative_error(g.l1_q, fd_l1q) < 1e-5);
        }
    }
}

TEST_CASE("patch masks") {
    const TriggerSpec bottom_right = make_patch_mask(4, 2, Corner::bottom_right);
    CHECK(bottom_right.mask.sum() == doctest::Approx(4.0));
    CHECK(bottom_right.mask[4 * 2 + 2] == 1.0);
    CHECK(bottom_right.mask[4 * 3 + 3] == 1.0);
    CHECK(bottom_right.mask[0] == 0.0);

    const TriggerSpec top_left = make_patch_mask(4, 1, Corner::top_left);
    CHECK(top_left.mask[0] == 1.0);
    CHECK(top_left.mask.sum() == doctest::Approx(1.0));

    CHECK_THROWS_AS(make_patch_mask(4, 5, Corner::top_left), input_error);

    std::mt19937_64 rng(33);
    const Eigen::VectorXd q1 = random_trigger_pattern(bottom_right.mask, 12);
    const Eigen::VectorXd q2 = random_trigger_pattern(bottom_right.mask, 12);
    CHECK(q1 == q2);  // seeded determinism
    for (Eigen::Index i = 0; i < q1.size(); ++i) {
        if (bottom_right.mask[i] == 0.0) CHECK(q1[i] == 0.0);
    }
}

TEST_CASE("ssa search driver") {
    std::mt19937_64 rng(41);

    SUBCASE("forced failure walks the full k and lambda schedule") {
        const Network net = random_network(rng, 2, 3, 3, 4);
        const Eigen::VectorXd x = random_vector(rng, 2);
        const Dataset aux = random_dataset(rng, 4, 2, 3);
        AdmmConfig cfg = AdmmConfig::ssa_defaults();
        cfg.max_iter = 2;
        cfg.eta = 1e-15;  // the solver cannot move, so every attempt fails
        SearchPolicy policy = SearchPolicy::ssa_defaults();
        const int source = predict(net, x);
        const int target = (source + 1) % 3;
        const AttackReport report = run_ssa(net, x, source, target, aux, policy, cfg);
        CHECK_FALSE(report.success);
        CHECK(report.asr == 0.0);
        CHECK(report.searched_k == std::vector<int>{5, 10, 20, 40});
        CHECK(report.lambda_used == doctest::Approx(100.0 / 128.0));  // eighth halving
    }

    SUBCASE("flips stay inside the source and target rows") {
        for (int trial = 0; trial < 3; ++trial) {
            const Network net = random_network(rng, 2, 6, 4, 8);
            const Eigen::VectorXd x = random_vector(rng, 2);
            const Dataset aux = random_dataset(rng, 10, 2, 4);
            const int source = predict(net, x);
            const int target = (source + 1) % 4;
            AdmmConfig cfg = AdmmConfig::ssa_defaults();
            cfg.max_iter = 300;
            const AttackReport report =
                run_ssa(net, x, source, target, aux, SearchPolicy::ssa_defaults(), cfg);
            for (const auto& loc : report.flipped_bits) {
                CHECK((loc.row == source || loc.row == target));
            }
            CHECK(report.n_flip <= report.k_used);
            if (report.success) {
                const Network flipped = apply_bit_flips(net, report.final_bits);
                CHECK(predict(flipped, x) == target);
            }
        }
    }

    SUBCASE("source equal to target is rejected") {
        const Network net = random_network(rng, 2, 3, 3, 4);
        const Dataset aux = random_dataset(rng, 4, 2, 3);
        CHECK_THROWS_AS(
            run_ssa(net, random_vector(rng, 2), 1, 1, aux, SearchPolicy::ssa_defaults(),
                    AdmmConfig::ssa_defaults()),
            input_error);
    }
}

TEST_CASE("tsa search driver") {
    std::mt19937_64 rng(47);

    SUBCASE("single-class problem succeeds trivially at the initial k") {
        Network net;
        DenseLayer layer;
        layer.weights = Eigen::MatrixXd::Identity(2, 2);
        layer.bias = Eigen::VectorXd::Zero(2);
        layer.act = Activation::relu;
        net.hidden.push_back(layer);
        net.output = layer_from_ints({{1, 1}}, 1.0, 4);
        net.output_bias = Eigen::VectorXd::Zero(1);

        Dataset aux = random_dataset(rng, 4, 2, 1, 0.0, 1.0);
        AdmmConfig cfg = AdmmConfig::tsa_defaults();
        cfg.max_iter = 10;
        const AttackReport report = run_tsa(net, 0, Eigen::VectorXd::Ones(2), aux,
                                            SearchPolicy::tsa_defaults(), cfg, 3);
        CHECK(report.success);
        CHECK(report.aux_asr == 100.0);
        CHECK(report.k_used == 5);
        CHECK(report.searched_k == std::vector<int>{5});
    }

    SUBCASE("forced failure follows the doubling schedule 5,10,20,40") {
        const Network net = random_network(rng, 4, 4, 3, 4);
        Dataset aux = random_dataset(rng, 5, 4, 3, 0.0, 1.0);
        AdmmConfig cfg = AdmmConfig::tsa_defaults();
        cfg.max_iter = 2;
        SearchPolicy policy = SearchPolicy::tsa_defaults();
        policy.asr_threshold = 101.0;  // unattainable
        const AttackReport report = run_tsa(net, 0, Eigen::VectorXd::Ones(4), aux, policy, cfg, 5);
        CHECK_FALSE(report.success);
        CHECK(report.searched_k == std::vector<int>{5, 10, 20, 40});
    }

    SUBCASE("an empty mask is rejected") {
        const Network net = random_network(rng, 4, 4, 3, 4);
        Dataset aux = random_dataset(rng, 5, 4, 3, 0.0, 1.0);
        CHECK_THROWS_AS(run_tsa(net, 0, Eigen::VectorXd::Zero(4), aux, SearchPolicy::tsa_defaults(),
                                AdmmConfig::tsa_defaults(), 5),
                        input_error);
    }
}
