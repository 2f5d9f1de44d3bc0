#include "ddqn/errors.hpp"
#include "ddqn/neural_net.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace ddqn;
using namespace ddqn::nn;
using Catch::Approx;

namespace {

NetConfig cfg_with(std::size_t input, std::vector<std::size_t> hidden, double dropout = 0.0, double l2 = 0.0) {
    NetConfig c;
    c.input_dim = input;
    c.hidden_dims = std::move(hidden);
    c.dropout_rate = dropout;
    c.l2_activity = l2;
    return c;
}

} // namespace

TEST_CASE("parameter counts") {
    CHECK(param_count(cfg_with(2, {64, 64})) == 4547);
    CHECK(param_count(cfg_with(4, {64, 64})) == 4675);
    CHECK(param_count(cfg_with(6, {64, 64})) == 6 * 64 + 64 + 64 * 64 + 64 + 64 * 3 + 3);
    CHECK(param_count(cfg_with(8, {64, 64})) == 4931);
    CHECK(param_count(cfg_with(3, {})) == 12);
}

TEST_CASE("init is deterministic, shaped and bounded") {
    auto c = cfg_with(8, {64, 64}, 0.1, 1e-6);
    c.seed = 42;
    const auto a = init(c);
    const auto b = init(c);
    c.seed = 43;
    const auto other = init(c);
    REQUIRE(a.layers.size() == 3);
    CHECK(a.layers[0].weights.rows() == 8);
    CHECK(a.layers[0].weights.cols() == 64);
    CHECK(a.layers[2].weights.cols() == 3);
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
        CHECK(a.layers[k].weights == b.layers[k].weights);
        CHECK(a.layers[k].biases.isZero());
        const double limit = std::sqrt(6.0 / static_cast<double>(a.layers[k].weights.rows()));
        CHECK(a.layers[k].weights.cwiseAbs().maxCoeff() <= limit);
    }
    CHECK(a.layers[0].weights != other.layers[0].weights);
}

TEST_CASE("invalid configurations are rejected") {
    CHECK_THROWS_AS(cfg_with(0, {4}).validate(), ConfigError);
    CHECK_THROWS_AS(cfg_with(2, {0}).validate(), ConfigError);
    CHECK_THROWS_AS(cfg_with(2, {4}, 1.0).validate(), ConfigError);
    CHECK_THROWS_AS(cfg_with(2, {4}, 0.1, -1.0).validate(), ConfigError);
}

TEST_CASE("zero weights give zero Q") {
    const auto p = zeros_like(cfg_with(2, {64, 64}));
    Matrix x = Matrix::Random(5, 2);
    const auto r = forward(p, x, Mode::Eval);
    CHECK(r.q.isZero());
    CHECK(r.q.rows() == 5);
    CHECK(r.q.cols() == 3);
}

TEST_CASE("hand-built single-unit network") {
    auto p = zeros_like(cfg_with(1, {1}));
    p.layers[0].weights(0, 0) = 2.0;
    p.layers[0].biases(0) = -0.5;
    p.layers[1].weights << 1.0, -1.0, 3.0;
    p.layers[1].biases << 0.1, 0.2, 0.3;
    const std::vector<double> s{1.0};
    const auto q = q_values(p, s);
    CHECK(q(0) == Approx(1.6));
    CHECK(q(1) == Approx(-1.3));
    CHECK(q(2) == Approx(4.8));

    // Negative pre-activation clips to zero: only biases remain.
    const std::vector<double> neg{-1.0};
    const auto qn = q_values(p, neg);
    CHECK(qn(0) == Approx(0.1));
    CHECK(qn(2) == Approx(0.3));
}

TEST_CASE("eval forward matches a plain-loop reference") {
    auto c = cfg_with(6, {64, 64}, 0.1, 1e-6);
    c.seed = 3;
    const auto p = init(c);
    Matrix x = Matrix::Random(7, 6);
    const auto q = forward(p, x, Mode::Eval).q;
    const auto ref = oracle::naive_forward(p, oracle::rows_of(x));
    for (Eigen::Index i = 0; i < 7; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) CHECK(q(i, j) == Approx(ref[i][j]).epsilon(1e-12));
}

TEST_CASE("train mode dropout scales kept units") {
    auto c = cfg_with(2, {64, 64}, 0.1, 0.0);
    c.seed = 8;
    const auto p = init(c);
    Matrix x = Matrix::Random(200, 2);
    Rng rng{5};
    const auto r = forward(p, x, Mode::Train, &rng);
    REQUIRE(r.cache);
    const auto& mask = r.cache->dropout_mask;
    REQUIRE(mask.size() == 200 * 64);
    const double kept = (mask.array() > 0).cast<double>().mean();
    CHECK(kept == Approx(0.9).margin(0.02));
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        const double v = mask.data()[i];
        CHECK((v == 0.0 || v == Approx(1.0 / 0.9)));
    }
    CHECK_THROWS_AS(forward(p, x, Mode::Train, nullptr), ConfigError);
}

TEST_CASE("linear network gradient is 2 (Q - y) x") {
    auto p = zeros_like(cfg_with(2, {}));
    p.layers[0].weights << 0.5, -1.0, 0.25, 2.0, 0.0, -0.75;
    Matrix x(1, 2);
    x << 0.3, -1.2;
    const std::vector<std::uint8_t> a{2};
    const std::vector<double> y{0.4};
    const auto lg = loss_and_grads(p, x, a, y, nullptr);
    const double q = 0.3 * 0.25 + -1.2 * -0.75;
    CHECK(lg.loss == Approx((q - 0.4) * (q - 0.4)));
    CHECK(lg.grads.layers[0].weights(0, 2) == Approx(2 * (q - 0.4) * 0.3));
    CHECK(lg.grads.layers[0].weights(1, 2) == Approx(2 * (q - 0.4) * -1.2));
    CHECK(lg.grads.layers[0].biases(2) == Approx(2 * (q - 0.4)));
    CHECK(lg.grads.layers[0].weights.col(0).isZero());
    CHECK(lg.grads.layers[0].weights.col(1).isZero());
}

TEST_CASE("analytic gradients agree with central differences") {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 120; ++seed) {
        const auto f = oracle::random_grad_fixture(seed);
        const auto lg = loss_and_grads(f.params, f.states, f.actions, f.targets, nullptr);
        CHECK(lg.loss == Approx(oracle::naive_loss(f.params, oracle::rows_of(f.states), f.actions, f.targets))
                             .epsilon(1e-12));
        worst = std::max(worst, oracle::max_grad_rel_error(f, lg.grads));
    }
    INFO("max relative error " << worst);
    CHECK(worst < 1e-4);
}

TEST_CASE("activity penalty is non-negative and tracks the coefficient") {
    auto c = cfg_with(2, {16}, 0.0, 1e-3);
    c.seed = 1;
    const auto p = init(c);
    Matrix x = Matrix::Random(10, 2);
    const std::vector<std::uint8_t> a(10, 1);
    const std::vector<double> y(10, 0.0);
    const auto lg = loss_and_grads(p, x, a, y, nullptr);
    CHECK(lg.activity_penalty > 0.0);
    CHECK(lg.loss == Approx(lg.td_loss + lg.activity_penalty));
    auto c0 = c;
    c0.l2_activity = 0.0;
    auto p0 = p;
    p0.config = c0;
    CHECK(loss_and_grads(p0, x, a, y, nullptr).activity_penalty == 0.0);
}

TEST_CASE("non-finite inputs raise NumericError") {
    const auto p = init(cfg_with(2, {4}));
    Matrix x(1, 2);
    x << 1.0, 0.0;
    const std::vector<std::uint8_t> a{0};
    const std::vector<double> bad{std::nan("")};
    CHECK_THROWS_AS(loss_and_grads(p, x, a, bad, nullptr), NumericError);
    Matrix wrong(1, 3);
    wrong.setZero();
    const std::vector<double> y{0.0};
    CHECK_THROWS_AS(forward(p, wrong, Mode::Eval), ConfigError);
}

TEST_CASE("first Adam step moves each weight by about lr against the gradient") {
    auto p = init(cfg_with(2, {4}));
    const auto before = p;
    auto g = zeros_like(p.config);
    g.layers[0].weights(0, 0) = 0.37;
    g.layers[0].weights(1, 2) = -5.0;
    g.layers[1].biases(1) = 1e-3;
    auto adam = adam_init(p.config);
    adam_step(p, g, adam, 1e-3);
    CHECK(adam.t == 1);
    CHECK(p.layers[0].weights(0, 0) - before.layers[0].weights(0, 0) == Approx(-1e-3).epsilon(1e-6));
    CHECK(p.layers[0].weights(1, 2) - before.layers[0].weights(1, 2) == Approx(1e-3).epsilon(1e-6));
    CHECK(p.layers[1].biases(1) - before.layers[1].biases(1) == Approx(-1e-3).epsilon(1e-4));
    // Zero gradient leaves the entry untouched.
    CHECK(p.layers[0].weights(0, 1) == before.layers[0].weights(0, 1));
}

TEST_CASE("Adam with a constant gradient moves monotonically") {
    auto p = zeros_like(cfg_with(1, {}));
    auto g = zeros_like(p.config);
    g.layers[0].weights(0, 0) = 2.0;
    auto adam = adam_init(p.config);
    double prev = 0.0;
    for (int i = 0; i < 20; ++i) {
        adam_step(p, g, adam, 0.01);
        CHECK(p.layers[0].weights(0, 0) < prev);
        prev = p.layers[0].weights(0, 0);
    }
    CHECK(prev == Approx(-0.2).epsilon(1e-6));
}

TEST_CASE("clone is independent") {
    const auto p = init(cfg_with(2, {8}));
    auto q = clone(p);
    q.layers[0].weights(0, 0) += 1.0;
    CHECK(p.layers[0].weights(0, 0) != q.layers[0].weights(0, 0));
}

TEST_CASE("network checkpoint round trip") {
    ddqn::testing::TempDir tmp("net");
    auto c = cfg_with(8, {64, 64}, 0.1, 1e-6);
    c.seed = 99;
    const auto p = init(c);
    save_net(p, tmp / "net.json");
    const auto back = load_net(tmp / "net.json");
    CHECK(back.config.same_shape(p.config));
    Matrix x = Matrix::Random(100, 8);
    const auto a = forward(p, x, Mode::Eval).q;
    const auto b = forward(back, x, Mode::Eval).q;
    CHECK(a == b);

    auto text = ddqn::testing::read_text(tmp / "net.json");
    const std::string key = "\"version\": 1";
    const auto pos = text.find(key);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, key.size(), "\"version\": 7");
    ddqn::testing::write_text(tmp / "v7.json", text);
    CHECK_THROWS_AS(load_net(tmp / "v7.json"), VersionError);

    ddqn::testing::write_text(tmp / "junk.json", "{not json");
    CHECK_THROWS_AS(load_net(tmp / "junk.json"), DataError);
}
