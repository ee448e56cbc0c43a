#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "support/oracles.hpp"
#include "voicescreen/detail/rng.hpp"
#include "voicescreen/models/logreg.hpp"
#include "voicescreen/nn.hpp"

using namespace voicescreen;
using Catch::Matchers::WithinAbs;

TEST_CASE("bce loss values") {
    SECTION("perfect prediction is (almost) free") {
        nn::Tensor probs({4}, {1.0, 0.0, 1.0, 0.0});
        const auto res = nn::bce_loss(probs, {1, 0, 1, 0});
        CHECK(res.loss < 1e-10);
    }
    SECTION("maximum entropy costs ln 2") {
        nn::Tensor probs({5}, std::vector<double>(5, 0.5));
        const auto res = nn::bce_loss(probs, {1, 0, 1, 1, 0});
        CHECK_THAT(res.loss, WithinAbs(std::log(2.0), 1e-12));
    }
    SECTION("two-column form selects the labeled column") {
        nn::Tensor probs({2, 2}, {0.25, 0.75, 0.9, 0.1});
        const auto res = nn::bce_loss(probs, {1, 0});
        CHECK_THAT(res.loss,
                   WithinAbs(-(std::log(0.75) + std::log(0.9)) / 2.0, 1e-12));
    }
    SECTION("length mismatch throws") {
        nn::Tensor probs({3}, {0.5, 0.5, 0.5});
        CHECK_THROWS_AS(nn::bce_loss(probs, {1, 0}), nn::ShapeMismatch);
    }
}

TEST_CASE("bce gradient matches finite differences") {
    detail::Rng rng(19);
    std::vector<double> p(8);
    std::vector<int> labels(8);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = rng.uniform(0.05, 0.95);
        labels[i] = int(rng.below(2));
    }
    const auto analytic = nn::bce_loss(nn::Tensor({8}, p), labels);
    const auto numeric = oracle::finite_difference_gradient(
        [&](const std::vector<double>& probs) {
            return nn::bce_loss(nn::Tensor({8}, probs), labels).loss;
        },
        p, 1e-6);
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(oracle::relative_error(analytic.grad.data[i], numeric[i]) < 1e-6);
    }
}

TEST_CASE("adam update behavior") {
    SECTION("zero gradient leaves parameters unchanged") {
        nn::Adam adam({.lr = 0.01});
        std::vector<double> params = {1.0, -2.0, 3.0};
        const auto before = params;
        std::vector<double> grads(3, 0.0);
        adam.step(params, grads);
        CHECK(params == before);
    }
    SECTION("first-step magnitude equals the learning rate") {
        nn::Adam adam({.lr = 1e-4});
        std::vector<double> params = {0.7};
        std::vector<double> grads = {2.0};
        adam.step(params, grads);
        CHECK_THAT(0.7 - params[0], WithinAbs(1e-4, 1e-12));
        params = {0.7};
        nn::Adam adam2({.lr = 1e-4});
        grads = {-2.0};
        adam2.step(params, grads);
        CHECK_THAT(params[0] - 0.7, WithinAbs(1e-4, 1e-12));
    }
    SECTION("quadratic bowl converges") {
        nn::Adam adam({.lr = 0.01});
        std::vector<double> x = {5.0};
        std::vector<double> g(1);
        for (int step = 0; step < 10'000; ++step) {
            g[0] = 2.0 * x[0];
            adam.step(x, g);
        }
        CHECK(std::fabs(x[0]) < 0.1);
    }
}

TEST_CASE("softmax outputs are normalized") {
    detail::Rng rng(23);
    for (int rep = 0; rep < 100; ++rep) {
        const auto p = nn::softmax2(rng.uniform(-50, 50), rng.uniform(-50, 50));
        CHECK_THAT(p[0] + p[1], WithinAbs(1.0, 1e-12));
        CHECK(p[0] >= 0.0);
        CHECK(p[1] >= 0.0);
    }
}

TEST_CASE("gradient clipping preserves direction, caps norm") {
    std::vector<double> g = {3.0, 4.0}; // norm 5
    const double pre = nn::clip_by_global_norm(g, 2.5);
    CHECK_THAT(pre, WithinAbs(5.0, 1e-12));
    CHECK_THAT(std::hypot(g[0], g[1]), WithinAbs(2.5, 1e-12));
    CHECK_THAT(g[0] / g[1], WithinAbs(0.75, 1e-12));
}

TEST_CASE("logistic regression") {
    SECTION("separable 1-D problem reaches 100% training accuracy") {
        const std::vector<std::vector<double>> x = {{-1.0}, {-0.5}, {0.5}, {1.0}};
        const std::vector<int> y = {0, 0, 1, 1};
        const auto model = models::logreg_train(x, y, {.epochs = 2000, .lr = 0.5});
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK((model.prob(x[i]) >= 0.5 ? 1 : 0) == y[i]);
        }
        // boundary sign flips around 0
        CHECK(model.prob(std::vector<double>{-0.01}) < 0.5);
        CHECK(model.prob(std::vector<double>{0.01}) >= 0.5);
    }

    SECTION("duplicated feature columns get equal weights") {
        detail::Rng rng(29);
        std::vector<std::vector<double>> x;
        std::vector<int> y;
        for (int i = 0; i < 40; ++i) {
            const double v = rng.uniform(-1, 1);
            x.push_back({v, v, rng.uniform(-1, 1)});
            y.push_back(v > 0 ? 1 : 0);
        }
        const auto model = models::logreg_train(x, y, {.epochs = 200, .lr = 0.3});
        CHECK_THAT(model.weights[0], WithinAbs(model.weights[1], 1e-12));
    }

    SECTION("analytic gradient matches finite differences") {
        detail::Rng rng(31);
        std::vector<std::vector<double>> x;
        std::vector<int> y;
        for (int i = 0; i < 12; ++i) {
            x.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
            y.push_back(int(rng.below(2)));
        }
        models::LogRegModel model;
        model.weights = {0.3, -0.2, 0.5};
        model.bias = 0.1;

        std::vector<double> grad_w;
        double grad_b = 0.0;
        models::detail_logreg::loss_and_gradient(x, y, model, grad_w, grad_b);

        // pack (w, b) for the finite-difference oracle
        std::vector<double> packed = {0.3, -0.2, 0.5, 0.1};
        const auto numeric = oracle::finite_difference_gradient(
            [&](const std::vector<double>& p) {
                models::LogRegModel m;
                m.weights = {p[0], p[1], p[2]};
                m.bias = p[3];
                std::vector<double> gw;
                double gb;
                return models::detail_logreg::loss_and_gradient(x, y, m, gw, gb);
            },
            packed);
        for (int d = 0; d < 3; ++d) {
            CHECK(oracle::relative_error(grad_w[std::size_t(d)],
                                         numeric[std::size_t(d)]) < 1e-6);
        }
        CHECK(oracle::relative_error(grad_b, numeric[3]) < 1e-6);
    }

    SECTION("single-class training set is rejected") {
        const std::vector<std::vector<double>> x = {{1.0}, {2.0}};
        CHECK_THROWS_AS(models::logreg_train(x, {1, 1}), models::SingleClass);
    }
}
