#include "graphik/errors.hpp"
#include "graphik/neuralnet.hpp"
#include "graphik/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

using namespace graphik;
using namespace graphik::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, CounterRng& rng) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
    return m;
}

// Plain loops over the layer list, without Eigen products.
std::vector<double> loop_forward(const MLP& net, std::vector<double> x) {
    const auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& w = layers[l].weight;
        std::vector<double> y(static_cast<std::size_t>(w.cols()));
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            double s = layers[l].bias(0, j);
            for (Eigen::Index i = 0; i < w.rows(); ++i) s += x[i] * w(i, j);
            y[j] = l + 1 < layers.size() ? std::max(s, 0.0) : s;
        }
        x = std::move(y);
    }
    return x;
}

double half_sq_loss(const MLP& net, const Matrix& x, const Matrix& target) {
    const Matrix y = net.forward(x);
    return (y - target).squaredNorm();
}

// Central differences with h = 1e-6 carry roundoff of about 1e-10 times the
// loss, so entries below 1e-4 are compared against that floor instead.
double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4}); }

// Max relative error between tape gradients and central differences of the
// plain forward pass, over every parameter.
double gradient_check(MLP net, const Matrix& x, const Matrix& target) {
    Tape tape;
    std::vector<Tape::Var> params;
    const auto in = tape.leaf(x);
    const auto out = net.record(tape, in, params);
    const auto loss = tape.squared_error(out, target, 1.0);
    tape.backward(loss);

    double worst = 0.0;
    std::size_t p = 0;
    for (auto& layer : net.layers()) {
        for (Matrix* m : {&layer.weight, &layer.bias}) {
            const Matrix& g = tape.grad(params[p++]);
            for (Eigen::Index k = 0; k < m->size(); ++k) {
                double& w = m->data()[k];
                const double saved = w;
                const double h = 1e-6 * std::max(1.0, std::abs(saved));
                w = saved + h;
                const double up = half_sq_loss(net, x, target);
                w = saved - h;
                const double down = half_sq_loss(net, x, target);
                w = saved;
                const double fd = (up - down) / (2 * h);
                worst = std::max(worst, rel_err(g.data()[k], fd));
            }
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("zero network outputs zero") {
    const MLP net(5, 2, 8, 3);
    const double x[] = {1, -2, 3, 4, 5};
    for (double y : net.forward(x)) CHECK(y == 0.0);
}

TEST_CASE("identity layer passes non-negative input through") {
    MLP net(4, 0, 0, 4);
    net.layers()[0].weight = Matrix::Identity(4, 4);
    const double x[] = {0.0, 1.5, 2.0, 7.25};
    const auto y = net.forward(x);
    CHECK(std::vector<double>(x, x + 4) == y);
}

TEST_CASE("forward matches the loop oracle") {
    auto rng = CounterRng::substream(31, "test-mlp", 0);
    for (int k = 0; k < 20; ++k) {
        MLP net(1 + static_cast<int>(rng.below(10)), 1 + static_cast<int>(rng.below(4)), 1 + static_cast<int>(rng.below(40)),
                1 + static_cast<int>(rng.below(6)));
        net.init_he(rng);
        for (auto& l : net.layers()) l.bias = random_matrix(1, l.bias.cols(), rng);
        std::vector<double> x(net.input_dim());
        for (auto& v : x) v = rng.uniform(-2, 2);
        const auto got = net.forward(x);
        const auto want = loop_forward(net, x);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-12);
    }
}

TEST_CASE("forward rejects the wrong input length") {
    const MLP net(3, 1, 4, 1);
    const double x[] = {1, 2};
    CHECK_THROWS_AS(net.forward(x), std::invalid_argument);
}

TEST_CASE("parameter count") {
    const MLP net(18, 2, 32, 6);
    CHECK(net.parameter_count() == (18 + 1) * 32 + (32 + 1) * 32 + (32 + 1) * 6);
}

TEST_CASE("gradient of w times x") {
    Tape tape;
    const auto w = tape.scalar(2.0);
    const auto x = tape.scalar(3.0);
    const auto loss = tape.sum(tape.mul(w, x));
    tape.backward(loss);
    CHECK(tape.grad(w)(0, 0) == 3.0);
    CHECK(tape.grad(x)(0, 0) == 2.0);
}

TEST_CASE("relu subgradient at zero is zero") {
    Tape tape;
    Matrix v(1, 3);
    v << -1.0, 0.0, 2.0;
    const auto x = tape.leaf(v);
    tape.backward(tape.sum(tape.relu(x)));
    CHECK(tape.grad(x)(0, 0) == 0.0);
    CHECK(tape.grad(x)(0, 1) == 0.0);
    CHECK(tape.grad(x)(0, 2) == 1.0);
}

TEST_CASE("backward needs a recorded scalar") {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(Tape::Var{0}), StateError);
    const auto x = tape.leaf(Matrix::Ones(2, 2));
    CHECK_THROWS_AS(tape.grad(x), StateError);
    CHECK_THROWS_AS(tape.backward(x), StateError);
}

TEST_CASE("gradients of a 2-8-1 network match finite differences") {
    auto rng = CounterRng::substream(32, "test-grad", 0);
    MLP net(2, 1, 8, 1);
    net.init_he(rng);
    const Matrix x = random_matrix(5, 2, rng);
    const Matrix t = random_matrix(5, 1, rng);
    CHECK(gradient_check(net, x, t) < 1e-4);
}

TEST_CASE("gradients of networks with the evaluated sizes match finite differences") {
    auto rng = CounterRng::substream(33, "test-grad", 0);
    const int layers[] = {2, 4};
    const int widths[] = {22, 32, 42, 35};
    for (int k = 0; k < 20; ++k) {
        MLP net(2 + static_cast<int>(rng.below(16)), layers[rng.below(2)], widths[rng.below(4)], 1 + static_cast<int>(rng.below(6)));
        net.init_he(rng);
        for (auto& l : net.layers()) l.bias = 0.1 * random_matrix(1, l.bias.cols(), rng);
        const Matrix x = random_matrix(3, net.input_dim(), rng);
        const Matrix t = random_matrix(3, net.output_dim(), rng);
        CHECK(gradient_check(net, x, t) < 1e-4);
    }
}

TEST_CASE("structural primitives propagate gradients") {
    auto rng = CounterRng::substream(34, "test-ops", 0);
    const Matrix a = random_matrix(4, 3, rng);
    const Matrix w = random_matrix(5, 2, rng);
    auto index = std::make_shared<const std::vector<int>>(std::vector<int>{2, 0, 0, 3, 1});

    // loss = sum(scatter(gather(a) * ...)) style chain; checked by differences.
    auto eval = [&](const Matrix& av, Matrix* grad) {
        Tape tape;
        const auto x = tape.leaf(av);
        const auto g = tape.gather_rows(x, index);
        const Tape::Var parts[] = {g, tape.leaf(w)};
        const auto c = tape.concat_cols(parts);
        const auto s = tape.scatter_add_rows(c, index, 4);
        const auto loss = tape.squared_error(tape.relu(s), Matrix::Constant(4, 5, 0.3), 0.5);
        if (grad) {
            tape.backward(loss);
            *grad = tape.grad(x);
        }
        return tape.value(loss)(0, 0);
    };
    Matrix grad;
    eval(a, &grad);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        Matrix up = a, down = a;
        up.data()[k] += 1e-6;
        down.data()[k] -= 1e-6;
        worst = std::max(worst, rel_err(grad.data()[k], (eval(up, nullptr) - eval(down, nullptr)) / 2e-6));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("adamw: zero gradients without decay leave parameters alone") {
    Matrix p = Matrix::Constant(2, 2, 0.7);
    const Matrix before = p;
    AdamWState state;
    state.config.weight_decay = 0.0;
    const ParamRef refs[] = {{"p", &p}};
    const Matrix grads[] = {Matrix::Zero(2, 2)};
    for (int k = 0; k < 5; ++k) adamw_step(state, refs, grads);
    CHECK(p == before);
    CHECK(state.step == 5);
}

TEST_CASE("adamw: first step moves by about the learning rate") {
    Matrix p = Matrix::Constant(1, 1, 1.0);
    AdamWState state;
    state.config.weight_decay = 0.0;
    const ParamRef refs[] = {{"p", &p}};
    const Matrix grads[] = {Matrix::Constant(1, 1, 1.0)};
    adamw_step(state, refs, grads);
    // m_hat = 1, v_hat = 1: p -= lr * 1 / (1 + eps).
    CHECK(p(0, 0) == doctest::Approx(1.0 - 0.002 / (1.0 + 1e-8)).epsilon(1e-15));
}

TEST_CASE("adamw: decoupled decay with zero gradient") {
    Matrix p = Matrix::Constant(1, 3, 2.0);
    AdamWState state;
    const ParamRef refs[] = {{"p", &p}};
    const Matrix grads[] = {Matrix::Zero(1, 3)};
    double want = 2.0;
    for (int k = 0; k < 10; ++k) {
        adamw_step(state, refs, grads);
        want *= 1.0 - 0.002 * 0.01;
    }
    CHECK(p(0, 1) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("adamw: non-finite gradient aborts the step") {
    Matrix p = Matrix::Ones(2, 2), q = Matrix::Ones(1, 2);
    AdamWState state;
    const ParamRef refs[] = {{"edge.0.weight", &p}, {"edge.0.bias", &q}};
    Matrix bad = Matrix::Zero(1, 2);
    bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
    const Matrix grads[] = {Matrix::Ones(2, 2), bad};
    try {
        adamw_step(state, refs, grads);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("edge.0.bias") != std::string::npos);
    }
    CHECK(p == Matrix::Ones(2, 2));
    CHECK(state.step == 0);
}

TEST_CASE("adamw: quadratic bowl loss decreases") {
    Matrix p(1, 4);
    p << 1.0, -2.0, 0.5, 3.0;
    AdamWState state;
    const ParamRef refs[] = {{"p", &p}};
    double loss = p.squaredNorm();
    for (int k = 0; k < 50; ++k) {
        const Matrix grads[] = {2.0 * p};
        adamw_step(state, refs, grads);
        const double next = p.squaredNorm();
        CHECK(next < loss);
        loss = next;
    }
}

TEST_CASE("mlp and optimizer state survive json") {
    auto rng = CounterRng::substream(35, "test-json", 0);
    MLP net(7, 2, 9, 3);
    net.init_he(rng);
    const nlohmann::json j = net;
    const auto back = j.get<MLP>();
    const double x[] = {1, 2, 3, 4, 5, 6, 7};
    CHECK(back.forward(x) == net.forward(x));

    std::vector<ParamRef> refs;
    net.append_parameters("net", refs);
    std::vector<Matrix> grads;
    for (const auto& r : refs) grads.push_back(Matrix::Ones(r.value->rows(), r.value->cols()));
    AdamWState state;
    adamw_step(state, refs, grads);
    const nlohmann::json sj = state;
    const auto sback = sj.get<AdamWState>();
    CHECK(sback.step == 1);
    REQUIRE(sback.first_moment.size() == state.first_moment.size());
    CHECK(sback.second_moment[2] == state.second_moment[2]);
}
