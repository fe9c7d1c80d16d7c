#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "snf/training.hpp"
#include "snf/verification.hpp"

using namespace snf;
using snf::test::random_vec;
using snf::test::vec;

namespace {

Model quadratic_1d(double S = 1.0)
{
    Model m;
    m.h_u = AffineMap::identity(1);
    m.h_y = AffineMap::identity(1);
    m.field = FieldSpec::stable(EnergyNet::quadratic(Vec::Zero(1)));
    m.w = Vec(0);
    m.S = S;
    m.trainable = {true, false, false, true};
    return m;
}

Model seeded_model(Variant v, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const int n_q = 2;
    Model m;
    m.h_u = AffineMap::random(2, v == Variant::second_order ? 4 : 2, rng);
    if (v == Variant::vanilla) {
        Mlp net = Mlp::from_widths({4, 8, 2}, 2, 2, true);
        m.field = FieldSpec::vanilla(net);
        m.w = init_params(net, rng);
    } else {
        Mlp mlp = Mlp::from_widths({n_q + 2, 8, 8, 1}, n_q, 2, true);
        EnergyNet energy(mlp, Head::sigmoid);
        Vec wn = 2.0 * init_params(mlp, rng);
        if (v == Variant::stable) {
            m.field = FieldSpec::stable(energy);
            m.w = wn;
        } else if (v == Variant::port_hamiltonian) {
            m.field = FieldSpec::port_hamiltonian(energy);
            m.w.resize(wn.size() + 2);
            m.w << wn, 0.9, -0.6;
        } else {
            m.field = FieldSpec::second_order(energy);
            m.w.resize(wn.size() + 1);
            m.w << wn, 0.3;
        }
    }
    m.h_y = AffineMap::random(m.field.n_x(), 3, rng);
    m.S = 0.8;
    m.trainable = {true, true, true, true};
    return m;
}

SolverConfig tight()
{
    SolverConfig cfg;
    cfg.atol = 1e-10;
    cfg.rtol = 1e-10;
    return cfg;
}

} // namespace

TEST_CASE("pointwise losses")
{
    LossSpec q;
    CHECK(loss_terminal(q, vec({1, 2}), vec({1, 2})) == 0.0);
    CHECK(loss_terminal_grad(q, vec({1, 2}), vec({1, 2})).isZero(0.0));
    CHECK(loss_terminal(q, vec({1, 2}), vec({0, 0})) == 2.5);

    LossSpec ce;
    ce.kind = LossKind::terminal_cross_entropy;
    CHECK(loss_terminal(ce, vec({0, 0, 0}), vec({1, 0, 0})) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
    const Vec g = loss_terminal_grad(ce, vec({0, 0, 0}), vec({1, 0, 0}));
    CHECK(g[0] == doctest::Approx(1.0 / 3 - 1).epsilon(1e-15));
    CHECK(g[1] == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(g[2] == doctest::Approx(1.0 / 3).epsilon(1e-15));
    // large logits stay finite
    CHECK(std::isfinite(loss_terminal(ce, vec({800, -800, 0}), vec({0, 1, 0}))));
    CHECK_THROWS(loss_terminal(q, vec({std::nan("")}), vec({0})));
}

TEST_CASE("regularizer")
{
    Model m = quadratic_1d();
    m.h_u = AffineMap::identity(2);
    m.h_y = AffineMap::identity(2);
    m.field = FieldSpec::stable(EnergyNet::quadratic(Vec::Zero(2)));
    LossSpec spec;
    spec.gamma = 1e-2;
    CHECK(loss_regularized(m, spec, 1.5, Vec(0), vec({0.2, 0})) == doctest::Approx(1.5 + 2e-4).epsilon(1e-15));
    CHECK(loss_regularized(m, spec, 1.5, Vec(0), vec({0, 0})) == 1.5);
    spec.gamma = 0.0;
    CHECK(loss_regularized(m, spec, 1.5, Vec(0), vec({0.2, 0})) == 1.5);

    // difference equals gamma/2 |f|^2 on a network model
    Model s = seeded_model(Variant::port_hamiltonian, 3);
    LossSpec spec2;
    spec2.gamma = 0.3;
    const Vec u = vec({0.1, 0.2});
    const Vec x = vec({0.5, -0.4});
    const double f2 = field_eval(s.field, u, x, s.w).squaredNorm();
    CHECK(std::abs(loss_regularized(s, spec2, 0.7, u, x) - 0.7 - 0.15 * f2) < 1e-15);
}

TEST_CASE("closed-form terminal gradients")
{
    Model m = quadratic_1d();
    LossSpec spec;
    spec.gamma = 0.0;
    const SampleGradient sg = grad_terminal(m, spec, vec({1.0}), vec({0.0}), SolverConfig{});
    CHECK(std::abs(sg.xS[0] - std::exp(-1.0)) < 1e-6);
    CHECK(std::abs(sg.grad.g_S + std::exp(-2.0)) < 1e-5);
    CHECK(std::abs(grad_S(m, Vec(0), vec({0.0}), vec({0.0}))) == 0.0);

    // target reached: everything vanishes
    Model eq = quadratic_1d();
    const SampleGradient z = grad_terminal(eq, spec, vec({0.0}), vec({0.0}), SolverConfig{});
    CHECK(z.grad.g_S == 0.0);
    CHECK(z.grad.loss == 0.0);
}

TEST_CASE("closed-form back-propagated cost")
{
    Model m = quadratic_1d();
    LossSpec spec;
    spec.kind = LossKind::backprop_integral;
    spec.gamma = 0.0;
    const SampleGradient sg = grad_backprop(m, spec, vec({1.0}), vec({0.0}), SolverConfig{});
    CHECK(std::abs(sg.grad.loss - (1 - std::exp(-2.0)) / 4) < 1e-6);
    CHECK(std::abs(sg.grad.g_S - 0.5 * std::exp(-2.0)) < 1e-6);
    CHECK(std::abs(sample_loss(m, spec, vec({1.0}), vec({0.0}), SolverConfig{}) - (1 - std::exp(-2.0)) / 4) < 1e-6);

    // g = 0 along the path
    const SampleGradient z = grad_backprop(m, spec, vec({0.0}), vec({0.0}), SolverConfig{});
    CHECK(z.grad.loss == 0.0);
    CHECK(z.grad.g_S == 0.0);
}

TEST_CASE("adjoint gradients agree with finite differences on every variant")
{
    const Vec u = vec({0.4, -0.3});
    for (Variant v : {Variant::vanilla, Variant::stable, Variant::port_hamiltonian, Variant::second_order}) {
        for (LossKind kind : {LossKind::terminal_quadratic, LossKind::terminal_cross_entropy, LossKind::backprop_integral}) {
            CAPTURE(to_string(v));
            CAPTURE(to_string(kind));
            Model m = seeded_model(v, 7);
            LossSpec spec;
            spec.kind = kind;
            spec.gamma = v == Variant::vanilla ? 0.0 : 0.05;
            const Vec y = vec({0, 1, 0});
            GradCheckOptions opts;
            opts.coords_per_block = 8;
            opts.seed = 1;
            const auto rows = gradcheck_sample(m, spec, u, y, tight(), opts);
            REQUIRE(!rows.empty());
            double worst = 0.0;
            for (const auto& r : rows) {
                worst = std::max(worst, r.rel_err);
            }
            CHECK(worst < 1e-4);
        }
    }
}

TEST_CASE("S gradient against re-solving at perturbed depth")
{
    Model m = seeded_model(Variant::stable, 2);
    LossSpec spec;
    const Vec u = vec({0.1, 0.5});
    const Vec y = vec({1, 0, 0});
    const double g = grad_terminal(m, spec, u, y, SolverConfig{}).grad.g_S;
    const double h = 1e-4;
    Model p = m, q = m;
    p.S += h;
    q.S -= h;
    const double fd = (sample_loss(p, spec, u, y, SolverConfig{}) - sample_loss(q, spec, u, y, SolverConfig{})) / (2 * h);
    CHECK(relative_error(g, fd) < 1e-3);
}

TEST_CASE("gradient descent step")
{
    Model m = quadratic_1d();
    m.S = 1.0;
    GradBundle g = GradBundle::zeros(m);
    g.g_S = 2.0;
    CHECK(gd_step(m, g, 0.1).S == doctest::Approx(0.8).epsilon(1e-15));
    g.g_S = 0.0;
    CHECK(gd_step(m, g, 0.1).S == 1.0);
    g.g_S = 100.0;
    CHECK(gd_step(m, g, 0.1).S == kMinDepth);

    Model s = seeded_model(Variant::second_order, 4);
    s.trainable = {false, false, false, false};
    GradBundle gs = GradBundle::zeros(s);
    gs.g_w.setOnes();
    gs.g_vu.setOnes();
    gs.g_vy.setOnes();
    gs.g_S = 1.0;
    const Model same = gd_step(s, gs, 0.5);
    CHECK(same.w == s.w);
    CHECK(same.h_u.params() == s.h_u.params());
    CHECK(same.h_y.params() == s.h_y.params());
    CHECK(same.S == s.S);

    s.trainable = {true, true, true, false};
    const Model moved = gd_step(s, gs, 0.5);
    CHECK(moved.w[0] == doctest::Approx(s.w[0] - 0.5).epsilon(1e-15));
    CHECK(moved.w[moved.w.size() - 1] == 0.0);  // damping clamped at zero
    CHECK(moved.h_u.params()[0] == doctest::Approx(s.h_u.params()[0] - 0.5).epsilon(1e-15));

    gs.g_w[0] = std::nan("");
    CHECK_THROWS(gd_step(s, gs, 0.5));
}

TEST_CASE("frozen blocks report zero gradients")
{
    Model m = seeded_model(Variant::stable, 5);
    m.trainable = {true, false, false, false};
    const SampleGradient sg = grad_terminal(m, LossSpec{}, vec({0.2, 0.2}), vec({1, 0, 0}), SolverConfig{});
    CHECK(sg.grad.g_vu.isZero(0.0));
    CHECK(sg.grad.g_vy.isZero(0.0));
    CHECK(sg.grad.g_S == 0.0);
}

TEST_CASE("batch gradient is the mean of sample gradients")
{
    Model m = seeded_model(Variant::port_hamiltonian, 6);
    Dataset d = gen_spirals(6, 3, 0.0, 2);
    LossSpec spec;
    spec.kind = LossKind::terminal_cross_entropy;
    const BatchGradient batch = batch_gradient(m, d, spec, SolverConfig{});
    GradBundle sum = GradBundle::zeros(m);
    for (std::size_t i = 0; i < d.size(); ++i) {
        sum += sample_gradient(m, spec, d.inputs[i], d.targets[i], SolverConfig{}).grad;
    }
    sum *= 1.0 / static_cast<double>(d.size());
    CHECK((batch.mean.g_w - sum.g_w).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((batch.mean.g_vu - sum.g_vu).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(std::abs(batch.mean.g_S - sum.g_S) < 1e-15);
    CHECK(std::abs(batch.mean.loss - sum.loss) < 1e-15);
}

TEST_CASE("full-batch descent on a quadratic-energy regression")
{
    // eps = 1/2 |x - c|^2 has no parameters; learn the output map and depth
    Model m;
    m.h_u = AffineMap::identity(1);
    m.field = FieldSpec::stable(EnergyNet::quadratic(vec({0.3})));
    m.h_y = AffineMap(Mat::Constant(1, 1, 0.5), vec({0.1}));
    m.w = Vec(0);
    m.S = 0.5;
    m.trainable = {true, false, true, true};
    Dataset d = gen_negation(20, 3);
    LossSpec spec;
    double prev = evaluate(m, d, spec, SolverConfig{}).mean_loss;
    for (int it = 0; it < 10; ++it) {
        const BatchGradient g = batch_gradient(m, d, spec, SolverConfig{});
        m = gd_step(m, g.mean, 0.05);
        const double now = evaluate(m, d, spec, SolverConfig{}).mean_loss;
        CHECK(now < prev);
        prev = now;
    }
}

TEST_CASE("stochastic epoch is seeded")
{
    Model m = seeded_model(Variant::stable, 8);
    Dataset d = gen_spirals(9, 3, 0.0, 1);
    LossSpec spec;
    spec.kind = LossKind::terminal_cross_entropy;
    std::mt19937_64 r1(4), r2(4);
    const auto a = sgd_epoch(m, d, spec, 0.05, SolverConfig{}, r1);
    const auto b = sgd_epoch(m, d, spec, 0.05, SolverConfig{}, r2);
    CHECK(a.first.w == b.first.w);
    CHECK(a.second == b.second);
    CHECK(a.first.w != m.w);
}

TEST_CASE("classification decisions")
{
    CHECK(correct(vec({0.7}), vec({1.0})));
    CHECK(!correct(vec({0.3}), vec({1.0})));
    CHECK(correct(vec({0.1, 2.0, -1.0}), vec({0, 1, 0})));
    CHECK(!correct(vec({3.0, 2.0, -1.0}), vec({0, 1, 0})));
}

TEST_CASE("loss kind names round-trip")
{
    for (LossKind k : {LossKind::terminal_quadratic, LossKind::terminal_cross_entropy, LossKind::backprop_integral}) {
        CHECK(parse_loss_kind(to_string(k)) == k);
    }
    CHECK_THROWS(parse_loss_kind("hinge"));
}
