#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "snf/solver.hpp"

using namespace snf;
using snf::test::random_vec;
using snf::test::vec;

namespace {

const VectorField kExp = [](double, const Vec& x, Vec& dx) { dx = x; };

} // namespace

TEST_CASE("single Dormand-Prince steps")
{
    const VectorField constant = [](double, const Vec&, Vec& dx) { dx = vec({1, 0}); };
    DopriStep a = dopri_step(constant, 0.0, Vec::Zero(2), 0.25, 1e-6, 1e-6);
    CHECK(std::abs(a.state[0] - 0.25) < 1e-15);
    CHECK(a.state[1] == 0.0);
    CHECK(a.error < 1e-12);

    DopriStep b = dopri_step(kExp, 0.0, vec({1.0}), 0.1, 1e-6, 1e-6);
    CHECK(std::abs(b.state[0] - std::exp(0.1)) < 1e-9);
    CHECK(b.k_last[0] == b.state[0]);

    const VectorField quartic = [](double s, const Vec&, Vec& dx) { dx = vec({5 * std::pow(s, 4)}); };
    DopriStep c = dopri_step(quartic, 0.0, vec({0.0}), 1.0, 1e-6, 1e-6);
    CHECK(std::abs(c.state[0] - 1.0) < 1e-15);

    DopriStep back = dopri_step(kExp, 0.0, vec({1.0}), -0.1, 1e-6, 1e-6);
    CHECK(std::abs(back.state[0] - std::exp(-0.1)) < 1e-9);

    const VectorField blowup = [](double, const Vec&, Vec& dx) { dx = vec({std::nan("")}); };
    CHECK_THROWS_AS(integrate(blowup, 0.0, 1.0, vec({1.0}), SolverConfig{}), IntegrationError);
}

TEST_CASE("closed-form stable flow")
{
    FieldSpec st = FieldSpec::stable(EnergyNet::quadratic(Vec::Zero(2)));
    const Trajectory tr = solve_forward(st, Vec(0), Vec(0), vec({1, 0}), 1.0, SolverConfig{});
    CHECK(std::abs(tr.final_state()[0] - std::exp(-1.0)) < 1e-6);
    CHECK(tr.final_state()[1] == 0.0);
    CHECK(tr.nodes.front().s == 0.0);
    CHECK(tr.nodes.back().s == 1.0);
    for (std::size_t i = 1; i < tr.nodes.size(); ++i) {
        CHECK(tr.nodes[i].s > tr.nodes[i - 1].s);
    }
    CHECK(tr.stats.n_field_evals == 1 + 6 * (tr.stats.accepted + tr.stats.rejected));
    CHECK(tr.stats.accepted + 1 == static_cast<int>(tr.nodes.size()));
}

TEST_CASE("equilibrium is kept")
{
    FieldSpec st = FieldSpec::stable(EnergyNet::quadratic(vec({0.5, -0.25})));
    for (double S : {0.3, 1.0, 7.0}) {
        const Trajectory tr = solve_forward(st, Vec(0), Vec(0), vec({0.5, -0.25}), S, SolverConfig{});
        CHECK(tr.final_state() == vec({0.5, -0.25}));
    }
}

TEST_CASE("undamped second order conserves energy")
{
    FieldSpec so = FieldSpec::second_order(EnergyNet::quadratic(Vec::Zero(2)));
    const Vec x0 = vec({1.0, -0.5, 0.2, 0.7});
    const Vec w = vec({0.0});
    const Trajectory tr = solve_forward(so, Vec(0), w, x0, 1.0, SolverConfig{});
    const double phi0 = field_energy(so, Vec(0), x0, w);
    for (const auto& node : tr.nodes) {
        CHECK(std::abs(field_energy(so, Vec(0), node.state, w) - phi0) <= 1e-5);
    }
}

TEST_CASE("FSAL accounting with rejections")
{
    // a large initial step on a fast field forces rejections
    const VectorField stiff = [](double, const Vec& x, Vec& dx) { dx = -50.0 * x; };
    SolverConfig cfg;
    cfg.h_init = 0.5;
    IntegrationStats st;
    const Vec out = integrate(stiff, 0.0, 1.0, vec({1.0}), cfg, &st);
    CHECK(st.rejected > 0);
    CHECK(st.n_field_evals == 1 + 6 * (st.accepted + st.rejected));
    CHECK(std::abs(out[0] - std::exp(-50.0)) < 1e-5);

    cfg.max_steps = 3;
    CHECK_THROWS_AS(integrate(stiff, 0.0, 1.0, vec({1.0}), cfg), IntegrationError);
}

TEST_CASE("fifth-order convergence")
{
    double prev = 0.0;
    for (int n : {10, 20, 40}) {
        const double err = std::abs(integrate_fixed(kExp, 0.0, 1.0, vec({1.0}), n)[0] - std::exp(1.0));
        if (prev > 0.0) {
            CHECK(prev / err >= std::pow(2.0, 4.5));
        }
        prev = err;
    }
}

TEST_CASE("adjoint of the quadratic stable flow")
{
    FieldSpec st = FieldSpec::stable(EnergyNet::quadratic(Vec::Zero(1)));
    const double xS = std::exp(-1.0);
    AdjointResult r = solve_adjoint(st, Vec(0), Vec(0), vec({xS}), vec({1.0}), Vec(0), 1.0, SolverConfig{});
    CHECK(std::abs(r.lambda0[0] - std::exp(-1.0)) < 1e-6);
    CHECK(std::abs(r.x0[0] - 1.0) < 1e-5);
    CHECK(r.mu0.size() == 0);

    AdjointResult z = solve_adjoint(st, Vec(0), Vec(0), vec({xS}), vec({0.0}), Vec(0), 1.0, SolverConfig{});
    CHECK(z.lambda0[0] == 0.0);
}

TEST_CASE("zero terminal costate stays zero on a network field")
{
    std::mt19937_64 rng(3);
    Mlp mlp = Mlp::from_widths({2, 8, 1}, 2, 0, false);
    FieldSpec st = FieldSpec::stable(EnergyNet(mlp, Head::square));
    const Vec w = init_params(mlp, rng);
    AdjointResult r = solve_adjoint(st, Vec(0), w, vec({0.3, 0.1}), Vec::Zero(2), Vec::Zero(w.size()), 1.0,
                                    SolverConfig{});
    CHECK(r.lambda0.isZero(0.0));
    CHECK(r.mu0.isZero(0.0));
}

TEST_CASE("running cost integrates the stage cost")
{
    FieldSpec st = FieldSpec::stable(EnergyNet::quadratic(Vec::Zero(1)));
    StageCost g;
    g.n_extra = 1;
    g.eval = [](const Vec& x, Vec& dg, Vec& extra) {
        dg = x;
        extra = vec({2.0});
        return 0.5 * x.squaredNorm();
    };
    AdjointResult r =
        solve_adjoint(st, Vec(0), Vec(0), vec({std::exp(-1.0)}), vec({0.0}), Vec(0), 1.0, SolverConfig{}, &g);
    CHECK(std::abs(r.running_cost - (1 - std::exp(-2.0)) / 4) < 1e-6);
    CHECK(std::abs(r.extra[0] - 2.0) < 1e-9);
}

TEST_CASE("backward reconstruction drift")
{
    std::mt19937_64 rng(9);
    Mlp mlp = Mlp::from_widths({2, 8, 8, 1}, 2, 0, false);
    FieldSpec st = FieldSpec::stable(EnergyNet(mlp, Head::sigmoid));
    const Vec w = 2.0 * init_params(mlp, rng);
    for (int i = 0; i < 5; ++i) {
        const Vec x0 = random_vec(2, rng);
        const Trajectory tr = solve_forward(st, Vec(0), w, x0, 1.0, SolverConfig{});
        AdjointResult r =
            solve_adjoint(st, Vec(0), w, tr.final_state(), Vec::Ones(2), Vec::Zero(w.size()), 1.0, SolverConfig{});
        CHECK((r.x0 - x0).cwiseAbs().maxCoeff() < 1e-4);
    }
}

TEST_CASE("solver configuration is validated")
{
    SolverConfig cfg;
    cfg.atol = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg = SolverConfig{};
    cfg.h_init = 1e-14;
    CHECK_THROWS(cfg.validate());
}
