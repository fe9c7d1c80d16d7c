#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "snf/dynamics.hpp"

using namespace snf;
using snf::test::max_rel;
using snf::test::random_vec;
using snf::test::vec;

namespace {

struct Seeded {
    FieldSpec spec;
    Vec w;
    Vec u;
};

Seeded seeded(Variant v, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    Seeded s;
    s.u = vec({0.35});
    if (v == Variant::vanilla) {
        Mlp net = Mlp::from_widths({3, 6, 2}, 2, 1, true);
        s.spec = FieldSpec::vanilla(net);
        s.w = init_params(net, rng);
        return s;
    }
    const int n_q = 2;
    Mlp mlp = Mlp::from_widths({n_q + 1, 6, 5, 1}, n_q, 1, true);
    EnergyNet energy(mlp, Head::sigmoid);
    Vec wn = 2.0 * init_params(mlp, rng);
    switch (v) {
    case Variant::stable:
        s.spec = FieldSpec::stable(energy);
        s.w = wn;
        break;
    case Variant::port_hamiltonian:
        s.spec = FieldSpec::port_hamiltonian(energy);
        s.w.resize(wn.size() + 2);
        s.w << wn, 0.8, -1.3;
        break;
    default:
        s.spec = FieldSpec::second_order(energy);
        s.w.resize(wn.size() + 1);
        s.w << wn, 0.4;
        break;
    }
    return s;
}

Vec fd_vjp_x(const Seeded& s, const Vec& x, const Vec& lam, double h = 1e-5)
{
    Vec g(x.size());
    for (int i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = lam.dot(field_eval(s.spec, s.u, xp, s.w) - field_eval(s.spec, s.u, xm, s.w)) / (2 * h);
    }
    return g;
}

Vec fd_vjp_w(const Seeded& s, const Vec& x, const Vec& lam, double h = 1e-5)
{
    Vec g(s.w.size());
    for (int i = 0; i < s.w.size(); ++i) {
        Vec wp = s.w, wm = s.w;
        wp[i] += h;
        wm[i] -= h;
        g[i] = lam.dot(field_eval(s.spec, s.u, x, wp) - field_eval(s.spec, s.u, x, wm)) / (2 * h);
    }
    return g;
}

} // namespace

TEST_CASE("field examples")
{
    const Vec none(0);
    FieldSpec st = FieldSpec::stable(EnergyNet::quadratic(Vec::Zero(2)));
    CHECK(field_eval(st, none, vec({1, 2}), none) == vec({-1, -2}));
    CHECK(field_vjp_x(st, none, vec({1, 2}), none, vec({3, -1})) == vec({-3, 1}));
    CHECK(field_vjp_x(st, none, vec({1, 2}), none, vec({0, 0})).isZero(0.0));

    // eps = 1/2 |x - c|^2 with x - c = (1, 1)
    FieldSpec ph = FieldSpec::port_hamiltonian(EnergyNet::quadratic(Vec::Zero(2)));
    const Vec out = field_eval(ph, none, vec({1, 1}), vec({1, 2}));
    CHECK(out[0] == doctest::Approx(-1.001).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(-2.001).epsilon(1e-15));
    CHECK(ph.param_count() == 2);

    FieldSpec so = FieldSpec::second_order(EnergyNet::quadratic(Vec::Zero(2)));
    CHECK(so.n_x() == 4);
    const Vec f = field_eval(so, none, vec({1, 0, 0, 1}), vec({0.5}));
    CHECK(f == vec({0, 1, -1, -0.5}));
    const Vec gw = field_vjp_w(so, none, vec({0, 0, 2, 3}), vec({0.5}), vec({0, 0, 1, 1}));
    CHECK(gw.size() == 1);
    CHECK(gw[0] == -5.0);
}

TEST_CASE("odd state dimension is rejected for second order")
{
    Mlp mlp = Mlp::from_widths({3, 4, 1}, 3, 0, false);
    // energy on q of size 3 gives n_x = 6; a mismatched state is an error
    FieldSpec so = FieldSpec::second_order(EnergyNet(mlp, Head::square));
    CHECK(so.n_x() == 6);
    Vec w = Vec::Zero(so.param_count());
    CHECK_THROWS_AS(field_eval(so, Vec(0), Vec::Zero(5), w), DimensionError);
}

TEST_CASE("zero costate gives zero products")
{
    for (Variant v : {Variant::vanilla, Variant::stable, Variant::port_hamiltonian, Variant::second_order}) {
        Seeded s = seeded(v, 2);
        std::mt19937_64 rng(1);
        const Vec x = random_vec(s.spec.n_x(), rng);
        const Vec zero = Vec::Zero(s.spec.n_x());
        CHECK(field_vjp_x(s.spec, s.u, x, s.w, zero).isZero(0.0));
        CHECK(field_vjp_w(s.spec, s.u, x, s.w, zero).isZero(0.0));
    }
}

TEST_CASE("vector-Jacobian products agree with differences of the field")
{
    std::mt19937_64 rng(21);
    for (Variant v : {Variant::vanilla, Variant::stable, Variant::port_hamiltonian, Variant::second_order}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            CAPTURE(to_string(v));
            Seeded s = seeded(v, seed);
            const Vec x = random_vec(s.spec.n_x(), rng);
            const Vec lam = random_vec(s.spec.n_x(), rng);
            CHECK(max_rel(field_vjp_x(s.spec, s.u, x, s.w, lam), fd_vjp_x(s, x, lam)) < 1e-5);
            CHECK(max_rel(field_vjp_w(s.spec, s.u, x, s.w, lam), fd_vjp_w(s, x, lam)) < 1e-4);
            const FieldVjp both = field_vjp(s.spec, s.u, x, s.w, lam);
            CHECK(max_rel(both.x, field_vjp_x(s.spec, s.u, x, s.w, lam)) < 1e-15);
            CHECK(max_rel(both.w, field_vjp_w(s.spec, s.u, x, s.w, lam)) < 1e-15);
        }
    }
}

TEST_CASE("port-Hamiltonian subgradient at a = 0")
{
    FieldSpec ph = FieldSpec::port_hamiltonian(EnergyNet::quadratic(Vec::Zero(2)));
    const Vec g = field_vjp_w(ph, Vec(0), vec({1, 2}), vec({0.0, -1.0}), vec({1, 1}));
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 2.0);
}

TEST_CASE("dissipation along the field")
{
    std::mt19937_64 rng(4);
    Seeded st = seeded(Variant::stable, 5);
    Seeded ph = seeded(Variant::port_hamiltonian, 5);
    bool ok = true;
    for (int i = 0; i < 1000; ++i) {
        const Vec x = random_vec(2, rng, 2.0);
        const Vec g = energy_grad_x(st.spec.energy(), st.u, x, st.spec.net_params(st.w));
        const double d_st = g.dot(field_eval(st.spec, st.u, x, st.w));
        ok = ok && std::abs(d_st + g.squaredNorm()) <= 1e-14 * (1 + g.squaredNorm());
        const double d_ph = g.dot(field_eval(ph.spec, ph.u, x, ph.w));
        ok = ok && (g.isZero(0.0) ? d_ph == 0.0 : d_ph < 0.0);
    }
    CHECK(ok);
}

TEST_CASE("second-order energy identity")
{
    std::mt19937_64 rng(6);
    Seeded s = seeded(Variant::second_order, 7);
    const double alpha = s.w[s.w.size() - 1];
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Vec x = random_vec(4, rng, 2.0);
        const Vec q = x.head(2);
        const Vec p = x.tail(2);
        Vec dphi(4);
        dphi << energy_grad_x(s.spec.energy(), s.u, q, s.spec.net_params(s.w)), p;
        const double rate = dphi.dot(field_eval(s.spec, s.u, x, s.w));
        worst = std::max(worst, std::abs(rate + alpha * p.squaredNorm()));
    }
    CHECK(worst < 1e-10);
    const Vec x = vec({0.1, 0.2, 0.3, 0.4});
    const Vec wn = s.spec.net_params(s.w);
    CHECK(field_energy(s.spec, s.u, x, s.w) ==
          doctest::Approx(0.5 * 0.25 + energy_eval(s.spec.energy(), s.u, vec({0.1, 0.2}), wn)).epsilon(1e-15));
}

TEST_CASE("variant names round-trip")
{
    for (Variant v : {Variant::vanilla, Variant::stable, Variant::port_hamiltonian, Variant::second_order}) {
        CHECK(parse_variant(to_string(v)) == v);
    }
    CHECK_THROWS(parse_variant("hamiltonian"));
}
