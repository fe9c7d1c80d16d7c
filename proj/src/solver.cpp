#include "snf/solver.hpp"

#include <algorithm>
#include <cmath>

namespace snf {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;

constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                 b6 = 11.0 / 84.0;

// b5 - b4 (difference between the fifth- and fourth-order weights).
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;

void eval_checked(const VectorField& f, double s, const Vec& x, Vec& out, double h)
{
    f(s, x, out);
    if (!out.allFinite()) {
        throw IntegrationError("non-finite vector field value", s, h);
    }
}

} // namespace

void SolverConfig::validate() const
{
    if (!(atol > 0.0)) {
        throw ConfigError("atol must be positive, got " + std::to_string(atol));
    }
    if (!(rtol > 0.0)) {
        throw ConfigError("rtol must be positive, got " + std::to_string(rtol));
    }
    if (!(h_min > 0.0)) {
        throw ConfigError("h_min must be positive");
    }
    if (h_init != 0.0 && h_init < h_min) {
        throw ConfigError("h_init must be at least h_min");
    }
    if (max_steps <= 0) {
        throw ConfigError("max_steps must be positive");
    }
    if (!(safety > 0.0 && safety <= 1.0)) {
        throw ConfigError("safety factor must lie in (0, 1]");
    }
}

DopriStep dopri_step(const VectorField& f, double s, const Vec& x, double h, double atol, double rtol,
                     const Vec* k_first)
{
    const Eigen::Index n = x.size();
    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n);
    if (k_first != nullptr) {
        k1 = *k_first;
    } else {
        eval_checked(f, s, x, k1, h);
    }
    tmp = x + h * a21 * k1;
    eval_checked(f, s + c2 * h, tmp, k2, h);
    tmp = x + h * (a31 * k1 + a32 * k2);
    eval_checked(f, s + c3 * h, tmp, k3, h);
    tmp = x + h * (a41 * k1 + a42 * k2 + a43 * k3);
    eval_checked(f, s + c4 * h, tmp, k4, h);
    tmp = x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    eval_checked(f, s + c5 * h, tmp, k5, h);
    tmp = x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    eval_checked(f, s + h, tmp, k6, h);

    DopriStep out;
    out.state = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    eval_checked(f, s + h, out.state, k7, h);

    const Vec delta = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double scale = atol + rtol * std::max(std::abs(x[i]), std::abs(out.state[i]));
        const double r = delta[i] / scale;
        acc += r * r;
    }
    out.error = n > 0 ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
    out.k_last = std::move(k7);
    return out;
}

Vec integrate(const VectorField& f, double s0, double s1, Vec x0, const SolverConfig& cfg, IntegrationStats* stats,
              const NodeObserver& observer)
{
    cfg.validate();
    IntegrationStats local;
    IntegrationStats& st = stats != nullptr ? *stats : local;
    st = {};

    Vec x = std::move(x0);
    double s = s0;
    if (observer) {
        observer(s, x);
    }
    if (s0 == s1) {
        return x;
    }
    const double span = s1 - s0;
    const double dir = span > 0.0 ? 1.0 : -1.0;
    double h = dir * (cfg.h_init > 0.0 ? cfg.h_init : 1e-2 * std::abs(span));

    Vec k1(x.size());
    eval_checked(f, s, x, k1, h);
    st.n_field_evals = 1;

    int steps = 0;
    bool done = false;
    while (!done) {
        if (steps >= cfg.max_steps) {
            throw IntegrationError("maximum number of steps exceeded", s, h);
        }
        ++steps;
        bool last = false;
        if (dir * (s + h - s1) >= 0.0) {
            h = s1 - s;
            last = true;
        }
        if (std::abs(h) < cfg.h_min && !last) {
            throw IntegrationError("step size fell below h_min", s, h);
        }
        DopriStep step = dopri_step(f, s, x, h, cfg.atol, cfg.rtol, &k1);
        st.n_field_evals += 6;
        const double err = step.error;
        if (!std::isfinite(err)) {
            throw IntegrationError("non-finite error estimate", s, h);
        }
        if (err <= 1.0) {
            ++st.accepted;
            s = last ? s1 : s + h;
            x = std::move(step.state);
            k1 = std::move(step.k_last);
            if (observer) {
                observer(s, x);
            }
            done = last;
            const double factor =
                err == 0.0 ? kMaxFactor : std::clamp(cfg.safety * std::pow(err, -0.2), kMinFactor, kMaxFactor);
            h *= factor;
        } else {
            ++st.rejected;
            h *= std::max(kMinFactor, cfg.safety * std::pow(err, -0.2));
            if (std::abs(h) < cfg.h_min) {
                throw IntegrationError("step size fell below h_min", s, h);
            }
        }
    }
    return x;
}

Vec integrate_fixed(const VectorField& f, double s0, double s1, Vec x0, int n_steps)
{
    if (n_steps <= 0) {
        throw ConfigError("fixed-step integration needs a positive step count");
    }
    const double h = (s1 - s0) / n_steps;
    Vec x = std::move(x0);
    Vec k1(x.size());
    f(s0, x, k1);
    for (int i = 0; i < n_steps; ++i) {
        const double s = s0 + i * h;
        DopriStep step = dopri_step(f, s, x, h, 1.0, 1.0, &k1);
        x = std::move(step.state);
        k1 = std::move(step.k_last);
    }
    return x;
}

Trajectory solve_forward(const FieldSpec& spec, VecRef u, const Vec& w, VecRef x0, double S, const SolverConfig& cfg)
{
    if (!(S > 0.0)) {
        throw ConfigError("integration bound S must be positive");
    }
    require_dim(x0.size(), spec.n_x(), "initial state");
    const Vec uu = u;
    VectorField f = [&](double, const Vec& x, Vec& dx) { dx = field_eval(spec, uu, x, w); };
    Trajectory traj;
    integrate(f, 0.0, S, Vec(x0), cfg, &traj.stats,
              [&](double s, const Vec& x) { traj.nodes.push_back({s, x}); });
    return traj;
}

AdjointResult solve_adjoint(const FieldSpec& spec, VecRef u, const Vec& w, VecRef xS, VecRef lambdaS, VecRef muS,
                            double S, const SolverConfig& cfg, const StageCost* stage)
{
    if (!(S > 0.0)) {
        throw ConfigError("integration bound S must be positive");
    }
    const int nx = spec.n_x();
    const int nw = spec.param_count();
    const int n_extra = stage != nullptr ? stage->n_extra : 0;
    const int n_cost = stage != nullptr ? 1 : 0;
    require_dim(xS.size(), nx, "adjoint terminal state");
    require_dim(lambdaS.size(), nx, "adjoint terminal costate");
    require_dim(muS.size(), nw, "adjoint terminal parameter costate");

    const Eigen::Index n = 2 * nx + nw + n_cost + n_extra;
    Vec z = Vec::Zero(n);
    z.segment(0, nx) = xS;
    z.segment(nx, nx) = lambdaS;
    z.segment(2 * nx, nw) = muS;

    const Vec uu = u;
    Vec dg(nx);
    Vec extra(n_extra);
    VectorField f = [&](double, const Vec& state, Vec& dz) {
        const auto x = state.segment(0, nx);
        const auto lambda = state.segment(nx, nx);
        const Vec xv = x;
        dz.segment(0, nx) = field_eval(spec, uu, xv, w);
        FieldVjp vjp = field_vjp(spec, uu, xv, w, lambda);
        dz.segment(nx, nx) = -vjp.x;
        dz.segment(2 * nx, nw) = -vjp.w;
        if (stage != nullptr) {
            dg.setZero();
            extra.setZero();
            const double g = stage->eval(xv, dg, extra);
            dz.segment(nx, nx) -= dg;
            dz[2 * nx + nw] = -g;
            dz.segment(2 * nx + nw + 1, n_extra) = -extra;
        }
    };

    AdjointResult out;
    const Vec z0 = integrate(f, S, 0.0, std::move(z), cfg, &out.stats);
    out.x0 = z0.segment(0, nx);
    out.lambda0 = z0.segment(nx, nx);
    out.mu0 = z0.segment(2 * nx, nw);
    if (stage != nullptr) {
        out.running_cost = z0[2 * nx + nw];
        out.extra = z0.segment(2 * nx + nw + 1, n_extra);
    } else {
        out.extra = Vec::Zero(0);
    }
    return out;
}

} // namespace snf
