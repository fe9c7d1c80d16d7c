#pragma once

#include <functional>
#include <vector>

#include "snf/dynamics.hpp"

namespace snf {

struct SolverConfig {
    double atol = 1e-6;
    double rtol = 1e-6;
    /// Initial step; 0 selects 1% of the integration interval.
    double h_init = 0.0;
    double h_min = 1e-12;
    int max_steps = 100000;
    double safety = 0.9;

    void validate() const;
};

/// dx/ds = f(s, x), written into `dxds` (already sized like x).
using VectorField = std::function<void(double s, const Vec& x, Vec& dxds)>;

struct DopriStep {
    Vec state;     ///< fifth-order solution
    double error;  ///< scaled RMS norm of the embedded error estimate
    Vec k_last;    ///< f at the new point (first stage of the next step)
};

/// One Dormand-Prince 5(4) step of size h (h < 0 integrates backward).
/// `k_first` is f(s, state) when already known from the previous step.
DopriStep dopri_step(const VectorField& f, double s, const Vec& state, double h, double atol, double rtol,
                     const Vec* k_first = nullptr);

struct IntegrationStats {
    int accepted = 0;
    int rejected = 0;
    int n_field_evals = 0;
};

using NodeObserver = std::function<void(double s, const Vec& state)>;

/// Adaptive integration from s0 to s1 (either direction). The observer sees
/// the initial point and every accepted node.
Vec integrate(const VectorField& f, double s0, double s1, Vec x0, const SolverConfig& cfg,
              IntegrationStats* stats = nullptr, const NodeObserver& observer = {});

/// Fixed-step Dormand-Prince, n equal steps.
Vec integrate_fixed(const VectorField& f, double s0, double s1, Vec x0, int n_steps);

struct TrajectoryNode {
    double s;
    Vec state;
};

struct Trajectory {
    std::vector<TrajectoryNode> nodes;
    bool dense = false;
    IntegrationStats stats;

    const Vec& final_state() const { return nodes.back().state; }
};

Trajectory solve_forward(const FieldSpec& spec, VecRef u, const Vec& w, VecRef x0, double S, const SolverConfig& cfg);

/// Running cost g(x) integrated over the depth domain.
struct StageCost {
    /// Number of auxiliary integrands accumulated alongside the cost (e.g. the
    /// output-projection gradient).
    int n_extra = 0;
    /// Returns g(x); writes dg/dx (size n_x) and the auxiliary integrands.
    std::function<double(const Vec& x, Vec& dg_dx, Vec& extra)> eval;
};

struct AdjointResult {
    Vec x0;
    Vec lambda0;
    Vec mu0;
    double running_cost = 0.0;  ///< integral of g over [0, S]
    Vec extra;                  ///< integrals of the auxiliary integrands
    IntegrationStats stats;
};

/// Integrates (x, lambda, mu[, cost, extras]) backward from S to 0:
///   x' = f,  lambda'^T = -lambda^T df/dx - dg/dx,  mu'^T = -lambda^T df/dw.
/// The state is re-integrated backward alongside the costates, not stored.
AdjointResult solve_adjoint(const FieldSpec& spec, VecRef u, const Vec& w, VecRef xS, VecRef lambdaS, VecRef muS,
                            double S, const SolverConfig& cfg, const StageCost* stage = nullptr);

} // namespace snf
