#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "snf/training.hpp"

namespace snf {

using ScalarFn = std::function<double(const Vec&)>;

/// Central differences (l(theta + h e_i) - l(theta - h e_i)) / 2h at the
/// requested coordinates.
std::vector<double> fd_gradient(const ScalarFn& loss, const Vec& theta, const std::vector<int>& coords, double h);

/// |a - b| / max(|a|, |b|, floor); exactly 0 when a == b.
double relative_error(double a, double b, double floor = 1e-8);

struct DissipationReport {
    double max_increase = 0.0;        ///< largest energy increase between consecutive nodes
    std::vector<double> violating_s;  ///< node depths where the increase exceeds the slack
    double max_drift = 0.0;           ///< max |phi(s) - phi(0)| (second-order audits)
    bool passed = true;
};

/// Energy eps(x(s)) must not increase by more than `slack` between accepted nodes.
DissipationReport audit_dissipation(const Trajectory& traj, const EnergyNet& net, VecRef u, VecRef w, double slack);

/// Same with the total energy phi = 0.5 p^T p + eps(q). With alpha = 0 the
/// audit also requires |phi(s) - phi(0)| <= slack (conservation).
DissipationReport audit_second_order(const Trajectory& traj, const EnergyNet& net, VecRef u, VecRef w, double alpha,
                                     double slack);

/// Dispatches on the field variant (vanilla fields have nothing to audit).
DissipationReport audit_field(const Trajectory& traj, const FieldSpec& field, VecRef u, const Vec& w, double slack);

enum class Block { w, v_u, v_y, S };

std::string to_string(Block b);

struct GradPath {
    std::string name;
    LossKind kind;
    Block block;
};

/// Every (loss setting, parameter block) gradient path with its finite-difference check.
const std::vector<GradPath>& registered_paths();

/// Throws if a trainable block of the model has no registered check for the
/// configured loss setting.
void ensure_registered(const Model& model, const LossSpec& spec);

struct GradCheckRow {
    std::string path;
    int coord = 0;
    double adjoint = 0.0;
    double fd = 0.0;
    double rel_err = 0.0;
};

struct GradCheckOptions {
    double h = 1e-5;
    int coords_per_block = 20;
    std::uint64_t seed = 0;
    GradOptions grad;
};

/// Compares adjoint gradients with central differences of the solved loss for
/// every trainable block on one sample.
std::vector<GradCheckRow> gradcheck_sample(const Model& model, const LossSpec& spec, VecRef u, VecRef y,
                                           const SolverConfig& cfg, const GradCheckOptions& opts);

/// `path,coord,adjoint,fd,rel_err`.
void write_gradcheck_csv(const std::vector<GradCheckRow>& rows, std::ostream& os);

struct ProjectionComparison {
    Vec chain_rule;  ///< sensitivity of x(S) to x(0) taken as identity
    Vec adjoint;     ///< lambda(0)^T dh_u/dv_u
    Vec fd;          ///< central differences
    double dev_chain_rule = 0.0;  ///< max relative error vs fd
    double dev_adjoint = 0.0;
};

ProjectionComparison compare_projection_gradients(const Model& model, const LossSpec& spec, VecRef u, VecRef y,
                                                  const SolverConfig& cfg, double h = 1e-5);

} // namespace snf
