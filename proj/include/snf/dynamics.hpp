#pragma once

#include <string>

#include "snf/energy_net.hpp"

namespace snf {

enum class Variant { vanilla, stable, port_hamiltonian, second_order };

/// Vector field f(u, x, w) of a continuous-depth model.
///
///  - vanilla:          f = net(x[, u])                      (unconstrained baseline)
///  - stable:           f = -d eps/dx
///  - port_hamiltonian: f = A(w_A) d eps/dx, A = -diag(|a_i| + delta)
///  - second_order:     x = (q, p), q' = p, p' = -alpha p - d eps/dq
///
/// The parameter vector w holds the network parameters first, followed by the
/// variant extras (a_1..a_nx for port_hamiltonian, alpha for second_order).
class FieldSpec {
public:
    FieldSpec() = default;

    static FieldSpec vanilla(Mlp net);
    static FieldSpec stable(EnergyNet energy);
    static FieldSpec port_hamiltonian(EnergyNet energy, double delta = 1e-3);
    static FieldSpec second_order(EnergyNet energy);

    Variant variant() const { return variant_; }
    const EnergyNet& energy() const { return energy_; }
    const Mlp& net() const { return net_; }
    double delta() const { return delta_; }

    int n_x() const { return n_x_; }
    int n_u() const { return n_u_; }
    /// Parameters of the energy (or vanilla) network.
    int net_param_count() const;
    int extra_param_count() const;
    int param_count() const { return net_param_count() + extra_param_count(); }

    /// Energy-network slice of a full parameter vector.
    Eigen::VectorBlock<const Vec> net_params(const Vec& w) const { return w.head(net_param_count()); }

private:
    Variant variant_ = Variant::stable;
    EnergyNet energy_;
    Mlp net_;
    double delta_ = 1e-3;
    int n_x_ = 0;
    int n_u_ = 0;
};

Vec field_eval(const FieldSpec& spec, VecRef u, VecRef x, const Vec& w);
/// lambda^T df/dx.
Vec field_vjp_x(const FieldSpec& spec, VecRef u, VecRef x, const Vec& w, VecRef lambda);
/// lambda^T df/dw, including the variant-extra parameters.
Vec field_vjp_w(const FieldSpec& spec, VecRef u, VecRef x, const Vec& w, VecRef lambda);

/// Both products at once; the energy variants share one second-order sweep.
struct FieldVjp {
    Vec x;
    Vec w;
};
FieldVjp field_vjp(const FieldSpec& spec, VecRef u, VecRef x, const Vec& w, VecRef lambda);

/// Energy used by dissipation checks: eps for stable/port-Hamiltonian fields,
/// 0.5 p^T p + eps(q) for second-order fields.
double field_energy(const FieldSpec& spec, VecRef u, VecRef x, const Vec& w);

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

} // namespace snf
