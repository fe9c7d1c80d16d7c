#include "snf/dynamics.hpp"

#include <cmath>

namespace snf {

namespace {

double sign_or_zero(double a) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); }

// Diagonal of A = -diag(|a_i| + delta).
Vec ph_diagonal(const FieldSpec& spec, const Vec& w)
{
    const Vec a = w.tail(spec.n_x());
    return -(a.cwiseAbs().array() + spec.delta()).matrix();
}

void check(const FieldSpec& spec, VecRef x, const Vec& w)
{
    require_dim(x.size(), spec.n_x(), "field state");
    require_dim(w.size(), spec.param_count(), "field parameter vector");
}

} // namespace

FieldSpec FieldSpec::vanilla(Mlp net)
{
    if (net.output_dim() != net.n_x()) {
        throw DimensionError("vanilla field: network output dim " + std::to_string(net.output_dim()) +
                             " must equal n_x = " + std::to_string(net.n_x()));
    }
    FieldSpec f;
    f.variant_ = Variant::vanilla;
    f.n_x_ = net.n_x();
    f.n_u_ = net.n_u();
    f.net_ = std::move(net);
    return f;
}

FieldSpec FieldSpec::stable(EnergyNet energy)
{
    FieldSpec f;
    f.variant_ = Variant::stable;
    f.n_x_ = energy.n_x();
    f.n_u_ = energy.n_u();
    f.energy_ = std::move(energy);
    return f;
}

FieldSpec FieldSpec::port_hamiltonian(EnergyNet energy, double delta)
{
    if (!(delta > 0.0)) {
        throw DimensionError("port-Hamiltonian field: delta must be positive");
    }
    FieldSpec f = stable(std::move(energy));
    f.variant_ = Variant::port_hamiltonian;
    f.delta_ = delta;
    return f;
}

FieldSpec FieldSpec::second_order(EnergyNet energy)
{
    FieldSpec f;
    f.variant_ = Variant::second_order;
    f.n_x_ = 2 * energy.n_x();
    f.n_u_ = energy.n_u();
    f.energy_ = std::move(energy);
    return f;
}

int FieldSpec::net_param_count() const
{
    return variant_ == Variant::vanilla ? net_.param_count() : energy_.param_count();
}

int FieldSpec::extra_param_count() const
{
    switch (variant_) {
    case Variant::port_hamiltonian:
        return n_x_;
    case Variant::second_order:
        return 1;
    default:
        return 0;
    }
}

Vec field_eval(const FieldSpec& spec, VecRef u, VecRef x, const Vec& w)
{
    check(spec, x, w);
    const auto wn = spec.net_params(w);
    switch (spec.variant()) {
    case Variant::vanilla:
        return spec.net().forward(u, x, wn);
    case Variant::stable:
        return -energy_grad_x(spec.energy(), u, x, wn);
    case Variant::port_hamiltonian:
        return ph_diagonal(spec, w).cwiseProduct(energy_grad_x(spec.energy(), u, x, wn));
    case Variant::second_order: {
        const int nv = spec.n_x() / 2;
        const auto q = x.head(nv);
        const auto p = x.tail(nv);
        const double alpha = w[w.size() - 1];
        Vec f(spec.n_x());
        f.head(nv) = p;
        f.tail(nv) = -alpha * p - energy_grad_x(spec.energy(), u, q, wn);
        return f;
    }
    }
    return {};
}

FieldVjp field_vjp(const FieldSpec& spec, VecRef u, VecRef x, const Vec& w, VecRef lambda)
{
    check(spec, x, w);
    require_dim(lambda.size(), spec.n_x(), "field cotangent");
    const auto wn = spec.net_params(w);
    FieldVjp out;
    switch (spec.variant()) {
    case Variant::vanilla:
        spec.net().vjp(u, x, wn, lambda, &out.x, &out.w);
        break;
    case Variant::stable: {
        EnergyDerivatives d = energy_second_order(spec.energy(), u, x, wn, lambda);
        out.x = -d.hvp;
        out.w = -d.mixed;
        break;
    }
    case Variant::port_hamiltonian: {
        // f = D g(x) with D diagonal: lambda^T D dg/dx = H (D lambda) by symmetry of H.
        const Vec diag = ph_diagonal(spec, w);
        const Vec scaled = diag.cwiseProduct(lambda);
        EnergyDerivatives d = energy_second_order(spec.energy(), u, x, wn, scaled);
        out.x = d.hvp;
        out.w.resize(spec.param_count());
        out.w.head(spec.net_param_count()) = d.mixed;
        const Vec a = w.tail(spec.n_x());
        for (int i = 0; i < spec.n_x(); ++i) {
            out.w[spec.net_param_count() + i] = -sign_or_zero(a[i]) * d.grad_x[i] * lambda[i];
        }
        break;
    }
    case Variant::second_order: {
        const int nv = spec.n_x() / 2;
        const auto q = x.head(nv);
        const auto p = x.tail(nv);
        const auto lq = lambda.head(nv);
        const auto lp = lambda.tail(nv);
        const double alpha = w[w.size() - 1];
        EnergyDerivatives d = energy_second_order(spec.energy(), u, q, wn, lp);
        out.x.resize(spec.n_x());
        out.x.head(nv) = -d.hvp;
        out.x.tail(nv) = lq - alpha * lp;
        out.w.resize(spec.param_count());
        out.w.head(spec.net_param_count()) = -d.mixed;
        out.w[spec.param_count() - 1] = -lp.dot(p);
        break;
    }
    }
    return out;
}

Vec field_vjp_x(const FieldSpec& spec, VecRef u, VecRef x, const Vec& w, VecRef lambda)
{
    return field_vjp(spec, u, x, w, lambda).x;
}

Vec field_vjp_w(const FieldSpec& spec, VecRef u, VecRef x, const Vec& w, VecRef lambda)
{
    return field_vjp(spec, u, x, w, lambda).w;
}

double field_energy(const FieldSpec& spec, VecRef u, VecRef x, const Vec& w)
{
    check(spec, x, w);
    const auto wn = spec.net_params(w);
    switch (spec.variant()) {
    case Variant::vanilla:
        throw Error("vanilla fields carry no energy function");
    case Variant::stable:
    case Variant::port_hamiltonian:
        return energy_eval(spec.energy(), u, x, wn);
    case Variant::second_order: {
        const int nv = spec.n_x() / 2;
        return 0.5 * x.tail(nv).squaredNorm() + energy_eval(spec.energy(), u, x.head(nv), wn);
    }
    }
    return 0.0;
}

std::string to_string(Variant v)
{
    switch (v) {
    case Variant::vanilla:
        return "vanilla";
    case Variant::stable:
        return "stable";
    case Variant::port_hamiltonian:
        return "port_hamiltonian";
    case Variant::second_order:
        return "second_order";
    }
    return "stable";
}

Variant parse_variant(const std::string& name)
{
    if (name == "vanilla") {
        return Variant::vanilla;
    }
    if (name == "stable") {
        return Variant::stable;
    }
    if (name == "port_hamiltonian") {
        return Variant::port_hamiltonian;
    }
    if (name == "second_order") {
        return Variant::second_order;
    }
    throw ConfigError("unknown field variant '" + name +
                      "' (expected vanilla, stable, port_hamiltonian or second_order)");
}

} // namespace snf
