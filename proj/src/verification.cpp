#include "snf/verification.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "snf/io.hpp"

namespace snf {

namespace {

// Parameter view of one block, so the finite-difference oracle can perturb it.
Vec block_params(const Model& m, Block b)
{
    switch (b) {
    case Block::w:
        return m.w;
    case Block::v_u:
        return m.h_u.params();
    case Block::v_y:
        return m.h_y.params();
    case Block::S:
        return Vec::Constant(1, m.S);
    }
    return {};
}

void set_block_params(Model& m, Block b, const Vec& v)
{
    switch (b) {
    case Block::w:
        m.w = v;
        break;
    case Block::v_u:
        m.h_u.set_params(v);
        break;
    case Block::v_y:
        m.h_y.set_params(v);
        break;
    case Block::S:
        m.S = v[0];
        break;
    }
}

const Vec& block_grad(const GradBundle& g, Block b, Vec& scratch)
{
    switch (b) {
    case Block::w:
        return g.g_w;
    case Block::v_u:
        return g.g_vu;
    case Block::v_y:
        return g.g_vy;
    case Block::S:
        scratch = Vec::Constant(1, g.g_S);
        return scratch;
    }
    return scratch;
}

bool is_trainable(const Model& m, Block b)
{
    switch (b) {
    case Block::w:
        return m.trainable.w;
    case Block::v_u:
        return m.trainable.v_u;
    case Block::v_y:
        return m.trainable.v_y;
    case Block::S:
        return m.trainable.S;
    }
    return false;
}

bool is_terminal(LossKind k) { return k != LossKind::backprop_integral; }

std::vector<int> sample_coords(int n, int k, std::mt19937_64& rng)
{
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (k >= n) {
        return idx;
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

double max_rel_err(const Vec& a, const Vec& b)
{
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        worst = std::max(worst, relative_error(a[i], b[i]));
    }
    return worst;
}

} // namespace

std::vector<double> fd_gradient(const ScalarFn& loss, const Vec& theta, const std::vector<int>& coords, double h)
{
    if (!(h > 0.0)) {
        throw ConfigError("finite-difference step must be positive");
    }
    std::vector<double> out;
    out.reserve(coords.size());
    Vec probe = theta;
    for (int i : coords) {
        if (i < 0 || i >= theta.size()) {
            throw DimensionError("finite-difference coordinate " + std::to_string(i) + " out of range");
        }
        probe[i] = theta[i] + h;
        const double plus = loss(probe);
        probe[i] = theta[i] - h;
        const double minus = loss(probe);
        probe[i] = theta[i];
        if (!std::isfinite(plus) || !std::isfinite(minus)) {
            throw NumericalError("non-finite loss at finite-difference coordinate " + std::to_string(i));
        }
        out.push_back((plus - minus) / (2.0 * h));
    }
    return out;
}

double relative_error(double a, double b, double floor)
{
    if (a == b) {
        return 0.0;
    }
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

DissipationReport audit_dissipation(const Trajectory& traj, const EnergyNet& net, VecRef u, VecRef w, double slack)
{
    DissipationReport r;
    if (traj.nodes.empty()) {
        return r;
    }
    double prev = energy_eval(net, u, traj.nodes.front().state, w);
    const double first = prev;
    for (std::size_t i = 1; i < traj.nodes.size(); ++i) {
        const double e = energy_eval(net, u, traj.nodes[i].state, w);
        const double inc = e - prev;
        r.max_increase = std::max(r.max_increase, inc);
        r.max_drift = std::max(r.max_drift, std::abs(e - first));
        if (inc > slack) {
            r.violating_s.push_back(traj.nodes[i].s);
        }
        prev = e;
    }
    r.passed = r.violating_s.empty();
    return r;
}

DissipationReport audit_second_order(const Trajectory& traj, const EnergyNet& net, VecRef u, VecRef w, double alpha,
                                     double slack)
{
    DissipationReport r;
    if (traj.nodes.empty()) {
        return r;
    }
    const int nv = net.n_x();
    auto phi = [&](const Vec& x) { return 0.5 * x.tail(nv).squaredNorm() + energy_eval(net, u, x.head(nv), w); };
    const double first = phi(traj.nodes.front().state);
    double prev = first;
    for (std::size_t i = 1; i < traj.nodes.size(); ++i) {
        const double e = phi(traj.nodes[i].state);
        const double inc = e - prev;
        r.max_increase = std::max(r.max_increase, inc);
        r.max_drift = std::max(r.max_drift, std::abs(e - first));
        if (inc > slack) {
            r.violating_s.push_back(traj.nodes[i].s);
        }
        prev = e;
    }
    r.passed = r.violating_s.empty() && (alpha != 0.0 || r.max_drift <= slack);
    return r;
}

DissipationReport audit_field(const Trajectory& traj, const FieldSpec& field, VecRef u, const Vec& w, double slack)
{
    const auto wn = field.net_params(w);
    switch (field.variant()) {
    case Variant::vanilla:
        return {};
    case Variant::stable:
    case Variant::port_hamiltonian:
        return audit_dissipation(traj, field.energy(), u, wn, slack);
    case Variant::second_order:
        return audit_second_order(traj, field.energy(), u, wn, w[w.size() - 1], slack);
    }
    return {};
}

std::string to_string(Block b)
{
    switch (b) {
    case Block::w:
        return "w";
    case Block::v_u:
        return "v_u";
    case Block::v_y:
        return "v_y";
    case Block::S:
        return "S";
    }
    return "w";
}

const std::vector<GradPath>& registered_paths()
{
    static const std::vector<GradPath> paths = [] {
        std::vector<GradPath> p;
        for (LossKind k : {LossKind::terminal_quadratic, LossKind::backprop_integral}) {
            for (Block b : {Block::w, Block::v_u, Block::v_y, Block::S}) {
                p.push_back({std::string(is_terminal(k) ? "terminal." : "backprop.") + to_string(b), k, b});
            }
        }
        return p;
    }();
    return paths;
}

void ensure_registered(const Model& model, const LossSpec& spec)
{
    for (Block b : {Block::w, Block::v_u, Block::v_y, Block::S}) {
        if (!is_trainable(model, b)) {
            continue;
        }
        const auto& paths = registered_paths();
        const bool found = std::any_of(paths.begin(), paths.end(), [&](const GradPath& p) {
            return p.block == b && is_terminal(p.kind) == is_terminal(spec.kind);
        });
        if (!found) {
            throw Error("no finite-difference check registered for " + to_string(spec.kind) + " / " + to_string(b));
        }
    }
}

std::vector<GradCheckRow> gradcheck_sample(const Model& model, const LossSpec& spec, VecRef u, VecRef y,
                                           const SolverConfig& cfg, const GradCheckOptions& opts)
{
    ensure_registered(model, spec);
    const Vec uu = u;
    const Vec yy = y;
    const SampleGradient adj = sample_gradient(model, spec, uu, yy, cfg, opts.grad);
    std::mt19937_64 rng(opts.seed);
    const std::string prefix = is_terminal(spec.kind) ? "terminal." : "backprop.";

    std::vector<GradCheckRow> rows;
    for (Block b : {Block::w, Block::v_u, Block::v_y, Block::S}) {
        if (!is_trainable(model, b)) {
            continue;
        }
        const Vec theta = block_params(model, b);
        const std::vector<int> coords = sample_coords(static_cast<int>(theta.size()), opts.coords_per_block, rng);
        ScalarFn loss = [&](const Vec& v) {
            Model probe = model;
            set_block_params(probe, b, v);
            return sample_loss(probe, spec, uu, yy, cfg);
        };
        const std::vector<double> fd = fd_gradient(loss, theta, coords, opts.h);
        Vec scratch;
        const Vec& g = block_grad(adj.grad, b, scratch);
        for (std::size_t k = 0; k < coords.size(); ++k) {
            const double a = g[coords[k]];
            rows.push_back({prefix + to_string(b), coords[k], a, fd[k], relative_error(a, fd[k])});
        }
    }
    return rows;
}

void write_gradcheck_csv(const std::vector<GradCheckRow>& rows, std::ostream& os)
{
    os << "path,coord,adjoint,fd,rel_err\n";
    for (const GradCheckRow& r : rows) {
        os << r.path << ',' << r.coord << ',' << format_double(r.adjoint) << ',' << format_double(r.fd) << ','
           << format_double(r.rel_err) << '\n';
    }
}

ProjectionComparison compare_projection_gradients(const Model& model, const LossSpec& spec, VecRef u, VecRef y,
                                                  const SolverConfig& cfg, double h)
{
    const Vec uu = u;
    const Vec yy = y;
    Model full = model;
    full.trainable.v_u = true;

    ProjectionComparison out;
    const SampleGradient adj = sample_gradient(full, spec, uu, yy, cfg);
    out.adjoint = adj.grad.g_vu;

    // Terminal sensitivity of the loss w.r.t. x(S), including the regularizer.
    const Vec fS = field_eval(model.field, uu, adj.xS, model.w);
    Vec lambdaS = Vec::Zero(model.n_x());
    if (spec.gamma != 0.0) {
        lambdaS = spec.gamma * field_vjp_x(model.field, uu, adj.xS, model.w, fS);
    }
    Vec chi = Vec::Zero(model.n_x());
    if (is_terminal(spec.kind)) {
        lambdaS += affine_vjp_input(model.h_y, loss_terminal_grad(spec, adj.prediction, yy));
    } else {
        // chi(0) = integral of dg/dx along the trajectory.
        const int nx = model.n_x();
        VectorField f = [&](double, const Vec& z, Vec& dz) {
            const Vec x = z.head(nx);
            dz.head(nx) = field_eval(model.field, uu, x, model.w);
            Vec dg;
            if (spec.stage_on == StageInput::output) {
                dg = affine_vjp_input(model.h_y, point_loss_grad(spec.stage_g, affine_apply(model.h_y, x), yy));
            } else {
                dg = point_loss_grad(spec.stage_g, x, yy);
            }
            dz.tail(nx) = dg;
        };
        Vec z0 = Vec::Zero(2 * nx);
        z0.head(nx) = affine_apply(model.h_u, uu);
        chi = integrate(f, 0.0, model.S, z0, cfg).tail(nx);
    }
    out.chain_rule = affine_vjp_params(model.h_u, uu, lambdaS + chi);

    const Vec theta = model.h_u.params();
    std::vector<int> coords(theta.size());
    std::iota(coords.begin(), coords.end(), 0);
    ScalarFn loss = [&](const Vec& v) {
        Model probe = model;
        probe.h_u.set_params(v);
        return sample_loss(probe, spec, uu, yy, cfg);
    };
    const std::vector<double> fd = fd_gradient(loss, theta, coords, h);
    out.fd = Eigen::Map<const Vec>(fd.data(), static_cast<Eigen::Index>(fd.size()));
    out.dev_adjoint = max_rel_err(out.adjoint, out.fd);
    out.dev_chain_rule = max_rel_err(out.chain_rule, out.fd);
    return out;
}

} // namespace snf
