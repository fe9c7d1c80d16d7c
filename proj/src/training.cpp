#include "snf/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace snf {

namespace {

Vec softmax(VecRef z)
{
    const double m = z.maxCoeff();
    Vec e = (z.array() - m).exp().matrix();
    return e / e.sum();
}

void check_finite(VecRef v, const std::string& what)
{
    if (!v.allFinite()) {
        throw NumericalError("non-finite " + what);
    }
}

Vec initial_state(const Model& model, VecRef u) { return affine_apply(model.h_u, u); }

Vec terminal_state(const Model& model, VecRef u, const Vec& x0, const SolverConfig& cfg)
{
    const Vec uu = u;
    VectorField f = [&](double, const Vec& x, Vec& dx) { dx = field_eval(model.field, uu, x, model.w); };
    return integrate(f, 0.0, model.S, x0, cfg);
}

// Running cost g evaluated either on the projected output or on the raw state.
StageCost make_stage_cost(const Model& model, const LossSpec& spec, const Vec& y)
{
    StageCost stage;
    if (spec.stage_on == StageInput::output) {
        stage.n_extra = model.h_y.param_count();
        stage.eval = [&model, &spec, y](const Vec& x, Vec& dg_dx, Vec& extra) {
            const Vec yhat = affine_apply(model.h_y, x);
            const Vec dg = point_loss_grad(spec.stage_g, yhat, y);
            dg_dx = affine_vjp_input(model.h_y, dg);
            extra = affine_vjp_params(model.h_y, x, dg);
            return point_loss(spec.stage_g, yhat, y);
        };
    } else {
        require_dim(y.size(), model.n_x(), "state-space stage cost target");
        stage.n_extra = 0;
        stage.eval = [&spec, y](const Vec& x, Vec& dg_dx, Vec&) {
            dg_dx = point_loss_grad(spec.stage_g, x, y);
            return point_loss(spec.stage_g, x, y);
        };
    }
    return stage;
}

// Regularizer contribution: added to lambda(S) and directly to dl/dw.
struct RegTerm {
    double value = 0.0;
    Vec lambda;
    Vec w;
};

RegTerm regularizer(const Model& model, const LossSpec& spec, VecRef u, const Vec& xS, const Vec& fS)
{
    RegTerm r;
    if (spec.gamma == 0.0) {
        r.lambda = Vec::Zero(model.n_x());
        r.w = Vec::Zero(model.w.size());
        return r;
    }
    r.value = 0.5 * spec.gamma * fS.squaredNorm();
    FieldVjp vjp = field_vjp(model.field, u, xS, model.w, fS);
    r.lambda = spec.gamma * vjp.x;
    r.w = spec.gamma * vjp.w;
    return r;
}

void mask_and_check(const Model& model, GradBundle& g, const GradOptions& opts)
{
    if (opts.corrupt_adjoint_sign) {
        g.g_w = -g.g_w;
        g.g_vu = -g.g_vu;
        g.g_S = -g.g_S;
    }
    if (!model.trainable.w) {
        g.g_w.setZero();
    }
    if (!model.trainable.v_u) {
        g.g_vu.setZero();
    }
    if (!model.trainable.v_y) {
        g.g_vy.setZero();
    }
    if (!model.trainable.S) {
        g.g_S = 0.0;
    }
    if (!g.all_finite() || !std::isfinite(g.loss)) {
        throw NumericalError("non-finite gradient or loss");
    }
}

} // namespace

void Model::validate() const
{
    require_dim(h_u.out_dim(), field.n_x(), "input projection output");
    require_dim(h_y.in_dim(), field.n_x(), "output projection input");
    require_dim(w.size(), field.param_count(), "model parameter vector");
    if (!(S > 0.0)) {
        throw ConfigError("integration bound S must be positive");
    }
}

GradBundle GradBundle::zeros(const Model& model)
{
    GradBundle g;
    g.g_w = Vec::Zero(model.w.size());
    g.g_vu = Vec::Zero(model.h_u.param_count());
    g.g_vy = Vec::Zero(model.h_y.param_count());
    return g;
}

GradBundle& GradBundle::operator+=(const GradBundle& o)
{
    g_w += o.g_w;
    g_vu += o.g_vu;
    g_vy += o.g_vy;
    g_S += o.g_S;
    loss += o.loss;
    return *this;
}

GradBundle& GradBundle::operator*=(double c)
{
    g_w *= c;
    g_vu *= c;
    g_vy *= c;
    g_S *= c;
    loss *= c;
    return *this;
}

bool GradBundle::all_finite() const
{
    return g_w.allFinite() && g_vu.allFinite() && g_vy.allFinite() && std::isfinite(g_S);
}

double point_loss(PointLoss g, VecRef yhat, VecRef y)
{
    require_dim(yhat.size(), y.size(), "loss prediction");
    check_finite(yhat, "prediction");
    if (g == PointLoss::quadratic) {
        return 0.5 * (yhat - y).squaredNorm();
    }
    if (yhat.size() < 2) {
        throw DimensionError("cross-entropy needs at least two outputs");
    }
    const double m = yhat.maxCoeff();
    const double lse = m + std::log((yhat.array() - m).exp().sum());
    return -(y.array() * (yhat.array() - lse)).sum();
}

Vec point_loss_grad(PointLoss g, VecRef yhat, VecRef y)
{
    require_dim(yhat.size(), y.size(), "loss prediction");
    check_finite(yhat, "prediction");
    if (g == PointLoss::quadratic) {
        return yhat - y;
    }
    if (yhat.size() < 2) {
        throw DimensionError("cross-entropy needs at least two outputs");
    }
    return softmax(yhat) * y.sum() - y;
}

double loss_terminal(const LossSpec& spec, VecRef yhat, VecRef y) { return point_loss(spec.terminal_g(), yhat, y); }

Vec loss_terminal_grad(const LossSpec& spec, VecRef yhat, VecRef y)
{
    return point_loss_grad(spec.terminal_g(), yhat, y);
}

double loss_regularized(const Model& model, const LossSpec& spec, double loss, VecRef u, VecRef xS)
{
    if (spec.gamma == 0.0) {
        return loss;
    }
    const Vec f = field_eval(model.field, u, xS, model.w);
    return loss + 0.5 * spec.gamma * f.squaredNorm();
}

double grad_S(const Model& model, VecRef u, VecRef loss_grad_xS, VecRef xS)
{
    return loss_grad_xS.dot(field_eval(model.field, u, xS, model.w));
}

SampleGradient grad_terminal(const Model& model, const LossSpec& spec, VecRef u, VecRef y, const SolverConfig& cfg,
                             const GradOptions& opts)
{
    if (spec.kind == LossKind::backprop_integral) {
        throw ConfigError("grad_terminal called with a back-propagated loss");
    }
    const Vec x0 = initial_state(model, u);
    SampleGradient out;
    out.xS = terminal_state(model, u, x0, cfg);
    out.prediction = affine_apply(model.h_y, out.xS);

    const Vec dl_dyhat = loss_terminal_grad(spec, out.prediction, y);
    const Vec fS = field_eval(model.field, u, out.xS, model.w);
    const RegTerm reg = regularizer(model, spec, u, out.xS, fS);
    const Vec lambdaS = affine_vjp_input(model.h_y, dl_dyhat) + reg.lambda;

    GradBundle& g = out.grad;
    g.loss = loss_terminal(spec, out.prediction, y) + reg.value;
    g.g_S = lambdaS.dot(fS);
    g.g_vy = affine_vjp_params(model.h_y, out.xS, dl_dyhat);

    const AdjointResult adj =
        solve_adjoint(model.field, u, model.w, out.xS, lambdaS, Vec::Zero(model.w.size()), model.S, cfg);
    g.g_w = adj.mu0 + reg.w;
    g.g_vu = affine_vjp_params(model.h_u, u, adj.lambda0);
    out.drift = (adj.x0 - x0).lpNorm<Eigen::Infinity>();

    mask_and_check(model, g, opts);
    return out;
}

SampleGradient grad_backprop(const Model& model, const LossSpec& spec, VecRef u, VecRef y, const SolverConfig& cfg,
                             const GradOptions& opts)
{
    if (spec.kind != LossKind::backprop_integral) {
        throw ConfigError("grad_backprop called with a terminal loss");
    }
    const Vec x0 = initial_state(model, u);
    SampleGradient out;
    out.xS = terminal_state(model, u, x0, cfg);
    out.prediction = affine_apply(model.h_y, out.xS);

    const Vec yy = y;
    const StageCost stage = make_stage_cost(model, spec, yy);
    const Vec fS = field_eval(model.field, u, out.xS, model.w);
    const RegTerm reg = regularizer(model, spec, u, out.xS, fS);
    const Vec& lambdaS = reg.lambda;

    Vec dg_dx(model.n_x());
    Vec extra(stage.n_extra);
    const double gS = stage.eval(out.xS, dg_dx, extra);

    const AdjointResult adj =
        solve_adjoint(model.field, u, model.w, out.xS, lambdaS, Vec::Zero(model.w.size()), model.S, cfg, &stage);

    GradBundle& g = out.grad;
    g.loss = adj.running_cost + reg.value;
    g.g_w = adj.mu0 + reg.w;
    g.g_vu = affine_vjp_params(model.h_u, u, adj.lambda0);
    g.g_vy = spec.stage_on == StageInput::output ? adj.extra : Vec::Zero(model.h_y.param_count());
    g.g_S = gS + lambdaS.dot(fS);
    out.drift = (adj.x0 - x0).lpNorm<Eigen::Infinity>();

    mask_and_check(model, g, opts);
    return out;
}

SampleGradient sample_gradient(const Model& model, const LossSpec& spec, VecRef u, VecRef y, const SolverConfig& cfg,
                               const GradOptions& opts)
{
    return spec.kind == LossKind::backprop_integral ? grad_backprop(model, spec, u, y, cfg, opts)
                                                    : grad_terminal(model, spec, u, y, cfg, opts);
}

double sample_loss(const Model& model, const LossSpec& spec, VecRef u, VecRef y, const SolverConfig& cfg)
{
    const Vec x0 = initial_state(model, u);
    if (spec.kind != LossKind::backprop_integral) {
        const Vec xS = terminal_state(model, u, x0, cfg);
        return loss_regularized(model, spec, loss_terminal(spec, affine_apply(model.h_y, xS), y), u, xS);
    }
    // Forward quadrature of the running cost alongside the state.
    const int nx = model.n_x();
    const Vec yy = y;
    const Vec uu = u;
    const StageCost stage = make_stage_cost(model, spec, yy);
    Vec dg(nx);
    Vec extra(stage.n_extra);
    VectorField f = [&](double, const Vec& z, Vec& dz) {
        const Vec x = z.head(nx);
        dz.head(nx) = field_eval(model.field, uu, x, model.w);
        dz[nx] = stage.eval(x, dg, extra);
    };
    Vec z0 = Vec::Zero(nx + 1);
    z0.head(nx) = x0;
    const Vec zS = integrate(f, 0.0, model.S, z0, cfg);
    return loss_regularized(model, spec, zS[nx], u, zS.head(nx));
}

Vec terminal_state(const Model& model, VecRef u, const SolverConfig& cfg)
{
    return terminal_state(model, u, initial_state(model, u), cfg);
}

Vec predict(const Model& model, VecRef u, const SolverConfig& cfg)
{
    return affine_apply(model.h_y, terminal_state(model, u, initial_state(model, u), cfg));
}

bool correct(VecRef yhat, VecRef y)
{
    require_dim(yhat.size(), y.size(), "prediction");
    if (y.size() == 1) {
        return (yhat[0] > 0.5) == (y[0] > 0.5);
    }
    Eigen::Index a = 0;
    Eigen::Index b = 0;
    yhat.maxCoeff(&a);
    y.maxCoeff(&b);
    return a == b;
}

BatchGradient batch_gradient(const Model& model, const Dataset& data, const LossSpec& spec, const SolverConfig& cfg,
                             const GradOptions& opts)
{
    if (data.size() == 0) {
        throw ConfigError("cannot compute a gradient over an empty dataset");
    }
    BatchGradient out;
    out.mean = GradBundle::zeros(model);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        SampleGradient sg;
        try {
            sg = sample_gradient(model, spec, data.inputs[i], data.targets[i], cfg, opts);
        } catch (const IntegrationError& e) {
            throw IntegrationError("sample " + std::to_string(i) + ", gradient phase: " + e.what(), e.s(), e.h());
        }
        out.mean += sg.grad;
        out.max_drift = std::max(out.max_drift, sg.drift);
        if (data.task == Task::classification && correct(sg.prediction, data.targets[i])) {
            ++hits;
        }
    }
    out.mean *= 1.0 / static_cast<double>(data.size());
    out.accuracy = static_cast<double>(hits) / static_cast<double>(data.size());
    return out;
}

Evaluation evaluate(const Model& model, const Dataset& data, const LossSpec& spec, const SolverConfig& cfg)
{
    Evaluation ev;
    if (data.size() == 0) {
        return ev;
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vec& u = data.inputs[i];
        const Vec& y = data.targets[i];
        Vec yhat;
        try {
            yhat = predict(model, u, cfg);
            ev.mean_loss += sample_loss(model, spec, u, y, cfg);
        } catch (const IntegrationError& e) {
            throw IntegrationError("sample " + std::to_string(i) + ", evaluation phase: " + e.what(), e.s(), e.h());
        }
        ev.mse += (yhat - y).squaredNorm() / static_cast<double>(y.size());
        if (data.task == Task::classification && correct(yhat, y)) {
            ++hits;
        }
    }
    const auto n = static_cast<double>(data.size());
    ev.mean_loss /= n;
    ev.mse /= n;
    ev.accuracy = static_cast<double>(hits) / n;
    return ev;
}

Model gd_step(const Model& model, const GradBundle& grads, double eta)
{
    if (!(eta > 0.0)) {
        throw ConfigError("learning rate must be positive");
    }
    if (!grads.all_finite()) {
        throw NumericalError("non-finite gradient passed to the update");
    }
    Model next = model;
    if (model.trainable.w) {
        next.w -= eta * grads.g_w;
        if (model.field.variant() == Variant::second_order) {
            double& alpha = next.w[next.w.size() - 1];
            alpha = std::max(alpha, 0.0);
        }
    }
    if (model.trainable.v_u) {
        next.h_u.set_params(model.h_u.params() - eta * grads.g_vu);
    }
    if (model.trainable.v_y) {
        next.h_y.set_params(model.h_y.params() - eta * grads.g_vy);
    }
    if (model.trainable.S) {
        next.S = std::max(kMinDepth, model.S - eta * grads.g_S);
    }
    return next;
}

std::pair<Model, double> sgd_epoch(const Model& model, const Dataset& data, const LossSpec& spec, double eta,
                                   const SolverConfig& cfg, std::mt19937_64& rng)
{
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    Model current = model;
    double total = 0.0;
    for (std::size_t i : order) {
        SampleGradient sg;
        try {
            sg = sample_gradient(current, spec, data.inputs[i], data.targets[i], cfg);
        } catch (const IntegrationError& e) {
            throw IntegrationError("sample " + std::to_string(i) + ", gradient phase: " + e.what(), e.s(), e.h());
        }
        total += sg.grad.loss;
        current = gd_step(current, sg.grad, eta);
    }
    return {current, data.size() > 0 ? total / static_cast<double>(data.size()) : 0.0};
}

std::string to_string(LossKind kind)
{
    switch (kind) {
    case LossKind::terminal_quadratic:
        return "terminal_quadratic";
    case LossKind::terminal_cross_entropy:
        return "terminal_cross_entropy";
    case LossKind::backprop_integral:
        return "backprop_integral";
    }
    return "terminal_quadratic";
}

LossKind parse_loss_kind(const std::string& name)
{
    if (name == "terminal_quadratic") {
        return LossKind::terminal_quadratic;
    }
    if (name == "terminal_cross_entropy") {
        return LossKind::terminal_cross_entropy;
    }
    if (name == "backprop_integral") {
        return LossKind::backprop_integral;
    }
    throw ConfigError("unknown loss kind '" + name +
                      "' (expected terminal_quadratic, terminal_cross_entropy or backprop_integral)");
}

} // namespace snf
