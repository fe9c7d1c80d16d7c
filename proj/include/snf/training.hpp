#pragma once

#include <random>
#include <string>
#include <utility>

#include "snf/datasets.hpp"
#include "snf/solver.hpp"

namespace snf {

enum class LossKind { terminal_quadratic, terminal_cross_entropy, backprop_integral };

/// Pointwise cost g(y_hat, y).
enum class PointLoss { quadratic, cross_entropy };

/// Where the running cost of the back-propagated loss is evaluated.
enum class StageInput { output, state };

struct LossSpec {
    LossKind kind = LossKind::terminal_quadratic;
    PointLoss stage_g = PointLoss::quadratic;
    StageInput stage_on = StageInput::output;
    double gamma = 1e-2;  ///< weight of the terminal field-norm regularizer

    PointLoss terminal_g() const
    {
        return kind == LossKind::terminal_cross_entropy ? PointLoss::cross_entropy : PointLoss::quadratic;
    }
};

struct Trainable {
    bool w = true;
    bool v_u = false;
    bool v_y = false;
    bool S = false;
};

/// u -> x(0) = h_u(u) -> flow of the field over [0, S] -> y_hat = h_y(x(S)).
struct Model {
    AffineMap h_u;
    FieldSpec field;
    AffineMap h_y;
    Vec w;
    double S = 1.0;
    Trainable trainable;

    int n_u() const { return h_u.in_dim(); }
    int n_x() const { return field.n_x(); }
    int n_y() const { return h_y.out_dim(); }

    void validate() const;
};

/// Lower bound on the trainable integration bound.
inline constexpr double kMinDepth = 1e-2;

struct GradBundle {
    Vec g_w;
    Vec g_vu;
    Vec g_vy;
    double g_S = 0.0;
    double loss = 0.0;

    static GradBundle zeros(const Model& model);

    GradBundle& operator+=(const GradBundle& o);
    GradBundle& operator*=(double c);
    bool all_finite() const;
};

/// Test hooks for negative controls.
struct GradOptions {
    bool corrupt_adjoint_sign = false;
};

struct SampleGradient {
    GradBundle grad;
    Vec prediction;  ///< y_hat
    Vec xS;
    double drift = 0.0;  ///< || x reconstructed backward at s=0  -  x(0) ||_inf
};

double point_loss(PointLoss g, VecRef yhat, VecRef y);
Vec point_loss_grad(PointLoss g, VecRef yhat, VecRef y);

double loss_terminal(const LossSpec& spec, VecRef yhat, VecRef y);
Vec loss_terminal_grad(const LossSpec& spec, VecRef yhat, VecRef y);

/// loss + gamma/2 ||f(u, x(S), w)||^2.
double loss_regularized(const Model& model, const LossSpec& spec, double loss, VecRef u, VecRef xS);

/// dl/dS = (dl/dx(S)) f(x(S)).
double grad_S(const Model& model, VecRef u, VecRef loss_grad_xS, VecRef xS);

SampleGradient grad_terminal(const Model& model, const LossSpec& spec, VecRef u, VecRef y, const SolverConfig& cfg,
                             const GradOptions& opts = {});
SampleGradient grad_backprop(const Model& model, const LossSpec& spec, VecRef u, VecRef y, const SolverConfig& cfg,
                             const GradOptions& opts = {});
/// Dispatches on the loss kind.
SampleGradient sample_gradient(const Model& model, const LossSpec& spec, VecRef u, VecRef y, const SolverConfig& cfg,
                               const GradOptions& opts = {});

/// Loss of one sample from a forward solve only (no adjoint).
double sample_loss(const Model& model, const LossSpec& spec, VecRef u, VecRef y, const SolverConfig& cfg);

/// x(S) starting from h_u(u).
Vec terminal_state(const Model& model, VecRef u, const SolverConfig& cfg);

Vec predict(const Model& model, VecRef u, const SolverConfig& cfg);

/// Whether a prediction is classified correctly (threshold 0.5 for scalar
/// targets, argmax otherwise).
bool correct(VecRef yhat, VecRef y);

struct BatchGradient {
    GradBundle mean;  ///< averaged gradients and loss
    double accuracy = 0.0;
    double max_drift = 0.0;
};

BatchGradient batch_gradient(const Model& model, const Dataset& data, const LossSpec& spec, const SolverConfig& cfg,
                             const GradOptions& opts = {});

struct Evaluation {
    double mean_loss = 0.0;
    double accuracy = 0.0;
    double mse = 0.0;
};

Evaluation evaluate(const Model& model, const Dataset& data, const LossSpec& spec, const SolverConfig& cfg);

/// theta <- theta - eta * grad on every trainable block; S is kept >= kMinDepth
/// and the second-order damping alpha >= 0.
Model gd_step(const Model& model, const GradBundle& grads, double eta);

/// One pass of per-sample updates in a seeded shuffled order.
std::pair<Model, double> sgd_epoch(const Model& model, const Dataset& data, const LossSpec& spec, double eta,
                                   const SolverConfig& cfg, std::mt19937_64& rng);

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

} // namespace snf
