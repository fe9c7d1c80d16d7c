#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "snf/common.hpp"

namespace snf {

enum class Activation { tanh, identity };

/// Output transform applied to the scalar network output. `square` and `sigmoid`
/// make the energy bounded below by zero.
enum class Head { square, sigmoid, identity };

struct LayerSpec {
    int in_dim = 0;
    int out_dim = 0;
    Activation activation = Activation::tanh;
};

/// Fully connected feed-forward network acting on the concatenated input [x; u]
/// (u is appended only when the network is data dependent).
///
/// Parameters are read from a flat vector, layer by layer: the weight matrix in
/// row-major order (out_dim x in_dim) followed by the bias.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<LayerSpec> layers, int n_x, int n_u, bool data_dependent);

    /// Builds tanh hidden layers and an identity output layer from a width list
    /// such as {2, 16, 16, 1}.
    static Mlp from_widths(const std::vector<int>& widths, int n_x, int n_u, bool data_dependent);

    const std::vector<LayerSpec>& layers() const { return layers_; }
    int n_x() const { return n_x_; }
    int n_u() const { return n_u_; }
    bool data_dependent() const { return data_dependent_; }
    int input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim; }
    int output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim; }
    int param_count() const { return param_count_; }

    /// Offset of layer `l`'s weight block inside the parameter vector.
    int weight_offset(std::size_t l) const { return offsets_[l]; }
    int bias_offset(std::size_t l) const { return offsets_[l] + layers_[l].in_dim * layers_[l].out_dim; }

    Vec forward(VecRef u, VecRef x, VecRef w) const;

    /// Reverse pass for a vector output: returns upstream^T d(out)/dx in `grad_x`
    /// and upstream^T d(out)/dw in `grad_w` (either may be null).
    void vjp(VecRef u, VecRef x, VecRef w, VecRef upstream, Vec* grad_x, Vec* grad_w) const;

    void check_args(VecRef u, VecRef x, VecRef w) const;

private:
    std::vector<LayerSpec> layers_;
    std::vector<int> offsets_;
    int n_x_ = 0;
    int n_u_ = 0;
    bool data_dependent_ = false;
    int param_count_ = 0;
};

/// Scalar energy function epsilon(u, x, w).
///
/// Either a network followed by a head, or the closed-form quadratic
/// 0.5 * ||x - c||^2 (no parameters) used as an analytic reference.
class EnergyNet {
public:
    EnergyNet() = default;
    EnergyNet(Mlp mlp, Head head);

    static EnergyNet quadratic(Vec center, int n_u = 0);

    bool is_quadratic() const { return quadratic_; }
    const Mlp& mlp() const { return mlp_; }
    Head head() const { return head_; }
    const Vec& center() const { return center_; }
    int n_x() const { return quadratic_ ? static_cast<int>(center_.size()) : mlp_.n_x(); }
    int n_u() const { return quadratic_ ? n_u_ : mlp_.n_u(); }
    bool data_dependent() const { return !quadratic_ && mlp_.data_dependent(); }
    int param_count() const { return quadratic_ ? 0 : mlp_.param_count(); }

    void check_args(VecRef u, VecRef x, VecRef w) const;

private:
    Mlp mlp_;
    Head head_ = Head::square;
    bool quadratic_ = false;
    Vec center_;
    int n_u_ = 0;
};

/// Gradient, Hessian-vector product and mixed product from a single
/// forward-over-reverse sweep.
struct EnergyDerivatives {
    double value = 0.0;
    Vec grad_x;
    Vec hvp;    ///< lambda^T d2eps/dx2
    Vec mixed;  ///< lambda^T d/dw (d eps/dx), length n_w
};

double energy_eval(const EnergyNet& net, VecRef u, VecRef x, VecRef w);
Vec energy_grad_x(const EnergyNet& net, VecRef u, VecRef x, VecRef w);
Vec energy_hvp(const EnergyNet& net, VecRef u, VecRef x, VecRef w, VecRef lambda);
Vec energy_mixed_vjp(const EnergyNet& net, VecRef u, VecRef x, VecRef w, VecRef lambda);
EnergyDerivatives energy_second_order(const EnergyNet& net, VecRef u, VecRef x, VecRef w, VecRef lambda);

/// Uniform initialization in [-1/sqrt(in_dim), 1/sqrt(in_dim)] for every
/// weight and bias of each layer.
Vec init_params(const Mlp& net, std::mt19937_64& rng);

/// y = W v + b. The parameter vector is vec(W) (row-major) followed by b.
struct AffineMap {
    Mat W;
    Vec b;

    AffineMap() = default;
    AffineMap(Mat weights, Vec bias);

    static AffineMap identity(int n);
    /// Identity on the leading min(in, out) coordinates, zero elsewhere.
    static AffineMap padded_identity(int in_dim, int out_dim);
    static AffineMap random(int in_dim, int out_dim, std::mt19937_64& rng);

    int in_dim() const { return static_cast<int>(W.cols()); }
    int out_dim() const { return static_cast<int>(W.rows()); }
    int param_count() const { return out_dim() * in_dim() + out_dim(); }

    Vec params() const;
    void set_params(VecRef v);
};

Vec affine_apply(const AffineMap& m, VecRef v);
/// upstream^T d(Wv + b)/d(vec W, b) = (upstream (x) v, upstream).
Vec affine_vjp_params(const AffineMap& m, VecRef v, VecRef upstream);
/// upstream^T W.
Vec affine_vjp_input(const AffineMap& m, VecRef upstream);

std::string to_string(Head head);
Head parse_head(const std::string& name);

} // namespace snf
