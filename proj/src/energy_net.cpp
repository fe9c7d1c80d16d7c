#include "snf/energy_net.hpp"

#include <cmath>

namespace snf {

namespace {

// First-order forward-mode number; the tangent carries a directional derivative
// with respect to the network input.
struct Dual {
    double v = 0.0;
    double d = 0.0;

    Dual() = default;
    Dual(double value) : v(value) {} // NOLINT(google-explicit-constructor)
    Dual(double value, double tangent) : v(value), d(tangent) {}

    Dual& operator+=(const Dual& o)
    {
        v += o.v;
        d += o.d;
        return *this;
    }
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator*(double a, Dual b) { return {a * b.v, a * b.d}; }
inline Dual operator/(Dual a, Dual b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }
inline Dual tanh(Dual a)
{
    const double t = std::tanh(a.v);
    return {t, (1.0 - t * t) * a.d};
}
inline Dual exp(Dual a)
{
    const double e = std::exp(a.v);
    return {e, e * a.d};
}


using std::exp;
using std::tanh;

// Activations and their derivatives at every layer, kept for the reverse pass.
template <class T>
struct Tape {
    std::vector<std::vector<T>> act;
    std::vector<std::vector<T>> dact;
};

template <class T>
void mlp_forward(const Mlp& net, std::vector<T> input, const double* w, Tape<T>& tape)
{
    const auto& layers = net.layers();
    tape.act.resize(layers.size() + 1);
    tape.dact.resize(layers.size() + 1);
    tape.act[0] = std::move(input);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerSpec& L = layers[l];
        const double* W = w + net.weight_offset(l);
        const double* b = w + net.bias_offset(l);
        const std::vector<T>& in = tape.act[l];
        std::vector<T>& out = tape.act[l + 1];
        std::vector<T>& dout = tape.dact[l + 1];
        out.assign(L.out_dim, T{});
        dout.assign(L.out_dim, T{});
        for (int i = 0; i < L.out_dim; ++i) {
            T z = T(b[i]);
            const double* row = W + static_cast<std::ptrdiff_t>(i) * L.in_dim;
            for (int j = 0; j < L.in_dim; ++j) {
                z += row[j] * in[j];
            }
            if (L.activation == Activation::tanh) {
                out[i] = tanh(z);
                dout[i] = T(1.0) - out[i] * out[i];
            } else {
                out[i] = z;
                dout[i] = T(1.0);
            }
        }
    }
}

// Propagates the output cotangent back to the input (and to the parameters
// when grad_w is non-null).
template <class T>
void mlp_backward(const Mlp& net, const double* w, const Tape<T>& tape, std::vector<T> cot,
                  std::vector<T>& grad_in, T* grad_w)
{
    const auto& layers = net.layers();
    std::vector<T> delta(cot.size());
    for (std::size_t i = 0; i < cot.size(); ++i) {
        delta[i] = cot[i] * tape.dact.back()[i];
    }
    for (std::size_t l = layers.size(); l-- > 0;) {
        const LayerSpec& L = layers[l];
        const double* W = w + net.weight_offset(l);
        const std::vector<T>& in = tape.act[l];
        if (grad_w != nullptr) {
            T* gW = grad_w + net.weight_offset(l);
            T* gb = grad_w + net.bias_offset(l);
            for (int i = 0; i < L.out_dim; ++i) {
                for (int j = 0; j < L.in_dim; ++j) {
                    gW[static_cast<std::ptrdiff_t>(i) * L.in_dim + j] = delta[i] * in[j];
                }
                gb[i] = delta[i];
            }
        }
        std::vector<T> prev(L.in_dim, T{});
        for (int i = 0; i < L.out_dim; ++i) {
            const double* row = W + static_cast<std::ptrdiff_t>(i) * L.in_dim;
            for (int j = 0; j < L.in_dim; ++j) {
                prev[j] += row[j] * delta[i];
            }
        }
        if (l == 0) {
            grad_in = std::move(prev);
        } else {
            const std::vector<T>& d = tape.dact[l];
            for (int j = 0; j < L.in_dim; ++j) {
                prev[j] = prev[j] * d[j];
            }
            delta = std::move(prev);
        }
    }
}

template <class T>
struct Sweep {
    T value{};
    std::vector<T> grad_in;
    std::vector<T> grad_w;
};

// Energy value plus its reverse-mode gradient. With T = Dual and the input
// tangent set to lambda, the tangents of the gradients are the Hessian-vector
// product (input part) and the mixed product (parameter part).
template <class T>
Sweep<T> energy_sweep(const EnergyNet& net, std::vector<T> input, const double* w, bool want_params)
{
    const Mlp& mlp = net.mlp();
    Tape<T> tape;
    mlp_forward(mlp, std::move(input), w, tape);
    const T o = tape.act.back()[0];

    Sweep<T> sweep;
    T de_do = T(1.0);
    switch (net.head()) {
    case Head::square:
        sweep.value = o * o;
        de_do = T(2.0) * o;
        break;
    case Head::sigmoid: {
        const T s = T(1.0) / (T(1.0) + exp(-o));
        sweep.value = s;
        de_do = s * (T(1.0) - s);
        break;
    }
    case Head::identity:
        sweep.value = o;
        de_do = T(1.0);
        break;
    }
    if (want_params) {
        sweep.grad_w.assign(mlp.param_count(), T{});
    }
    mlp_backward(mlp, w, tape, std::vector<T>{de_do}, sweep.grad_in, want_params ? sweep.grad_w.data() : nullptr);
    return sweep;
}

std::vector<double> concat_input(const EnergyNet& net, VecRef u, VecRef x)
{
    std::vector<double> in(x.data(), x.data() + x.size());
    if (net.data_dependent()) {
        in.insert(in.end(), u.data(), u.data() + u.size());
    }
    return in;
}

std::vector<double> concat_input(const Mlp& net, VecRef u, VecRef x)
{
    std::vector<double> in(x.data(), x.data() + x.size());
    if (net.data_dependent()) {
        in.insert(in.end(), u.data(), u.data() + u.size());
    }
    return in;
}

} // namespace

Mlp::Mlp(std::vector<LayerSpec> layers, int n_x, int n_u, bool data_dependent)
    : layers_(std::move(layers)), n_x_(n_x), n_u_(n_u), data_dependent_(data_dependent)
{
    if (layers_.empty()) {
        throw DimensionError("network needs at least one layer");
    }
    const int expected_in = n_x + (data_dependent ? n_u : 0);
    if (layers_.front().in_dim != expected_in) {
        throw DimensionError("layer 0: input dim " + std::to_string(layers_.front().in_dim) +
                             " does not match n_x + n_u = " + std::to_string(expected_in));
    }
    int offset = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const LayerSpec& L = layers_[l];
        if (L.in_dim <= 0 || L.out_dim <= 0) {
            throw DimensionError("layer " + std::to_string(l) + ": dimensions must be positive");
        }
        if (l > 0 && layers_[l - 1].out_dim != L.in_dim) {
            throw DimensionError("layer " + std::to_string(l) + ": input dim " + std::to_string(L.in_dim) +
                                 " does not match previous output dim " + std::to_string(layers_[l - 1].out_dim));
        }
        offsets_.push_back(offset);
        offset += L.out_dim * L.in_dim + L.out_dim;
    }
    param_count_ = offset;
}

Mlp Mlp::from_widths(const std::vector<int>& widths, int n_x, int n_u, bool data_dependent)
{
    if (widths.size() < 2) {
        throw DimensionError("layer widths need at least an input and an output entry");
    }
    std::vector<LayerSpec> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const bool last = l + 2 == widths.size();
        layers.push_back({widths[l], widths[l + 1], last ? Activation::identity : Activation::tanh});
    }
    return Mlp(std::move(layers), n_x, n_u, data_dependent);
}

void Mlp::check_args(VecRef u, VecRef x, VecRef w) const
{
    require_dim(x.size(), n_x_, "network state input");
    if (data_dependent_) {
        require_dim(u.size(), n_u_, "network data input");
    }
    require_dim(w.size(), param_count_, "network parameter vector");
}

Vec Mlp::forward(VecRef u, VecRef x, VecRef w) const
{
    check_args(u, x, w);
    Tape<double> tape;
    mlp_forward(*this, concat_input(*this, u, x), w.data(), tape);
    const auto& out = tape.act.back();
    return Eigen::Map<const Vec>(out.data(), static_cast<Eigen::Index>(out.size()));
}

void Mlp::vjp(VecRef u, VecRef x, VecRef w, VecRef upstream, Vec* grad_x, Vec* grad_w) const
{
    check_args(u, x, w);
    require_dim(upstream.size(), output_dim(), "network output cotangent");
    Tape<double> tape;
    mlp_forward(*this, concat_input(*this, u, x), w.data(), tape);
    std::vector<double> gin;
    std::vector<double> gw(grad_w != nullptr ? param_count_ : 0);
    mlp_backward(*this, w.data(), tape, std::vector<double>(upstream.data(), upstream.data() + upstream.size()), gin,
                 grad_w != nullptr ? gw.data() : nullptr);
    if (grad_x != nullptr) {
        *grad_x = Eigen::Map<const Vec>(gin.data(), n_x_);
    }
    if (grad_w != nullptr) {
        *grad_w = Eigen::Map<const Vec>(gw.data(), param_count_);
    }
}

EnergyNet::EnergyNet(Mlp mlp, Head head) : mlp_(std::move(mlp)), head_(head)
{
    if (mlp_.output_dim() != 1) {
        throw DimensionError("energy network: last layer (" + std::to_string(mlp_.layers().size() - 1) +
                             ") must have out_dim 1, got " + std::to_string(mlp_.output_dim()));
    }
}

EnergyNet EnergyNet::quadratic(Vec center, int n_u)
{
    EnergyNet net;
    net.quadratic_ = true;
    net.center_ = std::move(center);
    net.n_u_ = n_u;
    net.head_ = Head::identity;
    return net;
}

void EnergyNet::check_args(VecRef u, VecRef x, VecRef w) const
{
    if (quadratic_) {
        require_dim(x.size(), center_.size(), "quadratic energy state input");
        require_dim(w.size(), 0, "quadratic energy parameter vector");
        return;
    }
    mlp_.check_args(u, x, w);
}

double energy_eval(const EnergyNet& net, VecRef u, VecRef x, VecRef w)
{
    net.check_args(u, x, w);
    if (net.is_quadratic()) {
        return 0.5 * (x - net.center()).squaredNorm();
    }
    Tape<double> tape;
    mlp_forward(net.mlp(), concat_input(net, u, x), w.data(), tape);
    const double o = tape.act.back()[0];
    switch (net.head()) {
    case Head::square:
        return o * o;
    case Head::sigmoid:
        return 1.0 / (1.0 + std::exp(-o));
    case Head::identity:
        break;
    }
    return o;
}

Vec energy_grad_x(const EnergyNet& net, VecRef u, VecRef x, VecRef w)
{
    net.check_args(u, x, w);
    if (net.is_quadratic()) {
        return x - net.center();
    }
    const Sweep<double> s = energy_sweep<double>(net, concat_input(net, u, x), w.data(), false);
    return Eigen::Map<const Vec>(s.grad_in.data(), net.n_x());
}

EnergyDerivatives energy_second_order(const EnergyNet& net, VecRef u, VecRef x, VecRef w, VecRef lambda)
{
    net.check_args(u, x, w);
    require_dim(lambda.size(), net.n_x(), "energy direction");
    EnergyDerivatives out;
    if (net.is_quadratic()) {
        out.value = 0.5 * (x - net.center()).squaredNorm();
        out.grad_x = x - net.center();
        out.hvp = lambda;
        out.mixed = Vec::Zero(0);
        return out;
    }
    const std::vector<double> plain = concat_input(net, u, x);
    std::vector<Dual> input(plain.size());
    for (std::size_t i = 0; i < plain.size(); ++i) {
        input[i] = Dual(plain[i], i < static_cast<std::size_t>(net.n_x()) ? lambda[static_cast<Eigen::Index>(i)] : 0.0);
    }
    const Sweep<Dual> s = energy_sweep<Dual>(net, std::move(input), w.data(), true);
    out.value = s.value.v;
    out.grad_x.resize(net.n_x());
    out.hvp.resize(net.n_x());
    for (int i = 0; i < net.n_x(); ++i) {
        out.grad_x[i] = s.grad_in[i].v;
        out.hvp[i] = s.grad_in[i].d;
    }
    out.mixed.resize(net.param_count());
    for (int i = 0; i < net.param_count(); ++i) {
        out.mixed[i] = s.grad_w[i].d;
    }
    return out;
}

Vec energy_hvp(const EnergyNet& net, VecRef u, VecRef x, VecRef w, VecRef lambda)
{
    return energy_second_order(net, u, x, w, lambda).hvp;
}

Vec energy_mixed_vjp(const EnergyNet& net, VecRef u, VecRef x, VecRef w, VecRef lambda)
{
    return energy_second_order(net, u, x, w, lambda).mixed;
}

Vec init_params(const Mlp& net, std::mt19937_64& rng)
{
    Vec w(net.param_count());
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const LayerSpec& L = net.layers()[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(L.in_dim));
        std::uniform_real_distribution<double> dist(-bound, bound);
        const int begin = net.weight_offset(l);
        const int end = net.bias_offset(l) + L.out_dim;
        for (int i = begin; i < end; ++i) {
            w[i] = dist(rng);
        }
    }
    return w;
}

AffineMap::AffineMap(Mat weights, Vec bias) : W(std::move(weights)), b(std::move(bias))
{
    require_dim(b.size(), W.rows(), "affine map bias");
}

AffineMap AffineMap::identity(int n) { return {Mat::Identity(n, n), Vec::Zero(n)}; }

AffineMap AffineMap::padded_identity(int in_dim, int out_dim)
{
    return {Mat::Identity(out_dim, in_dim), Vec::Zero(out_dim)};
}

AffineMap AffineMap::random(int in_dim, int out_dim, std::mt19937_64& rng)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Mat W(out_dim, in_dim);
    for (int i = 0; i < out_dim; ++i) {
        for (int j = 0; j < in_dim; ++j) {
            W(i, j) = dist(rng);
        }
    }
    Vec b(out_dim);
    for (int i = 0; i < out_dim; ++i) {
        b[i] = dist(rng);
    }
    return {W, b};
}

Vec AffineMap::params() const
{
    Vec v(param_count());
    int k = 0;
    for (int i = 0; i < out_dim(); ++i) {
        for (int j = 0; j < in_dim(); ++j) {
            v[k++] = W(i, j);
        }
    }
    v.tail(out_dim()) = b;
    return v;
}

void AffineMap::set_params(VecRef v)
{
    require_dim(v.size(), param_count(), "affine map parameter vector");
    int k = 0;
    for (int i = 0; i < out_dim(); ++i) {
        for (int j = 0; j < in_dim(); ++j) {
            W(i, j) = v[k++];
        }
    }
    b = v.tail(out_dim());
}

Vec affine_apply(const AffineMap& m, VecRef v)
{
    require_dim(v.size(), m.in_dim(), "affine map input");
    return m.W * v + m.b;
}

Vec affine_vjp_params(const AffineMap& m, VecRef v, VecRef upstream)
{
    require_dim(v.size(), m.in_dim(), "affine map input");
    require_dim(upstream.size(), m.out_dim(), "affine map cotangent");
    Vec g(m.param_count());
    int k = 0;
    for (int i = 0; i < m.out_dim(); ++i) {
        for (int j = 0; j < m.in_dim(); ++j) {
            g[k++] = upstream[i] * v[j];
        }
    }
    g.tail(m.out_dim()) = upstream;
    return g;
}

Vec affine_vjp_input(const AffineMap& m, VecRef upstream)
{
    require_dim(upstream.size(), m.out_dim(), "affine map cotangent");
    return m.W.transpose() * upstream;
}

std::string to_string(Head head)
{
    switch (head) {
    case Head::square:
        return "square";
    case Head::sigmoid:
        return "sigmoid";
    case Head::identity:
        return "identity";
    }
    return "identity";
}

Head parse_head(const std::string& name)
{
    if (name == "square") {
        return Head::square;
    }
    if (name == "sigmoid") {
        return Head::sigmoid;
    }
    if (name == "identity") {
        return Head::identity;
    }
    throw ConfigError("unknown energy head '" + name + "' (expected square, sigmoid or identity)");
}

} // namespace snf
