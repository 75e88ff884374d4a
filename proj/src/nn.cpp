#include "pdw/nn.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "pdw/random.hpp"
#include "pdw/signal.hpp"

namespace pdw::nn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool cond, const char* what) {
    if (!cond) throw std::invalid_argument(what);
}

}  // namespace

Conv1d::Conv1d(std::size_t in, std::size_t out, std::size_t f)
    : in_channels(in), out_channels(out), filter_len(f), weights(in * out * f, 0.0), bias(out, 0.0) {
    require(in > 0 && out > 0 && f > 0, "Conv1d: dimensions must be positive");
}

Matrix Conv1d::forward(const Matrix& x, OpCounter* counter) const {
    require(x.rows == in_channels, "Conv1d: input channel mismatch");
    if (x.cols < filter_len) throw std::invalid_argument("Conv1d: input shorter than filter");
    const std::size_t K = output_width(x.cols);
    Matrix out(out_channels, K);
    for (std::size_t o = 0; o < out_channels; ++o) {
        double* dst = &out(o, 0);
        for (std::size_t k = 0; k < K; ++k) dst[k] = bias[o];
        for (std::size_t c = 0; c < in_channels; ++c) {
            const double* src = x.data.data() + c * x.cols;
            const double* wf = &weights[(o * in_channels + c) * filter_len];
            for (std::size_t f = 0; f < filter_len; ++f) {
                const double wv = wf[f];
                for (std::size_t k = 0; k < K; ++k) dst[k] += wv * src[k + f];
            }
        }
    }
    if (counter) {
        const std::uint64_t macs = static_cast<std::uint64_t>(filter_len) * in_channels * out_channels * K;
        counter->muls += macs;
        counter->adds += macs;  // F*ch_i - 1 sum adds plus one bias add per output
    }
    return out;
}

Matrix Conv1d::backward(const Matrix& x, const Matrix& grad_out, std::span<double> grad_w,
                        std::span<double> grad_b) const {
    require(x.rows == in_channels && x.cols >= filter_len, "Conv1d::backward: input shape mismatch");
    const std::size_t K = output_width(x.cols);
    require(grad_out.rows == out_channels && grad_out.cols == K,
            "Conv1d::backward: gradient shape mismatch");
    require(grad_w.size() == weights.size() && grad_b.size() == bias.size(),
            "Conv1d::backward: parameter gradient size mismatch");
    Matrix grad_in(in_channels, x.cols);
    for (std::size_t o = 0; o < out_channels; ++o) {
        const double* g = grad_out.data.data() + o * grad_out.cols;
        double gb = 0.0;
        for (std::size_t k = 0; k < K; ++k) gb += g[k];
        grad_b[o] += gb;
        for (std::size_t c = 0; c < in_channels; ++c) {
            const double* src = x.data.data() + c * x.cols;
            double* gin = &grad_in(c, 0);
            const std::size_t base = (o * in_channels + c) * filter_len;
            for (std::size_t f = 0; f < filter_len; ++f) {
                double acc = 0.0;
                const double wv = weights[base + f];
                for (std::size_t k = 0; k < K; ++k) {
                    acc += g[k] * src[k + f];
                    gin[k + f] += wv * g[k];
                }
                grad_w[base + f] += acc;
            }
        }
    }
    return grad_in;
}

Dense::Dense(std::size_t in, std::size_t out)
    : in_features(in), out_features(out), weights(in * out, 0.0), bias(out, 0.0) {
    require(in > 0 && out > 0, "Dense: dimensions must be positive");
}

Matrix Dense::forward(const Matrix& x, OpCounter* counter) const {
    require(x.size() == in_features, "Dense: input size mismatch");
    Matrix out(out_features, 1);
    for (std::size_t o = 0; o < out_features; ++o) {
        const double* w = &weights[o * in_features];
        double acc = bias[o];
        for (std::size_t i = 0; i < in_features; ++i) acc += w[i] * x.data[i];
        out.data[o] = acc;
    }
    if (counter) {
        counter->muls += static_cast<std::uint64_t>(in_features) * out_features;
        counter->adds += static_cast<std::uint64_t>(in_features) * out_features;
    }
    return out;
}

Matrix Dense::backward(const Matrix& x, const Matrix& grad_out, std::span<double> grad_w,
                       std::span<double> grad_b) const {
    require(x.size() == in_features, "Dense::backward: input size mismatch");
    require(grad_out.size() == out_features, "Dense::backward: gradient size mismatch");
    require(grad_w.size() == weights.size() && grad_b.size() == bias.size(),
            "Dense::backward: parameter gradient size mismatch");
    Matrix grad_in(x.rows, x.cols);
    for (std::size_t o = 0; o < out_features; ++o) {
        const double g = grad_out.data[o];
        grad_b[o] += g;
        const double* w = &weights[o * in_features];
        double* gw = &grad_w[o * in_features];
        for (std::size_t i = 0; i < in_features; ++i) {
            gw[i] += g * x.data[i];
            grad_in.data[i] += g * w[i];
        }
    }
    return grad_in;
}

Matrix Relu::forward(const Matrix& x) const {
    Matrix out = x;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

Matrix Relu::backward(const Matrix& x, const Matrix& grad_out) const {
    require(x.size() == grad_out.size(), "Relu::backward: shape mismatch");
    Matrix g = grad_out;
    for (std::size_t i = 0; i < g.data.size(); ++i)
        if (!(x.data[i] > 0.0)) g.data[i] = 0.0;
    return g;
}

Matrix Flatten::forward(const Matrix& x) const {
    Matrix out = x;
    out.rows = x.size();
    out.cols = 1;
    return out;
}

Matrix Flatten::backward(const Matrix& x, const Matrix& grad_out) const {
    require(grad_out.size() == x.size(), "Flatten::backward: shape mismatch");
    Matrix g = grad_out;
    g.rows = x.rows;
    g.cols = x.cols;
    return g;
}

Matrix Sequential::forward(const Matrix& x, OpCounter* counter) const {
    Matrix cur = x;
    for (const auto& layer : layers_) {
        cur = std::visit(Overloaded{
                             [&](const Conv1d& l) { return l.forward(cur, counter); },
                             [&](const Dense& l) { return l.forward(cur, counter); },
                             [&](const Relu& l) { return l.forward(cur); },
                             [&](const Flatten& l) { return l.forward(cur); },
                         },
                         layer);
    }
    return cur;
}

const Matrix& Sequential::forward(const Matrix& x, Trace& trace) const {
    trace.activations.resize(layers_.size() + 1);
    trace.activations[0] = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Matrix& in = trace.activations[i];
        trace.activations[i + 1] =
            std::visit(Overloaded{
                           [&](const Conv1d& l) { return l.forward(in); },
                           [&](const Dense& l) { return l.forward(in); },
                           [&](const Relu& l) { return l.forward(in); },
                           [&](const Flatten& l) { return l.forward(in); },
                       },
                       layers_[i]);
    }
    return trace.activations.back();
}

Matrix Sequential::backward(const Trace& trace, const Matrix& grad_out, Gradients& grads) const {
    require(trace.activations.size() == layers_.size() + 1, "Sequential::backward: stale trace");
    // Parameter blocks are laid out front to back; walk them back to front.
    std::size_t block = grads.size();
    Matrix g = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const Matrix& in = trace.activations[i];
        g = std::visit(Overloaded{
                           [&](const Conv1d& l) {
                               block -= 2;
                               return l.backward(in, g, grads[block], grads[block + 1]);
                           },
                           [&](const Dense& l) {
                               block -= 2;
                               return l.backward(in, g, grads[block], grads[block + 1]);
                           },
                           [&](const Relu& l) { return l.backward(in, g); },
                           [&](const Flatten& l) { return l.backward(in, g); },
                       },
                       layers_[i]);
    }
    return g;
}

std::vector<std::span<double>> Sequential::parameters() {
    std::vector<std::span<double>> out;
    for (auto& layer : layers_) {
        if (auto* c = std::get_if<Conv1d>(&layer)) {
            out.emplace_back(c->weights);
            out.emplace_back(c->bias);
        } else if (auto* d = std::get_if<Dense>(&layer)) {
            out.emplace_back(d->weights);
            out.emplace_back(d->bias);
        }
    }
    return out;
}

std::vector<std::span<const double>> Sequential::parameters() const {
    std::vector<std::span<const double>> out;
    for (const auto& layer : layers_) {
        if (const auto* c = std::get_if<Conv1d>(&layer)) {
            out.emplace_back(c->weights);
            out.emplace_back(c->bias);
        } else if (const auto* d = std::get_if<Dense>(&layer)) {
            out.emplace_back(d->weights);
            out.emplace_back(d->bias);
        }
    }
    return out;
}

Gradients Sequential::zero_gradients() const {
    Gradients g;
    for (const auto& p : parameters()) g.emplace_back(p.size(), 0.0);
    return g;
}

std::size_t Sequential::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.size();
    return n;
}

LossValue mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) throw std::invalid_argument("mse_loss: length mismatch");
    if (pred.empty()) throw std::invalid_argument("mse_loss: empty input");
    const auto n = static_cast<double>(pred.size());
    LossValue out;
    out.grad.resize(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        out.loss += d * d;
        out.grad[i] = 2.0 * d / n;
    }
    out.loss /= n;
    return out;
}

AdamState AdamState::for_parameters(const std::vector<std::span<double>>& params) {
    AdamState s;
    for (const auto& p : params) {
        s.m.emplace_back(p.size(), 0.0);
        s.v.emplace_back(p.size(), 0.0);
    }
    return s;
}

void adam_step(const std::vector<std::span<double>>& params, const Gradients& grads,
               AdamState& state, const AdamConfig& cfg) {
    if (grads.size() != params.size() || state.m.size() != params.size() ||
        state.v.size() != params.size())
        throw std::invalid_argument("adam_step: parameter block count mismatch");
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (grads[b].size() != params[b].size() || state.m[b].size() != params[b].size() ||
            state.v[b].size() != params[b].size())
            throw std::invalid_argument("adam_step: block " + std::to_string(b) + " shape mismatch");
        for (double g : grads[b])
            if (!std::isfinite(g)) throw NumericalError("adam_step: non-finite gradient");
    }
    ++state.t;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto& m = state.m[b];
        auto& v = state.v[b];
        const auto& g = grads[b];
        auto p = params[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= cfg.alpha * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

void initialize(Sequential& net, std::uint64_t seed) {
    Rng rng(seed);
    auto& layers = net.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const bool relu_follows = i + 1 < layers.size() && std::holds_alternative<Relu>(layers[i + 1]);
        auto fill = [&](std::vector<double>& w, double fan_in, double fan_out) {
            const double limit = relu_follows ? std::sqrt(6.0 / fan_in) : std::sqrt(6.0 / (fan_in + fan_out));
            for (double& v : w) v = rng.uniform(-limit, limit);
        };
        if (auto* c = std::get_if<Conv1d>(&layers[i])) {
            fill(c->weights, static_cast<double>(c->in_channels * c->filter_len),
                 static_cast<double>(c->out_channels * c->filter_len));
            std::fill(c->bias.begin(), c->bias.end(), 0.0);
        } else if (auto* d = std::get_if<Dense>(&layers[i])) {
            fill(d->weights, static_cast<double>(d->in_features), static_cast<double>(d->out_features));
            std::fill(d->bias.begin(), d->bias.end(), 0.0);
        }
    }
}

double evaluate_loss(const Sequential& net, const ExampleSource& data) {
    if (data.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    Matrix x;
    std::vector<double> t;
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        data.example(i, x, t);
        const Matrix y = net.forward(x);
        total += mse_loss(y.data, t).loss;
    }
    return total / static_cast<double>(data.size());
}

std::vector<EpochStats> train(Sequential& net, const ExampleSource& train_data,
                              const ExampleSource* val_data, const TrainConfig& cfg,
                              const EpochCallback& on_epoch) {
    if (train_data.size() == 0) throw std::invalid_argument("train: empty training set");
    if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");

    Rng rng(cfg.seed);
    const std::size_t n = train_data.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    auto params = net.parameters();
    auto adam = AdamState::for_parameters(params);
    auto grads = net.zero_gradients();
    Sequential::Trace trace;
    Matrix x;
    std::vector<double> target;
    std::vector<EpochStats> history;
    history.reserve(cfg.epochs);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t end = std::min(n, start + cfg.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
            for (std::size_t b = start; b < end; ++b) {
                train_data.example(order[b], x, target);
                const Matrix& y = net.forward(x, trace);
                auto lv = mse_loss(y.data, target);
                epoch_loss += lv.loss;
                Matrix g(y.rows, y.cols);
                for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = lv.grad[i] * inv_batch;
                net.backward(trace, g, grads);
            }
            adam_step(params, grads, adam, cfg.adam);
        }
        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.train_loss = epoch_loss / static_cast<double>(n);
        if (val_data && val_data->size() > 0) stats.val_loss = evaluate_loss(net, *val_data);
        if (!std::isfinite(stats.train_loss) ||
            (val_data && val_data->size() > 0 && !std::isfinite(stats.val_loss)))
            throw NumericalError("train: loss diverged at epoch " + std::to_string(stats.epoch));
        history.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    return history;
}

}  // namespace pdw::nn
