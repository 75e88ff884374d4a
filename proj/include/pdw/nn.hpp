#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <variant>
#include <vector>

// Small dense-CPU network engine: valid 1D convolution, fully connected,
// ReLU, flatten, MSE loss, backpropagation and Adam. Double precision.

namespace pdw::nn {

// Row-major [rows x cols]. For sequence data rows are channels, cols are time.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::size_t size() const { return data.size(); }
};

// Arithmetic actually executed by an instrumented forward pass.
struct OpCounter {
    std::uint64_t muls = 0;
    std::uint64_t adds = 0;
};

struct Conv1d {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t filter_len = 1;
    std::vector<double> weights;  // [out][in][filter_len]
    std::vector<double> bias;     // [out]

    Conv1d() = default;
    Conv1d(std::size_t in, std::size_t out, std::size_t f);

    double& w(std::size_t o, std::size_t c, std::size_t f) {
        return weights[(o * in_channels + c) * filter_len + f];
    }
    double w(std::size_t o, std::size_t c, std::size_t f) const {
        return weights[(o * in_channels + c) * filter_len + f];
    }
    std::size_t output_width(std::size_t input_width) const { return input_width - filter_len + 1; }

    // Valid cross-correlation, stride 1: out[o][k] = b[o] + Σ w[o][c][f] in[c][k+f].
    Matrix forward(const Matrix& x, OpCounter* counter = nullptr) const;
    // Adds parameter gradients into grad_w / grad_b and returns dL/dx.
    Matrix backward(const Matrix& x, const Matrix& grad_out, std::span<double> grad_w,
                    std::span<double> grad_b) const;
};

struct Dense {
    std::size_t in_features = 1;
    std::size_t out_features = 1;
    std::vector<double> weights;  // [out][in]
    std::vector<double> bias;     // [out]

    Dense() = default;
    Dense(std::size_t in, std::size_t out);

    // Input is treated as a flat vector of in_features values; output is [out x 1].
    Matrix forward(const Matrix& x, OpCounter* counter = nullptr) const;
    Matrix backward(const Matrix& x, const Matrix& grad_out, std::span<double> grad_w,
                    std::span<double> grad_b) const;
};

struct Relu {
    Matrix forward(const Matrix& x) const;
    Matrix backward(const Matrix& x, const Matrix& grad_out) const;
};

// Channel-major flatten to [rows*cols x 1].
struct Flatten {
    Matrix forward(const Matrix& x) const;
    Matrix backward(const Matrix& x, const Matrix& grad_out) const;
};

using Layer = std::variant<Conv1d, Dense, Relu, Flatten>;

// One buffer per parameter block, in parameters() order.
using Gradients = std::vector<std::vector<double>>;

class Sequential {
public:
    // activations[i] is the input of layer i; activations.back() is the output.
    struct Trace {
        std::vector<Matrix> activations;
    };

    void add(Layer layer) { layers_.push_back(std::move(layer)); }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    Matrix forward(const Matrix& x, OpCounter* counter = nullptr) const;
    const Matrix& forward(const Matrix& x, Trace& trace) const;
    // Accumulates parameter gradients into grads and returns dL/dinput.
    Matrix backward(const Trace& trace, const Matrix& grad_out, Gradients& grads) const;

    // Weights then bias for every parametrised layer, in layer order.
    std::vector<std::span<double>> parameters();
    std::vector<std::span<const double>> parameters() const;
    Gradients zero_gradients() const;
    std::size_t parameter_count() const;

private:
    std::vector<Layer> layers_;
};

struct LossValue {
    double loss = 0.0;
    std::vector<double> grad;
};

// loss = Σ (target - pred)^2 / n, grad = 2 (pred - target) / n.
LossValue mse_loss(std::span<const double> pred, std::span<const double> target);

struct AdamConfig {
    double alpha = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Gradients m;
    Gradients v;
    std::uint64_t t = 0;

    static AdamState for_parameters(const std::vector<std::span<double>>& params);
};

// Bias-corrected Adam update. Throws NumericalError, leaving params and state
// untouched, if any gradient is non-finite; std::invalid_argument on shape mismatch.
void adam_step(const std::vector<std::span<double>>& params, const Gradients& grads,
               AdamState& state, const AdamConfig& cfg);

// Seeded in-place init: He-uniform for layers followed by ReLU, Xavier-uniform
// otherwise. Biases are zeroed.
void initialize(Sequential& net, std::uint64_t seed);

// Random-access supervised examples.
class ExampleSource {
public:
    virtual ~ExampleSource() = default;
    virtual std::size_t size() const = 0;
    virtual void example(std::size_t index, Matrix& input, std::vector<double>& target) const = 0;
};

// In-memory source for small problems and tests.
class VectorSource : public ExampleSource {
public:
    void push(Matrix input, std::vector<double> target) {
        inputs_.push_back(std::move(input));
        targets_.push_back(std::move(target));
    }
    std::size_t size() const override { return inputs_.size(); }
    void example(std::size_t index, Matrix& input, std::vector<double>& target) const override {
        input = inputs_[index];
        target = targets_[index];
    }

private:
    std::vector<Matrix> inputs_;
    std::vector<std::vector<double>> targets_;
};

enum class Loss { Mse };

struct TrainConfig {
    std::size_t batch_size = 80;
    std::size_t epochs = 400;
    Loss loss = Loss::Mse;
    std::uint64_t seed = 1;
    AdamConfig adam{};
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Mean loss of the network over a source.
double evaluate_loss(const Sequential& net, const ExampleSource& data);

// Seeded per-epoch shuffle, mini-batches of batch_size, mean batch gradient,
// one Adam step per batch. Throws std::invalid_argument on an empty training
// set and NumericalError if a loss or gradient turns non-finite.
std::vector<EpochStats> train(Sequential& net, const ExampleSource& train_data,
                              const ExampleSource* val_data, const TrainConfig& cfg,
                              const EpochCallback& on_epoch = {});

}  // namespace pdw::nn
