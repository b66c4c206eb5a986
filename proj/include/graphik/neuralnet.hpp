#pragma once

#include "graphik/matrix.hpp"
#include "graphik/rng.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace graphik::nn {

/// Records matrix-valued primitives during a forward pass and replays their
/// adjoints in reverse. Every recorded value keeps its own gradient buffer, so
/// gradients of inputs are available as well as those of parameters.
class Tape {
public:
    struct Var {
        int id = -1;
    };

    /// Leaf holding a copy of value. Gradients are kept for all leaves.
    Var leaf(const Matrix& value);
    Var leaf(Matrix&& value);
    Var scalar(double value);

    Var matmul(Var a, Var b);
    /// x + bias broadcast over rows; bias is 1 x cols.
    Var add_row(Var x, Var bias);
    Var add(Var a, Var b);
    Var mul(Var a, Var b);  ///< elementwise
    /// Rectifier; the subgradient at exactly 0 is 0.
    Var relu(Var x);
    Var concat_cols(std::span<const Var> parts);
    Var gather_rows(Var x, std::shared_ptr<const std::vector<int>> index);
    /// out[index[k]] += x[k]; rows are visited in increasing k.
    Var scatter_add_rows(Var x, std::shared_ptr<const std::vector<int>> index, Eigen::Index rows);
    Var sum(Var x);  ///< 1 x 1
    /// scale * sum((prediction - target)^2), 1 x 1.
    Var squared_error(Var prediction, const Matrix& target, double scale);

    [[nodiscard]] const Matrix& value(Var v) const;
    /// Adjoint of v after backward(); zero matrix if v did not influence the output.
    [[nodiscard]] const Matrix& grad(Var v) const;
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

    /// Seeds output with the given adjoint and propagates to every recorded value.
    /// Throws StateError if nothing was recorded or output is not a 1 x 1 value
    /// of this tape.
    void backward(Var output, double adjoint = 1.0);

    void clear() noexcept {
        nodes_.clear();
        backward_done_ = false;
    }

private:
    enum class Op { leaf, matmul, add_row, add, mul, relu, concat, gather, scatter, sum, squared_error };

    struct Node {
        Op op = Op::leaf;
        std::vector<int> inputs;
        Matrix value;
        Matrix grad;
        std::shared_ptr<const std::vector<int>> index;
        Matrix target;
        double scale = 1.0;
    };

    Var push(Node&& node);
    const Node& at(Var v) const;
    Matrix& grad_buffer(int id);

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

struct DenseLayer {
    Matrix weight;  ///< fan_in x fan_out
    Matrix bias;    ///< 1 x fan_out
};

/// Named view of one parameter block, used by the optimizer.
struct ParamRef {
    std::string name;
    Matrix* value;
};

/// Dense feed-forward network: `hidden_layers` rectified layers of `width`
/// units, then an affine output layer.
class MLP {
public:
    MLP() = default;
    /// Zero-initialized network.
    MLP(int input_dim, int hidden_layers, int width, int output_dim);

    /// Weights ~ N(0, 2 / fan_in), biases zero.
    void init_he(CounterRng& rng);

    [[nodiscard]] int input_dim() const noexcept { return input_dim_; }
    [[nodiscard]] int output_dim() const noexcept { return output_dim_; }
    [[nodiscard]] int hidden_layers() const noexcept { return hidden_layers_; }
    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] std::size_t parameter_count() const noexcept;

    [[nodiscard]] std::vector<DenseLayer>& layers() noexcept { return layers_; }
    [[nodiscard]] const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

    [[nodiscard]] std::vector<double> forward(std::span<const double> input) const;
    /// Row-wise evaluation of a batch.
    [[nodiscard]] Matrix forward(const Matrix& batch) const;

    /// Records the forward pass on the tape. Parameter leaves are appended to
    /// params in layer order (weight, bias, weight, bias, ...).
    Tape::Var record(Tape& tape, Tape::Var input, std::vector<Tape::Var>& params) const;

    void append_parameters(const std::string& prefix, std::vector<ParamRef>& out);

private:
    int input_dim_ = 0;
    int hidden_layers_ = 0;
    int width_ = 0;
    int output_dim_ = 0;
    std::vector<DenseLayer> layers_;
};

void to_json(nlohmann::json& j, const MLP& net);
void from_json(const nlohmann::json& j, MLP& net);

struct AdamWConfig {
    double learning_rate = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

struct AdamWState {
    AdamWConfig config;
    std::int64_t step = 0;
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
};

/// Decoupled weight decay (p *= 1 - lr * wd) followed by the bias-corrected
/// Adam update. Moments are allocated on the first step. If any gradient is
/// non-finite nothing is modified and NumericalError names the block.
void adamw_step(AdamWState& state, std::span<const ParamRef> params, std::span<const Matrix> grads);

void to_json(nlohmann::json& j, const AdamWState& state);
void from_json(const nlohmann::json& j, AdamWState& state);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace graphik::nn
