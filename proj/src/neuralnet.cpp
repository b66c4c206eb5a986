#include "graphik/neuralnet.hpp"

#include "graphik/errors.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace graphik::nn {

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tape::Var Tape::push(Node&& node) {
    nodes_.push_back(std::move(node));
    backward_done_ = false;
    return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::at(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw StateError("Tape: variable not recorded on this tape");
    return nodes_[static_cast<std::size_t>(v.id)];
}

Matrix& Tape::grad_buffer(int id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols()) {
        n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    }
    return n.grad;
}

Tape::Var Tape::leaf(const Matrix& value) {
    Node n;
    n.value = value;
    return push(std::move(n));
}

Tape::Var Tape::leaf(Matrix&& value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

Tape::Var Tape::scalar(double value) {
    Matrix m(1, 1);
    m(0, 0) = value;
    return leaf(std::move(m));
}

Tape::Var Tape::matmul(Var a, Var b) {
    const auto& va = at(a).value;
    const auto& vb = at(b).value;
    if (va.cols() != vb.rows()) throw std::invalid_argument("Tape::matmul: inner dimensions differ");
    Node n;
    n.op = Op::matmul;
    n.inputs = {a.id, b.id};
    n.value.noalias() = va * vb;
    return push(std::move(n));
}

Tape::Var Tape::add_row(Var x, Var bias) {
    const auto& vx = at(x).value;
    const auto& vb = at(bias).value;
    if (vb.rows() != 1 || vb.cols() != vx.cols()) throw std::invalid_argument("Tape::add_row: bias shape mismatch");
    Node n;
    n.op = Op::add_row;
    n.inputs = {x.id, bias.id};
    n.value = vx.rowwise() + vb.row(0);
    return push(std::move(n));
}

Tape::Var Tape::add(Var a, Var b) {
    const auto& va = at(a).value;
    const auto& vb = at(b).value;
    if (va.rows() != vb.rows() || va.cols() != vb.cols()) throw std::invalid_argument("Tape::add: shape mismatch");
    Node n;
    n.op = Op::add;
    n.inputs = {a.id, b.id};
    n.value = va + vb;
    return push(std::move(n));
}

Tape::Var Tape::mul(Var a, Var b) {
    const auto& va = at(a).value;
    const auto& vb = at(b).value;
    if (va.rows() != vb.rows() || va.cols() != vb.cols()) throw std::invalid_argument("Tape::mul: shape mismatch");
    Node n;
    n.op = Op::mul;
    n.inputs = {a.id, b.id};
    n.value = va.cwiseProduct(vb);
    return push(std::move(n));
}

Tape::Var Tape::relu(Var x) {
    Node n;
    n.op = Op::relu;
    n.inputs = {x.id};
    n.value = at(x).value.cwiseMax(0.0);
    return push(std::move(n));
}

Tape::Var Tape::concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("Tape::concat_cols: nothing to concatenate");
    const Eigen::Index rows = at(parts[0]).value.rows();
    Eigen::Index cols = 0;
    for (auto p : parts) {
        if (at(p).value.rows() != rows) throw std::invalid_argument("Tape::concat_cols: row counts differ");
        cols += at(p).value.cols();
    }
    Node n;
    n.op = Op::concat;
    n.value.resize(rows, cols);
    Eigen::Index c = 0;
    for (auto p : parts) {
        const auto& v = at(p).value;
        n.value.middleCols(c, v.cols()) = v;
        c += v.cols();
        n.inputs.push_back(p.id);
    }
    return push(std::move(n));
}

Tape::Var Tape::gather_rows(Var x, std::shared_ptr<const std::vector<int>> index) {
    const auto& vx = at(x).value;
    Node n;
    n.op = Op::gather;
    n.inputs = {x.id};
    n.value.resize(static_cast<Eigen::Index>(index->size()), vx.cols());
    for (std::size_t k = 0; k < index->size(); ++k) {
        const int r = (*index)[k];
        if (r < 0 || r >= vx.rows()) throw std::invalid_argument("Tape::gather_rows: index out of range");
        n.value.row(static_cast<Eigen::Index>(k)) = vx.row(r);
    }
    n.index = std::move(index);
    return push(std::move(n));
}

Tape::Var Tape::scatter_add_rows(Var x, std::shared_ptr<const std::vector<int>> index, Eigen::Index rows) {
    const auto& vx = at(x).value;
    if (static_cast<Eigen::Index>(index->size()) != vx.rows()) {
        throw std::invalid_argument("Tape::scatter_add_rows: one index per input row required");
    }
    Node n;
    n.op = Op::scatter;
    n.inputs = {x.id};
    n.value = Matrix::Zero(rows, vx.cols());
    for (std::size_t k = 0; k < index->size(); ++k) {
        const int r = (*index)[k];
        if (r < 0 || r >= rows) throw std::invalid_argument("Tape::scatter_add_rows: index out of range");
        n.value.row(r) += vx.row(static_cast<Eigen::Index>(k));
    }
    n.index = std::move(index);
    return push(std::move(n));
}

Tape::Var Tape::sum(Var x) {
    Node n;
    n.op = Op::sum;
    n.inputs = {x.id};
    n.value.resize(1, 1);
    n.value(0, 0) = at(x).value.sum();
    return push(std::move(n));
}

Tape::Var Tape::squared_error(Var prediction, const Matrix& target, double scale) {
    const auto& vp = at(prediction).value;
    if (vp.rows() != target.rows() || vp.cols() != target.cols()) {
        throw std::invalid_argument("Tape::squared_error: prediction and target shapes differ");
    }
    Node n;
    n.op = Op::squared_error;
    n.inputs = {prediction.id};
    n.target = target;
    n.scale = scale;
    n.value.resize(1, 1);
    n.value(0, 0) = scale * (vp - target).squaredNorm();
    return push(std::move(n));
}

const Matrix& Tape::value(Var v) const { return at(v).value; }

const Matrix& Tape::grad(Var v) const {
    const auto& n = at(v);
    if (!backward_done_) throw StateError("Tape::grad: backward() has not been run");
    if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols()) {
        // Untouched by the output; materialize zeros lazily.
        auto& self = const_cast<Tape&>(*this);
        return self.grad_buffer(v.id);
    }
    return n.grad;
}

void Tape::backward(Var output, double adjoint) {
    if (nodes_.empty()) throw StateError("Tape::backward: no forward pass recorded");
    const auto& out = at(output);
    if (out.value.rows() != 1 || out.value.cols() != 1) throw StateError("Tape::backward: output must be 1 x 1");

    for (auto& n : nodes_) n.grad.resize(0, 0);
    grad_buffer(output.id)(0, 0) = adjoint;

    for (int id = output.id; id >= 0; --id) {
        auto& n = nodes_[static_cast<std::size_t>(id)];
        if (n.op == Op::leaf || n.grad.size() == 0) continue;
        const Matrix& g = n.grad;
        switch (n.op) {
            case Op::matmul: {
                const auto& a = nodes_[n.inputs[0]].value;
                const auto& b = nodes_[n.inputs[1]].value;
                grad_buffer(n.inputs[0]).noalias() += g * b.transpose();
                grad_buffer(n.inputs[1]).noalias() += a.transpose() * g;
                break;
            }
            case Op::add_row:
                grad_buffer(n.inputs[0]) += g;
                grad_buffer(n.inputs[1]) += g.colwise().sum();
                break;
            case Op::add:
                grad_buffer(n.inputs[0]) += g;
                grad_buffer(n.inputs[1]) += g;
                break;
            case Op::mul: {
                const Matrix a = nodes_[n.inputs[0]].value;
                const Matrix b = nodes_[n.inputs[1]].value;
                grad_buffer(n.inputs[0]) += g.cwiseProduct(b);
                grad_buffer(n.inputs[1]) += g.cwiseProduct(a);
                break;
            }
            case Op::relu: {
                const auto& x = nodes_[n.inputs[0]].value;
                grad_buffer(n.inputs[0]) += (x.array() > 0.0).select(g, 0.0);
                break;
            }
            case Op::concat: {
                Eigen::Index c = 0;
                for (int in : n.inputs) {
                    const Eigen::Index w = nodes_[in].value.cols();
                    grad_buffer(in) += g.middleCols(c, w);
                    c += w;
                }
                break;
            }
            case Op::gather: {
                Matrix& gx = grad_buffer(n.inputs[0]);
                for (std::size_t k = 0; k < n.index->size(); ++k) gx.row((*n.index)[k]) += g.row(static_cast<Eigen::Index>(k));
                break;
            }
            case Op::scatter: {
                Matrix& gx = grad_buffer(n.inputs[0]);
                for (std::size_t k = 0; k < n.index->size(); ++k) gx.row(static_cast<Eigen::Index>(k)) += g.row((*n.index)[k]);
                break;
            }
            case Op::sum:
                grad_buffer(n.inputs[0]).array() += g(0, 0);
                break;
            case Op::squared_error: {
                const auto& p = nodes_[n.inputs[0]].value;
                grad_buffer(n.inputs[0]) += (2.0 * n.scale * g(0, 0)) * (p - n.target);
                break;
            }
            case Op::leaf:
                break;
        }
    }
    backward_done_ = true;
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

MLP::MLP(int input_dim, int hidden_layers, int width, int output_dim)
    : input_dim_(input_dim), hidden_layers_(hidden_layers), width_(width), output_dim_(output_dim) {
    if (input_dim < 1 || output_dim < 1 || hidden_layers < 0 || (hidden_layers > 0 && width < 1)) {
        throw std::invalid_argument("MLP: invalid layer sizes");
    }
    int fan_in = input_dim;
    for (int l = 0; l <= hidden_layers; ++l) {
        const int fan_out = l == hidden_layers ? output_dim : width;
        layers_.push_back({Matrix::Zero(fan_in, fan_out), Matrix::Zero(1, fan_out)});
        fan_in = fan_out;
    }
}

void MLP::init_he(CounterRng& rng) {
    for (auto& layer : layers_) {
        const double sd = std::sqrt(2.0 / static_cast<double>(layer.weight.rows()));
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = sd * rng.normal();
        layer.bias.setZero();
    }
}

std::size_t MLP::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

std::vector<double> MLP::forward(std::span<const double> input) const {
    if (static_cast<int>(input.size()) != input_dim_) {
        throw std::invalid_argument("MLP::forward: expected input of length " + std::to_string(input_dim_) +
                                    ", got " + std::to_string(input.size()));
    }
    Matrix x = Eigen::Map<const Matrix>(input.data(), 1, input_dim_);
    x = forward(x);
    return {x.data(), x.data() + x.size()};
}

Matrix MLP::forward(const Matrix& batch) const {
    if (batch.cols() != input_dim_) throw std::invalid_argument("MLP::forward: input width mismatch");
    Matrix x = batch;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Matrix y = x * layers_[l].weight;
        y.rowwise() += layers_[l].bias.row(0);
        if (l + 1 < layers_.size()) y = y.cwiseMax(0.0);
        x = std::move(y);
    }
    return x;
}

Tape::Var MLP::record(Tape& tape, Tape::Var input, std::vector<Tape::Var>& params) const {
    if (tape.value(input).cols() != input_dim_) throw std::invalid_argument("MLP::record: input width mismatch");
    Tape::Var x = input;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto w = tape.leaf(layers_[l].weight);
        const auto b = tape.leaf(layers_[l].bias);
        params.push_back(w);
        params.push_back(b);
        x = tape.add_row(tape.matmul(x, w), b);
        if (l + 1 < layers_.size()) x = tape.relu(x);
    }
    return x;
}

void MLP::append_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        out.push_back({prefix + "." + std::to_string(l) + ".weight", &layers_[l].weight});
        out.push_back({prefix + "." + std::to_string(l) + ".bias", &layers_[l].bias});
    }
}

nlohmann::json matrix_to_json(const Matrix& m) {
    return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()},
                          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw std::invalid_argument("matrix: size mismatch");
    return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

void to_json(nlohmann::json& j, const MLP& net) {
    j = nlohmann::json{{"input_dim", net.input_dim()},
                       {"hidden_layers", net.hidden_layers()},
                       {"width", net.width()},
                       {"output_dim", net.output_dim()},
                       {"activation", "relu"},
                       {"layers", nlohmann::json::array()}};
    for (const auto& l : net.layers()) {
        j["layers"].push_back({{"weight", matrix_to_json(l.weight)}, {"bias", matrix_to_json(l.bias)}});
    }
}

void from_json(const nlohmann::json& j, MLP& net) {
    net = MLP(j.at("input_dim").get<int>(), j.at("hidden_layers").get<int>(), j.at("width").get<int>(),
              j.at("output_dim").get<int>());
    const auto& layers = j.at("layers");
    if (layers.size() != net.layers().size()) throw std::invalid_argument("MLP: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto w = matrix_from_json(layers[l].at("weight"));
        auto b = matrix_from_json(layers[l].at("bias"));
        if (w.rows() != net.layers()[l].weight.rows() || w.cols() != net.layers()[l].weight.cols() ||
            b.cols() != net.layers()[l].bias.cols() || b.rows() != 1) {
            throw std::invalid_argument("MLP: parameter shape mismatch in layer " + std::to_string(l));
        }
        net.layers()[l].weight = std::move(w);
        net.layers()[l].bias = std::move(b);
    }
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

void adamw_step(AdamWState& state, std::span<const ParamRef> params, std::span<const Matrix> grads) {
    if (params.size() != grads.size()) throw std::invalid_argument("adamw_step: parameter/gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Matrix& p = *params[i].value;
        if (p.rows() != grads[i].rows() || p.cols() != grads[i].cols()) {
            throw std::invalid_argument("adamw_step: gradient shape mismatch for " + params[i].name);
        }
        if (!grads[i].allFinite()) throw NumericalError("adamw_step: non-finite gradient in " + params[i].name);
    }
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
            state.second_moment.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
        }
    }
    if (state.first_moment.size() != params.size()) throw std::invalid_argument("adamw_step: state/parameter mismatch");

    const auto& c = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& p = *params[i].value;
        Matrix& m = state.first_moment[i];
        Matrix& v = state.second_moment[i];
        const Matrix& g = grads[i];
        p *= 1.0 - c.learning_rate * c.weight_decay;
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
        p.array() -= c.learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + c.epsilon);
    }
}

void to_json(nlohmann::json& j, const AdamWState& s) {
    j = nlohmann::json{{"learning_rate", s.config.learning_rate},
                       {"beta1", s.config.beta1},
                       {"beta2", s.config.beta2},
                       {"epsilon", s.config.epsilon},
                       {"weight_decay", s.config.weight_decay},
                       {"step", s.step},
                       {"first_moment", nlohmann::json::array()},
                       {"second_moment", nlohmann::json::array()}};
    for (const auto& m : s.first_moment) j["first_moment"].push_back(matrix_to_json(m));
    for (const auto& v : s.second_moment) j["second_moment"].push_back(matrix_to_json(v));
}

void from_json(const nlohmann::json& j, AdamWState& s) {
    s.config.learning_rate = j.at("learning_rate").get<double>();
    s.config.beta1 = j.at("beta1").get<double>();
    s.config.beta2 = j.at("beta2").get<double>();
    s.config.epsilon = j.at("epsilon").get<double>();
    s.config.weight_decay = j.at("weight_decay").get<double>();
    s.step = j.at("step").get<std::int64_t>();
    s.first_moment.clear();
    s.second_moment.clear();
    for (const auto& m : j.at("first_moment")) s.first_moment.push_back(matrix_from_json(m));
    for (const auto& v : j.at("second_moment")) s.second_moment.push_back(matrix_from_json(v));
    if (s.first_moment.size() != s.second_moment.size()) throw std::invalid_argument("AdamW state: moment count mismatch");
}

}  // namespace graphik::nn
