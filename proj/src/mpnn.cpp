#include "graphik/mpnn.hpp"

#include "graphik/errors.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <tuple>
#include <stdexcept>

namespace graphik {

MPNNModel MPNNModel::zeros(Variant variant, int dof, int layers, int neurons) {
    if (dof < 2) throw std::invalid_argument("MPNNModel: dof must be >= 2");
    MPNNModel m;
    m.variant = variant;
    m.dof = dof;
    m.layers = layers;
    m.neurons = neurons;
    const int nd = node_feature_dim(variant.mode);
    m.edge_model = nn::MLP(2 * nd + kEdgeFeatureDim, layers, neurons, kMessageDim);
    m.node_model = nn::MLP(nd + kMessageDim, layers, neurons, kNodeOutputDim);
    m.stats = FeatureStats::identity(nd);
    return m;
}

MPNNModel MPNNModel::create(Variant variant, int dof, int layers, int neurons, std::uint64_t seed) {
    auto m = zeros(variant, dof, layers, neurons);
    auto edge_rng = CounterRng::substream(seed, "init", 0);
    auto node_rng = CounterRng::substream(seed, "init", 1);
    m.edge_model.init_he(edge_rng);
    m.node_model.init_he(node_rng);
    return m;
}

std::string MPNNModel::name() const {
    return variant.tag() + "-" + std::to_string(dof) + "-" + std::to_string(layers) + "-" + std::to_string(neurons);
}

std::size_t MPNNModel::parameter_count() const noexcept {
    return edge_model.parameter_count() + node_model.parameter_count();
}

std::vector<nn::ParamRef> MPNNModel::parameters() {
    std::vector<nn::ParamRef> out;
    edge_model.append_parameters("edge", out);
    node_model.append_parameters("node", out);
    return out;
}

namespace {

void check_graph(const MPNNModel& model, const JointGraph& graph) {
    if (graph.node_dim != model.node_dim()) {
        throw std::invalid_argument("graph node feature dimension " + std::to_string(graph.node_dim) +
                                    " does not match model (" + std::to_string(model.node_dim()) + ")");
    }
    if (graph.dof < 1 || static_cast<int>(graph.nodes.size()) != graph.dof * graph.node_dim) {
        throw std::invalid_argument("malformed graph node table");
    }
}

}  // namespace

Matrix compute_messages(const MPNNModel& model, const JointGraph& graph) {
    check_graph(model, graph);
    const int nd = graph.node_dim;
    Matrix input(static_cast<Eigen::Index>(graph.edges.size()), 2 * nd + kEdgeFeatureDim);
    for (std::size_t k = 0; k < graph.edges.size(); ++k) {
        const auto& e = graph.edges[k];
        if (e.sender < 0 || e.sender >= graph.dof || e.receiver < 0 || e.receiver >= graph.dof) {
            throw std::invalid_argument("compute_messages: edge endpoint out of range");
        }
        auto row = input.row(static_cast<Eigen::Index>(k));
        const auto s = graph.node(e.sender);
        const auto r = graph.node(e.receiver);
        for (int c = 0; c < nd; ++c) {
            row(c) = s[c];
            row(nd + c) = r[c];
        }
        row(2 * nd) = e.features[0];
        row(2 * nd + 1) = e.features[1];
    }
    return model.edge_model.forward(input);
}

Matrix aggregate(const Matrix& messages, const JointGraph& graph) {
    if (messages.rows() != static_cast<Eigen::Index>(graph.edges.size())) {
        throw std::invalid_argument("aggregate: one message per edge required");
    }
    std::vector<std::size_t> order(graph.edges.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ea = graph.edges[a];
        const auto& eb = graph.edges[b];
        return std::tie(ea.receiver, ea.sender) < std::tie(eb.receiver, eb.sender);
    });
    Matrix out = Matrix::Zero(graph.dof, messages.cols());
    for (std::size_t k : order) out.row(graph.edges[k].receiver) += messages.row(static_cast<Eigen::Index>(k));
    return out;
}

std::vector<double> update_nodes(const MPNNModel& model, const JointGraph& graph, const Matrix& aggregates) {
    check_graph(model, graph);
    if (aggregates.rows() != graph.dof || aggregates.cols() != kMessageDim) {
        throw std::invalid_argument("update_nodes: aggregate shape mismatch");
    }
    Matrix input(graph.dof, graph.node_dim + kMessageDim);
    input.leftCols(graph.node_dim) = Eigen::Map<const Matrix>(graph.nodes.data(), graph.dof, graph.node_dim);
    input.rightCols(kMessageDim) = aggregates;
    const Matrix out = model.node_model.forward(input);
    return {out.data(), out.data() + out.size()};
}

std::vector<double> predict(const MPNNModel& model, const JointGraph& normalized_graph) {
    const Matrix messages = compute_messages(model, normalized_graph);
    return update_nodes(model, normalized_graph, aggregate(messages, normalized_graph));
}

std::vector<double> predict(const MPNNModel& model, const Sample& sample, std::span<const double> theta_ref) {
    if (sample.dof() != model.dof) {
        throw std::invalid_argument("predict: sample has " + std::to_string(sample.dof()) + " joints, model expects " +
                                    std::to_string(model.dof));
    }
    auto graph = normalize_features(build_graph(sample, model.variant, theta_ref), model.stats);
    return predict(model, graph);
}

Matrix predict_batch(const MPNNModel& model, const GraphBatch& batch) {
    const int nd = model.node_dim();
    if (batch.nodes.cols() != nd) throw std::invalid_argument("predict_batch: node feature width mismatch");
    const auto ne = static_cast<Eigen::Index>(batch.senders.size());
    Matrix edge_in(ne, 2 * nd + kEdgeFeatureDim);
    for (Eigen::Index k = 0; k < ne; ++k) {
        edge_in.row(k).head(nd) = batch.nodes.row(batch.senders[k]);
        edge_in.row(k).segment(nd, nd) = batch.nodes.row(batch.receivers[k]);
        edge_in.row(k).tail(kEdgeFeatureDim) = batch.edges.row(k);
    }
    const Matrix messages = model.edge_model.forward(edge_in);
    Matrix node_in(batch.nodes.rows(), nd + kMessageDim);
    node_in.leftCols(nd) = batch.nodes;
    node_in.rightCols(kMessageDim).setZero();
    for (Eigen::Index k = 0; k < ne; ++k) node_in.row(batch.receivers[k]).tail(kMessageDim) += messages.row(k);
    return model.node_model.forward(node_in);
}

ForwardRecord record_forward(const MPNNModel& model, nn::Tape& tape, const GraphBatch& batch) {
    if (batch.nodes.cols() != model.node_dim()) throw std::invalid_argument("record_forward: node feature width mismatch");
    ForwardRecord rec;
    rec.nodes = tape.leaf(batch.nodes);
    rec.edges = tape.leaf(batch.edges);
    auto senders = std::make_shared<const std::vector<int>>(batch.senders);
    auto receivers = std::make_shared<const std::vector<int>>(batch.receivers);

    const nn::Tape::Var edge_parts[] = {tape.gather_rows(rec.nodes, senders), tape.gather_rows(rec.nodes, receivers),
                                        rec.edges};
    const auto messages = model.edge_model.record(tape, tape.concat_cols(edge_parts), rec.params);
    const auto aggregated = tape.scatter_add_rows(messages, receivers, batch.nodes.rows());
    const nn::Tape::Var node_parts[] = {rec.nodes, aggregated};
    rec.prediction = model.node_model.record(tape, tape.concat_cols(node_parts), rec.params);
    return rec;
}

void to_json(nlohmann::json& j, const MPNNModel& m) {
    j = nlohmann::json{{"name", m.name()},
                       {"variant", m.variant.tag()},
                       {"dof", m.dof},
                       {"layers", m.layers},
                       {"neurons", m.neurons},
                       {"message_dim", kMessageDim},
                       {"node_output_dim", kNodeOutputDim},
                       {"node_features", m.variant.mode == Mode::direct
                                             ? std::vector<std::string>{"x", "y", "z", "Phi", "Theta", "Psi", "theta_off"}
                                             : std::vector<std::string>{"x", "y", "z", "Phi", "Theta", "Psi", "theta_off",
                                                                        "theta_ref"}},
                       {"edge_features", {"alpha", "l"}},
                       {"edge_input_order", {"sender", "receiver", "edge"}},
                       {"node_input_order", {"node", "aggregate"}},
                       {"edge_model", m.edge_model},
                       {"node_model", m.node_model},
                       {"feature_stats", m.stats}};
}

void from_json(const nlohmann::json& j, MPNNModel& m) {
    const auto variant = Variant::parse(j.at("variant").get<std::string>());
    m = MPNNModel::zeros(variant, j.at("dof").get<int>(), j.at("layers").get<int>(), j.at("neurons").get<int>());
    nn::MLP edge = j.at("edge_model").get<nn::MLP>();
    nn::MLP node = j.at("node_model").get<nn::MLP>();
    if (edge.input_dim() != m.edge_model.input_dim() || edge.output_dim() != kMessageDim ||
        node.input_dim() != m.node_model.input_dim() || node.output_dim() != kNodeOutputDim) {
        throw std::invalid_argument("model: network shapes do not match the variant");
    }
    m.edge_model = std::move(edge);
    m.node_model = std::move(node);
    m.stats = j.at("feature_stats").get<FeatureStats>();
    if (m.stats.node_dim() != m.node_dim()) throw std::invalid_argument("model: feature stats do not match the variant");
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    nlohmann::json j{{"format", "graphik-checkpoint"},
                     {"version", kCheckpointVersion},
                     {"model", c.model},
                     {"optimizer", c.optimizer},
                     {"run", c.run}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out << j.dump() << '\n';
    if (!out) throw IoError("short write on checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path);
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.at("format") != "graphik-checkpoint" || j.at("version") != kCheckpointVersion) {
            throw IoError(path + ": not a graphik checkpoint");
        }
        Checkpoint c;
        c.model = j.at("model").get<MPNNModel>();
        c.optimizer = j.at("optimizer").get<nn::AdamWState>();
        c.run = j.at("run");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": malformed checkpoint: " + e.what());
    }
}

}  // namespace graphik
