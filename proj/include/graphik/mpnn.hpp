#pragma once

#include "graphik/graph.hpp"
#include "graphik/neuralnet.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace graphik {

inline constexpr int kMessageDim = 6;
inline constexpr int kNodeOutputDim = 1;

/// Message-passing network with one shared edge model and one shared node
/// model. A prediction is a single round of message computation, sum
/// aggregation and node update; each node emits its joint angle in radians.
struct MPNNModel {
    Variant variant;
    int dof = 0;
    int layers = 0;
    int neurons = 0;
    nn::MLP edge_model;  ///< (v_sender, v_receiver, e) -> message
    nn::MLP node_model;  ///< (v, aggregated message) -> theta
    FeatureStats stats;

    /// Edge and node models with He-initialized weights drawn from the
    /// "init" substream of seed. Stats start as the identity transform.
    static MPNNModel create(Variant variant, int dof, int layers, int neurons, std::uint64_t seed);
    /// Same shape with all weights and biases zero.
    static MPNNModel zeros(Variant variant, int dof, int layers, int neurons);

    [[nodiscard]] int node_dim() const noexcept { return node_feature_dim(variant.mode); }
    /// "{DE,RG}-{N,F}-dof-layers-neurons", e.g. RG-N-3-2-32.
    [[nodiscard]] std::string name() const;
    [[nodiscard]] std::size_t parameter_count() const noexcept;
    /// Parameter blocks in a fixed order: edge model layers, then node model layers.
    std::vector<nn::ParamRef> parameters();
};

/// One 6-vector per edge of the (normalized) graph, in edge-list order.
Matrix compute_messages(const MPNNModel& model, const JointGraph& graph);
/// Sum of incoming messages per node. Edges are summed in (receiver, sender)
/// order regardless of their order in the graph.
Matrix aggregate(const Matrix& messages, const JointGraph& graph);
/// Node-model output per joint, radians.
std::vector<double> update_nodes(const MPNNModel& model, const JointGraph& graph, const Matrix& aggregates);

/// Builds the graph, applies the model's feature stats and runs one round.
/// RG models need theta_ref (degrees, one per joint).
std::vector<double> predict(const MPNNModel& model, const Sample& sample, std::span<const double> theta_ref = {});
std::vector<double> predict(const MPNNModel& model, const JointGraph& normalized_graph);

/// Batched forward pass over normalized features; (graphs*dof) x 1.
Matrix predict_batch(const MPNNModel& model, const GraphBatch& batch);

struct ForwardRecord {
    nn::Tape::Var prediction;
    /// Tape leaves for the parameters, aligned with MPNNModel::parameters().
    std::vector<nn::Tape::Var> params;
    nn::Tape::Var nodes;
    nn::Tape::Var edges;
};

ForwardRecord record_forward(const MPNNModel& model, nn::Tape& tape, const GraphBatch& batch);

void to_json(nlohmann::json& j, const MPNNModel& model);
void from_json(const nlohmann::json& j, MPNNModel& model);

/// Everything needed to resume or evaluate a run.
struct Checkpoint {
    MPNNModel model;
    nn::AdamWState optimizer;
    /// Run metadata: seed, variant name, epoch, reference seed, data digests...
    nlohmann::json run = nlohmann::json::object();
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace graphik
