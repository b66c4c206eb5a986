#pragma once

#include "graphik/datagen.hpp"
#include "graphik/matrix.hpp"
#include "graphik/rng.hpp"

#include <json.hpp>

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace graphik {

enum class Mode { direct, reference };
enum class Connectivity { neighbourly, full };

struct Variant {
    Mode mode = Mode::reference;
    Connectivity connectivity = Connectivity::neighbourly;

    /// Parses "de-n", "rg-f", ... (case-insensitive). Throws std::invalid_argument.
    static Variant parse(std::string_view token);
    /// "RG-N" style tag used in model names.
    [[nodiscard]] std::string tag() const;

    friend bool operator==(const Variant&, const Variant&) = default;
};

/// Node features: x, y, z, Phi, Theta, Psi, theta_off (+ theta_ref in RG mode).
int node_feature_dim(Mode mode) noexcept;
inline constexpr int kEdgeFeatureDim = 2;  // alpha, l
inline constexpr double kReferenceHalfWidthDeg = 10.0;

/// Directed (sender, receiver) pairs in canonical order: sorted by receiver,
/// then sender. Neighbourly: 2(dof-1) edges; full: dof(dof-1) edges.
std::vector<std::pair<int, int>> edge_topology(int dof, Connectivity connectivity);

/// (alpha, l) for the edge between joints i and j (0-based, either direction).
/// Adjacent joints read the DH row of the later joint with l = a + d;
/// non-adjacent joints get alpha = 0 and l summed over the intermediate chain.
std::array<double, 2> edge_features(const ManipulatorConfig& config, int i, int j);

/// Uniform draws in [theta - 10, theta + 10) wrapped into [0, 360); consumes
/// dof counters of rng.
std::vector<double> draw_reference_angles(std::span<const double> theta_deg, CounterRng& rng);

/// Reference angles of row `row` in a dataset: a fixed function of
/// (seed, config_id, row), so they are frozen across epochs and runs.
std::vector<double> dataset_reference_angles(std::uint64_t seed, int config_id, std::size_t row,
                                             std::span<const double> theta_deg);

struct GraphEdge {
    int sender = 0;
    int receiver = 0;
    std::array<double, kEdgeFeatureDim> features{};
};

struct JointGraph {
    Variant variant;
    int dof = 0;
    int node_dim = 0;
    std::vector<double> nodes;  ///< dof x node_dim, row-major
    std::vector<GraphEdge> edges;
    std::vector<double> targets;  ///< joint angles in radians

    [[nodiscard]] std::span<const double> node(int i) const {
        return {nodes.data() + static_cast<std::size_t>(i * node_dim), static_cast<std::size_t>(node_dim)};
    }
};

/// theta_ref is required (length dof, degrees) in RG mode and ignored in DE mode.
JointGraph build_graph(const Sample& sample, Variant variant, std::span<const double> theta_ref = {});
/// Draws the reference angles from rng in RG mode.
JointGraph build_graph(const Sample& sample, Variant variant, CounterRng& rng);

/// Per-channel standardization statistics for node and edge features.
struct FeatureStats {
    std::vector<double> node_mean, node_scale;
    std::vector<double> edge_mean, edge_scale;
    /// Channels whose variance was zero; their scale is clamped to 1.
    std::vector<bool> node_clamped, edge_clamped;

    /// Identity transform (mean 0, scale 1).
    static FeatureStats identity(int node_dim);
    /// Fits on rows of node features and edge features.
    static FeatureStats fit(const Matrix& node_rows, const Matrix& edge_rows);
    static FeatureStats fit(std::span<const JointGraph> graphs);

    [[nodiscard]] int node_dim() const noexcept { return static_cast<int>(node_mean.size()); }
};

JointGraph normalize_features(JointGraph graph, const FeatureStats& stats);
JointGraph denormalize_features(JointGraph graph, const FeatureStats& stats);
void normalize_rows(Matrix& node_rows, Matrix& edge_rows, const FeatureStats& stats);

void to_json(nlohmann::json& j, const FeatureStats& stats);
void from_json(const nlohmann::json& j, FeatureStats& stats);

/// Feature rows for many graphs of one topology: graph g owns node rows
/// [g*dof, (g+1)*dof) and edge rows [g*E, (g+1)*E).
struct GraphTable {
    Variant variant;
    int dof = 0;
    std::vector<std::pair<int, int>> topology;
    Matrix nodes;
    Matrix edges;
    std::vector<double> targets;  ///< graphs x dof, radians
    /// Per graph: (index into the source dataset list, row within that dataset).
    std::vector<std::pair<int, std::size_t>> origin;

    [[nodiscard]] std::size_t graphs() const noexcept { return targets.size() / static_cast<std::size_t>(dof); }
    [[nodiscard]] std::size_t edges_per_graph() const noexcept { return topology.size(); }
};

/// Builds raw (unnormalized) features for every row of every dataset. RG
/// reference angles come from dataset_reference_angles(reference_seed, ...).
GraphTable build_table(std::span<const Dataset> datasets, Variant variant, std::uint64_t reference_seed);

/// A batch of graphs with global sender/receiver node indices.
struct GraphBatch {
    int dof = 0;
    std::size_t graphs = 0;
    Matrix nodes;
    Matrix edges;
    std::vector<int> senders;
    std::vector<int> receivers;
    Matrix targets;  ///< (graphs*dof) x 1
};

GraphBatch gather_batch(const GraphTable& table, std::span<const std::size_t> graph_ids);
GraphBatch make_batch(const JointGraph& graph);

}  // namespace graphik
