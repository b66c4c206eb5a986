#include "graphik/graph.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace graphik {

Variant Variant::parse(std::string_view token) {
    std::string t;
    for (char c : token) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    Variant v;
    if (t == "de-n" || t == "de-f") {
        v.mode = Mode::direct;
    } else if (t == "rg-n" || t == "rg-f") {
        v.mode = Mode::reference;
    } else {
        throw std::invalid_argument("unknown variant '" + std::string(token) + "' (expected de-n, de-f, rg-n or rg-f)");
    }
    v.connectivity = t.back() == 'n' ? Connectivity::neighbourly : Connectivity::full;
    return v;
}

std::string Variant::tag() const {
    return std::string(mode == Mode::direct ? "DE" : "RG") + (connectivity == Connectivity::neighbourly ? "-N" : "-F");
}

int node_feature_dim(Mode mode) noexcept { return mode == Mode::direct ? 7 : 8; }

std::vector<std::pair<int, int>> edge_topology(int dof, Connectivity connectivity) {
    if (dof < 2) throw std::invalid_argument("edge_topology: dof must be >= 2");
    std::vector<std::pair<int, int>> edges;
    for (int receiver = 0; receiver < dof; ++receiver) {
        for (int sender = 0; sender < dof; ++sender) {
            if (sender == receiver) continue;
            if (connectivity == Connectivity::neighbourly && std::abs(sender - receiver) != 1) continue;
            edges.emplace_back(sender, receiver);
        }
    }
    return edges;
}

std::array<double, 2> edge_features(const ManipulatorConfig& config, int i, int j) {
    const int lo = std::min(i, j), hi = std::max(i, j);
    if (lo < 0 || hi >= config.dof() || lo == hi) throw std::invalid_argument("edge_features: bad joint pair");
    double length = 0.0;
    for (int k = lo + 1; k <= hi; ++k) length += config.joints[k].length();
    const double alpha = hi - lo == 1 ? config.joints[hi].alpha : 0.0;
    return {alpha, length};
}

std::vector<double> draw_reference_angles(std::span<const double> theta_deg, CounterRng& rng) {
    std::vector<double> ref(theta_deg.size());
    for (std::size_t i = 0; i < theta_deg.size(); ++i) {
        ref[i] = wrap_360(theta_deg[i] + rng.uniform(-kReferenceHalfWidthDeg, kReferenceHalfWidthDeg));
    }
    return ref;
}

std::vector<double> dataset_reference_angles(std::uint64_t seed, int config_id, std::size_t row,
                                             std::span<const double> theta_deg) {
    auto rng = CounterRng::substream(seed, "reference-angles", static_cast<std::uint64_t>(config_id));
    rng.seek(row * theta_deg.size());
    return draw_reference_angles(theta_deg, rng);
}

namespace {

void write_node_features(double* out, std::span<const double> pose, const DHJoint& joint, Mode mode,
                         double theta_ref) {
    std::copy(pose.begin(), pose.end(), out);
    out[6] = joint.theta_off;
    if (mode == Mode::reference) out[7] = theta_ref;
}

}  // namespace

JointGraph build_graph(const Sample& sample, Variant variant, std::span<const double> theta_ref) {
    const int dof = sample.dof();
    if (static_cast<int>(sample.theta_deg.size()) != dof) throw std::invalid_argument("build_graph: incomplete sample");
    if (variant.mode == Mode::reference && static_cast<int>(theta_ref.size()) != dof) {
        throw std::invalid_argument("build_graph: RG mode needs one reference angle per joint");
    }
    JointGraph g;
    g.variant = variant;
    g.dof = dof;
    g.node_dim = node_feature_dim(variant.mode);
    g.nodes.resize(static_cast<std::size_t>(dof * g.node_dim));
    const auto pose = sample.pose.as_array();
    for (int i = 0; i < dof; ++i) {
        write_node_features(g.nodes.data() + i * g.node_dim, pose, sample.config.joints[i], variant.mode,
                            variant.mode == Mode::reference ? theta_ref[i] : 0.0);
    }
    for (const auto& [s, r] : edge_topology(dof, variant.connectivity)) {
        g.edges.push_back({s, r, edge_features(sample.config, s, r)});
    }
    for (int i = 0; i < dof; ++i) g.targets.push_back(sample.theta_rad(i));
    return g;
}

JointGraph build_graph(const Sample& sample, Variant variant, CounterRng& rng) {
    if (variant.mode == Mode::direct) return build_graph(sample, variant);
    const auto ref = draw_reference_angles(sample.theta_deg, rng);
    return build_graph(sample, variant, ref);
}

FeatureStats FeatureStats::identity(int node_dim) {
    FeatureStats s;
    s.node_mean.assign(node_dim, 0.0);
    s.node_scale.assign(node_dim, 1.0);
    s.node_clamped.assign(node_dim, false);
    s.edge_mean.assign(kEdgeFeatureDim, 0.0);
    s.edge_scale.assign(kEdgeFeatureDim, 1.0);
    s.edge_clamped.assign(kEdgeFeatureDim, false);
    return s;
}

namespace {

void fit_channels(const Matrix& rows, std::vector<double>& mean, std::vector<double>& scale,
                  std::vector<bool>& clamped) {
    const auto n = rows.rows();
    const auto c = rows.cols();
    mean.assign(c, 0.0);
    scale.assign(c, 1.0);
    clamped.assign(c, false);
    if (n == 0) return;
    for (Eigen::Index k = 0; k < c; ++k) {
        // Two passes for a stable variance.
        double m = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) m += rows(r, k);
        m /= static_cast<double>(n);
        double var = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) var += (rows(r, k) - m) * (rows(r, k) - m);
        var /= static_cast<double>(n);
        mean[k] = m;
        const double sd = std::sqrt(var);
        if (sd > 1e-12 * std::max(1.0, std::abs(m))) {
            scale[k] = sd;
        } else {
            clamped[k] = true;
        }
    }
}

}  // namespace

FeatureStats FeatureStats::fit(const Matrix& node_rows, const Matrix& edge_rows) {
    FeatureStats s;
    fit_channels(node_rows, s.node_mean, s.node_scale, s.node_clamped);
    fit_channels(edge_rows, s.edge_mean, s.edge_scale, s.edge_clamped);
    return s;
}

FeatureStats FeatureStats::fit(std::span<const JointGraph> graphs) {
    if (graphs.empty()) throw std::invalid_argument("FeatureStats::fit: no graphs");
    const int nd = graphs.front().node_dim;
    std::size_t node_rows = 0, edge_rows = 0;
    for (const auto& g : graphs) {
        if (g.node_dim != nd) throw std::invalid_argument("FeatureStats::fit: mixed node dims");
        node_rows += static_cast<std::size_t>(g.dof);
        edge_rows += g.edges.size();
    }
    Matrix nodes(node_rows, nd), edges(edge_rows, kEdgeFeatureDim);
    std::size_t nr = 0, er = 0;
    for (const auto& g : graphs) {
        for (int i = 0; i < g.dof; ++i, ++nr)
            for (int k = 0; k < nd; ++k) nodes(nr, k) = g.nodes[i * nd + k];
        for (const auto& e : g.edges) {
            for (int k = 0; k < kEdgeFeatureDim; ++k) edges(er, k) = e.features[k];
            ++er;
        }
    }
    return fit(nodes, edges);
}

namespace {

void check_stats(const JointGraph& g, const FeatureStats& s) {
    if (s.node_dim() != g.node_dim || static_cast<int>(s.edge_mean.size()) != kEdgeFeatureDim) {
        throw std::invalid_argument("feature stats do not match graph feature dimensions");
    }
}

}  // namespace

JointGraph normalize_features(JointGraph g, const FeatureStats& s) {
    check_stats(g, s);
    for (int i = 0; i < g.dof; ++i)
        for (int k = 0; k < g.node_dim; ++k) {
            double& v = g.nodes[i * g.node_dim + k];
            v = (v - s.node_mean[k]) / s.node_scale[k];
        }
    for (auto& e : g.edges)
        for (int k = 0; k < kEdgeFeatureDim; ++k) e.features[k] = (e.features[k] - s.edge_mean[k]) / s.edge_scale[k];
    return g;
}

JointGraph denormalize_features(JointGraph g, const FeatureStats& s) {
    check_stats(g, s);
    for (int i = 0; i < g.dof; ++i)
        for (int k = 0; k < g.node_dim; ++k) {
            double& v = g.nodes[i * g.node_dim + k];
            v = v * s.node_scale[k] + s.node_mean[k];
        }
    for (auto& e : g.edges)
        for (int k = 0; k < kEdgeFeatureDim; ++k) e.features[k] = e.features[k] * s.edge_scale[k] + s.edge_mean[k];
    return g;
}

void normalize_rows(Matrix& node_rows, Matrix& edge_rows, const FeatureStats& s) {
    if (node_rows.cols() != s.node_dim() || edge_rows.cols() != kEdgeFeatureDim) {
        throw std::invalid_argument("normalize_rows: feature stats do not match");
    }
    for (Eigen::Index k = 0; k < node_rows.cols(); ++k) {
        node_rows.col(k) = (node_rows.col(k).array() - s.node_mean[k]) / s.node_scale[k];
    }
    for (Eigen::Index k = 0; k < edge_rows.cols(); ++k) {
        edge_rows.col(k) = (edge_rows.col(k).array() - s.edge_mean[k]) / s.edge_scale[k];
    }
}

void to_json(nlohmann::json& j, const FeatureStats& s) {
    j = nlohmann::json{{"node_mean", s.node_mean},     {"node_scale", s.node_scale},
                       {"node_clamped", s.node_clamped}, {"edge_mean", s.edge_mean},
                       {"edge_scale", s.edge_scale},     {"edge_clamped", s.edge_clamped}};
}

void from_json(const nlohmann::json& j, FeatureStats& s) {
    j.at("node_mean").get_to(s.node_mean);
    j.at("node_scale").get_to(s.node_scale);
    j.at("node_clamped").get_to(s.node_clamped);
    j.at("edge_mean").get_to(s.edge_mean);
    j.at("edge_scale").get_to(s.edge_scale);
    j.at("edge_clamped").get_to(s.edge_clamped);
    if (s.node_scale.size() != s.node_mean.size() || s.edge_mean.size() != kEdgeFeatureDim ||
        s.edge_scale.size() != kEdgeFeatureDim) {
        throw std::invalid_argument("feature stats: inconsistent channel counts");
    }
}

GraphTable build_table(std::span<const Dataset> datasets, Variant variant, std::uint64_t reference_seed) {
    if (datasets.empty()) throw std::invalid_argument("build_table: no datasets");
    GraphTable t;
    t.variant = variant;
    t.dof = datasets.front().dof();
    t.topology = edge_topology(t.dof, variant.connectivity);
    std::size_t graphs = 0;
    for (const auto& ds : datasets) {
        if (ds.dof() != t.dof) throw std::invalid_argument("build_table: mixed dof");
        graphs += ds.rows();
    }
    const int nd = node_feature_dim(variant.mode);
    const auto dof = static_cast<std::size_t>(t.dof);
    const std::size_t ne = t.topology.size();
    t.nodes.resize(static_cast<Eigen::Index>(graphs * dof), nd);
    t.edges.resize(static_cast<Eigen::Index>(graphs * ne), kEdgeFeatureDim);
    t.targets.resize(graphs * dof);
    t.origin.reserve(graphs);

    std::size_t g = 0;
    for (std::size_t d = 0; d < datasets.size(); ++d) {
        const auto& ds = datasets[d];
        std::vector<std::array<double, 2>> edge_feats;
        for (const auto& [s, r] : t.topology) edge_feats.push_back(edge_features(ds.config, s, r));
        for (std::size_t row = 0; row < ds.rows(); ++row, ++g) {
            const auto theta = ds.theta_row(row);
            const auto pose = ds.pose_row(row);
            std::vector<double> ref;
            if (variant.mode == Mode::reference) ref = dataset_reference_angles(reference_seed, ds.config_id, row, theta);
            for (std::size_t i = 0; i < dof; ++i) {
                write_node_features(t.nodes.row(static_cast<Eigen::Index>(g * dof + i)).data(), pose,
                                    ds.config.joints[i], variant.mode,
                                    variant.mode == Mode::reference ? ref[i] : 0.0);
                t.targets[g * dof + i] = deg_to_rad(theta[i]);
            }
            for (std::size_t e = 0; e < ne; ++e) {
                t.edges(static_cast<Eigen::Index>(g * ne + e), 0) = edge_feats[e][0];
                t.edges(static_cast<Eigen::Index>(g * ne + e), 1) = edge_feats[e][1];
            }
            t.origin.emplace_back(static_cast<int>(d), row);
        }
    }
    return t;
}

GraphBatch gather_batch(const GraphTable& t, std::span<const std::size_t> ids) {
    GraphBatch b;
    b.dof = t.dof;
    b.graphs = ids.size();
    const auto dof = static_cast<std::size_t>(t.dof);
    const std::size_t ne = t.edges_per_graph();
    b.nodes.resize(static_cast<Eigen::Index>(ids.size() * dof), t.nodes.cols());
    b.edges.resize(static_cast<Eigen::Index>(ids.size() * ne), t.edges.cols());
    b.targets.resize(static_cast<Eigen::Index>(ids.size() * dof), 1);
    b.senders.resize(ids.size() * ne);
    b.receivers.resize(ids.size() * ne);
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const std::size_t g = ids[k];
        b.nodes.middleRows(static_cast<Eigen::Index>(k * dof), static_cast<Eigen::Index>(dof)) =
            t.nodes.middleRows(static_cast<Eigen::Index>(g * dof), static_cast<Eigen::Index>(dof));
        b.edges.middleRows(static_cast<Eigen::Index>(k * ne), static_cast<Eigen::Index>(ne)) =
            t.edges.middleRows(static_cast<Eigen::Index>(g * ne), static_cast<Eigen::Index>(ne));
        for (std::size_t i = 0; i < dof; ++i) b.targets(static_cast<Eigen::Index>(k * dof + i), 0) = t.targets[g * dof + i];
        for (std::size_t e = 0; e < ne; ++e) {
            b.senders[k * ne + e] = static_cast<int>(k * dof) + t.topology[e].first;
            b.receivers[k * ne + e] = static_cast<int>(k * dof) + t.topology[e].second;
        }
    }
    return b;
}

GraphBatch make_batch(const JointGraph& g) {
    GraphBatch b;
    b.dof = g.dof;
    b.graphs = 1;
    b.nodes = Eigen::Map<const Matrix>(g.nodes.data(), g.dof, g.node_dim);
    b.edges.resize(static_cast<Eigen::Index>(g.edges.size()), kEdgeFeatureDim);
    b.targets.resize(g.dof, 1);
    for (int i = 0; i < g.dof; ++i) b.targets(i, 0) = g.targets.empty() ? 0.0 : g.targets[i];
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        b.edges(static_cast<Eigen::Index>(e), 0) = g.edges[e].features[0];
        b.edges(static_cast<Eigen::Index>(e), 1) = g.edges[e].features[1];
        b.senders.push_back(g.edges[e].sender);
        b.receivers.push_back(g.edges[e].receiver);
    }
    return b;
}

}  // namespace graphik
