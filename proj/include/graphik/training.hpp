#pragma once

#include "graphik/datagen.hpp"
#include "graphik/graph.hpp"
#include "graphik/mpnn.hpp"
#include "graphik/neuralnet.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace graphik {

struct TrainConfig {
    Variant variant;
    int dof = 3;
    int layers = 2;
    int neurons = 32;
    double learning_rate = 0.002;
    double weight_decay = 0.01;
    std::size_t batch_size = 5000;
    int max_epochs = 1000;
    int patience = 10;
    double split_ratio = 0.8;  ///< share of samples used for gradient steps
    std::uint64_t seed = 0;
    int threads = 1;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Mean over all entries of the squared (plain, unwrapped) differences.
double mse_loss(std::span<const double> predictions, std::span<const double> targets);

/// Graphs are accumulated in chunks of this many; chunk gradients are summed
/// in chunk order so results do not depend on the thread count.
inline constexpr std::size_t kGradientChunk = 1024;

struct EpochRecord {
    int epoch = 0;  ///< 1-based
    double train_loss = 0.0;
    double early_stop_loss = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    int stopping_epoch = 0;
    bool early_stopped = false;
    /// Metrics of the returned (best) parameters.
    double final_train_loss = 0.0;
    double final_early_stop_loss = 0.0;
    double final_train_r2 = 0.0;
    double final_early_stop_r2 = 0.0;
    double wall_clock_s = 0.0;
};

nlohmann::json report_to_json(const TrainReport& report);
/// One row per epoch: epoch,train_loss,early_stop_loss.
void write_loss_curve_csv(const TrainReport& report, const std::string& path);

/// Normalized features of all samples plus the seeded 80/20 partition.
struct PreparedData {
    GraphTable table;
    std::vector<std::size_t> train_ids;
    std::vector<std::size_t> early_stop_ids;
    FeatureStats stats;
};

/// Seeded Fisher-Yates permutation of [0, n) from the "shuffle" substream.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, std::uint64_t stream_index);

/// Builds graphs (RG reference angles frozen by the training seed), splits
/// them with the seeded shuffle and standardizes with statistics of the
/// training part only.
PreparedData prepare_training_data(std::span<const Dataset> datasets, const TrainConfig& config);

/// Loss of the model on the given graphs of a normalized table.
double evaluate_loss(const MPNNModel& model, const GraphTable& table, std::span<const std::size_t> ids,
                     std::vector<double>* predictions = nullptr);

/// Mean-squared-error loss and gradients (aligned with MPNNModel::parameters())
/// for one batch of graphs.
double batch_gradient(const MPNNModel& model, const GraphTable& table, std::span<const std::size_t> ids,
                      std::vector<Matrix>& grads, int threads = 1);

struct TrainResult {
    MPNNModel model;  ///< parameters from the best early-stop epoch
    nn::AdamWState optimizer;
    TrainReport report;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch AdamW on the training part, early stopping on the rest. The
/// model's feature stats are replaced by those of the prepared data.
TrainResult train(MPNNModel model, const PreparedData& data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});
TrainResult train(MPNNModel model, std::span<const Dataset> datasets, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace graphik
