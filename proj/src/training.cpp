#include "graphik/training.hpp"

#include "graphik/errors.hpp"
#include "graphik/evaluation.hpp"
#include "graphik/parallel.hpp"
#include "graphik/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace graphik {

void TrainConfig::validate() const {
    if (dof < 2) throw std::invalid_argument("train: dof must be >= 2");
    if (layers < 1 || neurons < 1) throw std::invalid_argument("train: layers and neurons must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("train: learning rate must be > 0");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight decay must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("train: max epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw std::invalid_argument("train: split ratio must lie in (0, 1)");
    if (threads < 1) throw std::invalid_argument("train: threads must be >= 1");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"variant", c.variant.tag()},   {"dof", c.dof},
                       {"layers", c.layers},           {"neurons", c.neurons},
                       {"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay},
                       {"batch_size", c.batch_size},   {"max_epochs", c.max_epochs},
                       {"patience", c.patience},       {"split_ratio", c.split_ratio},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.variant = Variant::parse(j.at("variant").get<std::string>());
    c.dof = j.at("dof").get<int>();
    c.layers = j.at("layers").get<int>();
    c.neurons = j.at("neurons").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.patience = j.at("patience").get<int>();
    c.split_ratio = j.at("split_ratio").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
}

double mse_loss(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size()) throw std::invalid_argument("mse_loss: shape mismatch");
    if (targets.empty()) throw std::invalid_argument("mse_loss: empty batch");
    double s = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) s += (predictions[i] - targets[i]) * (predictions[i] - targets[i]);
    return s / static_cast<double>(targets.size());
}

nlohmann::json report_to_json(const TrainReport& r) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : r.epochs) {
        epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"early_stop_loss", e.early_stop_loss}});
    }
    return nlohmann::json{{"epochs", epochs},
                          {"best_epoch", r.best_epoch},
                          {"stopping_epoch", r.stopping_epoch},
                          {"early_stopped", r.early_stopped},
                          {"final_train_loss", r.final_train_loss},
                          {"final_early_stop_loss", r.final_early_stop_loss},
                          {"final_train_r2", r.final_train_r2},
                          {"final_early_stop_r2", r.final_early_stop_r2},
                          {"wall_clock_s", r.wall_clock_s}};
}

void write_loss_curve_csv(const TrainReport& r, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << std::setprecision(17) << "epoch,train_loss,early_stop_loss\n";
    for (const auto& e : r.epochs) out << e.epoch << ',' << e.train_loss << ',' << e.early_stop_loss << '\n';
    if (!out) throw IoError("short write on " + path);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, std::uint64_t stream_index) {
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    auto rng = CounterRng::substream(seed, "shuffle", stream_index);
    for (std::size_t i = n; i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
    return ids;
}

PreparedData prepare_training_data(std::span<const Dataset> datasets, const TrainConfig& config) {
    config.validate();
    if (datasets.empty()) throw std::invalid_argument("train: no datasets");
    for (const auto& d : datasets) {
        if (d.dof() != config.dof) {
            throw PreconditionError("train: dataset for configuration " + std::to_string(d.config_id) + " has " +
                                    std::to_string(d.dof()) + " joints, expected " + std::to_string(config.dof));
        }
    }
    PreparedData p;
    p.table = build_table(datasets, config.variant, config.seed);
    const std::size_t n = p.table.graphs();
    if (n < 2) throw std::invalid_argument("train: need at least two samples");
    // Stream 0 is the train/early-stop split; epoch e shuffles with stream e.
    auto order = shuffled_indices(n, config.seed, 0);
    auto n_train = static_cast<std::size_t>(std::llround(config.split_ratio * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    p.train_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    p.early_stop_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

    auto sorted = p.train_ids;
    std::sort(sorted.begin(), sorted.end());
    const auto train_rows = gather_batch(p.table, sorted);
    p.stats = FeatureStats::fit(train_rows.nodes, train_rows.edges);
    normalize_rows(p.table.nodes, p.table.edges, p.stats);
    return p;
}

double evaluate_loss(const MPNNModel& model, const GraphTable& table, std::span<const std::size_t> ids,
                     std::vector<double>* predictions) {
    if (ids.empty()) throw std::invalid_argument("evaluate_loss: no graphs");
    const auto dof = static_cast<std::size_t>(table.dof);
    double sq = 0.0;
    if (predictions) predictions->resize(ids.size() * dof);
    constexpr std::size_t chunk = 8192;
    for (std::size_t first = 0; first < ids.size(); first += chunk) {
        const auto part = ids.subspan(first, std::min(chunk, ids.size() - first));
        const auto batch = gather_batch(table, part);
        const Matrix out = predict_batch(model, batch);
        sq += (out - batch.targets).squaredNorm();
        if (predictions) std::copy(out.data(), out.data() + out.size(), predictions->begin() + static_cast<std::ptrdiff_t>(first * dof));
    }
    return sq / static_cast<double>(ids.size() * dof);
}

double batch_gradient(const MPNNModel& model, const GraphTable& table, std::span<const std::size_t> ids,
                      std::vector<Matrix>& grads, int threads) {
    if (ids.empty()) throw std::invalid_argument("batch_gradient: empty batch");
    const double scale = 1.0 / static_cast<double>(ids.size() * static_cast<std::size_t>(table.dof));
    const std::size_t chunks = (ids.size() + kGradientChunk - 1) / kGradientChunk;
    std::vector<std::vector<Matrix>> chunk_grads(chunks);
    std::vector<double> chunk_loss(chunks, 0.0);

    parallel_for(chunks, threads, [&](std::size_t begin, std::size_t end) {
        nn::Tape tape;
        for (std::size_t c = begin; c < end; ++c) {
            tape.clear();
            const auto part = ids.subspan(c * kGradientChunk, std::min(kGradientChunk, ids.size() - c * kGradientChunk));
            const auto batch = gather_batch(table, part);
            const auto rec = record_forward(model, tape, batch);
            const auto loss = tape.squared_error(rec.prediction, batch.targets, scale);
            tape.backward(loss);
            chunk_loss[c] = tape.value(loss)(0, 0);
            auto& g = chunk_grads[c];
            g.reserve(rec.params.size());
            for (const auto& p : rec.params) g.push_back(tape.grad(p));
        }
    });

    grads = std::move(chunk_grads[0]);
    double loss = chunk_loss[0];
    for (std::size_t c = 1; c < chunks; ++c) {
        for (std::size_t k = 0; k < grads.size(); ++k) grads[k] += chunk_grads[c][k];
        loss += chunk_loss[c];
    }
    return loss;
}

namespace {

double r2_on(const MPNNModel& model, const GraphTable& table, std::span<const std::size_t> ids, double& loss) {
    std::vector<double> pred;
    loss = evaluate_loss(model, table, ids, &pred);
    const auto dof = static_cast<std::size_t>(table.dof);
    std::vector<double> target(ids.size() * dof);
    for (std::size_t k = 0; k < ids.size(); ++k) {
        std::copy_n(table.targets.begin() + static_cast<std::ptrdiff_t>(ids[k] * dof), dof,
                    target.begin() + static_cast<std::ptrdiff_t>(k * dof));
    }
    try {
        return r_squared(pred, target);
    } catch (const std::exception&) {
        return std::nan("");
    }
}

}  // namespace

TrainResult train(MPNNModel model, const PreparedData& data, const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (model.dof != data.table.dof || !(model.variant == data.table.variant)) {
        throw PreconditionError("train: model " + model.name() + " does not match the prepared data");
    }
    if (data.train_ids.empty() || data.early_stop_ids.empty()) throw std::invalid_argument("train: empty split");
    const auto started = std::chrono::steady_clock::now();

    model.stats = data.stats;
    TrainResult result;
    result.optimizer.config = {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay};
    auto params = model.parameters();

    MPNNModel best = model;
    nn::AdamWState best_optimizer = result.optimizer;
    double best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;
    auto& report = result.report;
    std::vector<Matrix> grads;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto perm = shuffled_indices(data.train_ids.size(), config.seed, static_cast<std::uint64_t>(epoch));
        std::vector<std::size_t> order(perm.size());
        for (std::size_t k = 0; k < perm.size(); ++k) order[k] = data.train_ids[perm[k]];

        double weighted = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t first = 0; first < order.size(); first += config.batch_size, ++batch_index) {
            const std::span<const std::size_t> ids(order.data() + first, std::min(config.batch_size, order.size() - first));
            const double loss = batch_gradient(model, data.table, ids, grads, config.threads);
            if (!std::isfinite(loss)) {
                throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(batch_index));
            }
            try {
                nn::adamw_step(result.optimizer, params, grads);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(batch_index) + ")");
            }
            weighted += loss * static_cast<double>(ids.size());
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = weighted / static_cast<double>(order.size());
        rec.early_stop_loss = evaluate_loss(model, data.table, data.early_stop_ids);
        if (!std::isfinite(rec.early_stop_loss)) {
            throw NumericalError("non-finite early-stop loss at epoch " + std::to_string(epoch));
        }
        report.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (rec.early_stop_loss < best_loss) {
            best_loss = rec.early_stop_loss;
            best = model;
            best_optimizer = result.optimizer;
            report.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            report.early_stopped = true;
            break;
        }
    }

    report.stopping_epoch = static_cast<int>(report.epochs.size());
    result.model = std::move(best);
    result.optimizer = std::move(best_optimizer);
    report.final_train_r2 = r2_on(result.model, data.table, data.train_ids, report.final_train_loss);
    report.final_early_stop_r2 = r2_on(result.model, data.table, data.early_stop_ids, report.final_early_stop_loss);
    report.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

TrainResult train(MPNNModel model, std::span<const Dataset> datasets, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    const auto data = prepare_training_data(datasets, config);
    return train(std::move(model), data, config, on_epoch);
}

}  // namespace graphik
