#pragma once

#include "graphik/datagen.hpp"
#include "graphik/mpnn.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace graphik {

/// Pooled coefficient of determination 1 - SS_res / SS_tot over all entries.
/// Throws std::invalid_argument on size mismatch or fewer than two entries,
/// UndefinedMetricError when the targets have zero variance.
double r_squared(std::span<const double> predictions, std::span<const double> targets);
/// R^2 per column of row-major (rows x dof) data.
std::vector<double> per_joint_r_squared(std::span<const double> predictions, std::span<const double> targets, int dof);

/// Smaller arc between two angles on the unit circle, degrees in [0, 180].
double convex_angle_distance(double a_deg, double b_deg);

/// Distance in degrees from theta_2 + theta_3 to the nearest multiple of 180.
double half_turn_distance(double theta2_deg, double theta3_deg);

struct EvalReport {
    std::string split;
    std::string model_name;
    int dof = 0;
    std::vector<std::size_t> sample_index;
    std::vector<double> theta_true;  ///< rows x dof, radians
    std::vector<double> theta_pred;  ///< rows x dof, radians
    std::vector<double> pose_true;   ///< rows x 6
    std::vector<double> pose_pred;   ///< rows x 6, FK of theta_pred
    std::vector<double> position_error;     ///< cm
    std::vector<double> orientation_error;  ///< degrees, mean of the three convex distances

    double loss = 0.0;  ///< MSE on joint angles (radians)
    double r2 = 0.0;
    std::vector<double> joint_r2;
    double position_mean = 0.0, position_std = 0.0;
    double orientation_mean = 0.0, orientation_std = 0.0;

    [[nodiscard]] std::size_t rows() const noexcept { return position_error.size(); }
};

/// Runs FK on predicted angles (radians) and fills per-sample errors and aggregates.
EvalReport evaluate_predictions(const ManipulatorConfig& config, std::span<const double> theta_true_rad,
                                std::span<const double> theta_pred_rad, std::span<const double> pose_true,
                                std::string split = "test");

/// Predicts every row of the dataset (RG reference angles from
/// dataset_reference_angles(reference_seed, ...)) and evaluates pose errors.
EvalReport pose_errors(const MPNNModel& model, const Dataset& dataset, const std::string& split,
                       std::uint64_t reference_seed);

nlohmann::json report_summary(const EvalReport& report);
/// Per-sample rows with a header; doubles written with round-trip precision.
void write_report_csv(const EvalReport& report, const std::string& path);
EvalReport read_report_csv(const std::string& path);

struct Histogram {
    std::vector<double> edges;  ///< bins + 1 edges
    std::vector<std::size_t> counts;
};

inline constexpr int kHistogramBins = 50;

/// Equal-width bins over [0, max(values)]; the maximum lands in the last bin.
Histogram make_histogram(std::span<const double> values, int bins = kHistogramBins);

struct ExtractRow {
    std::size_t index = 0;  ///< sample index within the report
    double error = 0.0;
    double x = 0.0, y = 0.0, z = 0.0;  ///< target position
    std::vector<double> theta_deg;     ///< target joint angles
};

struct WorstCaseExtract {
    double fraction = 0.05;
    int dof = 0;
    std::vector<ExtractRow> by_position;     ///< descending error, ties by index
    std::vector<ExtractRow> by_orientation;  ///< descending error, ties by index
    Histogram position_histogram;
    Histogram orientation_histogram;
};

/// Selects ceil(fraction * N) samples with the largest position error and,
/// separately, orientation error. fraction must lie in (0, 1].
WorstCaseExtract worst_case_analysis(const EvalReport& report, double fraction = 0.05);

/// Writes worst_position.csv, worst_orientation.csv, hist_position.csv,
/// hist_orientation.csv and, for 3-DOF, theta_pairs.csv. Every `every`-th
/// extract row is written to the scatter files (1 = all).
void export_analysis(const WorstCaseExtract& extract, const std::string& out_dir, std::size_t every = 1);
Histogram read_histogram_csv(const std::string& path);

struct RankTestResult {
    double u = 0.0;        ///< Mann-Whitney U of the first sample
    double z = 0.0;        ///< normal approximation with tie correction
    double p_value = 1.0;  ///< one-sided: first sample stochastically smaller
};

/// One-sided Mann-Whitney U test of "a tends to be smaller than b".
RankTestResult mann_whitney_less(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> v);
/// Population standard deviation.
double stddev(std::span<const double> v);
double median(std::vector<double> v);

}  // namespace graphik
