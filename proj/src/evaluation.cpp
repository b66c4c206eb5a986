#include "graphik/evaluation.hpp"

#include "graphik/errors.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace graphik {

double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
    if (v.empty()) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of an empty sample");
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

double r_squared(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size()) throw std::invalid_argument("r_squared: size mismatch");
    if (targets.size() < 2) throw std::invalid_argument("r_squared: need at least two values");
    const double m = mean(targets);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        ss_res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
        ss_tot += (targets[i] - m) * (targets[i] - m);
    }
    if (ss_tot == 0.0) throw UndefinedMetricError("r_squared: targets have zero variance");
    return 1.0 - ss_res / ss_tot;
}

std::vector<double> per_joint_r_squared(std::span<const double> predictions, std::span<const double> targets, int dof) {
    if (predictions.size() != targets.size() || dof < 1 || targets.size() % static_cast<std::size_t>(dof) != 0) {
        throw std::invalid_argument("per_joint_r_squared: shape mismatch");
    }
    const std::size_t rows = targets.size() / static_cast<std::size_t>(dof);
    std::vector<double> out;
    std::vector<double> p(rows), t(rows);
    for (int j = 0; j < dof; ++j) {
        for (std::size_t r = 0; r < rows; ++r) {
            p[r] = predictions[r * dof + j];
            t[r] = targets[r * dof + j];
        }
        out.push_back(r_squared(p, t));
    }
    return out;
}

double convex_angle_distance(double a_deg, double b_deg) {
    const double d = std::fmod(std::abs(a_deg - b_deg), 360.0);
    return std::min(d, 360.0 - d);
}

double half_turn_distance(double theta2_deg, double theta3_deg) {
    const double r = std::fmod(std::abs(theta2_deg + theta3_deg), 180.0);
    return std::min(r, 180.0 - r);
}

EvalReport evaluate_predictions(const ManipulatorConfig& config, std::span<const double> theta_true_rad,
                                std::span<const double> theta_pred_rad, std::span<const double> pose_true,
                                std::string split) {
    const int dof = config.dof();
    const auto udof = static_cast<std::size_t>(dof);
    if (theta_true_rad.size() != theta_pred_rad.size() || theta_true_rad.size() % udof != 0 ||
        pose_true.size() != theta_true_rad.size() / udof * 6) {
        throw std::invalid_argument("evaluate_predictions: shape mismatch");
    }
    const std::size_t rows = theta_true_rad.size() / udof;
    EvalReport rep;
    rep.split = std::move(split);
    rep.dof = dof;
    rep.theta_true.assign(theta_true_rad.begin(), theta_true_rad.end());
    rep.theta_pred.assign(theta_pred_rad.begin(), theta_pred_rad.end());
    rep.pose_true.assign(pose_true.begin(), pose_true.end());
    rep.pose_pred.resize(rows * 6);
    rep.position_error.resize(rows);
    rep.orientation_error.resize(rows);
    rep.sample_index.resize(rows);

    std::vector<double> theta_deg(udof);
    double sq = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        rep.sample_index[r] = r;
        for (std::size_t i = 0; i < udof; ++i) {
            // Network outputs are unconstrained reals; FK is periodic in them.
            theta_deg[i] = rad_to_deg(theta_pred_rad[r * udof + i]);
            const double diff = theta_pred_rad[r * udof + i] - theta_true_rad[r * udof + i];
            sq += diff * diff;
        }
        const auto fk = forward_kinematics(config, theta_deg);
        const auto pred = fk.pose.as_array();
        std::copy(pred.begin(), pred.end(), rep.pose_pred.begin() + static_cast<std::ptrdiff_t>(r * 6));
        const double* truth = pose_true.data() + r * 6;
        rep.position_error[r] = std::sqrt((pred[0] - truth[0]) * (pred[0] - truth[0]) +
                                          (pred[1] - truth[1]) * (pred[1] - truth[1]) +
                                          (pred[2] - truth[2]) * (pred[2] - truth[2]));
        rep.orientation_error[r] = (convex_angle_distance(pred[3], truth[3]) + convex_angle_distance(pred[4], truth[4]) +
                                    convex_angle_distance(pred[5], truth[5])) /
                                   3.0;
    }
    rep.loss = rows ? sq / static_cast<double>(rows * udof) : 0.0;
    if (rows * udof >= 2) {
        rep.r2 = r_squared(rep.theta_pred, rep.theta_true);
        if (rows >= 2) rep.joint_r2 = per_joint_r_squared(rep.theta_pred, rep.theta_true, dof);
    }
    rep.position_mean = mean(rep.position_error);
    rep.position_std = stddev(rep.position_error);
    rep.orientation_mean = mean(rep.orientation_error);
    rep.orientation_std = stddev(rep.orientation_error);
    return rep;
}

EvalReport pose_errors(const MPNNModel& model, const Dataset& dataset, const std::string& split,
                       std::uint64_t reference_seed) {
    if (dataset.dof() != model.dof) {
        throw PreconditionError("model " + model.name() + " expects " + std::to_string(model.dof) +
                                " joints but the dataset has " + std::to_string(dataset.dof()));
    }
    auto table = build_table(std::span<const Dataset>(&dataset, 1), model.variant, reference_seed);
    normalize_rows(table.nodes, table.edges, model.stats);

    std::vector<double> pred(table.targets.size());
    constexpr std::size_t chunk = 4096;
    std::vector<std::size_t> ids;
    for (std::size_t first = 0; first < table.graphs(); first += chunk) {
        ids.resize(std::min(chunk, table.graphs() - first));
        std::iota(ids.begin(), ids.end(), first);
        const Matrix out = predict_batch(model, gather_batch(table, ids));
        std::copy(out.data(), out.data() + out.size(), pred.begin() + static_cast<std::ptrdiff_t>(first * model.dof));
    }
    auto rep = evaluate_predictions(dataset.config, table.targets, pred, dataset.pose, split);
    rep.model_name = model.name();
    return rep;
}

nlohmann::json report_summary(const EvalReport& r) {
    return nlohmann::json{{"split", r.split},
                          {"model", r.model_name},
                          {"dof", r.dof},
                          {"rows", r.rows()},
                          {"loss", r.loss},
                          {"r2", r.r2},
                          {"joint_r2", r.joint_r2},
                          {"position_error_cm", {{"mean", r.position_mean}, {"std", r.position_std}}},
                          {"orientation_error_deg", {{"mean", r.orientation_mean}, {"std", r.orientation_std}}}};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    return out;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << std::setprecision(17);
    return out;
}

const char* const kPoseNames[] = {"x", "y", "z", "Phi", "Theta", "Psi"};

}  // namespace

void write_report_csv(const EvalReport& r, const std::string& path) {
    auto out = open_out(path);
    out << "index";
    for (int i = 1; i <= r.dof; ++i) out << ",theta_true_" << i;
    for (int i = 1; i <= r.dof; ++i) out << ",theta_pred_" << i;
    for (const char* n : kPoseNames) out << ',' << n;
    for (const char* n : kPoseNames) out << ',' << n << "_pred";
    out << ",position_error,orientation_error\n";
    const auto dof = static_cast<std::size_t>(r.dof);
    for (std::size_t k = 0; k < r.rows(); ++k) {
        out << r.sample_index[k];
        for (std::size_t i = 0; i < dof; ++i) out << ',' << r.theta_true[k * dof + i];
        for (std::size_t i = 0; i < dof; ++i) out << ',' << r.theta_pred[k * dof + i];
        for (std::size_t i = 0; i < 6; ++i) out << ',' << r.pose_true[k * 6 + i];
        for (std::size_t i = 0; i < 6; ++i) out << ',' << r.pose_pred[k * 6 + i];
        out << ',' << r.position_error[k] << ',' << r.orientation_error[k] << '\n';
    }
    if (!out) throw IoError("short write on " + path);
}

EvalReport read_report_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty report");
    const auto header = split_csv_line(line);
    int dof = 0;
    for (const auto& h : header) dof += h.rfind("theta_true_", 0) == 0 ? 1 : 0;
    const std::size_t expected = 1 + 2 * static_cast<std::size_t>(dof) + 12 + 2;
    if (dof < 1 || header.size() != expected) throw IoError(path + ": unexpected report columns");

    EvalReport r;
    r.dof = dof;
    const auto udof = static_cast<std::size_t>(dof);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != expected) throw IoError(path + ": wrong field count on line " + std::to_string(line_no));
        try {
            std::size_t c = 0;
            r.sample_index.push_back(std::stoull(cells[c++]));
            for (std::size_t i = 0; i < udof; ++i) r.theta_true.push_back(std::stod(cells[c++]));
            for (std::size_t i = 0; i < udof; ++i) r.theta_pred.push_back(std::stod(cells[c++]));
            for (std::size_t i = 0; i < 6; ++i) r.pose_true.push_back(std::stod(cells[c++]));
            for (std::size_t i = 0; i < 6; ++i) r.pose_pred.push_back(std::stod(cells[c++]));
            r.position_error.push_back(std::stod(cells[c++]));
            r.orientation_error.push_back(std::stod(cells[c++]));
        } catch (const std::logic_error&) {
            throw IoError(path + ": unparsable number on line " + std::to_string(line_no));
        }
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < r.theta_true.size(); ++i) sq += (r.theta_pred[i] - r.theta_true[i]) * (r.theta_pred[i] - r.theta_true[i]);
    r.loss = r.theta_true.empty() ? 0.0 : sq / static_cast<double>(r.theta_true.size());
    if (r.rows() >= 2) {
        r.r2 = r_squared(r.theta_pred, r.theta_true);
        r.joint_r2 = per_joint_r_squared(r.theta_pred, r.theta_true, dof);
    }
    r.position_mean = mean(r.position_error);
    r.position_std = stddev(r.position_error);
    r.orientation_mean = mean(r.orientation_error);
    r.orientation_std = stddev(r.orientation_error);
    return r;
}

Histogram make_histogram(std::span<const double> values, int bins) {
    if (bins < 1) throw std::invalid_argument("make_histogram: bins must be >= 1");
    Histogram h;
    const double top = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
    const double width = top / bins;
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int b = 0; b <= bins; ++b) h.edges[b] = b == bins ? top : width * b;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        int b = width > 0.0 ? static_cast<int>(v / width) : 0;
        b = std::clamp(b, 0, bins - 1);
        ++h.counts[static_cast<std::size_t>(b)];
    }
    return h;
}

namespace {

std::vector<ExtractRow> top_rows(const EvalReport& r, const std::vector<double>& error, std::size_t k) {
    std::vector<std::size_t> order(r.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return error[a] > error[b]; });
    std::vector<ExtractRow> rows;
    const auto dof = static_cast<std::size_t>(r.dof);
    for (std::size_t n = 0; n < k; ++n) {
        const std::size_t i = order[n];
        ExtractRow row;
        row.index = r.sample_index[i];
        row.error = error[i];
        row.x = r.pose_true[i * 6];
        row.y = r.pose_true[i * 6 + 1];
        row.z = r.pose_true[i * 6 + 2];
        for (std::size_t j = 0; j < dof; ++j) row.theta_deg.push_back(rad_to_deg(r.theta_true[i * dof + j]));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<double> errors_of(const std::vector<ExtractRow>& rows) {
    std::vector<double> e;
    for (const auto& r : rows) e.push_back(r.error);
    return e;
}

}  // namespace

WorstCaseExtract worst_case_analysis(const EvalReport& report, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("worst_case_analysis: fraction must be in (0, 1]");
    WorstCaseExtract ex;
    ex.fraction = fraction;
    ex.dof = report.dof;
    // Guard against fraction * N landing a hair above an integer.
    const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(report.rows()) - 1e-9));
    ex.by_position = top_rows(report, report.position_error, std::min(k, report.rows()));
    ex.by_orientation = top_rows(report, report.orientation_error, std::min(k, report.rows()));
    ex.position_histogram = make_histogram(errors_of(ex.by_position));
    ex.orientation_histogram = make_histogram(errors_of(ex.by_orientation));
    return ex;
}

namespace {

void write_histogram(const Histogram& h, const std::string& path) {
    auto out = open_out(path);
    out << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b) out << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
    if (!out) throw IoError("short write on " + path);
}

void write_extract(const std::vector<ExtractRow>& rows, int dof, std::size_t every, const std::string& path) {
    auto out = open_out(path);
    out << "index,error,x,y,z";
    for (int i = 1; i <= dof; ++i) out << ",theta_" << i << "_deg";
    out << '\n';
    for (std::size_t n = 0; n < rows.size(); n += every) {
        const auto& r = rows[n];
        out << r.index << ',' << r.error << ',' << r.x << ',' << r.y << ',' << r.z;
        for (double t : r.theta_deg) out << ',' << t;
        out << '\n';
    }
    if (!out) throw IoError("short write on " + path);
}

}  // namespace

void export_analysis(const WorstCaseExtract& ex, const std::string& out_dir, std::size_t every) {
    if (every == 0) throw std::invalid_argument("export_analysis: every must be >= 1");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
    const std::filesystem::path dir(out_dir);
    write_extract(ex.by_position, ex.dof, every, (dir / "worst_position.csv").string());
    write_extract(ex.by_orientation, ex.dof, every, (dir / "worst_orientation.csv").string());
    write_histogram(ex.position_histogram, (dir / "hist_position.csv").string());
    write_histogram(ex.orientation_histogram, (dir / "hist_orientation.csv").string());
    if (ex.dof == 3) {
        auto out = open_out((dir / "theta_pairs.csv").string());
        out << "index,orientation_error,theta_2_deg,theta_3_deg,half_turn_distance_deg\n";
        for (std::size_t n = 0; n < ex.by_orientation.size(); n += every) {
            const auto& r = ex.by_orientation[n];
            out << r.index << ',' << r.error << ',' << r.theta_deg[1] << ',' << r.theta_deg[2] << ','
                << half_turn_distance(r.theta_deg[1], r.theta_deg[2]) << '\n';
        }
        if (!out) throw IoError("short write on theta_pairs.csv");
    }
}

Histogram read_histogram_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "bin_lo,bin_hi,count") throw IoError(path + ": not a histogram file");
    Histogram h;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 3) throw IoError(path + ": malformed histogram row");
        if (h.edges.empty()) h.edges.push_back(std::stod(cells[0]));
        h.edges.push_back(std::stod(cells[1]));
        h.counts.push_back(std::stoull(cells[2]));
    }
    return h;
}

RankTestResult mann_whitney_less(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_less: empty sample");
    struct Item {
        double value;
        bool first;
    };
    std::vector<Item> all;
    all.reserve(a.size() + b.size());
    for (double v : a) all.push_back({v, true});
    for (double v : b) all.push_back({v, false});
    std::sort(all.begin(), all.end(), [](const Item& x, const Item& y) { return x.value < y.value; });

    const double n1 = static_cast<double>(a.size());
    const double n2 = static_cast<double>(b.size());
    const double n = n1 + n2;
    double rank_sum = 0.0, tie_term = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j].value == all[i].value) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
        for (std::size_t k = i; k < j; ++k)
            if (all[k].first) rank_sum += avg_rank;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    RankTestResult res;
    res.u = rank_sum - n1 * (n1 + 1.0) / 2.0;
    const double mu = n1 * n2 / 2.0;
    const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var <= 0.0) return res;
    res.z = (res.u - mu + 0.5) / std::sqrt(var);
    res.p_value = 0.5 * std::erfc(-res.z / std::sqrt(2.0));
    return res;
}

}  // namespace graphik
