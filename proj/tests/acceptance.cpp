// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include "graphik/cli.hpp"
#include "graphik/datagen.hpp"
#include "graphik/dataset_io.hpp"
#include "graphik/evaluation.hpp"
#include "graphik/mpnn.hpp"
#include "graphik/rng.hpp"
#include "graphik/training.hpp"

#include "oracles.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace graphik;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    nlohmann::json data = nlohmann::json::object();
};

constexpr std::uint64_t kSeed = 7;
constexpr int kFamilyConfigs = 10;  // 9 for training, 1 withheld for testing
constexpr int kSamplesPerConfig = 20000;

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Euler angles of R = Rz(psi) Ry(theta) Rx(phi), in degrees.
Eigen::Vector3d euler_oracle(const Eigen::Matrix3d& r) {
    const double theta = std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0)));
    const double phi = std::atan2(r(2, 1), r(2, 2));
    const double psi = std::atan2(r(1, 0), r(0, 0));
    return Eigen::Vector3d(phi, theta, psi) * (180.0 / std::numbers::pi);
}

// ---------------------------------------------------------------------------

Outcome fk_oracle() {
    Outcome o;
    double worst = 0.0;
    int compared = 0;
    for (int dof : {3, 5, 6}) {
        auto lengths_rng = CounterRng::substream(kSeed, "acceptance-fk-lengths", static_cast<std::uint64_t>(dof));
        auto angle_rng = CounterRng::substream(kSeed, "acceptance-fk-angles", static_cast<std::uint64_t>(dof));
        for (int k = 0; k < 1000; ++k) {
            const auto config = make_config(dof, sample_link_lengths(dof, lengths_rng));
            std::vector<double> theta(dof);
            for (auto& t : theta) t = angle_rng.uniform(0.0, 360.0);
            const auto pose = forward_kinematics(config, theta).pose;
            const Eigen::Matrix4d want = oracle::chain(config, theta);
            for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(pose.position[c] - want(c, 3)));
            const Eigen::Vector3d euler = euler_oracle(want.block<3, 3>(0, 0));
            // Angles near +-180 may land on either side of the cut.
            for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(std::remainder(pose.orientation[c] - euler[c], 360.0)));
            ++compared;
        }
    }
    o.pass = worst <= 1e-9;
    o.detail = std::to_string(compared) + " draws, max component deviation " + fmt(worst, 3);
    o.data = {{"draws", compared}, {"max_deviation", worst}};
    return o;
}

double loss_of(const MPNNModel& m, const GraphBatch& b) {
    const Matrix p = predict_batch(m, b);
    return (p - b.targets).squaredNorm() / static_cast<double>(p.size());
}

Outcome gradient_integrity() {
    Outcome o;
    const char* variants[] = {"de-n", "de-f", "rg-n", "rg-f"};
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const std::uint64_t seed = 100 + static_cast<std::uint64_t>(k);
        auto m = MPNNModel::create(Variant::parse(variants[k % 4]), 3, 2, 32, seed);
        const auto data = generate_dataset(FamilySpec{3, 1, 4, seed});
        auto table = build_table(data, m.variant, seed);
        m.stats = FeatureStats::fit(table.nodes, table.edges);
        normalize_rows(table.nodes, table.edges, m.stats);
        const std::size_t ids[] = {0, 1, 2, 3};
        const auto batch = gather_batch(table, ids);

        nn::Tape tape;
        const auto rec = record_forward(m, tape, batch);
        const auto loss = tape.squared_error(rec.prediction, batch.targets, 1.0 / static_cast<double>(batch.targets.size()));
        tape.backward(loss);
        auto params = m.parameters();
        for (std::size_t p = 0; p < params.size(); ++p) {
            const Matrix& g = tape.grad(rec.params[p]);
            Matrix& w = *params[p].value;
            for (Eigen::Index i = 0; i < w.size(); ++i) {
                const double saved = w.data()[i];
                const double h = 1e-6 * std::max(1.0, std::abs(saved));
                w.data()[i] = saved + h;
                const double up = loss_of(m, batch);
                w.data()[i] = saved - h;
                const double down = loss_of(m, batch);
                w.data()[i] = saved;
                const double fd = (up - down) / (2 * h);
                // Central differences carry roundoff near 1e-10 of the loss, so
                // tiny entries are measured against a 1e-4 floor.
                worst = std::max(worst, std::abs(fd - g.data()[i]) / std::max({std::abs(fd), std::abs(g.data()[i]), 1e-4}));
            }
        }
    }
    o.pass = worst < 1e-4;
    o.detail = "20 instances (DE/RG x N/F), max relative error " + fmt(worst, 3);
    o.data = {{"instances", 20}, {"max_relative_error", worst}};
    return o;
}

Outcome dataset_invariants(const fs::path& work) {
    Outcome o;
    auto rng = CounterRng::substream(kSeed, "acceptance-dataset", 0);
    const auto config = make_config(3, sample_link_lengths(3, rng));
    const auto d = generate_config_samples(config, 0, 10000, kSeed);

    std::size_t violations = 0;
    for (std::size_t i = 0; i < d.rows(); ++i) {
        const auto a = d.theta_row(i);
        for (std::size_t j = i + 1; j < d.rows(); ++j) {
            const auto b = d.theta_row(j);
            double m = 0.0;
            for (int c = 0; c < 3; ++c) m = std::max(m, std::abs(a[c] - b[c]));
            violations += m <= 1.0;
        }
    }
    std::size_t collisions = 0;
    for (std::size_t r = 0; r < d.rows(); ++r) {
        const auto fk = forward_kinematics(config, d.theta_row(r));
        collisions += check_collision(config, fk.frames) != CollisionVerdict::free;
    }
    fs::create_directories(work);
    write_dataset(d, (work / "run_a.gikd").string());
    write_dataset(generate_config_samples(config, 0, 10000, kSeed), (work / "run_b.gikd").string());
    const bool identical = file_bytes(work / "run_a.gikd") == file_bytes(work / "run_b.gikd");

    o.pass = d.rows() == 10000 && violations == 0 && collisions == 0 && identical;
    o.detail = std::to_string(d.rows()) + " samples, " + std::to_string(violations) + " distinctness violations, " +
               std::to_string(collisions) + " collisions, reruns " + (identical ? "bitwise identical" : "differ");
    o.data = {{"rows", d.rows()}, {"violations", violations}, {"collisions", collisions}, {"identical", identical}};
    return o;
}

struct FamilyRun {
    std::string name;
    TrainReport report;
    EvalReport test;
};

FamilyRun train_and_test(const std::vector<Dataset>& family, const char* variant, int dof, int layers, int neurons,
                         const fs::path& work) {
    std::vector<ManipulatorConfig> configs;
    for (const auto& d : family) configs.push_back(d.config);
    const auto plan = split_family(configs, kSeed);
    std::vector<Dataset> train_sets;
    for (int id : plan.train_ids) train_sets.push_back(family[static_cast<std::size_t>(id)]);

    TrainConfig cfg;
    cfg.variant = Variant::parse(variant);
    cfg.dof = dof;
    cfg.layers = layers;
    cfg.neurons = neurons;
    cfg.seed = kSeed;
    cfg.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    auto model = MPNNModel::create(cfg.variant, dof, layers, neurons, kSeed);
    FamilyRun run;
    run.name = model.name();
    const auto result = train(std::move(model), train_sets, cfg);
    run.report = result.report;
    run.test = pose_errors(result.model, family[static_cast<std::size_t>(plan.test_id)], "test", kSeed);

    fs::create_directories(work);
    write_loss_curve_csv(run.report, (work / (run.name + ".train.csv")).string());
    write_report_csv(run.test, (work / (run.name + ".report.csv")).string());
    std::cout << "  " << run.name << ": stopped at epoch " << run.report.stopping_epoch << " (best "
              << run.report.best_epoch << "), test R2 " << fmt(run.test.r2) << ", position " << fmt(run.test.position_mean)
              << " cm, orientation " << fmt(run.test.orientation_mean) << " deg, " << fmt(run.report.wall_clock_s, 3)
              << " s\n";
    return run;
}

nlohmann::json run_json(const FamilyRun& r) {
    return {{"model", r.name},
            {"stopping_epoch", r.report.stopping_epoch},
            {"best_epoch", r.report.best_epoch},
            {"early_stop_loss", r.report.final_early_stop_loss},
            {"train_seconds", r.report.wall_clock_s},
            {"test", report_summary(r.test)}};
}

Outcome de_feasibility(const std::vector<Dataset>& family3, const fs::path& work) {
    Outcome o;
    const auto de3 = train_and_test(family3, "de-n", 3, 2, 32, work);
    const auto family5 = generate_dataset(FamilySpec{5, kFamilyConfigs, kSamplesPerConfig, kSeed});
    const auto de5 = train_and_test(family5, "de-n", 5, 4, 35, work);
    o.pass = de3.test.r2 >= 0.90 && de5.test.r2 < 0.3;
    o.detail = "DE-N-3-2-32 test R2 " + fmt(de3.test.r2) + " (need >= 0.90), DE-N-5-4-35 test R2 " + fmt(de5.test.r2) +
               " (need < 0.3)";
    o.data = {{"de3", run_json(de3)}, {"de5", run_json(de5)}};
    return o;
}

Outcome rg_reproduction(const FamilyRun& rg) {
    Outcome o;
    o.pass = rg.test.r2 >= 0.98 && rg.test.position_mean <= 3.0;
    o.detail = "RG-N-3-2-32 test R2 " + fmt(rg.test.r2) + " (need >= 0.98), mean position error " +
               fmt(rg.test.position_mean) + " cm (need <= 3)";
    o.data = run_json(rg);
    return o;
}

Outcome orientation_signature(const FamilyRun& rg) {
    Outcome o;
    const auto ex = worst_case_analysis(rg.test, 0.05);
    std::vector<double> worst, all;
    for (const auto& r : ex.by_orientation) worst.push_back(half_turn_distance(r.theta_deg[1], r.theta_deg[2]));
    for (std::size_t k = 0; k < rg.test.rows(); ++k) {
        all.push_back(half_turn_distance(rad_to_deg(rg.test.theta_true[k * 3 + 1]), rad_to_deg(rg.test.theta_true[k * 3 + 2])));
    }
    const auto test = mann_whitney_less(worst, all);
    o.pass = test.p_value < 0.01;
    o.detail = "median distance of theta2+theta3 to n*180: " + fmt(median(worst)) + " deg in the worst 5% vs " +
               fmt(median(all)) + " deg overall, one-sided p = " + fmt(test.p_value, 3);
    o.data = {{"extract", worst.size()},
              {"median_worst", median(worst)},
              {"median_all", median(all)},
              {"u", test.u},
              {"p_value", test.p_value}};
    return o;
}

Outcome metric_suite() {
    Outcome o;
    std::size_t failures = 0;
    auto rng = CounterRng::substream(kSeed, "acceptance-metrics", 0);
    // Angles on a 2^-20 degree grid keep every sum and remainder exact.
    const auto grid_angle = [&] { return std::ldexp(std::floor(rng.uniform(-720.0, 720.0) * 1048576.0), -20); };
    for (int k = 0; k < 1000000; ++k) {
        const double a = grid_angle(), b = grid_angle();
        const double d = convex_angle_distance(a, b);
        failures += !(d >= 0.0 && d <= 180.0);
        failures += d != convex_angle_distance(b, a);
        failures += d != convex_angle_distance(a + 360.0, b);
        failures += d != convex_angle_distance(a, b - 720.0);
    }

    for (int k = 0; k < 100; ++k) {
        const std::size_t n = 2 + rng.below(500);
        std::vector<double> t(n);
        for (auto& x : t) x = static_cast<double>(rng.below(100));
        // Make the integer sum divisible by n so the mean is exact.
        long long sum = std::accumulate(t.begin(), t.end(), 0LL, [](long long s, double x) { return s + static_cast<long long>(x); });
        t[0] += static_cast<double>((static_cast<long long>(n) - sum % static_cast<long long>(n)) % static_cast<long long>(n));
        sum = std::accumulate(t.begin(), t.end(), 0LL, [](long long s, double x) { return s + static_cast<long long>(x); });
        if (std::all_of(t.begin(), t.end(), [&](double x) { return x == t[0]; })) t[1] += static_cast<double>(n), t[0] -= static_cast<double>(n);
        const std::vector<double> mean_pred(n, static_cast<double>(sum / static_cast<long long>(n)));
        failures += r_squared(t, t) != 1.0;
        failures += r_squared(mean_pred, t) != 0.0;
    }

    for (std::size_t n : {20u, 99u, 100u, 101u, 1000u, 4321u}) {
        EvalReport r;
        r.dof = 3;
        for (std::size_t k = 0; k < n; ++k) {
            r.sample_index.push_back(k);
            for (int i = 0; i < 3; ++i) {
                r.theta_true.push_back(0.0);
                r.theta_pred.push_back(0.0);
            }
            for (int c = 0; c < 6; ++c) {
                r.pose_true.push_back(0.0);
                r.pose_pred.push_back(0.0);
            }
            r.position_error.push_back(std::floor(rng.uniform(0.0, 50.0)));
            r.orientation_error.push_back(rng.uniform(0.0, 180.0));
        }
        const auto ex = worst_case_analysis(r, 0.05);
        const auto k = static_cast<std::size_t>((n * 5 + 99) / 100);
        for (const auto* rows : {&ex.by_position, &ex.by_orientation}) {
            const auto& err = rows == &ex.by_position ? r.position_error : r.orientation_error;
            failures += rows->size() != k;
            std::set<std::size_t> picked;
            double floor_in = 1e300;
            for (const auto& row : *rows) {
                picked.insert(row.index);
                floor_in = std::min(floor_in, row.error);
                failures += row.error != err[row.index];
            }
            failures += picked.size() != rows->size();
            for (std::size_t i = 0; i < n; ++i) {
                if (!picked.count(i)) failures += err[i] > floor_in;
            }
        }
    }
    o.pass = failures == 0;
    o.detail = "1e6 angle pairs, 100 R2 cases, 6 extract sizes: " + std::to_string(failures) + " exact-check failures";
    o.data = {{"failures", failures}};
    return o;
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "graphik");
    std::ostringstream out, err;
    const int code = dispatch(args, out, err);
    if (code != 0) std::cerr << err.str();
    return code;
}

Outcome pipeline_replay(const fs::path& work) {
    Outcome o;
    const auto a = work / "replay_a";
    const auto b = work / "replay_b";
    fs::remove_all(a);
    fs::remove_all(b);
    bool ok = cli({"generate", "--dof", "3", "--configs", "4", "--samples", "2000", "--seed", "11",
                   "--validation-samples", "1000", "--out", (a / "data").string()}) == 0;
    ok = ok && cli({"train", "--variant", "rg-f", "--dof", "3", "--layers", "2", "--neurons", "32", "--data",
                    (a / "data").string(), "--seed", "11", "--out", (a / "train").string(), "--epochs", "15",
                    "--batch", "500", "--quiet"}) == 0;
    ok = ok && cli({"eval", "--ckpt", (a / "train" / "RG-F-3-2-32.ckpt.json").string(), "--data", (a / "data").string(),
                    "--split", "test", "--out", (a / "eval").string()}) == 0;
    ok = ok && cli({"analyze", "--report", (a / "eval" / "report.csv").string(), "--out", (a / "analysis").string()}) == 0;
    if (!ok) {
        o.detail = "first pipeline run failed";
        return o;
    }
    // Replay every stage from its manifest, pointing inputs at the replayed outputs.
    const auto manifest = [](const fs::path& dir) { return (dir / kManifestName).string(); };
    ok = cli({"generate", "--from-manifest", manifest(a / "data"), "--out", (b / "data").string(), "--threads", "2"}) == 0;
    ok = ok && cli({"train", "--from-manifest", manifest(a / "train"), "--data", (b / "data").string(), "--out",
                    (b / "train").string(), "--threads", "2"}) == 0;
    ok = ok && cli({"eval", "--from-manifest", manifest(a / "eval"), "--ckpt", (b / "train" / "RG-F-3-2-32.ckpt.json").string(),
                    "--data", (b / "data").string(), "--out", (b / "eval").string()}) == 0;
    ok = ok && cli({"analyze", "--from-manifest", manifest(a / "analysis"), "--report", (b / "eval" / "report.csv").string(),
                    "--out", (b / "analysis").string()}) == 0;
    if (!ok) {
        o.detail = "manifest replay failed";
        return o;
    }

    std::vector<std::string> differing;
    std::size_t compared = 0;
    const auto compare = [&](const fs::path& rel) {
        ++compared;
        if (!fs::exists(a / rel) || file_bytes(a / rel) != file_bytes(b / rel)) differing.push_back(rel.string());
    };
    for (const auto& f : read_manifest(manifest(a / "data")).outputs) compare(fs::path("data") / f.path);
    compare("train/RG-F-3-2-32.train.csv");
    compare("eval/report.csv");
    for (const char* f : {"worst_position.csv", "worst_orientation.csv", "hist_position.csv", "hist_orientation.csv", "theta_pairs.csv"})
        compare(fs::path("analysis") / f);
    o.pass = differing.empty();
    o.detail = std::to_string(compared) + " artifacts compared after replay, " + std::to_string(differing.size()) + " differ";
    for (const auto& d : differing) o.detail += " " + d;
    o.data = {{"compared", compared}, {"differing", differing}};
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graphik acceptance run"};
    std::string work_dir = "acceptance_work";
    std::vector<int> only;
    app.add_option("--work-dir", work_dir, "Directory for generated artifacts");
    app.add_option("--only", only, "Run only these criteria (1-8)");
    CLI11_PARSE(app, argc, argv);
    const fs::path work(work_dir);
    fs::create_directories(work);
    const auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

    nlohmann::json results = nlohmann::json::object();
    int failed = 0;
    const auto report = [&](int id, const std::string& title, const std::function<Outcome()>& fn) {
        if (!wanted(id)) return;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("threw: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::cout << "criterion " << id << " [" << title << "]: " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail
                  << ", " << fmt(secs, 3) << " s)" << std::endl;
        o.data["pass"] = o.pass;
        o.data["seconds"] = secs;
        results[std::to_string(id)] = o.data;
    };

    report(1, "FK oracle equivalence", fk_oracle);
    report(2, "gradient integrity", gradient_integrity);
    report(3, "dataset invariants", [&] { return dataset_invariants(work / "dataset"); });

    std::vector<Dataset> family3;
    if (wanted(4) || wanted(5) || wanted(6)) family3 = generate_dataset(FamilySpec{3, kFamilyConfigs, kSamplesPerConfig, kSeed});
    report(4, "DE feasibility split", [&] { return de_feasibility(family3, work / "family"); });

    FamilyRun rg;
    bool rg_ready = false;
    const auto rg_run = [&]() -> const FamilyRun& {
        if (!rg_ready) {
            rg = train_and_test(family3, "rg-n", 3, 2, 32, work / "family");
            rg_ready = true;
        }
        return rg;
    };
    report(5, "RG desk-scale reproduction", [&] { return rg_reproduction(rg_run()); });
    report(6, "orientation failure-mode signature", [&] { return orientation_signature(rg_run()); });
    report(7, "metric property suite", metric_suite);
    report(8, "pipeline reproducibility", [&] { return pipeline_replay(work); });

    std::ofstream(work / "acceptance_results.json") << results.dump(2) << '\n';
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
