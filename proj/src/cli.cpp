#include "graphik/cli.hpp"

#include "graphik/datagen.hpp"
#include "graphik/dataset_io.hpp"
#include "graphik/errors.hpp"
#include "graphik/evaluation.hpp"
#include "graphik/mpnn.hpp"
#include "graphik/rng.hpp"
#include "graphik/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace graphik {

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void to_json(nlohmann::json& j, const RunManifest& m) {
    auto files = [](const std::vector<RunManifest::File>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& f : v) a.push_back({{"path", f.path}, {"digest", f.digest}});
        return a;
    };
    j = nlohmann::json{{"format", "graphik-manifest"},
                       {"subcommand", m.subcommand},
                       {"tool_version", m.tool_version},
                       {"seed", m.seed},
                       {"config", m.config},
                       {"argv", m.argv},
                       {"inputs", files(m.inputs)},
                       {"outputs", files(m.outputs)},
                       {"wall_clock_s", m.wall_clock_s}};
}

void from_json(const nlohmann::json& j, RunManifest& m) {
    if (j.value("format", "") != "graphik-manifest") throw IoError("not a graphik manifest");
    m.subcommand = j.at("subcommand").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = j.at("config");
    m.argv = j.at("argv").get<std::vector<std::string>>();
    auto files = [](const nlohmann::json& a) {
        std::vector<RunManifest::File> v;
        for (const auto& f : a) v.push_back({f.at("path").get<std::string>(), f.at("digest").get<std::string>()});
        return v;
    };
    m.inputs = files(j.at("inputs"));
    m.outputs = files(j.at("outputs"));
    m.wall_clock_s = j.at("wall_clock_s").get<double>();
}

namespace {

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": malformed JSON: " + e.what());
    }
}

void write_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("short write on " + path);
}

}  // namespace

RunManifest read_manifest(const std::string& path) {
    try {
        return read_json(path).get<RunManifest>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": malformed manifest: " + e.what());
    } catch (const IoError& e) {
        throw IoError(path + ": " + e.what());
    }
}

void write_manifest(const RunManifest& m, const std::string& dir) {
    write_json(nlohmann::json(m), (fs::path(dir) / kManifestName).string());
}

void verify_input(const std::string& path) {
    const fs::path p(path);
    const auto manifest = p.parent_path() / kManifestName;
    if (!fs::exists(manifest)) return;
    const auto m = read_manifest(manifest.string());
    for (const auto& f : m.outputs) {
        if (f.path != p.filename().string()) continue;
        const auto actual = file_digest(path);
        if (actual != f.digest) {
            throw PreconditionError(path + ": content digest " + actual + " does not match " + f.digest +
                                    " recorded by " + m.subcommand);
        }
        return;
    }
}

namespace {

int default_threads() {
    if (const char* env = std::getenv("GRAPHIK_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::string num(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

std::string config_file(int id) {
    char name[32];
    std::snprintf(name, sizeof name, "config_%02d.gikd", id);
    return name;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

RunManifest::File output_file(const fs::path& dir, const std::string& name) {
    return {name, file_digest((dir / name).string())};
}

RunManifest::File input_file(const std::string& path) { return {path, file_digest(path)}; }

// ---- generate -------------------------------------------------------------

struct GenerateOptions {
    int dof = 3;
    int configs = 10;
    int samples = 1000;
    std::uint64_t seed = 0;
    std::size_t validation_samples = kValidationSamples;
    std::string out;
    int threads = 1;
};

void run_generate(const GenerateOptions& o, std::ostream& out) {
    const auto started = Clock::now();
    const FamilySpec spec{o.dof, o.configs, o.samples, o.seed};
    validate(spec);
    const fs::path dir(o.out);
    fs::create_directories(dir);

    const auto configs = sample_family_configs(spec);
    const auto plan = split_family(configs, o.seed);
    const GenerationOptions gen{o.threads};

    RunManifest m;
    m.subcommand = "generate";
    m.seed = o.seed;
    m.config = {{"dof", o.dof},   {"configs", o.configs},   {"samples", o.samples},
                {"seed", o.seed}, {"validation_samples", o.validation_samples}};
    m.argv = {"--dof",  std::to_string(o.dof),  "--configs", std::to_string(o.configs), "--samples",
              std::to_string(o.samples), "--seed", std::to_string(o.seed), "--validation-samples",
              std::to_string(o.validation_samples), "--out", o.out};

    std::vector<std::string> train_files;
    generate_dataset(
        spec,
        [&](Dataset&& d) {
            d.role = d.config_id == plan.test_id ? "test" : "train";
            const auto name = config_file(d.config_id);
            write_dataset(d, (dir / name).string());
            if (d.config_id != plan.test_id) train_files.push_back(name);
            out << "wrote " << name << " (" << d.rows() << " samples, total length " << d.config.total_length()
                << " cm, " << d.role << ")\n";
        },
        gen);

    nlohmann::json split{{"dof", o.dof},
                         {"seed", o.seed},
                         {"train_ids", plan.train_ids},
                         {"test_id", plan.test_id},
                         {"train", train_files},
                         {"test", config_file(plan.test_id)},
                         {"configs", configs}};
    if (o.validation_samples > 0) {
        auto v = generate_config_samples(plan.validation_config, plan.validation_id, o.validation_samples, o.seed, gen);
        v.role = "validation";
        write_dataset(v, (dir / "validation.gikd").string());
        split["validation_id"] = plan.validation_id;
        split["validation"] = "validation.gikd";
        split["validation_config"] = plan.validation_config;
        out << "wrote validation.gikd (" << v.rows() << " samples, total length " << v.config.total_length() << " cm)\n";
    }
    write_json(split, (dir / "split.json").string());

    for (int id = 0; id < o.configs; ++id) m.outputs.push_back(output_file(dir, config_file(id)));
    if (o.validation_samples > 0) m.outputs.push_back(output_file(dir, "validation.gikd"));
    m.outputs.push_back(output_file(dir, "split.json"));
    m.wall_clock_s = seconds_since(started);
    write_manifest(m, o.out);
}

// ---- train ----------------------------------------------------------------

struct TrainOptions {
    std::string variant;
    int dof = 3;
    int layers = 2;
    int neurons = 32;
    std::string data;
    std::uint64_t seed = 0;
    std::string out;
    int epochs = 1000;
    std::size_t batch = 5000;
    int patience = 10;
    double lr = 0.002;
    double weight_decay = 0.01;
    double split_ratio = 0.8;
    int runs = 1;
    int threads = 1;
    bool quiet = false;
};

nlohmann::json read_split(const std::string& data_dir) {
    const auto path = (fs::path(data_dir) / "split.json").string();
    verify_input(path);
    return read_json(path);
}

void run_train(const TrainOptions& o, std::ostream& out) {
    const auto started = Clock::now();
    TrainConfig tc;
    tc.variant = Variant::parse(o.variant);
    tc.dof = o.dof;
    tc.layers = o.layers;
    tc.neurons = o.neurons;
    tc.learning_rate = o.lr;
    tc.weight_decay = o.weight_decay;
    tc.batch_size = o.batch;
    tc.max_epochs = o.epochs;
    tc.patience = o.patience;
    tc.split_ratio = o.split_ratio;
    tc.seed = o.seed;
    tc.threads = o.threads;
    tc.validate();
    if (o.runs < 1) throw std::invalid_argument("train: --runs must be >= 1");

    const auto split = read_split(o.data);
    if (split.at("dof").get<int>() != o.dof) {
        throw PreconditionError("train: --dof " + std::to_string(o.dof) + " but " + o.data + " holds " +
                                std::to_string(split.at("dof").get<int>()) + "-DOF data");
    }
    RunManifest m;
    m.subcommand = "train";
    m.seed = o.seed;
    std::vector<Dataset> datasets;
    nlohmann::json data_files = nlohmann::json::array();
    for (const auto& name : split.at("train")) {
        const auto path = (fs::path(o.data) / name.get<std::string>()).string();
        verify_input(path);
        m.inputs.push_back(input_file(path));
        data_files.push_back({{"path", path}, {"digest", m.inputs.back().digest}});
        datasets.push_back(read_dataset(path));
    }

    const fs::path dir(o.out);
    fs::create_directories(dir);
    m.config = tc;
    m.config["runs"] = o.runs;
    m.config["data"] = o.data;
    m.argv = {"--variant", o.variant,         "--dof",       std::to_string(o.dof),      "--layers",
              std::to_string(o.layers), "--neurons", std::to_string(o.neurons), "--data",   o.data,
              "--seed",    std::to_string(o.seed), "--epochs", std::to_string(o.epochs), "--batch",
              std::to_string(o.batch), "--patience", std::to_string(o.patience), "--lr", num(o.lr),
              "--weight-decay", num(o.weight_decay), "--split-ratio", num(o.split_ratio), "--runs",
              std::to_string(o.runs), "--out", o.out};

    for (int run = 1; run <= o.runs; ++run) {
        TrainConfig rc = tc;
        rc.seed = o.seed + static_cast<std::uint64_t>(run - 1);
        auto model = MPNNModel::create(rc.variant, rc.dof, rc.layers, rc.neurons, rc.seed);
        const std::string stem = model.name() + (run == 1 ? "" : ".run" + std::to_string(run));
        out << "training " << stem << " (" << model.parameter_count() << " parameters, seed " << rc.seed << ")\n";
        auto result = train(std::move(model), std::span<const Dataset>(datasets), rc, [&](const EpochRecord& e) {
            if (!o.quiet) out << "  epoch " << e.epoch << " train " << e.train_loss << " early-stop " << e.early_stop_loss << '\n';
        });
        const auto& r = result.report;
        out << stem << ": best epoch " << r.best_epoch << ", stopped after " << r.stopping_epoch << ", early-stop loss "
            << r.final_early_stop_loss << ", R2 " << r.final_early_stop_r2 << '\n';

        Checkpoint ck;
        ck.model = std::move(result.model);
        ck.optimizer = std::move(result.optimizer);
        ck.run = {{"seed", rc.seed},
                  {"reference_seed", rc.seed},
                  {"run", run},
                  {"name", ck.model.name()},
                  {"train_config", rc},
                  {"best_epoch", r.best_epoch},
                  {"stopping_epoch", r.stopping_epoch},
                  {"data", data_files}};
        save_checkpoint(ck, (dir / (stem + ".ckpt.json")).string());
        write_loss_curve_csv(r, (dir / (stem + ".train.csv")).string());
        write_json(report_to_json(r), (dir / (stem + ".train.json")).string());
        for (const auto& suffix : {".ckpt.json", ".train.csv", ".train.json"}) m.outputs.push_back(output_file(dir, stem + suffix));
    }
    m.wall_clock_s = seconds_since(started);
    write_manifest(m, o.out);
}

// ---- eval -----------------------------------------------------------------

struct EvalOptions {
    std::string ckpt;
    std::string data;
    std::string split = "test";
    std::string out;
};

void run_eval(const EvalOptions& o, std::ostream& out) {
    const auto started = Clock::now();
    verify_input(o.ckpt);
    const auto ck = load_checkpoint(o.ckpt);
    const auto split = read_split(o.data);
    if (!split.contains(o.split)) throw PreconditionError("eval: " + o.data + " has no " + o.split + " split");
    const auto path = (fs::path(o.data) / split.at(o.split).get<std::string>()).string();
    verify_input(path);
    const auto header = read_dataset_header(path);
    if (header.at("dof").get<int>() != ck.model.dof) {
        throw PreconditionError("eval: checkpoint " + ck.model.name() + " is for " + std::to_string(ck.model.dof) +
                                "-DOF manipulators but " + path + " holds " +
                                std::to_string(header.at("dof").get<int>()) + "-DOF samples");
    }
    const auto dataset = read_dataset(path);
    const auto ref_seed = ck.run.value("reference_seed", std::uint64_t{0});
    const auto report = pose_errors(ck.model, dataset, o.split, ref_seed);

    const fs::path dir(o.out);
    fs::create_directories(dir);
    write_report_csv(report, (dir / "report.csv").string());
    write_json(report_summary(report), (dir / "summary.json").string());
    out << report.model_name << " on " << o.split << ": R2 " << report.r2 << ", position " << report.position_mean
        << " +- " << report.position_std << " cm, orientation " << report.orientation_mean << " +- "
        << report.orientation_std << " deg\n";

    RunManifest m;
    m.subcommand = "eval";
    m.seed = ref_seed;
    m.config = {{"ckpt", o.ckpt}, {"data", o.data}, {"split", o.split}};
    m.argv = {"--ckpt", o.ckpt, "--data", o.data, "--split", o.split, "--out", o.out};
    m.inputs = {input_file(o.ckpt), input_file(path)};
    m.outputs = {output_file(dir, "report.csv"), output_file(dir, "summary.json")};
    m.wall_clock_s = seconds_since(started);
    write_manifest(m, o.out);
}

// ---- analyze --------------------------------------------------------------

struct AnalyzeOptions {
    std::string report;
    double fraction = 0.05;
    std::string out;
    std::size_t every = 1;
};

void run_analyze(const AnalyzeOptions& o, std::ostream& out) {
    const auto started = Clock::now();
    verify_input(o.report);
    const auto report = read_report_csv(o.report);
    const auto ex = worst_case_analysis(report, o.fraction);
    export_analysis(ex, o.out, o.every);

    nlohmann::json summary{{"rows", report.rows()},
                           {"fraction", o.fraction},
                           {"extract_size", ex.by_position.size()},
                           {"worst_position_min_error", ex.by_position.empty() ? 0.0 : ex.by_position.back().error},
                           {"worst_orientation_min_error", ex.by_orientation.empty() ? 0.0 : ex.by_orientation.back().error}};
    std::vector<std::string> files = {"worst_position.csv", "worst_orientation.csv", "hist_position.csv",
                                      "hist_orientation.csv"};
    if (report.dof == 3 && report.rows() > 0) {
        std::vector<double> all, worst;
        for (std::size_t r = 0; r < report.rows(); ++r) {
            all.push_back(half_turn_distance(rad_to_deg(report.theta_true[r * 3 + 1]), rad_to_deg(report.theta_true[r * 3 + 2])));
        }
        for (const auto& row : ex.by_orientation) worst.push_back(half_turn_distance(row.theta_deg[1], row.theta_deg[2]));
        const auto test = mann_whitney_less(worst, all);
        summary["half_turn_distance"] = {{"median_worst", median(worst)},
                                         {"median_all", median(all)},
                                         {"mann_whitney_u", test.u},
                                         {"z", test.z},
                                         {"p_value", test.p_value}};
        out << "theta2+theta3 distance to n*180: median " << median(worst) << " deg in the worst extract vs "
            << median(all) << " deg overall (one-sided p = " << test.p_value << ")\n";
        files.push_back("theta_pairs.csv");
    }
    const fs::path dir(o.out);
    write_json(summary, (dir / "summary.json").string());
    files.push_back("summary.json");
    out << "worst " << o.fraction * 100 << "%: " << ex.by_position.size() << " of " << report.rows() << " samples\n";

    RunManifest m;
    m.subcommand = "analyze";
    m.config = {{"report", o.report}, {"fraction", o.fraction}, {"every", o.every}};
    m.argv = {"--report", o.report, "--fraction", num(o.fraction), "--every", std::to_string(o.every), "--out", o.out};
    m.inputs = {input_file(o.report)};
    for (const auto& f : files) m.outputs.push_back(output_file(dir, f));
    m.wall_clock_s = seconds_since(started);
    write_manifest(m, o.out);
}

// ---- inspect --------------------------------------------------------------

void run_inspect(const std::string& path, std::ostream& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[8] = {};
    in.read(magic, sizeof magic);
    if (in.gcount() == 8 && std::equal(magic, magic + 8, kDatasetMagic)) {
        out << read_dataset_header(path).dump(2) << '\n';
        return;
    }
    const auto j = read_json(path);
    const auto format = j.value("format", "");
    if (format == "graphik-checkpoint") {
        const auto ck = load_checkpoint(path);
        nlohmann::json info{{"format", format},
                            {"name", ck.model.name()},
                            {"variant", ck.model.variant.tag()},
                            {"dof", ck.model.dof},
                            {"layers", ck.model.layers},
                            {"neurons", ck.model.neurons},
                            {"parameters", ck.model.parameter_count()},
                            {"optimizer_step", ck.optimizer.step},
                            {"run", ck.run}};
        out << info.dump(2) << '\n';
    } else if (format == "graphik-manifest") {
        out << j.dump(2) << '\n';
    } else {
        throw IoError(path + ": not a dataset, checkpoint or manifest");
    }
}

// ---- dispatch -------------------------------------------------------------

int report_error(std::ostream& err, const char* category, const std::exception& e) {
    err << "graphik: " << category << " error: " << e.what() << '\n';
    return 1;
}

/// Splices the argv stored in a manifest in front of the user's own options,
/// so later (explicit) values win.
std::vector<std::string> expand_manifest(std::vector<std::string> args) {
    if (args.size() < 2) return args;
    for (std::size_t i = 2; i < args.size(); ++i) {
        std::string path;
        std::size_t erase = 0;
        if (args[i] == "--from-manifest" && i + 1 < args.size()) {
            path = args[i + 1];
            erase = 2;
        } else if (args[i].rfind("--from-manifest=", 0) == 0) {
            path = args[i].substr(16);
            erase = 1;
        } else {
            continue;
        }
        const auto m = read_manifest(path);
        if (m.subcommand != args[1]) {
            throw PreconditionError(path + " records a '" + m.subcommand + "' run, not '" + args[1] + "'");
        }
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + erase));
        args.insert(args.begin() + 2, m.argv.begin(), m.argv.end());
        return args;
    }
    return args;
}

}  // namespace

int dispatch(const std::vector<std::string>& raw, std::ostream& out, std::ostream& err) {
    CLI::App app{"Graph-network inverse kinematics: generate data, train, evaluate and analyze", "graphik"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_version_flag("--version", kToolVersion);
    std::string manifest_path;
    const int threads = default_threads();

    GenerateOptions gen;
    gen.threads = threads;
    auto* g = app.add_subcommand("generate", "Sample link lengths and joint configurations of a manipulator family");
    g->add_option("--dof", gen.dof, "Degrees of freedom (3, 5 or 6)")->required();
    g->add_option("--configs", gen.configs, "Number of link-length configurations")->required();
    g->add_option("--samples", gen.samples, "Samples per configuration")->required();
    g->add_option("--seed", gen.seed, "Seed of all random streams")->required();
    g->add_option("--validation-samples", gen.validation_samples, "Samples of the validation configuration (0 = none)");
    g->add_option("--out", gen.out, "Output directory")->required();
    g->add_option("--threads", gen.threads, "Worker threads (default: $GRAPHIK_THREADS or all cores)")->check(CLI::PositiveNumber);
    g->add_option("--from-manifest", manifest_path, "Replay the options recorded in a manifest");

    TrainOptions tr;
    tr.threads = threads;
    auto* t = app.add_subcommand("train", "Train an MPNN on the training configurations of a data directory");
    t->add_option("--variant", tr.variant, "de-n, de-f, rg-n or rg-f")->required();
    t->add_option("--dof", tr.dof, "Degrees of freedom")->required();
    t->add_option("--layers", tr.layers, "Hidden layers per MLP")->required();
    t->add_option("--neurons", tr.neurons, "Units per hidden layer")->required();
    t->add_option("--data", tr.data, "Directory written by generate")->required();
    t->add_option("--seed", tr.seed, "Seed for initialization, split, shuffling and reference angles")->required();
    t->add_option("--out", tr.out, "Output directory for checkpoint and loss curve")->required();
    t->add_option("--epochs", tr.epochs, "Maximum epochs");
    t->add_option("--batch", tr.batch, "Batch size");
    t->add_option("--patience", tr.patience, "Early-stopping patience in epochs");
    t->add_option("--lr", tr.lr, "Learning rate");
    t->add_option("--weight-decay", tr.weight_decay, "AdamW weight decay");
    t->add_option("--split-ratio", tr.split_ratio, "Share of samples used for gradient steps");
    t->add_option("--runs", tr.runs, "Independent runs with seeds seed, seed+1, ...");
    t->add_option("--threads", tr.threads, "Worker threads")->check(CLI::PositiveNumber);
    t->add_flag("--quiet", tr.quiet, "Do not print per-epoch losses");
    t->add_option("--from-manifest", manifest_path, "Replay the options recorded in a manifest");

    EvalOptions ev;
    auto* e = app.add_subcommand("eval", "Pose errors of a checkpoint on the test or validation configuration");
    e->add_option("--ckpt", ev.ckpt, "Checkpoint file")->required();
    e->add_option("--data", ev.data, "Directory written by generate")->required();
    e->add_option("--split", ev.split, "validation or test")->check(CLI::IsMember({"validation", "test"}));
    e->add_option("--out", ev.out, "Output directory")->required();
    e->add_option("--from-manifest", manifest_path, "Replay the options recorded in a manifest");

    AnalyzeOptions an;
    auto* a = app.add_subcommand("analyze", "Worst-case extracts, histograms and scatter data from an eval report");
    a->add_option("--report", an.report, "report.csv written by eval")->required();
    a->add_option("--fraction", an.fraction, "Share of samples in the extract");
    a->add_option("--every", an.every, "Write every n-th extract row to the scatter files")->check(CLI::PositiveNumber);
    a->add_option("--out", an.out, "Output directory")->required();
    a->add_option("--from-manifest", manifest_path, "Replay the options recorded in a manifest");

    std::string inspect_path;
    auto* in = app.add_subcommand("inspect", "Print metadata of a dataset, checkpoint or manifest");
    in->add_option("file", inspect_path, "File to inspect")->required();

    std::vector<std::string> args;
    try {
        args = expand_manifest(raw);
    } catch (const IoError& ex) {
        return report_error(err, "io", ex);
    } catch (const PreconditionError& ex) {
        return report_error(err, "precondition", ex);
    }
    std::vector<const char*> cargs;
    for (const auto& s : args) cargs.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*g) run_generate(gen, out);
        else if (*t) run_train(tr, out);
        else if (*e) run_eval(ev, out);
        else if (*a) run_analyze(an, out);
        else if (*in) run_inspect(inspect_path, out);
        return 0;
    } catch (const PreconditionError& ex) {
        return report_error(err, "precondition", ex);
    } catch (const IoError& ex) {
        return report_error(err, "io", ex);
    } catch (const NumericalError& ex) {
        return report_error(err, "numerical", ex);
    } catch (const SaturationError& ex) {
        return report_error(err, "saturation", ex);
    } catch (const UndefinedMetricError& ex) {
        return report_error(err, "undefined metric", ex);
    } catch (const StateError& ex) {
        return report_error(err, "state", ex);
    } catch (const std::invalid_argument& ex) {
        return report_error(err, "invalid argument", ex);
    } catch (const fs::filesystem_error& ex) {
        return report_error(err, "io", ex);
    } catch (const std::exception& ex) {
        return report_error(err, "runtime", ex);
    }
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    return dispatch(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace graphik
