// firecast: simulate | dataset | train | eval | cost
//
// Every subcommand takes an optional --config JSON file; explicit flags win
// over config values. Unknown config keys are rejected. Each run writes a
// resolved_config.json snapshot next to its outputs.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "firecast/checkpoint.hpp"
#include "firecast/dataset.hpp"
#include "firecast/sim.hpp"
#include "firecast/train.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace firecast;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object: " + path);
    return j;
}

// Applies config values through `setters`, flags-first: a key is skipped when
// the matching CLI option was given explicitly. Unknown keys are an error.
void apply_config(const json& cfg, CLI::App& app,
                  const std::map<std::string, std::function<void(const json&)>>& setters) {
    for (const auto& [key, value] : cfg.items()) {
        auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("unknown config key: " + key);
        const CLI::Option* opt = app.get_option_no_throw("--" + key);
        if (opt != nullptr && opt->count() > 0) continue; // flag wins
        try {
            it->second(value);
        } catch (const json::exception& e) {
            throw ConfigError("bad value for config key " + key + ": " + e.what());
        }
    }
}

void write_snapshot(const fs::path& dir, const json& resolved) {
    fs::create_directories(dir);
    std::ofstream out(dir / "resolved_config.json");
    if (!out) throw DataError("cannot write " + (dir / "resolved_config.json").string());
    out << resolved.dump(2) << "\n";
}

json sim_params_json(const SimParams& p) {
    return json{{"width", p.width},     {"height", p.height},   {"density", p.density},
                {"i_seed", p.i_seed},   {"q_th", p.q_th},       {"lambda", p.lambda},
                {"q_die", p.q_die},     {"radius_r", p.radius_r}, {"n_seeds", p.n_seeds},
                {"max_steps", p.max_steps}, {"seed", p.rng_seed}};
}

void force_single_thread() {
#ifdef _OPENMP
    omp_set_num_threads(1);
#endif
}

// Shared simulation parameter flags/config keys.
struct SimFlags {
    SimParams params;

    void attach(CLI::App& app) {
        app.add_option("--width", params.width, "grid width");
        app.add_option("--height", params.height, "grid height");
        app.add_option("--density", params.density, "tree density percentage [0,100]");
        app.add_option("--i-seed", params.i_seed, "seed intensity multiplier");
        app.add_option("--q-th", params.q_th, "ignition threshold");
        app.add_option("--lambda", params.lambda, "heat transfer efficiency (0,1]");
        app.add_option("--q-die", params.q_die, "ember heat loss per step");
        app.add_option("--radius", params.radius_r, "neighborhood Chebyshev radius");
        app.add_option("--n-seeds", params.n_seeds, "fire seeds per simulation");
        app.add_option("--max-steps", params.max_steps, "step cap per simulation");
    }

    std::map<std::string, std::function<void(const json&)>> setters() {
        return {
            {"width", [this](const json& v) { params.width = v; }},
            {"height", [this](const json& v) { params.height = v; }},
            {"density", [this](const json& v) { params.density = v; }},
            {"i-seed", [this](const json& v) { params.i_seed = v; }},
            {"q-th", [this](const json& v) { params.q_th = v; }},
            {"lambda", [this](const json& v) { params.lambda = v; }},
            {"q-die", [this](const json& v) { params.q_die = v; }},
            {"radius", [this](const json& v) { params.radius_r = v; }},
            {"n-seeds", [this](const json& v) { params.n_seeds = v; }},
            {"max-steps", [this](const json& v) { params.max_steps = v; }},
        };
    }
};

void validate_params(const SimParams& p) {
    if (auto err = p.validate(); !err.empty()) throw ConfigError(err);
}

LabelMode parse_label_mode(const std::string& name) {
    if (name == "instantaneous") return LabelMode::Instantaneous;
    if (name == "latched") return LabelMode::Latched;
    throw ConfigError("label-mode must be 'instantaneous' or 'latched', got '" + name + "'");
}

AOISpec parse_aoi(const std::string& text, int width, int height) {
    const auto comma = text.find(',');
    AOISpec aoi;
    try {
        if (comma == std::string::npos) throw std::invalid_argument("missing comma");
        aoi.x = std::stoi(text.substr(0, comma));
        aoi.y = std::stoi(text.substr(comma + 1));
    } catch (const std::exception&) {
        throw ConfigError("aoi must be 'x,y', got '" + text + "'");
    }
    if (aoi.x < 0 || aoi.x >= width || aoi.y < 0 || aoi.y >= height)
        throw ConfigError("aoi (" + text + ") outside the " + std::to_string(width) + "x" +
                          std::to_string(height) + " grid");
    return aoi;
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(CLI::App& app, SimFlags& sf, const std::string& config_path, int sims,
                 std::uint64_t seed, const std::string& out, bool export_frames) {
    apply_config(load_config(config_path), app,
                 [&] {
                     auto s = sf.setters();
                     s["sims"] = [&sims](const json& v) { sims = v; };
                     s["seed"] = [&seed](const json& v) { seed = v; };
                     s["out"] = [&](const json&) {};
                     s["export-frames"] = [&export_frames](const json& v) { export_frames = v; };
                     return s;
                 }());
    validate_params(sf.params);
    if (sims < 1) throw ConfigError("sims must be at least 1");

    const fs::path dir(out);
    fs::create_directories(dir);
    const Palette palette = Palette::defaults();

    std::ofstream summary(dir / "summary.csv");
    if (!summary) throw DataError("cannot write " + (dir / "summary.csv").string());
    summary << "sim,steps,burned_fraction\n";

    for (int i = 0; i < sims; ++i) {
        SimParams p = sf.params;
        p.rng_seed = seed + static_cast<std::uint64_t>(i);
        auto traj = run(p);
        summary << i << "," << traj.back().step_index << "," << burned_fraction(traj.back())
                << "\n";

        std::ofstream bin(dir / ("sim" + std::to_string(i) + ".bin"), std::ios::binary);
        if (!bin) throw DataError("cannot write trajectory for sim " + std::to_string(i));
        for (const SimState& s : traj)
            bin.write(reinterpret_cast<const char*>(s.states.data()),
                      static_cast<std::streamsize>(s.states.size()));

        if (export_frames) {
            const fs::path frames = dir / ("frames_sim" + std::to_string(i));
            fs::create_directories(frames);
            for (std::size_t t = 0; t < traj.size(); ++t) {
                char name[32];
                std::snprintf(name, sizeof(name), "step_%04zu.ppm", t);
                write_ppm(reinterpret_cast<const std::uint8_t*>(traj[t].states.data()), p.width,
                          p.height, palette, frames / name);
            }
        }
    }

    json resolved = sim_params_json(sf.params);
    resolved["seed"] = seed;
    resolved["sims"] = sims;
    resolved["export-frames"] = export_frames;
    write_snapshot(dir, resolved);
    return 0;
}

// ---------------------------------------------------------------------------
// dataset

int cmd_dataset(CLI::App& app, SimFlags& sf, const std::string& config_path, int train_sims,
                int test_sims, std::uint64_t seed, const std::string& out) {
    apply_config(load_config(config_path), app,
                 [&] {
                     auto s = sf.setters();
                     s["train-sims"] = [&train_sims](const json& v) { train_sims = v; };
                     s["test-sims"] = [&test_sims](const json& v) { test_sims = v; };
                     s["seed"] = [&seed](const json& v) { seed = v; };
                     s["out"] = [&](const json&) {};
                     return s;
                 }());
    validate_params(sf.params);
    if (train_sims < 1 || test_sims < 0)
        throw ConfigError("train-sims must be >= 1 and test-sims >= 0");

    const fs::path dir(out);
    fs::create_directories(dir);

    // sim_ids are globally unique: train gets [0, train_sims), test the rest
    auto generate = [&](int first_id, int count, const std::string& split) {
        std::vector<Chunk> chunks;
        for (int i = 0; i < count; ++i) {
            SimParams p = sf.params;
            p.rng_seed = seed + static_cast<std::uint64_t>(first_id + i);
            auto traj = run(p);
            for (auto& c : chunk_trajectory(traj, first_id + i)) chunks.push_back(std::move(c));
        }
        DatasetManifest manifest;
        manifest.params = sf.params;
        manifest.split = split;
        write_dataset(chunks, manifest, dir / split);
        return chunks.size();
    };

    const auto n_train = generate(0, train_sims, "train");
    const auto n_test = test_sims > 0 ? generate(train_sims, test_sims, "test") : 0;
    std::cout << "train chunks: " << n_train << "\ntest chunks: " << n_test << "\n";

    json resolved = sim_params_json(sf.params);
    resolved["seed"] = seed;
    resolved["train-sims"] = train_sims;
    resolved["test-sims"] = test_sims;
    write_snapshot(dir, resolved);
    return 0;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(CLI::App& app, const std::string& config_path, std::string data,
              std::string variant_str, std::string aoi_str, TrainConfig cfg,
              std::string label_mode_str, const std::string& out) {
    apply_config(load_config(config_path), app,
                 {
                     {"data", [&data](const json& v) { data = v.get<std::string>(); }},
                     {"variant",
                      [&variant_str](const json& v) { variant_str = v.get<std::string>(); }},
                     {"aoi", [&aoi_str](const json& v) { aoi_str = v.get<std::string>(); }},
                     {"lr", [&cfg](const json& v) { cfg.lr = v; }},
                     {"batch", [&cfg](const json& v) { cfg.batch = v; }},
                     {"epochs", [&cfg](const json& v) { cfg.epochs = v; }},
                     {"seed", [&cfg](const json& v) { cfg.seed = v; }},
                     {"label-mode",
                      [&label_mode_str](const json& v) { label_mode_str = v.get<std::string>(); }},
                     {"out", [](const json&) {}},
                 });
    if (data.empty()) throw ConfigError("train: --data is required");
    if (cfg.epochs < 1) throw ConfigError("epochs must be at least 1");
    if (cfg.batch < 1) throw ConfigError("batch must be at least 1");
    if (cfg.lr < 0) throw ConfigError("lr must be non-negative");
    const Variant variant = variant_from_name(variant_str);
    cfg.label_mode = parse_label_mode(label_mode_str);

    auto [train_chunks, train_manifest] = read_dataset(fs::path(data) / "train");
    auto [test_chunks, test_manifest] = read_dataset(fs::path(data) / "test");
    const int w = train_manifest.params.width, h = train_manifest.params.height;
    cfg.aoi = parse_aoi(aoi_str, w, h);

    const ModelSpec spec = ModelSpec::desk_scale(variant, h, w);
    const fs::path dir(out);
    fs::create_directories(dir);

    json resolved = {{"data", data},
                     {"variant", variant_str},
                     {"aoi", aoi_str},
                     {"lr", cfg.lr},
                     {"batch", cfg.batch},
                     {"epochs", cfg.epochs},
                     {"seed", cfg.seed},
                     {"label-mode", label_mode_str}};
    write_snapshot(dir, resolved);

    char ckpt_name[128];
    std::snprintf(ckpt_name, sizeof(ckpt_name), "ckpt_%s_d%g_aoi%dx%d_seed%llu.bin",
                  variant_str.c_str(), train_manifest.params.density, cfg.aoi.x, cfg.aoi.y,
                  static_cast<unsigned long long>(cfg.seed));

    auto run_variant = [&](auto model) {
        model.init(cfg.seed);
        LossCurves curves =
            train_model(model, train_chunks, test_chunks, train_manifest.palette, cfg);
        std::ofstream loss(dir / "loss.csv");
        loss << loss_csv(curves);
        save_checkpoint(dir / ckpt_name, model.spec(), checkpoint_tensors(model));
        std::cout << "checkpoint: " << (dir / ckpt_name).string() << "\n"
                  << "final train loss: " << curves.train_loss.back()
                  << "  test loss: " << curves.test_loss.back() << "\n";
    };
    switch (variant) {
        case Variant::AOI: run_variant(AoiModel<float>(spec)); break;
        case Variant::Reconstruction: run_variant(ReconModel<float>(spec)); break;
        case Variant::ConvLSTM: run_variant(ConvLstmModel<float>(spec)); break;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(CLI::App& app, const std::string& config_path, std::string data,
             std::string checkpoint, std::string aoi_str, std::string label_mode_str, bool oracle,
             const std::string& out) {
    apply_config(load_config(config_path), app,
                 {
                     {"data", [&data](const json& v) { data = v.get<std::string>(); }},
                     {"checkpoint",
                      [&checkpoint](const json& v) { checkpoint = v.get<std::string>(); }},
                     {"aoi", [&aoi_str](const json& v) { aoi_str = v.get<std::string>(); }},
                     {"label-mode",
                      [&label_mode_str](const json& v) { label_mode_str = v.get<std::string>(); }},
                     {"oracle", [&oracle](const json& v) { oracle = v; }},
                     {"out", [](const json&) {}},
                 });
    if (data.empty()) throw ConfigError("eval: --data is required");
    if (!oracle && checkpoint.empty())
        throw ConfigError("eval: --checkpoint is required unless --oracle is set");
    const LabelMode mode = parse_label_mode(label_mode_str);

    auto [chunks, manifest] = read_dataset(fs::path(data) / "test");
    const AOISpec aoi = parse_aoi(aoi_str, manifest.params.width, manifest.params.height);

    std::vector<WindowReport> reports;
    if (oracle) {
        // ground-truth stub: scores are the labels themselves (AUC 1 rows
        // wherever a window has both classes)
        std::vector<int> starts;
        for (const auto& c : chunks)
            if (std::find(starts.begin(), starts.end(), c.start_step) == starts.end())
                starts.push_back(c.start_step);
        std::sort(starts.begin(), starts.end());
        for (int start : starts) {
            WindowReport rep;
            rep.start_step = start;
            std::vector<double> scores;
            std::vector<int> labels;
            for (const Chunk& c : chunks) {
                if (c.start_step != start) continue;
                const int lab = extract_aoi_labels(c, aoi, mode).back();
                labels.push_back(lab);
                scores.push_back(lab ? 0.9 : 0.1);
            }
            rep.n = static_cast<int>(labels.size());
            rep.n_pos = static_cast<int>(std::count(labels.begin(), labels.end(), 1));
            rep.confusion = confusion_at(scores, labels, 0.5);
            rep.f1 = f1_score(scores, labels, 0.5);
            if (rep.n_pos > 0 && rep.n_pos < rep.n) rep.auc = roc_auc(scores, labels).auc;
            reports.push_back(rep);
        }
    } else {
        const ModelSpec spec = peek_checkpoint_spec(checkpoint);
        auto eval_variant = [&](auto model) {
            load_checkpoint(checkpoint, checkpoint_tensors(model));
            reports = evaluate_windows(model, chunks, manifest.palette, aoi, mode);
        };
        switch (spec.variant) {
            case Variant::AOI: eval_variant(AoiModel<float>(spec)); break;
            case Variant::Reconstruction: eval_variant(ReconModel<float>(spec)); break;
            case Variant::ConvLSTM: eval_variant(ConvLstmModel<float>(spec)); break;
        }
    }

    const fs::path dir(out);
    fs::create_directories(dir);
    std::ofstream windows(dir / "windows.csv");
    windows << windows_csv(reports);
    std::cout << windows_csv(reports);

    write_snapshot(dir, json{{"data", data},
                             {"checkpoint", checkpoint},
                             {"aoi", aoi_str},
                             {"label-mode", label_mode_str},
                             {"oracle", oracle}});
    return 0;
}

// ---------------------------------------------------------------------------
// cost

int cmd_cost(CLI::App& app, const std::string& config_path, bool paper_scale, int height,
             int width) {
    apply_config(load_config(config_path), app,
                 {
                     {"paper-scale", [&paper_scale](const json& v) { paper_scale = v; }},
                     {"height", [&height](const json& v) { height = v; }},
                     {"width", [&width](const json& v) { width = v; }},
                 });
    std::vector<ModelSpec> specs;
    for (Variant v : {Variant::AOI, Variant::Reconstruction, Variant::ConvLSTM})
        specs.push_back(paper_scale ? ModelSpec::paper_scale(v)
                                    : ModelSpec::desk_scale(v, height, width));
    std::cout << cost_report(specs);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"forest-fire forecasting toolkit"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "thread count (1 = deterministic mode)");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "run forest-fire simulations");
    SimFlags sim_flags;
    sim_flags.attach(*sim_cmd);
    std::string sim_config, sim_out = "runs/simulate";
    int sims = 1;
    std::uint64_t sim_seed = 0;
    bool export_frames = false;
    sim_cmd->add_option("--config", sim_config, "JSON config file");
    sim_cmd->add_option("--sims", sims, "number of simulations");
    sim_cmd->add_option("--seed", sim_seed, "base RNG seed");
    sim_cmd->add_option("--out", sim_out, "output directory");
    sim_cmd->add_flag("--export-frames", export_frames, "write PPM frames per step");

    // dataset
    auto* ds_cmd = app.add_subcommand("dataset", "generate chunked train/test datasets");
    SimFlags ds_flags;
    ds_flags.attach(*ds_cmd);
    std::string ds_config, ds_out = "runs/dataset";
    int train_sims = 1, test_sims = 0;
    std::uint64_t ds_seed = 0;
    ds_cmd->add_option("--config", ds_config, "JSON config file");
    ds_cmd->add_option("--train-sims", train_sims, "simulations in the train split");
    ds_cmd->add_option("--test-sims", test_sims, "simulations in the test split");
    ds_cmd->add_option("--seed", ds_seed, "base RNG seed");
    ds_cmd->add_option("--out", ds_out, "output directory");

    // train
    auto* tr_cmd = app.add_subcommand("train", "train a forecaster on a dataset");
    std::string tr_config, tr_data, tr_variant = "aoi", tr_aoi = "125,125";
    std::string tr_labels = "instantaneous", tr_out = "runs/train";
    TrainConfig tr_cfg;
    tr_cmd->add_option("--config", tr_config, "JSON config file");
    tr_cmd->add_option("--data", tr_data, "dataset directory (train/ + test/)");
    tr_cmd->add_option("--variant", tr_variant, "aoi | reconstruction | convlstm");
    tr_cmd->add_option("--aoi", tr_aoi, "agent of interest as x,y");
    tr_cmd->add_option("--lr", tr_cfg.lr, "learning rate");
    tr_cmd->add_option("--batch", tr_cfg.batch, "gradient accumulation batch size");
    tr_cmd->add_option("--epochs", tr_cfg.epochs, "training epochs");
    tr_cmd->add_option("--seed", tr_cfg.seed, "init/shuffle seed");
    tr_cmd->add_option("--label-mode", tr_labels, "instantaneous | latched");
    tr_cmd->add_option("--out", tr_out, "run directory");

    // eval
    auto* ev_cmd = app.add_subcommand("eval", "evaluate a checkpoint per prediction window");
    std::string ev_config, ev_data, ev_ckpt, ev_aoi = "125,125";
    std::string ev_labels = "instantaneous", ev_out = "runs/eval";
    bool ev_oracle = false;
    ev_cmd->add_option("--config", ev_config, "JSON config file");
    ev_cmd->add_option("--data", ev_data, "dataset directory (train/ + test/)");
    ev_cmd->add_option("--checkpoint", ev_ckpt, "checkpoint file");
    ev_cmd->add_option("--aoi", ev_aoi, "agent of interest as x,y");
    ev_cmd->add_option("--label-mode", ev_labels, "instantaneous | latched");
    ev_cmd->add_flag("--oracle", ev_oracle, "score with ground-truth labels (sanity stub)");
    ev_cmd->add_option("--out", ev_out, "run directory");

    // cost
    auto* cost_cmd = app.add_subcommand("cost", "report parameter/activation costs");
    std::string cost_config;
    bool paper_scale = false;
    int cost_h = 64, cost_w = 64;
    cost_cmd->add_option("--config", cost_config, "JSON config file");
    cost_cmd->add_flag("--paper-scale", paper_scale, "251x251 reference architectures");
    cost_cmd->add_option("--height", cost_h, "grid height for desk-scale costing");
    cost_cmd->add_option("--width", cost_w, "grid width for desk-scale costing");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (threads == 1) force_single_thread();
        if (sim_cmd->parsed())
            return cmd_simulate(*sim_cmd, sim_flags, sim_config, sims, sim_seed, sim_out,
                                export_frames);
        if (ds_cmd->parsed())
            return cmd_dataset(*ds_cmd, ds_flags, ds_config, train_sims, test_sims, ds_seed,
                               ds_out);
        if (tr_cmd->parsed())
            return cmd_train(*tr_cmd, tr_config, tr_data, tr_variant, tr_aoi, tr_cfg, tr_labels,
                             tr_out);
        if (ev_cmd->parsed())
            return cmd_eval(*ev_cmd, ev_config, ev_data, ev_ckpt, ev_aoi, ev_labels, ev_oracle,
                            ev_out);
        if (cost_cmd->parsed()) return cmd_cost(*cost_cmd, cost_config, paper_scale, cost_h, cost_w);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const ShapeError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
