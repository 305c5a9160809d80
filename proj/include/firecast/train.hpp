#pragma once

#include <algorithm>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "firecast/adam.hpp"
#include "firecast/dataset.hpp"
#include "firecast/metrics.hpp"
#include "firecast/models.hpp"

namespace firecast {

struct TrainConfig {
    double lr = 5e-6;
    int batch = 4;
    int epochs = 100;
    std::uint64_t seed = 0;
    LabelMode label_mode = LabelMode::Instantaneous;
    AOISpec aoi{125, 125};
    bool verbose = false;
};

struct LossCurves {
    std::vector<double> train_loss;
    std::vector<double> test_loss;
};

inline std::vector<Tensor<float>> observation_frames(const Chunk& chunk, const Palette& palette,
                                                     int t_obs) {
    std::vector<Tensor<float>> frames;
    frames.reserve(static_cast<std::size_t>(t_obs));
    for (int t = 0; t < t_obs; ++t)
        frames.push_back(render_rgb(chunk.frame(t), chunk.width, chunk.height, palette));
    return frames;
}

// Per-chunk training target for the prediction window.
template <typename Model>
auto prediction_targets(const Chunk& chunk, const AOISpec& aoi, LabelMode mode, int t_obs,
                        int t_pred) {
    if constexpr (Model::kMapOutput) {
        std::vector<Tensor<float>> maps;
        for (int s = 0; s < t_pred; ++s) maps.push_back(chunk_burning_map(chunk, t_obs + s));
        return maps;
    } else {
        const auto labels = extract_aoi_labels(chunk, aoi, mode);
        Tensor<float> target({t_pred});
        for (int s = 0; s < t_pred; ++s)
            target[static_cast<std::size_t>(s)] = labels[static_cast<std::size_t>(t_obs + s)];
        return target;
    }
}

template <typename Model>
double chunk_loss(const typename Model::Output& out,
                  const decltype(prediction_targets<Model>(Chunk{}, AOISpec{}, LabelMode::Instantaneous, 0, 0))& target) {
    if constexpr (Model::kMapOutput) {
        double acc = 0;
        for (std::size_t s = 0; s < out.size(); ++s) acc += bce_loss(out[s], target[s]);
        return acc / static_cast<double>(out.size());
    } else {
        return bce_loss(out, target);
    }
}

template <typename Model>
double evaluate_mean_loss(Model& model, const std::vector<Chunk>& chunks, const Palette& palette,
                          const AOISpec& aoi, LabelMode mode) {
    const auto& spec = model.spec();
    double total = 0;
    for (const Chunk& chunk : chunks) {
        auto frames = observation_frames(chunk, palette, spec.t_obs);
        auto out = model.rollout(frames, /*train=*/false);
        auto target = prediction_targets<Model>(chunk, aoi, mode, spec.t_obs, spec.t_pred);
        total += chunk_loss<Model>(out, target);
    }
    return chunks.empty() ? 0.0 : total / static_cast<double>(chunks.size());
}

// BCE + BPTT + Adam over shuffled batches. Deterministic given (seed, data).
template <typename Model>
LossCurves train_model(Model& model, const std::vector<Chunk>& train_chunks,
                       const std::vector<Chunk>& test_chunks, const Palette& palette,
                       const TrainConfig& cfg) {
    if (train_chunks.empty()) throw DataError("train: empty training dataset");
    const auto& spec = model.spec();
    Adam<float> adam(cfg.lr);
    std::vector<Tensor<float>*> params, grads;
    model.visit_params([&](const std::string&, Tensor<float>& v, Tensor<float>* g, bool trainable) {
        if (trainable && g) {
            params.push_back(&v);
            grads.push_back(g);
        }
    });

    std::mt19937_64 shuffle_rng(cfg.seed);
    std::vector<std::size_t> order(train_chunks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    LossCurves curves;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0;
        std::size_t cursor = 0;
        int batch_index = 0;
        while (cursor < order.size()) {
            const std::size_t batch_n =
                std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), order.size() - cursor);
            model.zero_grads();
            for (std::size_t b = 0; b < batch_n; ++b) {
                const Chunk& chunk = train_chunks[order[cursor + b]];
                auto frames = observation_frames(chunk, palette, spec.t_obs);
                auto out = model.rollout(frames, /*train=*/true);
                auto target =
                    prediction_targets<Model>(chunk, cfg.aoi, cfg.label_mode, spec.t_obs, spec.t_pred);
                const double loss = chunk_loss<Model>(out, target);
                if (!std::isfinite(loss))
                    throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                       " batch " + std::to_string(batch_index) + " chunk sim " +
                                       std::to_string(chunk.sim_id) + " start " +
                                       std::to_string(chunk.start_step));
                epoch_loss += loss;
                const float inv_batch = 1.0f / static_cast<float>(batch_n);
                if constexpr (Model::kMapOutput) {
                    std::vector<Tensor<float>> gmaps;
                    for (std::size_t s = 0; s < out.size(); ++s) {
                        Tensor<float> g = bce_grad(out[s], target[s]);
                        g.scale_(inv_batch / static_cast<float>(out.size()));
                        gmaps.push_back(std::move(g));
                    }
                    model.backward(gmaps);
                } else {
                    Tensor<float> g = bce_grad(out, target);
                    g.scale_(inv_batch);
                    model.backward(g);
                }
            }
            adam.step(params, grads);
            cursor += batch_n;
            ++batch_index;
        }
        curves.train_loss.push_back(epoch_loss / static_cast<double>(train_chunks.size()));
        curves.test_loss.push_back(
            evaluate_mean_loss(model, test_chunks, palette, cfg.aoi, cfg.label_mode));
        if (cfg.verbose)
            std::cerr << "epoch " << epoch << " train \t" << curves.train_loss.back() << "\ttest \t"
                      << curves.test_loss.back() << "\n";
    }
    return curves;
}

// Final-prediction-timestep score of one chunk (AOI pixel for map variants).
template <typename Model>
double final_step_score(Model& model, const Chunk& chunk, const Palette& palette,
                        const AOISpec& aoi) {
    const auto& spec = model.spec();
    auto frames = observation_frames(chunk, palette, spec.t_obs);
    auto out = model.rollout(frames, /*train=*/false);
    if constexpr (Model::kMapOutput) {
        return out.back().at(aoi.y, aoi.x);
    } else {
        return out[static_cast<std::size_t>(spec.t_pred - 1)];
    }
}

// Groups test chunks by start_step (window identity) and scores the final
// prediction timestep of each window against its ground-truth label.
template <typename Model>
std::vector<WindowReport> evaluate_windows(Model& model, const std::vector<Chunk>& chunks,
                                           const Palette& palette, const AOISpec& aoi,
                                           LabelMode mode) {
    std::vector<int> starts;
    for (const auto& c : chunks)
        if (std::find(starts.begin(), starts.end(), c.start_step) == starts.end())
            starts.push_back(c.start_step);
    std::sort(starts.begin(), starts.end());

    std::vector<WindowReport> reports;
    for (int start : starts) {
        WindowReport rep;
        rep.start_step = start;
        std::vector<double> scores;
        std::vector<int> labels;
        for (const Chunk& chunk : chunks) {
            if (chunk.start_step != start) continue;
            scores.push_back(final_step_score(model, chunk, palette, aoi));
            const auto lab = extract_aoi_labels(chunk, aoi, mode);
            labels.push_back(lab.back());
        }
        rep.n = static_cast<int>(scores.size());
        rep.n_pos = static_cast<int>(std::count(labels.begin(), labels.end(), 1));
        rep.confusion = confusion_at(scores, labels, 0.5);
        rep.f1 = f1_score(scores, labels, 0.5);
        if (rep.n_pos > 0 && rep.n_pos < rep.n) rep.auc = roc_auc(scores, labels).auc;
        reports.push_back(std::move(rep));
    }
    return reports;
}

struct AoiSweepEntry {
    AOISpec aoi;
    std::uint64_t seed = 0;
    std::vector<WindowReport> windows;
};

// One independently trained AOI model per coordinate.
std::vector<AoiSweepEntry> multi_aoi_sweep(const std::vector<Chunk>& train_chunks,
                                           const std::vector<Chunk>& test_chunks,
                                           const Palette& palette, const ModelSpec& spec,
                                           const TrainConfig& base_cfg,
                                           const std::vector<AOISpec>& aois);

struct CostRow {
    std::string model;
    long long params = 0;
    long long activations = 0;
    double paper_params = 0;      // reference values for comparison
    double paper_activations = 0;
};

std::vector<CostRow> cost_rows(const std::vector<ModelSpec>& specs);
std::string cost_report(const std::vector<ModelSpec>& specs);

std::string loss_csv(const LossCurves& curves);
std::string windows_csv(const std::vector<WindowReport>& reports);

} // namespace firecast
