#include "firecast/train.hpp"

#include <sstream>

namespace firecast {

std::vector<AoiSweepEntry> multi_aoi_sweep(const std::vector<Chunk>& train_chunks,
                                           const std::vector<Chunk>& test_chunks,
                                           const Palette& palette, const ModelSpec& spec,
                                           const TrainConfig& base_cfg,
                                           const std::vector<AOISpec>& aois) {
    std::vector<AoiSweepEntry> entries;
    for (std::size_t i = 0; i < aois.size(); ++i) {
        AoiSweepEntry entry;
        entry.aoi = aois[i];
        entry.seed = base_cfg.seed + i; // independent, recorded per AOI
        TrainConfig cfg = base_cfg;
        cfg.aoi = aois[i];
        cfg.seed = entry.seed;
        try {
            AoiModel<float> model(spec);
            model.init(entry.seed);
            train_model(model, train_chunks, test_chunks, palette, cfg);
            entry.windows = evaluate_windows(model, test_chunks, palette, cfg.aoi, cfg.label_mode);
        } catch (const std::exception& e) {
            throw NumericError("multi_aoi_sweep: AOI (" + std::to_string(aois[i].x) + "," +
                               std::to_string(aois[i].y) + "): " + e.what());
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

std::vector<CostRow> cost_rows(const std::vector<ModelSpec>& specs) {
    std::vector<CostRow> rows;
    for (const auto& spec : specs) {
        CostRow row;
        row.model = variant_name(spec.variant);
        row.params = count_params(spec);
        row.activations = count_activations(spec, spec.t_obs, spec.t_pred);
        switch (spec.variant) {
            case Variant::AOI:
                row.paper_params = 262.7e3;
                row.paper_activations = 12.3e6;
                break;
            case Variant::Reconstruction:
                row.paper_params = 295.6e3;
                row.paper_activations = 12.8e6;
                break;
            case Variant::ConvLSTM:
                row.paper_params = 250.6e3;
                row.paper_activations = 103.8e6;
                break;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string cost_report(const std::vector<ModelSpec>& specs) {
    const auto rows = cost_rows(specs);
    std::ostringstream out;
    out << "model,params,activations,reference_params,reference_activations\n";
    for (const auto& r : rows)
        out << r.model << "," << r.params << "," << r.activations << "," << r.paper_params << ","
            << r.paper_activations << "\n";
    // pairwise activation ratios
    for (const auto& a : rows)
        for (const auto& b : rows)
            if (&a != &b && b.activations > 0)
                out << "ratio_activations," << a.model << "/" << b.model << ","
                    << static_cast<double>(a.activations) / static_cast<double>(b.activations)
                    << "\n";
    return out.str();
}

std::string loss_csv(const LossCurves& curves) {
    std::ostringstream out;
    out << "epoch,train_loss,test_loss\n";
    for (std::size_t i = 0; i < curves.train_loss.size(); ++i)
        out << i << "," << curves.train_loss[i] << "," << curves.test_loss[i] << "\n";
    return out.str();
}

std::string windows_csv(const std::vector<WindowReport>& reports) {
    std::ostringstream out;
    out << "start_step,final_timestep,n,n_pos,auc,f1,tp,fp,tn,fn\n";
    for (const auto& r : reports) {
        out << r.start_step << "," << (r.start_step + kChunkLen - 1) << "," << r.n << "," << r.n_pos
            << ",";
        if (r.auc) out << *r.auc;
        else out << "undefined";
        out << "," << r.f1 << "," << r.confusion.tp << "," << r.confusion.fp << ","
            << r.confusion.tn << "," << r.confusion.fn << "\n";
    }
    return out.str();
}

} // namespace firecast
