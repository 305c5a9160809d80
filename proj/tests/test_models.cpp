#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "firecast/checkpoint.hpp"
#include "firecast/model_spec.hpp"
#include "firecast/models.hpp"

using namespace firecast;
namespace fs = std::filesystem;

namespace {

std::vector<Tensor<float>> random_frames(int n, int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Tensor<float>> frames;
    for (int t = 0; t < n; ++t) {
        Tensor<float> f({3, h, w});
        fill_uniform(f, rng, 0.0, 1.0);
        frames.push_back(std::move(f));
    }
    return frames;
}

long long trainable_numel(const std::vector<NamedTensor>& tensors) {
    long long n = 0;
    for (const auto& t : tensors)
        if (t.trainable) n += static_cast<long long>(t.tensor->numel());
    return n;
}

} // namespace

TEST_CASE("encoder trace at 251: spatial extents 123,61,30,14,6,2") {
    ModelSpec spec = ModelSpec::paper_scale(Variant::AOI);
    auto trace = encoder_trace(spec);
    REQUIRE(trace.size() == 6); // conv+pool per block, 3 blocks
    const int expect_h[6] = {123, 61, 30, 14, 6, 2};
    const int expect_c[6] = {48, 48, 96, 96, 128, 128};
    for (int i = 0; i < 6; ++i) {
        CHECK(trace[static_cast<std::size_t>(i)].h == expect_h[i]);
        CHECK(trace[static_cast<std::size_t>(i)].w == expect_h[i]);
        CHECK(trace[static_cast<std::size_t>(i)].c == expect_c[i]);
    }
    CHECK(encoder_flat_dim(spec) == 128 * 2 * 2);
}

TEST_CASE("convlstm encoder keeps a 61x61 map") {
    ModelSpec spec = ModelSpec::paper_scale(Variant::ConvLSTM);
    auto trace = encoder_trace(spec);
    REQUIRE(trace.size() == 2);
    CHECK(trace[1].c == 32);
    CHECK(trace[1].h == 61);
    CHECK(trace[1].w == 61);
}

TEST_CASE("encoder trace rejects grids too small for the stack") {
    ModelSpec spec = ModelSpec::paper_scale(Variant::AOI);
    spec.in_h = spec.in_w = 16;
    CHECK_THROWS_AS(encoder_trace(spec), ShapeError);
}

TEST_CASE("LSTM 64->64 owns 33,280 parameters") {
    ModelSpec spec = ModelSpec::desk_scale(Variant::AOI, 64, 64);
    AoiModel<float> model(spec);
    long long lstm_params = 0;
    model.visit_params([&](const std::string& name, Tensor<float>& t, Tensor<float>*, bool) {
        if (name.rfind("lstm.", 0) == 0) lstm_params += static_cast<long long>(t.numel());
    });
    CHECK(lstm_params == 33280);
}

TEST_CASE("parameter totals sit within 15% of the reference sizes") {
    const long long aoi = count_params(ModelSpec::paper_scale(Variant::AOI));
    const long long recon = count_params(ModelSpec::paper_scale(Variant::Reconstruction));
    const long long clstm = count_params(ModelSpec::paper_scale(Variant::ConvLSTM));
    CHECK(std::abs(aoi - 262700LL) <= 262700LL * 15 / 100);
    CHECK(std::abs(recon - 295600LL) <= 295600LL * 15 / 100);
    CHECK(std::abs(clstm - 250600LL) <= 250600LL * 15 / 100);
}

TEST_CASE("activation totals: aoi < recon << convlstm") {
    const long long aoi =
        count_activations(ModelSpec::paper_scale(Variant::AOI), 10, 50);
    const long long recon =
        count_activations(ModelSpec::paper_scale(Variant::Reconstruction), 10, 50);
    const long long clstm =
        count_activations(ModelSpec::paper_scale(Variant::ConvLSTM), 10, 50);
    CHECK(aoi < recon);
    CHECK(recon < clstm);
    CHECK(clstm >= 5 * aoi);
}

TEST_CASE("count_params equals the trainable tensor total, all variants") {
    {
        ModelSpec spec = ModelSpec::desk_scale(Variant::AOI, 64, 64);
        AoiModel<float> m(spec);
        CHECK(count_params(spec) == trainable_numel(checkpoint_tensors(m)));
    }
    {
        ModelSpec spec = ModelSpec::desk_scale(Variant::Reconstruction, 64, 64);
        ReconModel<float> m(spec);
        CHECK(count_params(spec) == trainable_numel(checkpoint_tensors(m)));
    }
    {
        ModelSpec spec = ModelSpec::desk_scale(Variant::ConvLSTM, 64, 64);
        ConvLstmModel<float> m(spec);
        CHECK(count_params(spec) == trainable_numel(checkpoint_tensors(m)));
    }
    {
        ModelSpec spec = ModelSpec::paper_scale(Variant::AOI);
        AoiModel<float> m(spec);
        CHECK(count_params(spec) == trainable_numel(checkpoint_tensors(m)));
    }
    {
        ModelSpec spec = ModelSpec::paper_scale(Variant::Reconstruction);
        ReconModel<float> m(spec);
        CHECK(count_params(spec) == trainable_numel(checkpoint_tensors(m)));
    }
    {
        ModelSpec spec = ModelSpec::paper_scale(Variant::ConvLSTM);
        ConvLstmModel<float> m(spec);
        CHECK(count_params(spec) == trainable_numel(checkpoint_tensors(m)));
    }
}

TEST_CASE("aoi rollout: t_pred probabilities in [0,1]") {
    ModelSpec spec = ModelSpec::desk_scale(Variant::AOI, 48, 48);
    spec.t_pred = 12;
    AoiModel<float> model(spec);
    model.init(3);
    auto frames = random_frames(spec.t_obs, 48, 48, 5);
    Tensor<float> probs = model.rollout(frames, false);
    REQUIRE(probs.shape() == std::vector<int>{12});
    for (std::size_t i = 0; i < probs.numel(); ++i) {
        CHECK(probs[i] >= 0.0f);
        CHECK(probs[i] <= 1.0f);
    }
    frames.pop_back();
    CHECK_THROWS_AS(model.rollout(frames, false), ShapeError);
}

TEST_CASE("zeroed aoi model outputs sigmoid of the head bias at every step") {
    ModelSpec spec = ModelSpec::desk_scale(Variant::AOI, 48, 48);
    spec.t_pred = 6;
    AoiModel<float> model(spec);
    model.visit_params([](const std::string& name, Tensor<float>& t, Tensor<float>*, bool) {
        t.fill(0.0f);
        if (name == "dec2.b") t.fill(0.4f);
        if (name.find(".running_var") != std::string::npos) t.fill(1.0f);
    });
    auto frames = random_frames(spec.t_obs, 48, 48, 9);
    Tensor<float> probs = model.rollout(frames, false);
    const float expect = 1.0f / (1.0f + std::exp(-0.4f));
    for (std::size_t i = 0; i < probs.numel(); ++i)
        CHECK(probs[i] == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("reconstruction rollout emits full-grid probability maps") {
    ModelSpec spec = ModelSpec::desk_scale(Variant::Reconstruction, 48, 48);
    spec.t_pred = 3;
    ReconModel<float> model(spec);
    model.init(4);
    auto frames = random_frames(spec.t_obs, 48, 48, 6);
    auto maps = model.rollout(frames, false);
    REQUIRE(maps.size() == 3);
    for (const auto& m : maps) {
        REQUIRE(m.shape() == std::vector<int>{48, 48});
        for (std::size_t i = 0; i < m.numel(); ++i) {
            CHECK(m[i] >= 0.0f);
            CHECK(m[i] <= 1.0f);
        }
    }
}

TEST_CASE("convlstm rollout emits full-grid probability maps") {
    ModelSpec spec = ModelSpec::desk_scale(Variant::ConvLSTM, 48, 48);
    spec.t_pred = 2;
    ConvLstmModel<float> model(spec);
    model.init(5);
    auto frames = random_frames(spec.t_obs, 48, 48, 7);
    auto maps = model.rollout(frames, false);
    REQUIRE(maps.size() == 2);
    for (const auto& m : maps) {
        REQUIRE(m.shape() == std::vector<int>{48, 48});
        for (std::size_t i = 0; i < m.numel(); ++i) {
            CHECK(m[i] >= 0.0f);
            CHECK(m[i] <= 1.0f);
        }
    }
}

TEST_CASE("reconstruction decoder covers 251 from a 2x2 seed") {
    // 7 doublings: 2 -> 256, then a center crop back to 251
    CHECK(recon_block_count(251, 251) == 7);
    CHECK(recon_block_count(64, 64) == 5);
    CHECK(ModelSpec::paper_scale(Variant::Reconstruction).recon_channels.size() == 7);
    CHECK(ModelSpec::desk_scale(Variant::Reconstruction, 64, 64).recon_channels.size() == 5);
}

TEST_CASE("spec JSON round trip preserves the hash") {
    ModelSpec spec = ModelSpec::paper_scale(Variant::ConvLSTM);
    ModelSpec back = ModelSpec::from_json(spec.to_json());
    CHECK(back.hash() == spec.hash());
    CHECK(variant_name(back.variant) == "convlstm");
    CHECK(variant_from_name("aoi") == Variant::AOI);
    CHECK_THROWS_AS(variant_from_name("bogus"), ConfigError);

    ModelSpec other = spec;
    other.hidden = 32;
    CHECK(other.hash() != spec.hash());
}

TEST_CASE("checkpoint round trip is bit-exact") {
    ModelSpec spec = ModelSpec::desk_scale(Variant::AOI, 48, 48);
    AoiModel<float> a(spec), b(spec);
    a.init(11);
    b.init(99);

    const fs::path file = fs::temp_directory_path() / "firecast_ckpt_roundtrip.bin";
    save_checkpoint(file, spec, checkpoint_tensors(a));
    ModelSpec loaded_spec = load_checkpoint(file, checkpoint_tensors(b));
    CHECK(loaded_spec.hash() == spec.hash());

    bool identical = true;
    std::vector<float> a_vals, b_vals;
    a.visit_params([&](const std::string&, Tensor<float>& t, Tensor<float>*, bool) {
        a_vals.insert(a_vals.end(), t.data(), t.data() + t.numel());
    });
    b.visit_params([&](const std::string&, Tensor<float>& t, Tensor<float>*, bool) {
        b_vals.insert(b_vals.end(), t.data(), t.data() + t.numel());
    });
    REQUIRE(a_vals.size() == b_vals.size());
    for (std::size_t i = 0; i < a_vals.size(); ++i) identical = identical && (a_vals[i] == b_vals[i]);
    CHECK(identical);
    fs::remove(file);
}

TEST_CASE("checkpoint rejects corruption and architecture mismatch") {
    ModelSpec spec = ModelSpec::desk_scale(Variant::AOI, 48, 48);
    AoiModel<float> model(spec);
    model.init(2);
    const fs::path file = fs::temp_directory_path() / "firecast_ckpt_corrupt.bin";
    save_checkpoint(file, spec, checkpoint_tensors(model));

    CHECK(peek_checkpoint_spec(file).hash() == spec.hash());

    // different architecture must be refused
    ModelSpec other = ModelSpec::desk_scale(Variant::AOI, 32, 32);
    AoiModel<float> small(other);
    CHECK_THROWS_AS(load_checkpoint(file, checkpoint_tensors(small)), DataError);

    // bad magic
    {
        std::fstream f(file, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(0);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_AS(load_checkpoint(file, checkpoint_tensors(model)), DataError);
    {
        std::fstream f(file, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(0);
        f.write("FCKP", 4);
    }
    // truncation
    const auto size = fs::file_size(file);
    fs::resize_file(file, size / 2);
    CHECK_THROWS_AS(load_checkpoint(file, checkpoint_tensors(model)), DataError);
    fs::remove(file);
}
