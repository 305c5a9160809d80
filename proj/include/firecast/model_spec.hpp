#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "firecast/errors.hpp"

namespace firecast {

enum class Variant { AOI, Reconstruction, ConvLSTM };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// One encoder block: conv(kernel, stride 2, pad 0) -> BN -> ReLU -> pool(3, stride 2).
struct ConvBlockSpec {
    int out_c = 0;
    int kernel = 0;
};

struct ModelSpec {
    Variant variant = Variant::AOI;
    int in_h = 251;
    int in_w = 251;
    std::vector<ConvBlockSpec> encoder; // AOI/Reconstruction: full stack; ConvLSTM: one block
    int lstm_input = 64;                // d
    int hidden = 64;
    int dec_hidden = 64;                  // AOI decoder hidden width
    int recon_base = 32;                  // channels of the 2x2 seed map
    std::vector<int> recon_channels;      // upconv block widths (one per doubling)
    std::vector<int> convlstm_dec = {32, 16, 8};
    int convlstm_kernel = 3;
    int t_obs = 10;
    int t_pred = 50;

    static ModelSpec paper_scale(Variant v);
    // Same architecture family sized for small grids (drops encoder blocks that
    // no longer fit and shortens the reconstruction decoder).
    static ModelSpec desk_scale(Variant v, int h, int w);

    std::string to_json() const;
    static ModelSpec from_json(const std::string& text);
    std::uint64_t hash() const;
};

// (channels, h, w) after each conv and pool of the encoder stack.
struct ShapeCHW {
    int c, h, w;
};
std::vector<ShapeCHW> encoder_trace(const ModelSpec& spec);
int encoder_flat_dim(const ModelSpec& spec);

// Number of x2 upsample blocks needed to cover the grid from a 2x2 seed.
int recon_block_count(int h, int w);

long long count_params(const ModelSpec& spec);

// Activation counting convention: every conv, pool, FC, gate pre-activation,
// hidden/cell state, projection, and decoder output counts once; BN and
// elementwise nonlinearities are treated as in-place and not counted.
long long count_activations(const ModelSpec& spec, int t_obs, int t_pred);

} // namespace firecast
