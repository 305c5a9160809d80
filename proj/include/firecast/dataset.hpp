#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "firecast/sim.hpp"
#include "firecast/tensor.hpp"

namespace firecast {

constexpr int kChunkLen = 60;
constexpr int kChunkStride = 10;

enum class LabelMode { Instantaneous, Latched };

struct AOISpec {
    int x = 0;
    int y = 0;
};

// 60 consecutive recorded grids of one simulation, stored as state codes.
struct Chunk {
    int sim_id = 0;
    int start_step = 0;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> states; // chunk_len * height * width

    int length() const {
        return width * height == 0 ? 0 : static_cast<int>(states.size()) / (width * height);
    }
    const std::uint8_t* frame(int t) const {
        return states.data() + static_cast<std::size_t>(t) * width * height;
    }
};

struct Palette {
    // indexed by CellState code; Empty must stay (0,0,0)
    std::array<std::array<std::uint8_t, 3>, 5> colors;
    static Palette defaults();
    bool injective() const;
};

struct ChunkRecord {
    int sim_id = 0;
    int start_step = 0;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    std::uint32_t crc32 = 0;
};

struct DatasetManifest {
    int format_version = 1;
    SimParams params;
    int chunk_len = kChunkLen;
    int stride = kChunkStride;
    std::string split; // "train" or "test"
    Palette palette = Palette::defaults();
    LabelMode label_mode = LabelMode::Instantaneous;
    std::vector<ChunkRecord> chunks;
};

std::vector<Chunk> chunk_trajectory(const std::vector<SimState>& trajectory, int sim_id,
                                    int chunk_len = kChunkLen, int stride = kChunkStride);

// 3 x H x W float frame in [0,1]
Tensor<float> render_rgb(const std::uint8_t* states, int width, int height,
                         const Palette& palette);

// Inverse of render for injective palettes; used by round-trip checks.
std::vector<std::uint8_t> palette_decode(const Tensor<float>& frame, const Palette& palette);

std::vector<std::uint8_t> extract_aoi_labels(const Chunk& chunk, const AOISpec& aoi,
                                             LabelMode mode = LabelMode::Instantaneous);

// Binary burning target map (H x W floats) for chunk timestep t.
Tensor<float> chunk_burning_map(const Chunk& chunk, int t);

// Centers of the 3x3 partition of the grid, row-major.
std::vector<AOISpec> aoi_grid_coords(int width, int height);

void write_dataset(const std::vector<Chunk>& chunks, DatasetManifest& manifest,
                   const std::filesystem::path& dir);

std::pair<std::vector<Chunk>, DatasetManifest> read_dataset(const std::filesystem::path& dir);

void write_ppm(const std::uint8_t* states, int width, int height, const Palette& palette,
               const std::filesystem::path& file);

} // namespace firecast
