#include "firecast/dataset.hpp"

#include <fstream>
#include <set>
#include <zlib.h>

#include <nlohmann/json.hpp>

#include "firecast/errors.hpp"

namespace firecast {

using nlohmann::json;

Palette Palette::defaults() {
    Palette p;
    p.colors[static_cast<int>(CellState::Empty)] = {0, 0, 0};
    p.colors[static_cast<int>(CellState::Tree)] = {0, 153, 0};
    p.colors[static_cast<int>(CellState::Fire)] = {255, 0, 0};
    p.colors[static_cast<int>(CellState::Ember)] = {153, 51, 0};
    p.colors[static_cast<int>(CellState::BurnedOut)] = {64, 64, 64};
    return p;
}

bool Palette::injective() const {
    std::set<std::array<std::uint8_t, 3>> seen(colors.begin(), colors.end());
    return seen.size() == colors.size();
}

std::vector<Chunk> chunk_trajectory(const std::vector<SimState>& trajectory, int sim_id,
                                    int chunk_len, int stride) {
    if (chunk_len <= 0 || stride <= 0)
        throw ConfigError("chunk_trajectory: chunk_len and stride must be positive");
    std::vector<Chunk> chunks;
    const int n = static_cast<int>(trajectory.size());
    if (n < chunk_len) return chunks;
    const int w = trajectory.front().width, h = trajectory.front().height;
    for (int start = 0; start + chunk_len <= n; start += stride) {
        Chunk c;
        c.sim_id = sim_id;
        c.start_step = start;
        c.width = w;
        c.height = h;
        c.states.reserve(static_cast<std::size_t>(chunk_len) * w * h);
        for (int t = start; t < start + chunk_len; ++t)
            for (CellState s : trajectory[static_cast<std::size_t>(t)].states)
                c.states.push_back(static_cast<std::uint8_t>(s));
        chunks.push_back(std::move(c));
    }
    return chunks;
}

Tensor<float> render_rgb(const std::uint8_t* states, int width, int height,
                         const Palette& palette) {
    Tensor<float> frame({3, height, width});
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const auto& rgb = palette.colors[states[static_cast<std::size_t>(y) * width + x]];
            for (int ch = 0; ch < 3; ++ch) frame.at(ch, y, x) = rgb[static_cast<std::size_t>(ch)] / 255.0f;
        }
    return frame;
}

std::vector<std::uint8_t> palette_decode(const Tensor<float>& frame, const Palette& palette) {
    const int h = frame.dim(1), w = frame.dim(2);
    std::vector<std::uint8_t> states(static_cast<std::size_t>(h) * w, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::array<std::uint8_t, 3> rgb;
            for (int ch = 0; ch < 3; ++ch)
                rgb[static_cast<std::size_t>(ch)] =
                    static_cast<std::uint8_t>(frame.at(ch, y, x) * 255.0f + 0.5f);
            bool found = false;
            for (std::size_t code = 0; code < palette.colors.size(); ++code)
                if (palette.colors[code] == rgb) {
                    states[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>(code);
                    found = true;
                    break;
                }
            if (!found) throw DataError("palette_decode: pixel color not in palette");
        }
    return states;
}

std::vector<std::uint8_t> extract_aoi_labels(const Chunk& chunk, const AOISpec& aoi,
                                             LabelMode mode) {
    if (aoi.x < 0 || aoi.x >= chunk.width || aoi.y < 0 || aoi.y >= chunk.height)
        throw ConfigError("extract_aoi_labels: AOI out of bounds");
    const int len = chunk.length();
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(len), 0);
    bool latched = false;
    for (int t = 0; t < len; ++t) {
        const auto s =
            static_cast<CellState>(chunk.frame(t)[static_cast<std::size_t>(aoi.y) * chunk.width + aoi.x]);
        const bool burning = is_burning(s);
        latched = latched || burning;
        labels[static_cast<std::size_t>(t)] =
            (mode == LabelMode::Latched ? latched : burning) ? 1 : 0;
    }
    return labels;
}

Tensor<float> chunk_burning_map(const Chunk& chunk, int t) {
    Tensor<float> map({chunk.height, chunk.width});
    const std::uint8_t* f = chunk.frame(t);
    for (std::size_t i = 0; i < map.numel(); ++i)
        map[i] = is_burning(static_cast<CellState>(f[i])) ? 1.0f : 0.0f;
    return map;
}

std::vector<AOISpec> aoi_grid_coords(int width, int height) {
    if (width < 3 || height < 3) throw ConfigError("aoi_grid_coords: grid must be at least 3x3");
    auto center = [](int k, int n) { return (2 * k * n + n) / 6; }; // floor(k*n/3 + n/6)
    std::vector<AOISpec> coords;
    for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx)
            coords.push_back({center(kx, width), center(ky, height)});
    return coords;
}

// --------------------------------------------------------------------------
// container: <dir>/chunks.bin (raw payloads) + <dir>/manifest.json

static json params_to_json(const SimParams& p) {
    return json{{"width", p.width},     {"height", p.height},     {"density", p.density},
                {"i_seed", p.i_seed},   {"q_th", p.q_th},         {"lambda", p.lambda},
                {"q_die", p.q_die},     {"radius_r", p.radius_r}, {"n_seeds", p.n_seeds},
                {"max_steps", p.max_steps}, {"rng_seed", p.rng_seed}};
}

static SimParams params_from_json(const json& j) {
    SimParams p;
    p.width = j.at("width");
    p.height = j.at("height");
    p.density = j.at("density");
    p.i_seed = j.at("i_seed");
    p.q_th = j.at("q_th");
    p.lambda = j.at("lambda");
    p.q_die = j.at("q_die");
    p.radius_r = j.at("radius_r");
    p.n_seeds = j.at("n_seeds");
    p.max_steps = j.at("max_steps");
    p.rng_seed = j.at("rng_seed");
    return p;
}

void write_dataset(const std::vector<Chunk>& chunks, DatasetManifest& manifest,
                   const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream bin(dir / "chunks.bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw DataError("write_dataset: cannot open " + (dir / "chunks.bin").string());

    manifest.chunks.clear();
    std::uint64_t offset = 0;
    for (const Chunk& c : chunks) {
        ChunkRecord rec;
        rec.sim_id = c.sim_id;
        rec.start_step = c.start_step;
        rec.offset = offset;
        rec.length = c.states.size();
        rec.crc32 = static_cast<std::uint32_t>(
            ::crc32(0, reinterpret_cast<const Bytef*>(c.states.data()),
                    static_cast<uInt>(c.states.size())));
        manifest.chunks.push_back(rec);
        bin.write(reinterpret_cast<const char*>(c.states.data()),
                  static_cast<std::streamsize>(c.states.size()));
        offset += rec.length;
    }
    bin.close();

    json j;
    j["format_version"] = manifest.format_version;
    j["params"] = params_to_json(manifest.params);
    j["chunk_len"] = manifest.chunk_len;
    j["stride"] = manifest.stride;
    j["split"] = manifest.split;
    j["label_mode"] = manifest.label_mode == LabelMode::Latched ? "latched" : "instantaneous";
    json pal = json::array();
    for (const auto& c : manifest.palette.colors) pal.push_back({c[0], c[1], c[2]});
    j["palette"] = pal;
    json recs = json::array();
    for (const auto& r : manifest.chunks)
        recs.push_back({{"sim_id", r.sim_id},
                        {"start_step", r.start_step},
                        {"offset", r.offset},
                        {"length", r.length},
                        {"crc32", r.crc32}});
    j["chunks"] = recs;

    std::ofstream mf(dir / "manifest.json", std::ios::trunc);
    if (!mf) throw DataError("write_dataset: cannot open " + (dir / "manifest.json").string());
    mf << j.dump(2) << "\n";
}

std::pair<std::vector<Chunk>, DatasetManifest> read_dataset(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw DataError("read_dataset: missing manifest " + (dir / "manifest.json").string());
    json j;
    try {
        mf >> j;
    } catch (const json::exception& e) {
        throw DataError("read_dataset: malformed manifest: " + std::string(e.what()));
    }

    DatasetManifest manifest;
    manifest.format_version = j.at("format_version");
    if (manifest.format_version != 1)
        throw VersionError("read_dataset: unsupported format version " +
                           std::to_string(manifest.format_version));
    manifest.params = params_from_json(j.at("params"));
    manifest.chunk_len = j.at("chunk_len");
    manifest.stride = j.at("stride");
    manifest.split = j.at("split");
    manifest.label_mode =
        j.at("label_mode") == "latched" ? LabelMode::Latched : LabelMode::Instantaneous;
    const auto& pal = j.at("palette");
    for (std::size_t i = 0; i < manifest.palette.colors.size(); ++i)
        manifest.palette.colors[i] = {pal.at(i).at(0).get<std::uint8_t>(),
                                      pal.at(i).at(1).get<std::uint8_t>(),
                                      pal.at(i).at(2).get<std::uint8_t>()};
    for (const auto& r : j.at("chunks")) {
        ChunkRecord rec;
        rec.sim_id = r.at("sim_id");
        rec.start_step = r.at("start_step");
        rec.offset = r.at("offset");
        rec.length = r.at("length");
        rec.crc32 = r.at("crc32");
        manifest.chunks.push_back(rec);
    }

    std::ifstream bin(dir / "chunks.bin", std::ios::binary);
    if (!bin) throw DataError("read_dataset: missing payload " + (dir / "chunks.bin").string());
    bin.seekg(0, std::ios::end);
    const std::uint64_t file_size = static_cast<std::uint64_t>(bin.tellg());

    std::vector<Chunk> chunks;
    const int plane = manifest.params.width * manifest.params.height;
    for (const auto& rec : manifest.chunks) {
        if (rec.offset + rec.length > file_size)
            throw TruncatedError("read_dataset: chunk sim " + std::to_string(rec.sim_id) +
                                 " start " + std::to_string(rec.start_step) +
                                 " extends past end of chunks.bin");
        Chunk c;
        c.sim_id = rec.sim_id;
        c.start_step = rec.start_step;
        c.width = manifest.params.width;
        c.height = manifest.params.height;
        c.states.resize(rec.length);
        bin.seekg(static_cast<std::streamoff>(rec.offset));
        bin.read(reinterpret_cast<char*>(c.states.data()), static_cast<std::streamsize>(rec.length));
        if (!bin) throw TruncatedError("read_dataset: short read in chunks.bin");
        const std::uint32_t crc = static_cast<std::uint32_t>(::crc32(
            0, reinterpret_cast<const Bytef*>(c.states.data()), static_cast<uInt>(c.states.size())));
        if (crc != rec.crc32)
            throw ChecksumError("read_dataset: checksum mismatch in chunk sim " +
                                std::to_string(rec.sim_id) + " start " +
                                std::to_string(rec.start_step));
        if (static_cast<int>(rec.length) != manifest.chunk_len * plane)
            throw DataError("read_dataset: chunk length inconsistent with manifest");
        chunks.push_back(std::move(c));
    }
    return {std::move(chunks), std::move(manifest)};
}

void write_ppm(const std::uint8_t* states, int width, int height, const Palette& palette,
               const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("write_ppm: cannot open " + file.string());
    out << "P6\n" << width << " " << height << "\n255\n";
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const auto& rgb = palette.colors[states[static_cast<std::size_t>(y) * width + x]];
            out.write(reinterpret_cast<const char*>(rgb.data()), 3);
        }
}

} // namespace firecast
