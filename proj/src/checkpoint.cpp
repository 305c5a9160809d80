#include "firecast/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "firecast/errors.hpp"

namespace firecast {

namespace {

constexpr char kMagic[4] = {'F', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename U>
void write_pod(std::ofstream& out, U v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U read_pod(std::ifstream& in) {
    U v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(U));
    if (!in) throw TruncatedError("checkpoint: unexpected end of file");
    return v;
}

} // namespace

void save_checkpoint(const std::filesystem::path& file, const ModelSpec& spec,
                     const std::vector<NamedTensor>& tensors) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("save_checkpoint: cannot open " + file.string());
    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, kVersion);
    write_pod<std::uint64_t>(out, spec.hash());
    const std::string spec_json = spec.to_json();
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(spec_json.size()));
    out.write(spec_json.data(), static_cast<std::streamsize>(spec_json.size()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& nt : tensors) {
        write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(nt.name.size()));
        out.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
        write_pod<std::uint8_t>(out, 0); // dtype: f32
        write_pod<std::uint8_t>(out, nt.trainable ? 1 : 0);
        write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(nt.tensor->ndim()));
        for (int d : nt.tensor->shape()) write_pod<std::int64_t>(out, d);
        out.write(reinterpret_cast<const char*>(nt.tensor->data()),
                  static_cast<std::streamsize>(nt.tensor->numel() * sizeof(float)));
    }
    if (!out) throw DataError("save_checkpoint: write failed for " + file.string());
}

ModelSpec load_checkpoint(const std::filesystem::path& file,
                          const std::vector<NamedTensor>& tensors) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("load_checkpoint: cannot open " + file.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("load_checkpoint: bad magic in " + file.string());
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion)
        throw VersionError("load_checkpoint: unsupported version " + std::to_string(version));
    const auto spec_hash = read_pod<std::uint64_t>(in);
    const auto spec_len = read_pod<std::uint32_t>(in);
    std::string spec_json(spec_len, '\0');
    in.read(spec_json.data(), spec_len);
    if (!in) throw TruncatedError("load_checkpoint: truncated spec header");
    ModelSpec spec = ModelSpec::from_json(spec_json);
    if (spec.hash() != spec_hash)
        throw ChecksumError("load_checkpoint: spec hash mismatch in " + file.string());

    std::map<std::string, NamedTensor> wanted;
    for (const auto& nt : tensors) wanted[nt.name] = nt;

    const auto count = read_pod<std::uint32_t>(in);
    std::size_t loaded = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint16_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto dtype = read_pod<std::uint8_t>(in);
        if (dtype != 0) throw DataError("load_checkpoint: unsupported dtype");
        read_pod<std::uint8_t>(in); // trainable flag, informational on load
        const auto ndim = read_pod<std::uint8_t>(in);
        std::vector<int> shape;
        std::size_t numel = 1;
        for (int d = 0; d < ndim; ++d) {
            shape.push_back(static_cast<int>(read_pod<std::int64_t>(in)));
            numel *= static_cast<std::size_t>(shape.back());
        }
        auto it = wanted.find(name);
        if (it == wanted.end())
            throw DataError("load_checkpoint: unexpected tensor '" + name + "'");
        if (it->second.tensor->shape() != shape)
            throw ShapeError("load_checkpoint: shape mismatch for tensor '" + name + "'");
        in.read(reinterpret_cast<char*>(it->second.tensor->data()),
                static_cast<std::streamsize>(numel * sizeof(float)));
        if (!in) throw TruncatedError("load_checkpoint: truncated payload for '" + name + "'");
        ++loaded;
    }
    if (loaded != wanted.size())
        throw DataError("load_checkpoint: checkpoint is missing model tensors");
    return spec;
}

ModelSpec peek_checkpoint_spec(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("peek_checkpoint_spec: cannot open " + file.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("peek_checkpoint_spec: bad magic in " + file.string());
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion)
        throw VersionError("peek_checkpoint_spec: unsupported version " + std::to_string(version));
    read_pod<std::uint64_t>(in);
    const auto spec_len = read_pod<std::uint32_t>(in);
    std::string spec_json(spec_len, '\0');
    in.read(spec_json.data(), spec_len);
    if (!in) throw TruncatedError("peek_checkpoint_spec: truncated spec header");
    return ModelSpec::from_json(spec_json);
}

} // namespace firecast
