#include "spamlens/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace spamlens {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'L', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::vector<std::uint8_t>& buf, std::uint16_t v) {
    buf.push_back(static_cast<std::uint8_t>(v));
    buf.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& buf, float v) { put_u32(buf, std::bit_cast<std::uint32_t>(v)); }

struct Cursor {
    const std::uint8_t* p;
    std::size_t remaining;

    void need(std::size_t n, const char* what) {
        if (remaining < n)
            throw CheckpointError(CheckpointError::Kind::Truncated,
                                  std::string("checkpoint truncated while reading ") + what);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        const std::uint8_t v = *p;
        ++p;
        --remaining;
        return v;
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        const std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
        p += 2;
        remaining -= 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        p += 4;
        remaining -= 4;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
};

std::string tensor_name(std::size_t layer_index, LayerKind kind, bool is_bias) {
    const char* k = kind == LayerKind::conv2d ? "conv" : "dense";
    return "layer" + std::to_string(layer_index) + "." + k + (is_bias ? ".bias" : ".weights");
}

void append_tensor(std::vector<std::uint8_t>& buf, const std::string& name, const Tensor& t) {
    put_u16(buf, static_cast<std::uint16_t>(name.size()));
    buf.insert(buf.end(), name.begin(), name.end());
    buf.push_back(static_cast<std::uint8_t>(t.rank()));
    for (int d = 0; d < t.rank(); ++d) put_u32(buf, static_cast<std::uint32_t>(t.dim(d)));
    for (float v : t.data) put_f32(buf, v);
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    std::vector<std::uint8_t> buf;
    buf.reserve(64 + static_cast<std::size_t>(model.param_count()) * 4);
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u32(buf, kVersion);
    const auto fp = arch_fingerprint(model.arch);
    buf.insert(buf.end(), fp.begin(), fp.end());

    std::uint32_t tensor_count = 0;
    for (const auto& p : model.params)
        if (p.kind == LayerKind::conv2d || p.kind == LayerKind::dense) tensor_count += 2;
    put_u32(buf, tensor_count);

    for (std::size_t i = 0; i < model.params.size(); ++i) {
        const auto& p = model.params[i];
        if (p.kind != LayerKind::conv2d && p.kind != LayerKind::dense) continue;
        append_tensor(buf, tensor_name(i, p.kind, false), p.weights);
        append_tensor(buf, tensor_name(i, p.kind, true), p.bias);
    }

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw CheckpointError(CheckpointError::Kind::Io, "cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!out) throw CheckpointError(CheckpointError::Kind::Io, "short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw CheckpointError(CheckpointError::Kind::Io,
                              "cannot move checkpoint into place: " + ec.message());
    }
}

Model load_checkpoint(const std::filesystem::path& path, const ArchSpec& expected) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw CheckpointError(CheckpointError::Kind::Io, "cannot open " + path.string());
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(size));
    if (!in.read(reinterpret_cast<char*>(buf.data()), size))
        throw CheckpointError(CheckpointError::Kind::Io, "cannot read " + path.string());

    Cursor cur{buf.data(), buf.size()};
    cur.need(4, "magic");
    if (std::memcmp(cur.p, kMagic, 4) != 0)
        throw CheckpointError(CheckpointError::Kind::BadMagic, "not a checkpoint file: bad magic");
    cur.p += 4;
    cur.remaining -= 4;

    const std::uint32_t version = cur.u32("version");
    if (version != kVersion)
        throw CheckpointError(CheckpointError::Kind::BadVersion,
                              "unsupported checkpoint version " + std::to_string(version));

    cur.need(32, "architecture fingerprint");
    const auto expected_fp = arch_fingerprint(expected);
    if (std::memcmp(cur.p, expected_fp.data(), 32) != 0)
        throw CheckpointError(CheckpointError::Kind::FingerprintMismatch,
                              "checkpoint was written for a different architecture");
    cur.p += 32;
    cur.remaining -= 32;

    // parameter skeletons with the right shapes; every value is overwritten
    Model model = build_model_for<float>(expected, 0);

    const std::uint32_t tensor_count = cur.u32("tensor count");
    std::uint32_t expected_count = 0;
    for (const auto& p : model.params)
        if (p.kind == LayerKind::conv2d || p.kind == LayerKind::dense) expected_count += 2;
    if (tensor_count != expected_count)
        throw CheckpointError(CheckpointError::Kind::Malformed,
                              "checkpoint holds " + std::to_string(tensor_count) + " tensors, expected " +
                                  std::to_string(expected_count));

    for (std::size_t i = 0; i < model.params.size(); ++i) {
        auto& p = model.params[i];
        if (p.kind != LayerKind::conv2d && p.kind != LayerKind::dense) continue;
        for (const bool is_bias : {false, true}) {
            const std::string want_name = tensor_name(i, p.kind, is_bias);
            const std::uint16_t name_len = cur.u16("tensor name length");
            cur.need(name_len, "tensor name");
            const std::string name(reinterpret_cast<const char*>(cur.p), name_len);
            cur.p += name_len;
            cur.remaining -= name_len;
            if (name != want_name)
                throw CheckpointError(CheckpointError::Kind::Malformed,
                                      "unexpected tensor '" + name + "', expected '" + want_name + "'");

            Tensor& dst = is_bias ? p.bias : p.weights;
            const std::uint8_t rank = cur.u8("tensor rank");
            if (rank != dst.rank())
                throw CheckpointError(CheckpointError::Kind::Malformed,
                                      "tensor '" + name + "' has rank " + std::to_string(rank) + ", expected " +
                                          std::to_string(dst.rank()));
            for (int d = 0; d < dst.rank(); ++d) {
                const std::uint32_t dim = cur.u32("tensor dimension");
                if (dim != static_cast<std::uint32_t>(dst.dim(d)))
                    throw CheckpointError(CheckpointError::Kind::Malformed,
                                          "tensor '" + name + "' dimension " + std::to_string(d) +
                                              " is " + std::to_string(dim) + ", expected " +
                                              std::to_string(dst.dim(d)));
            }
            for (float& v : dst.data) v = cur.f32("tensor payload");
        }
    }
    if (cur.remaining != 0)
        throw CheckpointError(CheckpointError::Kind::Malformed,
                              std::to_string(cur.remaining) + " unexpected trailing bytes");
    return model;
}

}  // namespace spamlens
