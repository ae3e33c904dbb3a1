#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "afa/discriminator.hpp"
#include "afa/errors.hpp"
#include "afa/target_model.hpp"
#include "afa/tensor.hpp"

namespace afa::checkpoint {

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

inline constexpr char kMagic[4] = {'A', 'F', 'A', '1'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint32_t kKindTarget = 1;
inline constexpr std::uint32_t kKindDiscriminator = 2;

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint32_t read_u32(std::istream& in, const std::string& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw ParseError(path + ": truncated checkpoint header");
    }
    return v;
}

inline void write_params(std::ostream& out, const std::vector<Tensor>& params) {
    write_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const Tensor& p : params) {
        write_u32(out, static_cast<std::uint32_t>(p.rows()));
        write_u32(out, static_cast<std::uint32_t>(p.cols()));
        out.write(reinterpret_cast<const char*>(p.values().data()),
                  static_cast<std::streamsize>(p.numel() * sizeof(double)));
    }
}

inline void read_params(std::istream& in, const std::string& path, std::vector<Tensor>& params) {
    const std::uint32_t count = read_u32(in, path);
    if (count != params.size()) {
        throw ParseError(path + ": checkpoint holds " + std::to_string(count) +
                         " tensors, model expects " + std::to_string(params.size()));
    }
    for (Tensor& p : params) {
        const std::uint32_t rows = read_u32(in, path);
        const std::uint32_t cols = read_u32(in, path);
        if (rows != p.rows() || cols != p.cols()) {
            throw ParseError(path + ": tensor shape " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " does not match expected " + p.shape_str());
        }
        if (!in.read(reinterpret_cast<char*>(p.mutable_values().data()),
                     static_cast<std::streamsize>(p.numel() * sizeof(double)))) {
            throw ParseError(path + ": truncated tensor payload");
        }
    }
}

inline void read_header(std::istream& in, const std::string& path, std::uint32_t expected_kind) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw ParseError(path + ": not an AFA1 checkpoint");
    }
    const std::uint32_t version = read_u32(in, path);
    if (version != kVersion) {
        throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t kind = read_u32(in, path);
    if (kind != expected_kind) {
        throw ParseError(path + ": checkpoint section " + std::to_string(kind) +
                         ", expected " + std::to_string(expected_kind));
    }
}

} // namespace detail

inline void save_target(const std::string& path, const TargetModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_target: cannot write " + path);
    out.write(kMagic, 4);
    detail::write_u32(out, kVersion);
    detail::write_u32(out, kKindTarget);
    detail::write_u32(out, static_cast<std::uint32_t>(model.cfg.vocab_size));
    detail::write_u32(out, static_cast<std::uint32_t>(model.cfg.dim));
    detail::write_u32(out, static_cast<std::uint32_t>(model.cfg.heads));
    detail::write_u32(out, static_cast<std::uint32_t>(model.cfg.ff_dim));
    detail::write_u32(out, static_cast<std::uint32_t>(model.cfg.num_classes));
    detail::write_u32(out, static_cast<std::uint32_t>(model.cfg.max_len));
    detail::write_u32(out, model.cfg.positional_encoding ? 1u : 0u);
    detail::write_params(out, model.parameters());
}

inline TargetModel load_target(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_target: cannot open " + path);
    detail::read_header(in, path, kKindTarget);
    TargetConfig cfg;
    cfg.vocab_size = detail::read_u32(in, path);
    cfg.dim = detail::read_u32(in, path);
    cfg.heads = detail::read_u32(in, path);
    cfg.ff_dim = detail::read_u32(in, path);
    cfg.num_classes = static_cast<int>(detail::read_u32(in, path));
    cfg.max_len = detail::read_u32(in, path);
    cfg.positional_encoding = detail::read_u32(in, path) != 0;
    RngStream scratch(0, "checkpoint/load");
    TargetModel model = TargetModel::init(cfg, scratch);
    std::vector<Tensor> params = model.parameters();
    detail::read_params(in, path, params);
    return model;
}

inline void save_discriminator(const std::string& path, const Discriminator& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_discriminator: cannot write " + path);
    out.write(kMagic, 4);
    detail::write_u32(out, kVersion);
    detail::write_u32(out, kKindDiscriminator);
    detail::write_u32(out, static_cast<std::uint32_t>(model.cfg.vocab_size));
    detail::write_u32(out, static_cast<std::uint32_t>(model.cfg.dim));
    detail::write_u32(out, static_cast<std::uint32_t>(model.cfg.heads));
    detail::write_u32(out, static_cast<std::uint32_t>(model.cfg.ff_dim));
    detail::write_u32(out, static_cast<std::uint32_t>(model.cfg.max_len));
    detail::write_u32(out, model.cfg.positional_encoding ? 1u : 0u);
    detail::write_u32(out, model.cfg.mask_as_unk ? 1u : 0u);
    detail::write_params(out, model.parameters());
}

inline Discriminator load_discriminator(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_discriminator: cannot open " + path);
    detail::read_header(in, path, kKindDiscriminator);
    DiscConfig cfg;
    cfg.vocab_size = detail::read_u32(in, path);
    cfg.dim = detail::read_u32(in, path);
    cfg.heads = detail::read_u32(in, path);
    cfg.ff_dim = detail::read_u32(in, path);
    cfg.max_len = detail::read_u32(in, path);
    cfg.positional_encoding = detail::read_u32(in, path) != 0;
    cfg.mask_as_unk = detail::read_u32(in, path) != 0;
    RngStream scratch(0, "checkpoint/load");
    Discriminator model = Discriminator::init(cfg, scratch);
    std::vector<Tensor> params = model.parameters();
    detail::read_params(in, path, params);
    return model;
}

} // namespace afa::checkpoint
