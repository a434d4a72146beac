#pragma once

// MHCK checkpoint files (binary, little-endian):
//   magic "MHCK", u32 version=1, u32 d, u32 |E|, u32 |R|,
//   then per parameter table: u32 name_len, name bytes,
//   u32 ndims=2, u32 rows, u32 cols, rows*cols raw 32-bit floats (row-major).
// Tables are stored in the fixed enumeration order and values are stored as
// f32 regardless of the working precision, so the f32 round trip is bit-exact.

#include <bit>
#include <cstring>
#include <fstream>

#include "mhyper/errors.hpp"
#include "mhyper/model.hpp"

namespace mhyper {

static_assert(std::endian::native == std::endian::little,
              "MHCK assumes a little-endian host");

namespace detail {

inline void ck_write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint32_t ck_read_u32(std::ifstream& in, const std::string& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw DataError(path + ": truncated checkpoint");
    }
    return v;
}

} // namespace detail

template <typename S>
void save_checkpoint(const std::string& path, const ModelParams<S>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write("MHCK", 4);
    detail::ck_write_u32(out, 1);
    detail::ck_write_u32(out, static_cast<std::uint32_t>(params.d));
    detail::ck_write_u32(out, static_cast<std::uint32_t>(params.n_entities));
    detail::ck_write_u32(out, static_cast<std::uint32_t>(params.n_relations));
    params.for_each_table([&](const char* name, const Mat<S>& table) {
        const std::string n(name);
        detail::ck_write_u32(out, static_cast<std::uint32_t>(n.size()));
        out.write(n.data(), static_cast<std::streamsize>(n.size()));
        detail::ck_write_u32(out, 2);
        detail::ck_write_u32(out, static_cast<std::uint32_t>(table.rows()));
        detail::ck_write_u32(out, static_cast<std::uint32_t>(table.cols()));
        if constexpr (std::is_same_v<S, float>) {
            out.write(reinterpret_cast<const char*>(table.data()),
                      static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(table.size())));
        } else {
            MatF cast = table.template cast<float>();
            out.write(reinterpret_cast<const char*>(cast.data()),
                      static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(cast.size())));
        }
    });
    if (!out) throw DataError("short write on checkpoint: " + path);
}

template <typename S>
ModelParams<S> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "MHCK", 4) != 0) {
        throw DataError(path + ": not an MHCK checkpoint");
    }
    const std::uint32_t version = detail::ck_read_u32(in, path);
    if (version != 1) {
        throw DataError(path + ": unsupported MHCK version " + std::to_string(version));
    }
    ModelParams<S> params;
    params.d = static_cast<int>(detail::ck_read_u32(in, path));
    params.n_entities = static_cast<int>(detail::ck_read_u32(in, path));
    params.n_relations = static_cast<int>(detail::ck_read_u32(in, path));

    // dummy shapes; every table is resized from the file
    std::unordered_map<std::string, Mat<S>*> by_name;
    params.for_each_table([&](const char* name, Mat<S>& t) { by_name[name] = &t; });
    std::size_t seen = 0;

    while (true) {
        std::uint32_t name_len = 0;
        if (!in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len))) break;
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) throw DataError(path + ": truncated name");
        const std::uint32_t ndims = detail::ck_read_u32(in, path);
        if (ndims != 2) throw DataError(path + ": unexpected table rank");
        const std::uint32_t rows = detail::ck_read_u32(in, path);
        const std::uint32_t cols = detail::ck_read_u32(in, path);
        auto it = by_name.find(name);
        if (it == by_name.end()) throw DataError(path + ": unknown table " + name);
        MatF raw(rows, cols);
        if (!in.read(reinterpret_cast<char*>(raw.data()),
                     static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(raw.size())))) {
            throw DataError(path + ": truncated table " + name);
        }
        *it->second = raw.template cast<S>();
        ++seen;
    }
    if (seen != by_name.size()) {
        throw DataError(path + ": checkpoint holds " + std::to_string(seen) + " of " +
                        std::to_string(by_name.size()) + " tables");
    }
    params.dim_visual = static_cast<int>(params.proj_w[0].cols());
    params.dim_textual = static_cast<int>(params.proj_w[1].cols());
    return params;
}

// Shape compatibility against a dataset; reports expected vs found.
template <typename S>
void check_checkpoint_compat(const ModelParams<S>& params, const KnowledgeGraph& graph,
                             const ModalityFeatures& visual, const ModalityFeatures& textual) {
    auto fail = [](const std::string& what, long expected, long found) {
        throw DataError("checkpoint/dataset mismatch: " + what + ": expected " +
                        std::to_string(expected) + ", found " + std::to_string(found));
    };
    if (params.n_entities != graph.num_entities())
        fail("entity count", graph.num_entities(), params.n_entities);
    if (params.n_relations != graph.num_relations())
        fail("relation count", graph.num_relations(), params.n_relations);
    if (params.dim_visual != visual.dim) fail("visual feature dim", visual.dim, params.dim_visual);
    if (params.dim_textual != textual.dim) fail("textual feature dim", textual.dim, params.dim_textual);
}

} // namespace mhyper
