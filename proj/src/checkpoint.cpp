#include "imbalab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "imbalab/errors.hpp"

namespace imbalab {

namespace {

constexpr uint32_t kMagic = 0x494d424cu; // "IMBL"
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_i32(std::ostream& out, int32_t v) { put_u32(out, static_cast<uint32_t>(v)); }

void put_f64(std::ostream& out, double v) {
    const uint64_t bits = std::bit_cast<uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("checkpoint: truncated file");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

int32_t get_i32(std::istream& in) { return static_cast<int32_t>(get_u32(in)); }

double get_f64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw IoError("checkpoint: truncated file");
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

void put_matrix(std::ostream& out, const Matrix& m) {
    put_i32(out, m.rows);
    put_i32(out, m.cols);
    for (double v : m.data) put_f64(out, v);
}

Matrix get_matrix(std::istream& in) {
    const int rows = get_i32(in);
    const int cols = get_i32(in);
    if (rows < 0 || cols < 0) throw IoError("checkpoint: invalid matrix shape");
    Matrix m(rows, cols);
    for (double& v : m.data) v = get_f64(in);
    return m;
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);

    const nn::ModelLayout& lay = ckpt.params.layout;
    put_u32(out, kMagic);
    put_u32(out, kVersion);
    put_i32(out, lay.point_dim);
    put_i32(out, lay.time_dim);
    put_i32(out, lay.cond_dim);
    put_i32(out, lay.hidden_width);
    put_i32(out, lay.hidden_layers);
    put_i32(out, lay.num_classes);
    put_i32(out, static_cast<int32_t>(lay.activation));
    put_i32(out, static_cast<int32_t>(ckpt.objective));
    put_i32(out, ckpt.schedule_T);
    put_f64(out, ckpt.schedule_beta_min);
    put_f64(out, ckpt.schedule_beta_max);

    put_i32(out, static_cast<int32_t>(ckpt.params.layers.size()));
    for (const auto& l : ckpt.params.layers) {
        put_matrix(out, l.w);
        put_i32(out, static_cast<int32_t>(l.b.size()));
        for (double v : l.b) put_f64(out, v);
    }
    put_matrix(out, ckpt.params.embed.table);
    if (!out) throw IoError("checkpoint: write failure: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    if (get_u32(in) != kMagic) throw IoError("checkpoint: bad magic in " + path);
    if (get_u32(in) != kVersion) throw IoError("checkpoint: unsupported version in " + path);

    Checkpoint ckpt;
    nn::ModelLayout lay;
    lay.point_dim = get_i32(in);
    lay.time_dim = get_i32(in);
    lay.cond_dim = get_i32(in);
    lay.hidden_width = get_i32(in);
    lay.hidden_layers = get_i32(in);
    lay.num_classes = get_i32(in);
    lay.activation = static_cast<nn::Activation>(get_i32(in));
    ckpt.objective = static_cast<diffusion::Objective>(get_i32(in));
    ckpt.schedule_T = get_i32(in);
    ckpt.schedule_beta_min = get_f64(in);
    ckpt.schedule_beta_max = get_f64(in);

    ckpt.params.layout = lay;
    const int nlayers = get_i32(in);
    for (int l = 0; l < nlayers; ++l) {
        nn::DenseLayer layer;
        layer.w = get_matrix(in);
        const int blen = get_i32(in);
        layer.b.resize(blen);
        for (double& v : layer.b) v = get_f64(in);
        ckpt.params.layers.push_back(std::move(layer));
    }
    ckpt.params.embed.table = get_matrix(in);
    return ckpt;
}

} // namespace imbalab
