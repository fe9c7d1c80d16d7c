#include "snf/io.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "snf/training.hpp"

namespace snf {

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'N', 'F', '1'};
constexpr std::uint32_t kHeaderLen = 6;

void put_u32(std::ostream& os, std::uint32_t v)
{
    const std::array<char, 4> b = {static_cast<char>(v & 0xffU), static_cast<char>((v >> 8) & 0xffU),
                                   static_cast<char>((v >> 16) & 0xffU), static_cast<char>((v >> 24) & 0xffU)};
    os.write(b.data(), 4);
}

void put_f64(std::ostream& os, double d)
{
    std::uint64_t v = 0;
    std::memcpy(&v, &d, sizeof v);
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
    }
    os.write(b.data(), 8);
}

std::uint32_t get_u32(std::istream& is)
{
    std::array<unsigned char, 4> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 4)) {
        throw Error("snapshot truncated in header");
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is)
{
    std::array<unsigned char, 8> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 8)) {
        throw Error("snapshot truncated in parameter block");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    double d = 0.0;
    std::memcpy(&d, &v, sizeof d);
    return d;
}

Vec get_block(std::istream& is, std::uint32_t n)
{
    Vec v(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        v[i] = get_f64(is);
    }
    return v;
}

} // namespace

std::string format_double(double v)
{
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return buf.data();
}

void CsvWriter::header(const std::vector<std::string>& columns)
{
    for (std::size_t i = 0; i < columns.size(); ++i) {
        os_ << (i ? "," : "") << columns[i];
    }
    os_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values)
{
    for (std::size_t i = 0; i < values.size(); ++i) {
        os_ << (i ? "," : "") << format_double(values[i]);
    }
    os_ << '\n';
}

Snapshot make_snapshot(const Model& model)
{
    Snapshot s;
    s.n_x = model.n_x();
    s.n_u = model.n_u();
    s.n_y = model.n_y();
    s.w = model.w;
    s.v_u = model.h_u.params();
    s.v_y = model.h_y.params();
    s.S = model.S;
    return s;
}

void write_snapshot(const Snapshot& snap, std::ostream& os)
{
    os.write(kMagic.data(), 4);
    put_u32(os, kHeaderLen);
    for (auto v : {snap.n_x, snap.n_u, snap.n_y, static_cast<int>(snap.w.size()), static_cast<int>(snap.v_u.size()),
                   static_cast<int>(snap.v_y.size())}) {
        put_u32(os, static_cast<std::uint32_t>(v));
    }
    for (const Vec* block : {&snap.w, &snap.v_u, &snap.v_y}) {
        for (Eigen::Index i = 0; i < block->size(); ++i) {
            put_f64(os, (*block)[i]);
        }
    }
    put_f64(os, snap.S);
}

Snapshot read_snapshot(std::istream& is)
{
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), 4) || magic != kMagic) {
        throw Error("not a model snapshot (bad magic)");
    }
    const std::uint32_t k = get_u32(is);
    if (k != kHeaderLen) {
        throw Error("unsupported snapshot header length " + std::to_string(k));
    }
    std::array<std::uint32_t, kHeaderLen> dims{};
    for (auto& d : dims) {
        d = get_u32(is);
    }
    Snapshot s;
    s.n_x = static_cast<int>(dims[0]);
    s.n_u = static_cast<int>(dims[1]);
    s.n_y = static_cast<int>(dims[2]);
    s.w = get_block(is, dims[3]);
    s.v_u = get_block(is, dims[4]);
    s.v_y = get_block(is, dims[5]);
    s.S = get_f64(is);
    return s;
}

void save_snapshot(const Model& model, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write snapshot " + path.string());
    }
    write_snapshot(make_snapshot(model), out);
}

Snapshot load_snapshot(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot read snapshot " + path.string());
    }
    return read_snapshot(in);
}

void apply_snapshot(const Snapshot& snap, Model& model)
{
    require_dim(snap.n_x, model.n_x(), "snapshot n_x");
    require_dim(snap.n_u, model.n_u(), "snapshot n_u");
    require_dim(snap.n_y, model.n_y(), "snapshot n_y");
    require_dim(snap.w.size(), model.w.size(), "snapshot parameter vector");
    model.w = snap.w;
    model.h_u.set_params(snap.v_u);
    model.h_y.set_params(snap.v_y);
    model.S = snap.S;
}

} // namespace snf
