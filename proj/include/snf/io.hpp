#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "snf/common.hpp"

namespace snf {

struct Model;

/// Decimal rendering with 17 significant digits (round-trips every double).
std::string format_double(double v);

/// Comma-separated output with a header row.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    void header(const std::vector<std::string>& columns);
    void row(const std::vector<double>& values);

private:
    std::ostream& os_;
};

/// Parameter snapshot (`model.bin`):
///   bytes 0-3   magic "SNF1"
///   u32         header length k (= 6)
///   k x u32     n_x, n_u, n_y, n_w, n_vu, n_vy
///   f64 ...     w, v_u, v_y, S
/// All integers and floats little-endian.
struct Snapshot {
    int n_x = 0;
    int n_u = 0;
    int n_y = 0;
    Vec w;
    Vec v_u;
    Vec v_y;
    double S = 1.0;
};

Snapshot make_snapshot(const Model& model);
void write_snapshot(const Snapshot& snap, std::ostream& os);
Snapshot read_snapshot(std::istream& is);
void save_snapshot(const Model& model, const std::filesystem::path& path);
Snapshot load_snapshot(const std::filesystem::path& path);
/// Copies the snapshot parameters into a model of matching shape.
void apply_snapshot(const Snapshot& snap, Model& model);

} // namespace snf
