#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "snf/common.hpp"

namespace snf {

enum class Task { regression, classification };

/// Finite stream of (u_t, y_t) pairs.
///
/// Classification targets are one-hot vectors, except for two-class problems
/// with a single output, where the target is the scalar label 0 or 1.
struct Dataset {
    std::vector<Vec> inputs;
    std::vector<Vec> targets;
    Task task = Task::regression;
    int n_classes = 0;
    std::uint64_t seed = 0;

    std::size_t size() const { return inputs.size(); }
    int n_u() const { return inputs.empty() ? 0 : static_cast<int>(inputs.front().size()); }
    int n_y() const { return targets.empty() ? 0 : static_cast<int>(targets.front().size()); }

    /// Class index of sample i (classification only).
    int label(std::size_t i) const;

    void validate() const;
};

/// u ~ U[-1, 1], y = -u.
Dataset gen_negation(int n, std::uint64_t seed);

/// Class 0 on (cos t, sin t), class 1 on (1 - cos t, 1/2 - sin t), t equispaced
/// in [0, pi], plus i.i.d. Gaussian noise. Scalar 0/1 targets.
Dataset gen_halfmoons(int n, double noise, std::uint64_t seed);

/// Class k: radius t, angle 3 pi t + 2 pi k / n_classes, t equispaced in
/// [0.2, 1], plus Gaussian noise. One-hot targets.
Dataset gen_spirals(int n, int n_classes, double noise, std::uint64_t seed);

/// Noise-free curve points, exposed for tests.
Vec halfmoon_point(int cls, double t);
Vec spiral_point(int cls, int n_classes, double t);

/// Seeded random split into (train, test); test gets round(fraction * n) samples.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double test_fraction, std::uint64_t seed);

/// CSV with header `u1,...,un_u,y1,...,yn_y`.
void write_csv(const Dataset& data, std::ostream& os);

} // namespace snf
