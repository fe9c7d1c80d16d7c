#include "snf/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

#include "snf/io.hpp"

namespace snf {

int Dataset::label(std::size_t i) const
{
    const Vec& y = targets.at(i);
    if (y.size() == 1) {
        return y[0] > 0.5 ? 1 : 0;
    }
    Eigen::Index k = 0;
    y.maxCoeff(&k);
    return static_cast<int>(k);
}

void Dataset::validate() const
{
    if (inputs.size() != targets.size()) {
        throw DimensionError("dataset: " + std::to_string(inputs.size()) + " inputs but " +
                             std::to_string(targets.size()) + " targets");
    }
    for (std::size_t i = 0; i < size(); ++i) {
        require_dim(inputs[i].size(), n_u(), "dataset input " + std::to_string(i));
        require_dim(targets[i].size(), n_y(), "dataset target " + std::to_string(i));
        if (task != Task::classification) {
            continue;
        }
        const Vec& y = targets[i];
        const bool binary = y.size() == 1 && (y[0] == 0.0 || y[0] == 1.0);
        const bool one_hot = y.size() > 1 && y.sum() == 1.0 &&
                             std::all_of(y.data(), y.data() + y.size(), [](double v) { return v == 0.0 || v == 1.0; });
        if (!binary && !one_hot) {
            throw DimensionError("dataset target " + std::to_string(i) + " is not a valid class encoding");
        }
    }
}

Dataset gen_negation(int n, std::uint64_t seed)
{
    if (n < 1) {
        throw ConfigError("negation dataset needs n >= 1");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Dataset d;
    d.task = Task::regression;
    d.seed = seed;
    for (int i = 0; i < n; ++i) {
        const double u = dist(rng);
        d.inputs.push_back(Vec::Constant(1, u));
        d.targets.push_back(Vec::Constant(1, -u));
    }
    return d;
}

Vec halfmoon_point(int cls, double t)
{
    Vec p(2);
    if (cls == 0) {
        p << std::cos(t), std::sin(t);
    } else {
        p << 1.0 - std::cos(t), 0.5 - std::sin(t);
    }
    return p;
}

Dataset gen_halfmoons(int n, double noise, std::uint64_t seed)
{
    if (n < 2 || n % 2 != 0) {
        throw ConfigError("half-moons dataset needs an even n >= 2, got " + std::to_string(n));
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int per_class = n / 2;
    Dataset d;
    d.task = Task::classification;
    d.n_classes = 2;
    d.seed = seed;
    for (int cls = 0; cls < 2; ++cls) {
        for (int i = 0; i < per_class; ++i) {
            const double t = per_class > 1 ? std::numbers::pi * i / (per_class - 1) : 0.0;
            Vec p = halfmoon_point(cls, t);
            if (noise > 0.0) {
                p[0] += noise * gauss(rng);
                p[1] += noise * gauss(rng);
            }
            d.inputs.push_back(p);
            d.targets.push_back(Vec::Constant(1, static_cast<double>(cls)));
        }
    }
    return d;
}

Vec spiral_point(int cls, int n_classes, double t)
{
    const double theta = 4.0 * std::numbers::pi * t * 0.75 + 2.0 * std::numbers::pi * cls / n_classes;
    Vec p(2);
    p << t * std::cos(theta), t * std::sin(theta);
    return p;
}

Dataset gen_spirals(int n, int n_classes, double noise, std::uint64_t seed)
{
    if (n_classes < 2) {
        throw ConfigError("spirals dataset needs at least two classes");
    }
    if (n < n_classes || n % n_classes != 0) {
        throw ConfigError("spirals dataset: n = " + std::to_string(n) + " is not divisible by " +
                          std::to_string(n_classes) + " classes");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int per_class = n / n_classes;
    Dataset d;
    d.task = Task::classification;
    d.n_classes = n_classes;
    d.seed = seed;
    for (int cls = 0; cls < n_classes; ++cls) {
        for (int i = 0; i < per_class; ++i) {
            const double t = per_class > 1 ? 0.2 + 0.8 * i / (per_class - 1) : 0.2;
            Vec p = spiral_point(cls, n_classes, t);
            if (noise > 0.0) {
                p[0] += noise * gauss(rng);
                p[1] += noise * gauss(rng);
            }
            d.inputs.push_back(p);
            d.targets.push_back(Vec::Unit(n_classes, cls));
        }
    }
    return d;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double test_fraction, std::uint64_t seed)
{
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
        throw ConfigError("test_fraction must lie in [0, 1)");
    }
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(data.size())));

    Dataset train = data;
    Dataset test = data;
    train.inputs.clear();
    train.targets.clear();
    test.inputs.clear();
    test.targets.clear();
    // Keep the original order inside each part.
    std::vector<std::size_t> test_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::sort(test_idx.begin(), test_idx.end());
    std::vector<bool> is_test(data.size(), false);
    for (std::size_t i : test_idx) {
        is_test[i] = true;
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        Dataset& part = is_test[i] ? test : train;
        part.inputs.push_back(data.inputs[i]);
        part.targets.push_back(data.targets[i]);
    }
    return {train, test};
}

void write_csv(const Dataset& data, std::ostream& os)
{
    CsvWriter csv(os);
    std::vector<std::string> header;
    for (int i = 1; i <= data.n_u(); ++i) {
        header.push_back("u" + std::to_string(i));
    }
    for (int i = 1; i <= data.n_y(); ++i) {
        header.push_back("y" + std::to_string(i));
    }
    csv.header(header);
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::vector<double> row(data.inputs[i].data(), data.inputs[i].data() + data.inputs[i].size());
        row.insert(row.end(), data.targets[i].data(), data.targets[i].data() + data.targets[i].size());
        csv.row(row);
    }
}

} // namespace snf
