#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "snf/training.hpp"

namespace snf {

enum class TrainMode { full, stochastic };

/// Run configuration, read from a sectioned key=value file:
///
///   [model]  variant, n_x, n_u, n_y, energy_layers, head, data_dependent,
///            alpha_init, wA_init, S, train_S, train_hu, train_hy, seed
///   [solver] atol, rtol, max_steps
///   [loss]   kind, gamma
///   [train]  eta, epochs, mode
///   [data]   dataset, n, noise, seed, test_fraction
struct Config {
    struct ModelSection {
        Variant variant = Variant::stable;
        int n_x = 2;
        int n_u = 2;
        int n_y = 1;
        std::vector<int> energy_layers;  ///< empty selects the quadratic test energy
        Head head = Head::square;
        bool data_dependent = false;
        double alpha_init = 0.5;
        double wA_init = 1.0;
        double S = 1.0;
        bool train_S = false;
        bool train_hu = false;
        bool train_hy = false;
        std::uint64_t seed = 0;
    } model;

    SolverConfig solver;

    struct LossSection {
        LossKind kind = LossKind::terminal_quadratic;
        double gamma = 1e-2;
    } loss;

    struct TrainSection {
        double eta = 0.02;
        int epochs = 100;
        TrainMode mode = TrainMode::full;
    } train;

    struct DataSection {
        std::string dataset = "negation";
        int n = 0;  ///< 0 selects the dataset default
        double noise = -1.0;  ///< negative selects the dataset default
        std::uint64_t seed = 0;
        double test_fraction = 0.0;
    } data;

    static Config parse(std::istream& is);
    static Config parse_file(const std::filesystem::path& path);
    static Config parse_string(const std::string& text);

    /// Effective configuration in the input format; parsing it yields an
    /// identical configuration.
    std::string echo() const;

    LossSpec loss_spec() const;
};

Model build_model(const Config& cfg);
Dataset build_dataset(const Config& cfg);

std::string to_string(TrainMode mode);

} // namespace snf
