#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "snf/config.hpp"
#include "snf/verification.hpp"

namespace snf {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config_error = 2;
inline constexpr int numerical_failure = 3;
inline constexpr int gradcheck_failure = 4;
} // namespace exit_code

/// Gradient-check rows at or above this relative error fail the check.
inline constexpr double kGradcheckThreshold = 1e-4;

/// Slack for the energy-monotonicity audit of trained models.
inline constexpr double kDissipationSlack = 1e-5;

struct EpochRecord {
    int epoch = 0;
    double mean_loss = 0.0;
    double accuracy = 0.0;  ///< NaN for regression tasks
};

struct TrainSummary {
    Model model;
    Dataset train;
    Dataset test;
    std::vector<EpochRecord> history;
    Evaluation train_eval;
    Evaluation test_eval;
    double grid_mse = 0.0;               ///< negation task: MSE on 101 points over [-1, 1]
    double median_terminal_field = 0.0;  ///< median ||f(x(S))|| over the training set
    double max_energy_increase = 0.0;    ///< worst dissipation-audit increase over all training flows
    bool dissipation_passed = true;
};

TrainSummary run_training(const Config& cfg, std::ostream* log = nullptr);
void write_run(const TrainSummary& summary, const Config& cfg, const std::filesystem::path& dir);

/// MSE of the trained map against y = -u on an equispaced grid over [-1, 1].
double negation_grid_mse(const Model& model, const SolverConfig& cfg, int points = 101);

/// Checks every registered gradient path (terminal and back-propagated losses,
/// all four parameter blocks) on the first training samples at tightened
/// solver tolerance.
std::vector<GradCheckRow> run_gradcheck(const Config& cfg, bool corrupt_adjoint = false, int samples = 2);

/// `x1[,x2][,u1,...],energy` over a grid x grid lattice spanning the data
/// bounding box enlarged by 20%.
void write_surface(const Config& cfg, const Model& model, const Dataset& data, int grid, std::ostream& os);

/// `sample_id,s,x1..xn,energy` at the accepted solver nodes of each sample.
void write_flow(const Config& cfg, const Model& model, const Dataset& data, std::ostream& os);

int cmd_train(const std::filesystem::path& config, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_gradcheck(const std::filesystem::path& config, const std::filesystem::path& out_dir, bool corrupt_adjoint,
                  std::ostream& log);
int cmd_surface(const std::filesystem::path& config, const std::filesystem::path& model_path,
                const std::filesystem::path& out_dir, int grid, std::ostream& log);
int cmd_flow(const std::filesystem::path& config, const std::filesystem::path& model_path,
             const std::filesystem::path& out_dir, std::ostream& log);

} // namespace snf
