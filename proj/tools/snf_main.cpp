// Command-line entry point: train, gradcheck, surface, flow.

#include <iostream>

#include "CLI11.hpp"
#include "snf/commands.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Stable neural flows: training, gradient checks and flow/energy dumps"};
    app.require_subcommand(1);

    std::string config;
    std::string model_path;
    std::string out_dir = "run";
    int grid = 101;
    bool corrupt = false;

    auto* train = app.add_subcommand("train", "Train a model and write loss.csv, model.bin, config.echo");
    train->add_option("config", config, "Configuration file")->required()->check(CLI::ExistingFile);
    train->add_option("-o,--out", out_dir, "Run directory");

    auto* gradcheck = app.add_subcommand("gradcheck", "Compare adjoint gradients with finite differences");
    gradcheck->add_option("config", config, "Configuration file")->required()->check(CLI::ExistingFile);
    gradcheck->add_option("-o,--out", out_dir, "Output directory for gradcheck.csv");
    gradcheck->add_flag("--corrupt-adjoint", corrupt, "Flip the adjoint gradient sign (negative control)");

    auto* surface = app.add_subcommand("surface", "Dump the learned energy over a grid to surface.csv");
    surface->add_option("config", config, "Configuration file")->required()->check(CLI::ExistingFile);
    surface->add_option("model", model_path, "model.bin snapshot")->required()->check(CLI::ExistingFile);
    surface->add_option("-o,--out", out_dir, "Output directory");
    surface->add_option("--grid", grid, "Grid points per axis")->check(CLI::PositiveNumber);

    auto* flow = app.add_subcommand("flow", "Dump depth trajectories of the training data to flow.csv");
    flow->add_option("config", config, "Configuration file")->required()->check(CLI::ExistingFile);
    flow->add_option("model", model_path, "model.bin snapshot")->required()->check(CLI::ExistingFile);
    flow->add_option("-o,--out", out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : snf::exit_code::config_error;
    }

    if (*train) {
        return snf::cmd_train(config, out_dir, std::cerr);
    }
    if (*gradcheck) {
        return snf::cmd_gradcheck(config, out_dir, corrupt, std::cerr);
    }
    if (*surface) {
        return snf::cmd_surface(config, model_path, out_dir, grid, std::cerr);
    }
    return snf::cmd_flow(config, model_path, out_dir, std::cerr);
}
