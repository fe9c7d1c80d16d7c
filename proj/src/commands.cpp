#include "snf/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "snf/io.hpp"

namespace snf {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::pair<Dataset, Dataset> train_test(const Config& cfg)
{
    const Dataset all = build_dataset(cfg);
    all.validate();
    return split_dataset(all, cfg.data.test_fraction, cfg.data.seed);
}

double accuracy(const Model& model, const Dataset& data, const SolverConfig& cfg)
{
    if (data.task != Task::classification || data.size() == 0) {
        return kNaN;
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        hits += correct(predict(model, data.inputs[i], cfg), data.targets[i]) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

std::ofstream open_out(const fs::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    return out;
}

// Maps exceptions to the documented exit codes.
template <class F>
int guarded(std::ostream& log, F&& body)
{
    try {
        return body();
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return exit_code::config_error;
    } catch (const DimensionError& e) {
        log << "config error: " << e.what() << '\n';
        return exit_code::config_error;
    } catch (const IntegrationError& e) {
        log << "numerical failure: " << e.what() << '\n';
        return exit_code::numerical_failure;
    } catch (const NumericalError& e) {
        log << "numerical failure: " << e.what() << '\n';
        return exit_code::numerical_failure;
    } catch (const Error& e) {
        log << "error: " << e.what() << '\n';
        return exit_code::config_error;
    }
}

Model load_model(const Config& cfg, const fs::path& model_path)
{
    Model model = build_model(cfg);
    apply_snapshot(load_snapshot(model_path), model);
    return model;
}

} // namespace

double negation_grid_mse(const Model& model, const SolverConfig& cfg, int points)
{
    double mse = 0.0;
    for (int i = 0; i < points; ++i) {
        const double u = -1.0 + 2.0 * i / (points - 1);
        const Vec yhat = predict(model, Vec::Constant(1, u), cfg);
        mse += (yhat[0] + u) * (yhat[0] + u);
    }
    return mse / points;
}

TrainSummary run_training(const Config& cfg, std::ostream* log)
{
    TrainSummary out;
    std::tie(out.train, out.test) = train_test(cfg);
    Model model = build_model(cfg);
    const LossSpec spec = cfg.loss_spec();
    std::mt19937_64 rng(cfg.data.seed ^ 0x9e3779b97f4a7c15ULL);

    const int report_every = std::max(1, cfg.train.epochs / 20);
    for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        if (cfg.train.mode == TrainMode::full) {
            const BatchGradient bg = batch_gradient(model, out.train, spec, cfg.solver);
            rec.mean_loss = bg.mean.loss;
            rec.accuracy = out.train.task == Task::classification ? bg.accuracy : kNaN;
            model = gd_step(model, bg.mean, cfg.train.eta);
        } else {
            auto [next, loss] = sgd_epoch(model, out.train, spec, cfg.train.eta, cfg.solver, rng);
            model = std::move(next);
            rec.mean_loss = loss;
            rec.accuracy = accuracy(model, out.train, cfg.solver);
        }
        if (!std::isfinite(rec.mean_loss)) {
            throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
        }
        out.history.push_back(rec);
        if (log != nullptr && (epoch % report_every == 0 || epoch == cfg.train.epochs)) {
            *log << "epoch " << epoch << "  loss " << rec.mean_loss;
            if (std::isfinite(rec.accuracy)) {
                *log << "  acc " << rec.accuracy;
            }
            *log << "  S " << model.S << '\n';
        }
    }

    out.model = model;
    out.train_eval = evaluate(model, out.train, spec, cfg.solver);
    out.test_eval = evaluate(model, out.test, spec, cfg.solver);
    out.grid_mse = cfg.data.dataset == "negation" ? negation_grid_mse(model, cfg.solver) : kNaN;

    std::vector<double> norms;
    for (std::size_t i = 0; i < out.train.size(); ++i) {
        const Vec& u = out.train.inputs[i];
        const Trajectory traj =
            solve_forward(model.field, u, model.w, affine_apply(model.h_u, u), model.S, cfg.solver);
        norms.push_back(field_eval(model.field, u, traj.final_state(), model.w).norm());
        const DissipationReport rep = audit_field(traj, model.field, u, model.w, kDissipationSlack);
        out.max_energy_increase = std::max(out.max_energy_increase, rep.max_increase);
        out.dissipation_passed = out.dissipation_passed && rep.passed;
    }
    if (!norms.empty()) {
        std::sort(norms.begin(), norms.end());
        const std::size_t n = norms.size();
        out.median_terminal_field = n % 2 == 1 ? norms[n / 2] : 0.5 * (norms[n / 2 - 1] + norms[n / 2]);
    }
    return out;
}

void write_run(const TrainSummary& summary, const Config& cfg, const fs::path& dir)
{
    fs::create_directories(dir);
    {
        std::ofstream out = open_out(dir / "loss.csv");
        CsvWriter csv(out);
        csv.header({"epoch", "mean_loss", "accuracy"});
        for (const EpochRecord& r : summary.history) {
            csv.row({static_cast<double>(r.epoch), r.mean_loss, r.accuracy});
        }
    }
    save_snapshot(summary.model, dir / "model.bin");
    {
        std::ofstream out = open_out(dir / "config.echo");
        out << cfg.echo();
    }
    {
        std::ofstream out = open_out(dir / "summary.csv");
        out << "metric,value\n";
        auto put = [&](const char* key, double v) { out << key << ',' << format_double(v) << '\n'; };
        put("train_loss", summary.train_eval.mean_loss);
        put("train_accuracy", summary.train.task == Task::classification ? summary.train_eval.accuracy : kNaN);
        put("train_mse", summary.train_eval.mse);
        put("test_loss", summary.test.size() ? summary.test_eval.mean_loss : kNaN);
        put("test_accuracy",
            summary.test.size() && summary.test.task == Task::classification ? summary.test_eval.accuracy : kNaN);
        put("grid_mse", summary.grid_mse);
        put("median_terminal_field", summary.median_terminal_field);
        put("max_energy_increase", summary.max_energy_increase);
        put("dissipation_passed", summary.dissipation_passed ? 1.0 : 0.0);
        put("S", summary.model.S);
    }
}

std::vector<GradCheckRow> run_gradcheck(const Config& cfg, bool corrupt_adjoint, int samples)
{
    const auto [train, test] = train_test(cfg);
    Model model = build_model(cfg);
    model.trainable = {true, true, true, true};

    SolverConfig oracle = cfg.solver;
    oracle.atol = 1e-8;
    oracle.rtol = 1e-8;

    LossSpec terminal = cfg.loss_spec();
    if (terminal.kind == LossKind::backprop_integral) {
        terminal.kind = LossKind::terminal_quadratic;
    }
    LossSpec backprop = cfg.loss_spec();
    backprop.kind = LossKind::backprop_integral;

    GradCheckOptions opts;
    opts.grad.corrupt_adjoint_sign = corrupt_adjoint;
    opts.seed = cfg.model.seed;

    std::vector<GradCheckRow> rows;
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(samples), train.size());
    for (const LossSpec& spec : {terminal, backprop}) {
        for (std::size_t i = 0; i < n; ++i) {
            opts.seed = cfg.model.seed + i;
            auto r = gradcheck_sample(model, spec, train.inputs[i], train.targets[i], oracle, opts);
            rows.insert(rows.end(), r.begin(), r.end());
        }
    }
    return rows;
}

void write_surface(const Config& cfg, const Model& model, const Dataset& data, int grid, std::ostream& os)
{
    const FieldSpec& field = model.field;
    if (field.variant() == Variant::vanilla) {
        throw ConfigError("model.variant: surface needs an energy-based field, got vanilla");
    }
    if (grid < 1) {
        throw ConfigError("surface grid size must be positive");
    }
    const EnergyNet& energy = field.energy();
    const int ex = energy.n_x();
    const int eu = energy.data_dependent() ? energy.n_u() : 0;
    const auto wn = field.net_params(model.w);

    // Bounding boxes of the visited states (initial and terminal) and of the inputs.
    Vec xlo = Vec::Constant(ex, std::numeric_limits<double>::infinity());
    Vec xhi = -xlo;
    Vec ulo = Vec::Constant(eu, std::numeric_limits<double>::infinity());
    Vec uhi = -ulo;
    Vec umean = Vec::Zero(std::max(eu, 0));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vec& u = data.inputs[i];
        const Vec x0 = affine_apply(model.h_u, u);
        const Vec xS = terminal_state(model, u, cfg.solver);
        for (const Vec* x : {&x0, &xS}) {
            xlo = xlo.cwiseMin(x->head(ex));
            xhi = xhi.cwiseMax(x->head(ex));
        }
        if (eu > 0) {
            ulo = ulo.cwiseMin(u);
            uhi = uhi.cwiseMax(u);
            umean += u / static_cast<double>(data.size());
        }
    }
    auto widen = [](Vec& lo, Vec& hi) {
        for (Eigen::Index k = 0; k < lo.size(); ++k) {
            const double pad = 0.2 * std::max(hi[k] - lo[k], 1e-3);
            lo[k] -= pad;
            hi[k] += pad;
        }
    };
    widen(xlo, xhi);
    widen(ulo, uhi);

    // Up to two swept axes: (x1, x2) when the state is at least 2-D, otherwise
    // (x1, u1) for data-dependent energies.
    struct Axis {
        bool is_u;
        int index;
        double lo;
        double hi;
    };
    std::vector<Axis> axes{{false, 0, xlo[0], xhi[0]}};
    if (ex >= 2) {
        axes.push_back({false, 1, xlo[1], xhi[1]});
    } else if (eu >= 1) {
        axes.push_back({true, 0, ulo[0], uhi[0]});
    }

    CsvWriter csv(os);
    std::vector<std::string> header;
    for (int k = 1; k <= ex; ++k) {
        header.push_back("x" + std::to_string(k));
    }
    for (int k = 1; k <= eu; ++k) {
        header.push_back("u" + std::to_string(k));
    }
    header.push_back("energy");
    csv.header(header);

    auto at = [&](const Axis& a, int i) { return grid == 1 ? a.lo : a.lo + (a.hi - a.lo) * i / (grid - 1); };
    const int outer = axes.size() > 1 ? grid : 1;
    for (int i = 0; i < outer; ++i) {
        for (int j = 0; j < grid; ++j) {
            Vec x = Vec::Zero(ex);
            Vec u = eu > 0 ? umean : Vec::Zero(energy.n_u());
            auto set = [&](const Axis& a, double v) { (a.is_u ? u : x)[a.index] = v; };
            if (axes.size() > 1) {
                set(axes[0], at(axes[0], i));
                set(axes[1], at(axes[1], j));
            } else {
                set(axes[0], at(axes[0], j));
            }
            std::vector<double> row(x.data(), x.data() + ex);
            for (int k = 0; k < eu; ++k) {
                row.push_back(u[k]);
            }
            row.push_back(energy_eval(energy, u, x, wn));
            csv.row(row);
        }
    }
}

void write_flow(const Config& cfg, const Model& model, const Dataset& data, std::ostream& os)
{
    CsvWriter csv(os);
    std::vector<std::string> header{"sample_id", "s"};
    for (int k = 1; k <= model.n_x(); ++k) {
        header.push_back("x" + std::to_string(k));
    }
    header.push_back("energy");
    csv.header(header);
    const bool has_energy = model.field.variant() != Variant::vanilla;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vec& u = data.inputs[i];
        Trajectory traj;
        try {
            traj = solve_forward(model.field, u, model.w, affine_apply(model.h_u, u), model.S, cfg.solver);
        } catch (const IntegrationError& e) {
            throw IntegrationError("sample " + std::to_string(i) + ", flow phase: " + e.what(), e.s(), e.h());
        }
        for (const TrajectoryNode& node : traj.nodes) {
            std::vector<double> row{static_cast<double>(i), node.s};
            row.insert(row.end(), node.state.data(), node.state.data() + node.state.size());
            row.push_back(has_energy ? field_energy(model.field, u, node.state, model.w) : kNaN);
            csv.row(row);
        }
    }
}

int cmd_train(const fs::path& config, const fs::path& out_dir, std::ostream& log)
{
    return guarded(log, [&] {
        const Config cfg = Config::parse_file(config);
        const TrainSummary summary = run_training(cfg, &log);
        write_run(summary, cfg, out_dir);
        log << "train loss " << summary.train_eval.mean_loss;
        if (summary.train.task == Task::classification) {
            log << "  train accuracy " << summary.train_eval.accuracy;
        } else if (std::isfinite(summary.grid_mse)) {
            log << "  grid mse " << summary.grid_mse;
        }
        log << "\nwrote " << out_dir.string() << '\n';
        return exit_code::ok;
    });
}

int cmd_gradcheck(const fs::path& config, const fs::path& out_dir, bool corrupt_adjoint, std::ostream& log)
{
    return guarded(log, [&] {
        const Config cfg = Config::parse_file(config);
        const std::vector<GradCheckRow> rows = run_gradcheck(cfg, corrupt_adjoint);
        fs::create_directories(out_dir);
        std::ofstream out = open_out(out_dir / "gradcheck.csv");
        write_gradcheck_csv(rows, out);
        double worst = 0.0;
        for (const GradCheckRow& r : rows) {
            worst = std::max(worst, r.rel_err);
        }
        log << rows.size() << " comparisons, max relative error " << worst << '\n';
        return worst < kGradcheckThreshold ? exit_code::ok : exit_code::gradcheck_failure;
    });
}

int cmd_surface(const fs::path& config, const fs::path& model_path, const fs::path& out_dir, int grid,
                std::ostream& log)
{
    return guarded(log, [&] {
        const Config cfg = Config::parse_file(config);
        const Model model = load_model(cfg, model_path);
        const Dataset train = train_test(cfg).first;
        fs::create_directories(out_dir);
        std::ofstream out = open_out(out_dir / "surface.csv");
        write_surface(cfg, model, train, grid, out);
        return exit_code::ok;
    });
}

int cmd_flow(const fs::path& config, const fs::path& model_path, const fs::path& out_dir, std::ostream& log)
{
    return guarded(log, [&] {
        const Config cfg = Config::parse_file(config);
        const Model model = load_model(cfg, model_path);
        const Dataset train = train_test(cfg).first;
        fs::create_directories(out_dir);
        std::ofstream out = open_out(out_dir / "flow.csv");
        write_flow(cfg, model, train, out);
        return exit_code::ok;
    });
}

} // namespace snf
