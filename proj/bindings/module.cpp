#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "phasefield/analysis.hpp"
#include "phasefield/errors.hpp"
#include "phasefield/io.hpp"
#include "phasefield/spectral.hpp"
#include "phasefield/stepper.hpp"

namespace py = pybind11;
using namespace phasefield;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

ModelKind model_kind_from(const std::string& model) {
    if (model == "ch") return ModelKind::CahnHilliard;
    if (model == "mbe") return ModelKind::Mbe;
    throw py::value_error("model must be 'ch' or 'mbe'");
}

const char* model_name(ModelKind kind) {
    return kind == ModelKind::CahnHilliard ? "ch" : "mbe";
}

py::array_t<double> field_to_array(const PhysicalField& field) {
    const auto m = static_cast<py::ssize_t>(field.grid().M);
    py::array_t<double> out({m, m});
    const auto values = field.values();
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

// Square M x M sample arrays carry their grid implicitly: N = (M - 2) / 4,
// the largest cutoff the dealiased grid supports (same rule as snapshots).
PhysicalField array_to_field(const DoubleArray& array) {
    if (array.ndim() != 2 || array.shape(0) != array.shape(1))
        throw py::value_error("expected a square 2-d array of samples");
    const auto m = array.shape(0);
    if (m < 6 || m % 2 != 0)
        throw py::value_error("grid size must be even and at least 6");
    const int M = static_cast<int>(m);
    PhysicalField field(GridSpec::make((M - 2) / 4, M));
    std::copy(array.data(), array.data() + M * M, field.values().begin());
    return field;
}

StabilizationPlan plan_from(const ModelConfig& model, const SpectralField& init,
                            std::optional<double> beta, std::optional<double> A,
                            double s_op) {
    if (beta.has_value() == A.has_value())
        throw py::value_error("give exactly one of beta and A");
    return A ? StabilizationPlan::direct(*A, s_op)
             : StabilizationPlan::resolve(model, init, *beta, s_op);
}

py::dict record_to_dict(const RunRecord& record) {
    const auto n = static_cast<py::ssize_t>(record.rows.size());
    py::array_t<long> step(n);
    py::array_t<double> time(n), energy(n), mass_col(n), linf(n), diff_l2(n),
        residual(n), lemma_margin(n);
    for (py::ssize_t i = 0; i < n; ++i) {
        const RunRow& row = record.rows[static_cast<std::size_t>(i)];
        step.mutable_at(i) = row.step;
        time.mutable_at(i) = row.time;
        energy.mutable_at(i) = row.energy;
        mass_col.mutable_at(i) = row.mass;
        linf.mutable_at(i) = row.linf;
        diff_l2.mutable_at(i) = row.diff_l2;
        residual.mutable_at(i) = row.residual;
        lemma_margin.mutable_at(i) = row.lemma_margin;
    }
    py::dict steps;
    steps["step"] = step;
    steps["time"] = time;
    steps["energy"] = energy;
    steps["mass"] = mass_col;
    steps["linf"] = linf;
    steps["diff_l2"] = diff_l2;
    steps["residual"] = residual;
    steps["lemma_margin"] = lemma_margin;

    py::dict out;
    out["model"] = model_name(record.params.model);
    out["nu"] = record.params.nu;
    out["N"] = record.params.N;
    out["M"] = record.params.M;
    out["tau"] = record.params.tau;
    out["A"] = record.params.A;
    out["beta"] = record.params.beta ? py::cast(*record.params.beta) : py::none();
    out["s_op"] = record.params.s_op;
    out["initial_energy"] = record.initial_energy;
    out["initial_mass"] = record.initial_mass;
    out["initial_linf"] = record.initial_linf;
    out["steps"] = steps;
    out["diverged"] = record.diverged;
    out["divergence_step"] = record.divergence_step;
    return out;
}

py::dict run_json(const std::string& config_json) {
    const RunConfig config = parse_run_config(config_json);
    const GridSpec grid = config.M
                              ? GridSpec::make(config.N, *config.M, config.cutoff)
                              : GridSpec::make(config.N, config.cutoff);
    const SpectralField u0 = make_initial(config.init, grid);
    const StabilizationPlan plan =
        plan_from(config.model, u0, config.beta, config.A, config.s_op);

    SpectralField last = project(u0);
    if (config.enforce_mean_zero) last.at(0, 0) = 0.0;
    const bool margins = plan.s_op == 1.0;
    RunHooks hooks;
    hooks.on_step = [&](const StepperState&, const StepperState& next,
                        StepDiagnostics& diagnostics) {
        if (margins)
            diagnostics.lemma_margin = step_margin_from_diagnostics(
                config.model.kind, diagnostics, config.model.nu, next.tau, plan.A);
        last = next.field;
    };
    RunRecord record = run(u0, config.model, plan, config.tau, config.steps, hooks,
                           StepOptions{config.enforce_mean_zero});
    if (const auto* random = std::get_if<RandomBandlimited>(&config.init))
        record.params.seed = random->seed;

    py::dict out = record_to_dict(record);
    out["final"] = field_to_array(to_physical(last));
    return out;
}

py::dict converge_json(const std::string& config_json) {
    const ConvergeConfig config = parse_converge_config(config_json);
    std::optional<StabilizationPlan> plan;
    if (config.A)
        plan = StabilizationPlan::direct(*config.A, config.s_op);
    else if (config.s_op != 1.0)
        throw py::value_error("s_op = 2 needs a direct A for convergence studies");

    py::dict out;
    if (config.mode == ConvergeConfig::Mode::Temporal) {
        TemporalStudy study;
        study.config = config.model;
        study.grid = GridSpec::make(config.N, config.cutoff);
        study.init = config.init;
        study.taus = config.taus;
        study.t_final = config.t_final;
        study.plan = plan;
        study.beta = config.beta.value_or(1.0);
        const RateEstimate estimate = temporal_convergence(study);
        py::list points;
        for (const RatePoint& p : estimate.points)
            points.append(py::make_tuple(p.resolution, p.error));
        out["mode"] = "temporal";
        out["points"] = points;
        out["fitted_order"] = estimate.fitted_order;
        out["r_squared"] = estimate.r_squared;
    } else {
        SpatialStudy study;
        study.config = config.model;
        study.resolutions = config.resolutions;
        study.init = config.init;
        study.tau = config.tau;
        study.t_final = config.t_final;
        study.plan = plan;
        study.beta = config.beta.value_or(1.0);
        study.cutoff = config.cutoff;
        const SpatialResult result = spatial_convergence(study);
        py::list points;
        for (const SpatialPoint& p : result.points)
            points.append(py::make_tuple(p.resolution, p.error));
        out["mode"] = "spatial";
        out["points"] = points;
        out["observed_orders"] = result.observed_orders;
        out["superalgebraic"] = result.superalgebraic;
        out["reference_resolution"] = result.reference_resolution;
        out["reference_tau"] = result.reference_tau;
    }
    return out;
}

py::list scan_json(const std::string& config_json) {
    const ScanConfig config = parse_scan_config(config_json);
    StabilityScanRequest request;
    request.config = config.model;
    request.grid = config.M ? GridSpec::make(config.N, *config.M, config.cutoff)
                            : GridSpec::make(config.N, config.cutoff);
    request.init = config.init;
    request.taus = config.taus;
    request.values = config.values;
    request.parameter = config.parameter;
    request.s_op = config.s_op;
    request.n_steps = config.steps;

    py::list out;
    for (const ScanCell& cell : stability_scan(request)) {
        py::dict entry;
        entry["tau"] = cell.tau;
        entry["value"] = cell.value;
        entry["A"] = cell.A;
        entry["monotone"] = cell.monotone;
        entry["first_violation_step"] = cell.first_violation_step;
        entry["final_energy"] = cell.final_energy;
        entry["diverged"] = cell.diverged;
        out.append(entry);
    }
    return out;
}

py::array_t<double> make_initial_json(const std::string& init_json, int N,
                                      std::optional<int> M,
                                      const std::string& cutoff) {
    Cutoff c = Cutoff::EuclideanBall;
    if (cutoff == "square")
        c = Cutoff::Square;
    else if (cutoff != "ball")
        throw py::value_error("cutoff must be 'ball' or 'square'");
    // Reuse the config-file syntax for the init block by splicing it into a
    // minimal probe config.
    nlohmann::json probe;
    try {
        probe["init"] = nlohmann::json::parse(init_json);
    } catch (const nlohmann::json::exception& e) {
        throw py::value_error(e.what());
    }
    probe["model"] = "ch";
    probe["nu"] = 1.0;
    probe["N"] = N;
    probe["tau"] = 1.0;
    probe["steps"] = 1;
    const RunConfig config = parse_run_config(probe.dump());
    const GridSpec grid = M ? GridSpec::make(N, *M, c) : GridSpec::make(N, c);
    return field_to_array(to_physical(make_initial(config.init, grid)));
}

double energy_of(const std::string& model, double nu, const DoubleArray& array) {
    if (!(nu > 0.0)) throw py::value_error("nu must be positive");
    const ModelConfig config{model_kind_from(model), nu, Nonlinearity::Full};
    return energy(config, to_spectral(array_to_field(array)));
}

py::array_t<double> advance_array(const DoubleArray& array,
                                  const std::string& model, double nu, double tau,
                                  long steps, std::optional<double> beta,
                                  std::optional<double> A, double s_op,
                                  bool enforce_mean_zero) {
    if (!(nu > 0.0)) throw py::value_error("nu must be positive");
    const ModelConfig config{model_kind_from(model), nu, Nonlinearity::Full};
    const SpectralField u0 = to_spectral(array_to_field(array));
    const StabilizationPlan plan = plan_from(config, u0, beta, A, s_op);
    const StepperState final_state =
        advance(u0, config, plan, tau, steps, StepOptions{enforce_mean_zero});
    return field_to_array(to_physical(final_state.field));
}

py::tuple read_snapshot_py(const std::filesystem::path& path) {
    const Snapshot snapshot = read_snapshot(path);
    return py::make_tuple(field_to_array(snapshot.field), snapshot.time,
                          model_name(snapshot.model));
}

void write_snapshot_py(const std::filesystem::path& path, const DoubleArray& array,
                       double time, const std::string& model) {
    write_snapshot(path, array_to_field(array), time, model_kind_from(model));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() =
        "Stabilized semi-implicit Fourier-spectral solver for the 2-d "
        "Cahn-Hilliard and slope-selection thin-film equations";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<DivergenceError>(m, "DivergenceError",
                                            PyExc_RuntimeError);

    m.def("run_json", &run_json, py::arg("config_json"),
          "March one configured run; returns per-step series and the final "
          "state for a JSON config string.");
    m.def("converge_json", &converge_json, py::arg("config_json"),
          "Temporal or spatial self-convergence study for a JSON config "
          "string.");
    m.def("scan_json", &scan_json, py::arg("config_json"),
          "Energy-decay check over a (tau, stabilization) grid for a JSON "
          "config string.");
    m.def("make_initial_json", &make_initial_json, py::arg("init_json"),
          py::arg("N"), py::arg("M") = py::none(), py::arg("cutoff") = "ball",
          "Sample a configured initial state on the dealiased grid for the "
          "cutoff radius N.");
    m.def("energy", &energy_of, py::arg("model"), py::arg("nu"),
          py::arg("field"),
          "Free energy of a sampled state under the given model.");
    m.def("advance", &advance_array, py::arg("field"), py::arg("model"),
          py::arg("nu"), py::arg("tau"), py::arg("steps"),
          py::arg("beta") = py::none(), py::arg("A") = py::none(),
          py::arg("s_op") = 1.0, py::arg("enforce_mean_zero") = true,
          "March a sampled state forward and return the new samples.");
    m.def("read_snapshot", &read_snapshot_py, py::arg("path"),
          "Load a snapshot file; returns (samples, time, model).");
    m.def("write_snapshot", &write_snapshot_py, py::arg("path"),
          py::arg("field"), py::arg("time") = 0.0, py::arg("model") = "ch",
          "Write samples to a snapshot file.");
    m.def("thread_cap", &thread_cap,
          "Worker count the parallel studies will use (PHASEFIELD_THREADS "
          "overrides).");
}
