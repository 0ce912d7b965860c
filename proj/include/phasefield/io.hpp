#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phasefield/analysis.hpp"

namespace phasefield {

// One marching run: model, discretization, stabilization (exactly one of
// beta/A after parsing; beta = 1 when the config names neither), initial
// state, and output cadence.
struct RunConfig {
    ModelConfig model{ModelKind::CahnHilliard, 1.0, Nonlinearity::Full};
    int N = 32;
    std::optional<int> M;  // default: dealiased physical size for N
    Cutoff cutoff = Cutoff::EuclideanBall;
    double tau = 0.0;
    long steps = 0;
    std::optional<double> beta;
    std::optional<double> A;
    double s_op = 1.0;
    InitialCondition init = RandomBandlimited{};
    long snapshot_every = 0;  // 0 = never
    bool enforce_mean_zero = true;
    std::filesystem::path out_dir = ".";
};

struct ConvergeConfig {
    enum class Mode { Temporal, Spatial };
    ModelConfig model{ModelKind::CahnHilliard, 1.0, Nonlinearity::Full};
    Mode mode = Mode::Temporal;
    double t_final = 0.0;
    std::vector<double> taus;      // temporal ladder
    int N = 32;                    // temporal grid radius
    std::vector<int> resolutions;  // spatial ladder
    double tau = 0.0;              // spatial step size
    Cutoff cutoff = Cutoff::EuclideanBall;
    std::optional<double> beta;
    std::optional<double> A;
    double s_op = 1.0;
    InitialCondition init = RandomBandlimited{};
    std::filesystem::path out_dir = ".";
};

struct ScanConfig {
    ModelConfig model{ModelKind::CahnHilliard, 1.0, Nonlinearity::Full};
    int N = 32;
    std::optional<int> M;
    Cutoff cutoff = Cutoff::EuclideanBall;
    std::vector<double> taus;
    std::vector<double> values;
    ScanParameter parameter = ScanParameter::Beta;
    double s_op = 1.0;
    long steps = 200;
    InitialCondition init = RandomBandlimited{};
    std::filesystem::path out_dir = ".";
};

// JSON -> config, raising ConfigError with the offending field's name.
RunConfig parse_run_config(const std::string& json_text);
ConvergeConfig parse_converge_config(const std::string& json_text);
ScanConfig parse_scan_config(const std::string& json_text);

std::string read_text_file(const std::filesystem::path& path);

// Applies a `--key value` override onto raw JSON config text; key may be
// dotted for nested fields (init.seed).  Values parse as JSON scalars or
// arrays, falling back to strings.
std::string apply_override(const std::string& json_text, const std::string& key,
                           const std::string& value);

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

void write_energy_csv(std::ostream& out, const RunRecord& record);
void write_scan_csv(std::ostream& out, std::span<const ScanCell> cells);
void write_temporal_csv(std::ostream& out, const RateEstimate& estimate);
void write_spatial_csv(std::ostream& out, const SpatialResult& result);

// Self-describing echo of what the run actually used, including the
// resolved stabilization coefficient and the recorded outcome.
std::string params_json(const RunConfig& config, const RunRecord& record);

// Snapshot format: "PFLD", u32 version = 1, u32 M, f64 time, u8 model tag
// (0 = Cahn-Hilliard, 1 = MBE), then M*M point values as little-endian f64,
// row-major.  Round-trips bit-exactly.
struct Snapshot {
    PhysicalField field;
    double time = 0.0;
    ModelKind model = ModelKind::CahnHilliard;
};

void write_snapshot(const std::filesystem::path& path,
                    const PhysicalField& field, double time, ModelKind model);
Snapshot read_snapshot(const std::filesystem::path& path);

// Subcommand bodies.  Config errors propagate as exceptions; the returned
// code is 0 on success and 3 when a run diverged (after writing the partial
// series and a diagnostic line).
int cmd_run(const RunConfig& config);
int cmd_converge(const ConvergeConfig& config);
int cmd_stability_scan(const ScanConfig& config);

}  // namespace phasefield
