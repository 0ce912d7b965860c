#include "phasefield/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <limits>
#include <sstream>
#include <string_view>
#include <utility>

#include "json.hpp"

#include "phasefield/errors.hpp"

namespace phasefield {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& field, const std::string& message) {
    throw ConfigError(field, message);
}

const json* find(const json& obj, const std::string& key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

void reject_unknown(const json& obj, const std::string& prefix,
                    std::initializer_list<std::string_view> allowed) {
    for (const auto& item : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            fail(prefix.empty() ? item.key() : prefix + "." + item.key(),
                 "unknown field");
    }
}

double as_number(const json& v, const std::string& field) {
    if (!v.is_number()) fail(field, "expected a number");
    return v.get<double>();
}

long as_integer(const json& v, const std::string& field) {
    if (!v.is_number_integer()) fail(field, "expected an integer");
    return v.get<long>();
}

int as_int(const json& v, const std::string& field) {
    const long value = as_integer(v, field);
    if (value < std::numeric_limits<int>::min() ||
        value > std::numeric_limits<int>::max())
        fail(field, "integer out of range");
    return static_cast<int>(value);
}

std::uint64_t as_seed(const json& v, const std::string& field) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    fail(field, "expected a nonnegative integer");
}

std::string as_string(const json& v, const std::string& field) {
    if (!v.is_string()) fail(field, "expected a string");
    return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& field) {
    if (!v.is_boolean()) fail(field, "expected a boolean");
    return v.get<bool>();
}

std::array<int, 2> as_mode(const json& v, const std::string& field) {
    if (!v.is_array() || v.size() != 2) fail(field, "expected [k1, k2]");
    return {as_int(v[0], field), as_int(v[1], field)};
}

std::vector<double> as_number_array(const json& v, const std::string& field) {
    if (!v.is_array() || v.empty())
        fail(field, "expected a nonempty array of numbers");
    std::vector<double> values;
    values.reserve(v.size());
    for (const json& item : v) values.push_back(as_number(item, field));
    return values;
}

ModelKind parse_model_kind(const json& v, const std::string& field) {
    const std::string s = as_string(v, field);
    if (s == "ch") return ModelKind::CahnHilliard;
    if (s == "mbe") return ModelKind::Mbe;
    fail(field, "expected \"ch\" or \"mbe\"");
}

Nonlinearity parse_nonlinearity(const json& v, const std::string& field) {
    const std::string s = as_string(v, field);
    if (s == "full") return Nonlinearity::Full;
    if (s == "none") return Nonlinearity::None;
    fail(field, "expected \"full\" or \"none\"");
}

Cutoff parse_cutoff(const json& v, const std::string& field) {
    const std::string s = as_string(v, field);
    if (s == "ball") return Cutoff::EuclideanBall;
    if (s == "square") return Cutoff::Square;
    fail(field, "expected \"ball\" or \"square\"");
}

ModelConfig parse_model_fields(const json& obj) {
    ModelConfig config;
    const json* model = find(obj, "model");
    if (!model) fail("model", "required");
    config.kind = parse_model_kind(*model, "model");
    const json* nu = find(obj, "nu");
    if (!nu) fail("nu", "required");
    config.nu = as_number(*nu, "nu");
    if (!(config.nu > 0.0)) fail("nu", "must be positive");
    if (const json* v = find(obj, "nonlinearity"))
        config.nonlinearity = parse_nonlinearity(*v, "nonlinearity");
    return config;
}

InitialCondition parse_init(const json& obj) {
    const json* v = find(obj, "init");
    if (!v) fail("init", "required");
    if (!v->is_object()) fail("init", "expected an object");
    const json* kind = find(*v, "kind");
    if (!kind) fail("init.kind", "required");
    const std::string s = as_string(*kind, "init.kind");
    if (s == "random") {
        reject_unknown(*v, "init", {"kind", "seed", "amplitude", "band"});
        RandomBandlimited init;
        if (const json* f = find(*v, "seed")) init.seed = as_seed(*f, "init.seed");
        if (const json* f = find(*v, "amplitude"))
            init.amplitude = as_number(*f, "init.amplitude");
        if (const json* f = find(*v, "band")) init.band = as_int(*f, "init.band");
        if (!(init.amplitude >= 0.0)) fail("init.amplitude", "must be nonnegative");
        if (init.band < 1) fail("init.band", "must be at least 1");
        return init;
    }
    if (s == "single-mode") {
        reject_unknown(*v, "init", {"kind", "mode", "amplitude"});
        SingleMode init;
        if (const json* f = find(*v, "mode")) init.mode = as_mode(*f, "init.mode");
        if (const json* f = find(*v, "amplitude"))
            init.amplitude = as_number(*f, "init.amplitude");
        return init;
    }
    if (s == "two-mode") {
        reject_unknown(*v, "init",
                       {"kind", "mode", "amplitude", "mode2", "amplitude2"});
        TwoMode init;
        if (const json* f = find(*v, "mode")) init.mode = as_mode(*f, "init.mode");
        if (const json* f = find(*v, "amplitude"))
            init.amplitude = as_number(*f, "init.amplitude");
        if (const json* f = find(*v, "mode2")) init.mode2 = as_mode(*f, "init.mode2");
        if (const json* f = find(*v, "amplitude2"))
            init.amplitude2 = as_number(*f, "init.amplitude2");
        return init;
    }
    if (s == "smooth-exp") {
        reject_unknown(*v, "init", {"kind", "kappa", "amplitude"});
        SmoothExponential init;
        if (const json* f = find(*v, "kappa")) init.kappa = as_number(*f, "init.kappa");
        if (const json* f = find(*v, "amplitude"))
            init.amplitude = as_number(*f, "init.amplitude");
        if (!(init.kappa >= 0.0)) fail("init.kappa", "must be nonnegative");
        if (!(init.amplitude >= 0.0)) fail("init.amplitude", "must be nonnegative");
        return init;
    }
    fail("init.kind",
         "expected \"random\", \"single-mode\", \"two-mode\", or \"smooth-exp\"");
}

void parse_stabilization(const json& obj, std::optional<double>& beta,
                         std::optional<double>& A) {
    const json* v = find(obj, "stabilization");
    if (!v) {
        beta = 1.0;
        return;
    }
    if (!v->is_object()) fail("stabilization", "expected an object");
    reject_unknown(*v, "stabilization", {"beta", "A"});
    if (const json* f = find(*v, "beta")) beta = as_number(*f, "stabilization.beta");
    if (const json* f = find(*v, "A")) A = as_number(*f, "stabilization.A");
    if (beta.has_value() == A.has_value())
        fail("stabilization", "give exactly one of beta and A");
    if (beta && !(*beta > 0.0)) fail("stabilization.beta", "must be positive");
    if (A && !(*A >= 0.0)) fail("stabilization.A", "must be nonnegative");
}

double parse_s_op(const json& obj) {
    const json* v = find(obj, "s_op");
    if (!v) return 1.0;
    const double s = as_number(*v, "s_op");
    if (s != 1.0 && s != 2.0) fail("s_op", "expected 1 or 2");
    return s;
}

void parse_grid_fields(const json& obj, int& N, std::optional<int>& M,
                       Cutoff& cutoff) {
    const json* n = find(obj, "N");
    if (!n) fail("N", "required");
    N = as_int(*n, "N");
    if (N < 1) fail("N", "must be at least 1");
    if (const json* v = find(obj, "M")) {
        M = as_int(*v, "M");
        if (*M % 2 != 0 || *M < 4 * N + 2)
            fail("M", "must be even and at least 4N + 2");
    }
    if (const json* v = find(obj, "cutoff")) cutoff = parse_cutoff(*v, "cutoff");
}

json parse_document(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail("config", e.what());
    }
    if (!doc.is_object()) fail("config", "expected a JSON object");
    return doc;
}

ordered_json init_to_json(const InitialCondition& init) {
    ordered_json v;
    std::visit(
        [&](const auto& i) {
            using T = std::decay_t<decltype(i)>;
            if constexpr (std::is_same_v<T, RandomBandlimited>) {
                v["kind"] = "random";
                v["seed"] = i.seed;
                v["amplitude"] = i.amplitude;
                v["band"] = i.band;
            } else if constexpr (std::is_same_v<T, SingleMode>) {
                v["kind"] = "single-mode";
                v["mode"] = i.mode;
                v["amplitude"] = i.amplitude;
            } else if constexpr (std::is_same_v<T, TwoMode>) {
                v["kind"] = "two-mode";
                v["mode"] = i.mode;
                v["amplitude"] = i.amplitude;
                v["mode2"] = i.mode2;
                v["amplitude2"] = i.amplitude2;
            } else {
                v["kind"] = "smooth-exp";
                v["kappa"] = i.kappa;
                v["amplitude"] = i.amplitude;
            }
        },
        init);
    return v;
}

constexpr char kSnapshotMagic[4] = {'P', 'F', 'L', 'D'};
constexpr std::uint32_t kSnapshotVersion = 1;
constexpr std::size_t kSnapshotHeaderSize = 21;

template <class T>
void append_le(std::string& out, T value) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(bytes.begin(), bytes.end());
    out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <class T>
T read_le(const std::string& data, std::size_t offset) {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), data.data() + offset, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

std::filesystem::path snapshot_path(const std::filesystem::path& dir, long step) {
    char name[40];
    std::snprintf(name, sizeof name, "snapshot_%06ld.pfld", step);
    return dir / name;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("short write to " + path.string());
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    const json doc = parse_document(json_text);
    reject_unknown(doc, "",
                   {"model", "nu", "nonlinearity", "N", "M", "cutoff", "tau", "steps",
                    "stabilization", "s_op", "init", "snapshot_every",
                    "enforce_mean_zero", "out_dir"});
    RunConfig config;
    config.model = parse_model_fields(doc);
    parse_grid_fields(doc, config.N, config.M, config.cutoff);
    const json* tau = find(doc, "tau");
    if (!tau) fail("tau", "required");
    config.tau = as_number(*tau, "tau");
    if (!(config.tau > 0.0)) fail("tau", "must be positive");
    const json* steps = find(doc, "steps");
    if (!steps) fail("steps", "required");
    config.steps = as_integer(*steps, "steps");
    if (config.steps < 1) fail("steps", "must be at least 1");
    parse_stabilization(doc, config.beta, config.A);
    config.s_op = parse_s_op(doc);
    config.init = parse_init(doc);
    if (const json* v = find(doc, "snapshot_every")) {
        config.snapshot_every = as_integer(*v, "snapshot_every");
        if (config.snapshot_every < 0) fail("snapshot_every", "must be nonnegative");
    }
    if (const json* v = find(doc, "enforce_mean_zero"))
        config.enforce_mean_zero = as_bool(*v, "enforce_mean_zero");
    if (const json* v = find(doc, "out_dir")) config.out_dir = as_string(*v, "out_dir");
    return config;
}

ConvergeConfig parse_converge_config(const std::string& json_text) {
    const json doc = parse_document(json_text);
    reject_unknown(doc, "",
                   {"model", "nu", "nonlinearity", "mode", "t_final", "taus", "N",
                    "resolutions", "tau", "cutoff", "stabilization", "s_op", "init",
                    "out_dir"});
    ConvergeConfig config;
    config.model = parse_model_fields(doc);
    const json* mode = find(doc, "mode");
    if (!mode) fail("mode", "required");
    const std::string mode_name = as_string(*mode, "mode");
    if (mode_name == "temporal")
        config.mode = ConvergeConfig::Mode::Temporal;
    else if (mode_name == "spatial")
        config.mode = ConvergeConfig::Mode::Spatial;
    else
        fail("mode", "expected \"temporal\" or \"spatial\"");
    const json* t_final = find(doc, "t_final");
    if (!t_final) fail("t_final", "required");
    config.t_final = as_number(*t_final, "t_final");
    if (!(config.t_final > 0.0)) fail("t_final", "must be positive");
    if (const json* v = find(doc, "cutoff")) config.cutoff = parse_cutoff(*v, "cutoff");
    parse_stabilization(doc, config.beta, config.A);
    config.s_op = parse_s_op(doc);
    config.init = parse_init(doc);
    if (const json* v = find(doc, "out_dir")) config.out_dir = as_string(*v, "out_dir");

    if (config.mode == ConvergeConfig::Mode::Temporal) {
        const json* taus = find(doc, "taus");
        if (!taus) fail("taus", "required for temporal mode");
        config.taus = as_number_array(*taus, "taus");
        for (std::size_t i = 0; i < config.taus.size(); ++i) {
            if (!(config.taus[i] > 0.0)) fail("taus", "entries must be positive");
            if (i > 0 && !(config.taus[i] < config.taus[i - 1]))
                fail("taus", "entries must be strictly decreasing");
        }
        const json* n = find(doc, "N");
        if (!n) fail("N", "required for temporal mode");
        config.N = as_int(*n, "N");
        if (config.N < 1) fail("N", "must be at least 1");
    } else {
        const json* res = find(doc, "resolutions");
        if (!res) fail("resolutions", "required for spatial mode");
        if (!res->is_array() || res->empty())
            fail("resolutions", "expected a nonempty array of integers");
        for (const json& item : *res) {
            const int value = as_int(item, "resolutions");
            if (value < 1) fail("resolutions", "entries must be at least 1");
            if (!config.resolutions.empty() && value <= config.resolutions.back())
                fail("resolutions", "entries must be strictly increasing");
            config.resolutions.push_back(value);
        }
        const json* tau = find(doc, "tau");
        if (!tau) fail("tau", "required for spatial mode");
        config.tau = as_number(*tau, "tau");
        if (!(config.tau > 0.0)) fail("tau", "must be positive");
    }
    return config;
}

ScanConfig parse_scan_config(const std::string& json_text) {
    const json doc = parse_document(json_text);
    reject_unknown(doc, "",
                   {"model", "nu", "nonlinearity", "N", "M", "cutoff", "taus",
                    "values", "parameter", "s_op", "steps", "init", "out_dir"});
    ScanConfig config;
    config.model = parse_model_fields(doc);
    parse_grid_fields(doc, config.N, config.M, config.cutoff);
    const json* taus = find(doc, "taus");
    if (!taus) fail("taus", "required");
    config.taus = as_number_array(*taus, "taus");
    for (double tau : config.taus)
        if (!(tau > 0.0)) fail("taus", "entries must be positive");
    const json* values = find(doc, "values");
    if (!values) fail("values", "required");
    config.values = as_number_array(*values, "values");
    if (const json* v = find(doc, "parameter")) {
        const std::string s = as_string(*v, "parameter");
        if (s == "beta")
            config.parameter = ScanParameter::Beta;
        else if (s == "A")
            config.parameter = ScanParameter::DirectA;
        else
            fail("parameter", "expected \"beta\" or \"A\"");
    }
    config.s_op = parse_s_op(doc);
    if (const json* v = find(doc, "steps")) {
        config.steps = as_integer(*v, "steps");
        if (config.steps < 1) fail("steps", "must be at least 1");
    }
    config.init = parse_init(doc);
    if (const json* v = find(doc, "out_dir")) config.out_dir = as_string(*v, "out_dir");
    return config;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return std::move(buffer).str();
}

std::string apply_override(const std::string& json_text, const std::string& key,
                           const std::string& value) {
    json doc = parse_document(json_text);
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;
    json* node = &doc;
    std::string::size_type start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part =
            key.substr(start, dot == std::string::npos ? std::string::npos
                                                       : dot - start);
        if (part.empty()) fail(key, "empty override path segment");
        if (dot == std::string::npos) {
            (*node)[part] = std::move(parsed);
            break;
        }
        json& child = (*node)[part];
        if (child.is_null()) child = json::object();
        if (!child.is_object()) fail(key, "override path crosses a non-object value");
        node = &child;
        start = dot + 1;
    }
    return doc.dump();
}

std::string format_double(double value) {
    std::array<char, 32> buffer;
    const auto result =
        std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
    return std::string(buffer.data(), result.ptr);
}

void write_energy_csv(std::ostream& out, const RunRecord& record) {
    out << "step,time,energy,mass,linf,diff_l2,residual,lemma_margin\n";
    out << "0,0," << format_double(record.initial_energy) << ','
        << format_double(record.initial_mass) << ','
        << format_double(record.initial_linf) << ",0,0,nan\n";
    for (const RunRow& row : record.rows) {
        out << row.step << ',' << format_double(row.time) << ','
            << format_double(row.energy) << ',' << format_double(row.mass) << ','
            << format_double(row.linf) << ',' << format_double(row.diff_l2) << ','
            << format_double(row.residual) << ','
            << format_double(row.lemma_margin) << '\n';
    }
}

void write_scan_csv(std::ostream& out, std::span<const ScanCell> cells) {
    out << "tau,A,monotone,first_violation_step,final_energy\n";
    for (const ScanCell& cell : cells) {
        out << format_double(cell.tau) << ',' << format_double(cell.A) << ','
            << (cell.monotone ? 1 : 0) << ',' << cell.first_violation_step << ','
            << format_double(cell.final_energy) << '\n';
    }
}

void write_temporal_csv(std::ostream& out, const RateEstimate& estimate) {
    out << "resolution,error\n";
    for (const RatePoint& p : estimate.points)
        out << format_double(p.resolution) << ',' << format_double(p.error) << '\n';
    if (std::isfinite(estimate.fitted_order))
        out << "# fitted_order," << format_double(estimate.fitted_order)
            << ",r_squared," << format_double(estimate.r_squared) << '\n';
    else
        out << "# fitted_order,n/a,r_squared,n/a\n";
}

void write_spatial_csv(std::ostream& out, const SpatialResult& result) {
    out << "resolution,error\n";
    for (const SpatialPoint& p : result.points)
        out << p.resolution << ',' << format_double(p.error) << '\n';
    std::vector<RatePoint> points;
    points.reserve(result.points.size());
    bool fittable = result.points.size() >= 3;
    for (const SpatialPoint& p : result.points) {
        if (!(p.error > 0.0)) fittable = false;
        points.push_back({static_cast<double>(p.resolution), p.error});
    }
    if (fittable) {
        const RateEstimate estimate = fit_rate(points);
        out << "# fitted_order," << format_double(estimate.fitted_order)
            << ",r_squared," << format_double(estimate.r_squared) << '\n';
    } else {
        out << "# fitted_order,n/a,r_squared,n/a\n";
    }
    out << "# observed_orders";
    for (double order : result.observed_orders) out << ',' << format_double(order);
    out << '\n';
    out << "# superalgebraic," << (result.superalgebraic ? 1 : 0) << '\n';
}

std::string params_json(const RunConfig& config, const RunRecord& record) {
    ordered_json doc;
    doc["model"] = record.params.model == ModelKind::CahnHilliard ? "ch" : "mbe";
    doc["nu"] = record.params.nu;
    doc["nonlinearity"] =
        config.model.nonlinearity == Nonlinearity::Full ? "full" : "none";
    doc["N"] = record.params.N;
    doc["M"] = record.params.M;
    doc["cutoff"] =
        record.params.cutoff == Cutoff::EuclideanBall ? "ball" : "square";
    doc["tau"] = record.params.tau;
    doc["steps"] = config.steps;
    doc["s_op"] = record.params.s_op;
    ordered_json stabilization;
    stabilization["A"] = record.params.A;
    if (record.params.beta)
        stabilization["beta"] = *record.params.beta;
    else
        stabilization["beta"] = nullptr;
    doc["stabilization"] = stabilization;
    doc["init"] = init_to_json(config.init);
    doc["enforce_mean_zero"] = config.enforce_mean_zero;
    doc["snapshot_every"] = config.snapshot_every;
    doc["initial_energy"] = record.initial_energy;
    doc["initial_mass"] = record.initial_mass;
    doc["initial_linf"] = record.initial_linf;
    doc["steps_completed"] = static_cast<long>(record.rows.size());
    doc["diverged"] = record.diverged;
    doc["divergence_step"] = record.divergence_step;
    return doc.dump(2) + "\n";
}

void write_snapshot(const std::filesystem::path& path, const PhysicalField& field,
                    double time, ModelKind model) {
    const GridSpec& grid = field.grid();
    std::string payload;
    payload.reserve(kSnapshotHeaderSize + sizeof(double) * field.values().size());
    payload.append(kSnapshotMagic, 4);
    append_le(payload, kSnapshotVersion);
    append_le(payload, static_cast<std::uint32_t>(grid.M));
    append_le(payload, time);
    payload.push_back(
        static_cast<char>(model == ModelKind::CahnHilliard ? 0 : 1));
    for (double v : field.values()) append_le(payload, v);
    write_text(path, payload);
}

Snapshot read_snapshot(const std::filesystem::path& path) {
    const std::string data = read_text_file(path);
    if (data.size() < 4) throw FormatError("truncated header", data.size());
    if (std::memcmp(data.data(), kSnapshotMagic, 4) != 0)
        throw FormatError("bad magic", 0);
    if (data.size() < 8) throw FormatError("truncated header", data.size());
    const auto version = read_le<std::uint32_t>(data, 4);
    if (version != kSnapshotVersion)
        throw FormatError("unsupported version " + std::to_string(version), 4);
    if (data.size() < 12) throw FormatError("truncated header", data.size());
    const auto m_raw = read_le<std::uint32_t>(data, 8);
    if (m_raw < 6 || m_raw % 2 != 0 || m_raw > (1u << 20))
        throw FormatError("physical size " + std::to_string(m_raw) + " out of range",
                          8);
    const int M = static_cast<int>(m_raw);
    if (data.size() < 20) throw FormatError("truncated header", data.size());
    const double time = read_le<double>(data, 12);
    if (data.size() < kSnapshotHeaderSize)
        throw FormatError("truncated header", data.size());
    const auto tag = static_cast<unsigned char>(data[20]);
    if (tag > 1)
        throw FormatError("unknown model tag " + std::to_string(int{tag}), 20);

    const std::size_t expected =
        kSnapshotHeaderSize +
        sizeof(double) * static_cast<std::size_t>(M) * static_cast<std::size_t>(M);
    if (data.size() < expected)
        throw FormatError("truncated point data", data.size());
    if (data.size() > expected) throw FormatError("trailing bytes", expected);

    Snapshot snapshot{PhysicalField(GridSpec::make((M - 2) / 4, M)), time,
                      tag == 0 ? ModelKind::CahnHilliard : ModelKind::Mbe};
    std::span<double> values = snapshot.field.values();
    for (std::size_t i = 0; i < values.size(); ++i)
        values[i] = read_le<double>(data, kSnapshotHeaderSize + sizeof(double) * i);
    return snapshot;
}

int cmd_run(const RunConfig& config) {
    const GridSpec grid = config.M
                              ? GridSpec::make(config.N, *config.M, config.cutoff)
                              : GridSpec::make(config.N, config.cutoff);
    const SpectralField u0 = make_initial(config.init, grid);
    const StabilizationPlan plan =
        config.A ? StabilizationPlan::direct(*config.A, config.s_op)
                 : StabilizationPlan::resolve(config.model, u0,
                                              config.beta.value_or(1.0), config.s_op);

    std::filesystem::create_directories(config.out_dir);
    const bool margins = plan.s_op == 1.0;
    RunHooks hooks;
    hooks.on_step = [&](const StepperState&, const StepperState& next,
                        StepDiagnostics& diagnostics) {
        if (margins)
            diagnostics.lemma_margin = step_margin_from_diagnostics(
                config.model.kind, diagnostics, config.model.nu, next.tau, plan.A);
        if (config.snapshot_every > 0 && next.step % config.snapshot_every == 0)
            write_snapshot(snapshot_path(config.out_dir, next.step),
                           to_physical(next.field), next.time, config.model.kind);
    };

    RunRecord record = run(u0, config.model, plan, config.tau, config.steps, hooks,
                           StepOptions{config.enforce_mean_zero});
    if (const auto* random = std::get_if<RandomBandlimited>(&config.init))
        record.params.seed = random->seed;

    {
        std::ostringstream csv;
        write_energy_csv(csv, record);
        write_text(config.out_dir / "energy.csv", std::move(csv).str());
    }
    write_text(config.out_dir / "params.json", params_json(config, record));

    if (record.diverged) {
        std::cerr << "run diverged at step " << record.divergence_step << " ("
                  << record.rows.size() << " steps recorded)\n";
        return 3;
    }
    const RunRow& last = record.rows.back();
    std::cout << "completed " << last.step << " steps: energy "
              << format_double(last.energy) << ", mass "
              << format_double(last.mass) << "\n";
    return 0;
}

int cmd_converge(const ConvergeConfig& config) {
    std::optional<StabilizationPlan> plan;
    if (config.A)
        plan = StabilizationPlan::direct(*config.A, config.s_op);
    else if (config.s_op != 1.0)
        fail("s_op", "s_op = 2 needs a direct A for convergence studies");

    std::filesystem::create_directories(config.out_dir);
    std::ostringstream csv;
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
        write_temporal_csv(csv, estimate);
        if (std::isfinite(estimate.fitted_order))
            std::cout << "fitted order " << format_double(estimate.fitted_order)
                      << " (r^2 " << format_double(estimate.r_squared) << ")\n";
        else
            std::cout << "fitted order n/a (needs at least 3 step sizes)\n";
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
        write_spatial_csv(csv, result);
        std::cout << (result.superalgebraic
                          ? "superalgebraic decay\n"
                          : "no superalgebraic decay detected\n");
    }
    write_text(config.out_dir / "converge.csv", std::move(csv).str());
    return 0;
}

int cmd_stability_scan(const ScanConfig& config) {
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
    const std::vector<ScanCell> cells = stability_scan(request);

    std::filesystem::create_directories(config.out_dir);
    {
        std::ostringstream csv;
        write_scan_csv(csv, cells);
        write_text(config.out_dir / "scan.csv", std::move(csv).str());
    }

    for (double tau : config.taus) {
        const auto cell = minimal_stable_cell(cells, tau);
        std::cout << "tau " << format_double(tau) << ": ";
        if (cell)
            std::cout << "stable from "
                      << (config.parameter == ScanParameter::Beta ? "beta " : "A ")
                      << format_double(cell->value) << " (A "
                      << format_double(cell->A) << ")\n";
        else
            std::cout << "no stable value scanned\n";
    }
    return 0;
}

}  // namespace phasefield
