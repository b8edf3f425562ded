// experiment.hpp: configuration and runners behind the holoq command line tool
//
// Needs nlohmann/json (vendor/json.hpp) on the include path in addition to the
// core library.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "holoq/holoq.hpp"

namespace holoq::cli {

using json = nlohmann::json;

inline json default_config() {
    std::vector<double> T_grid;
    for (int i = 1; i <= 20; ++i) T_grid.push_back(5.0 * i);
    return json{
        {"model", {{"name", "spin_half"}, {"B", 1.0}, {"theta", std::numbers::pi / 3.0}, {"mu", 1.0}}},
        {"n_grid", 1024},
        {"cluster_tol", nullptr},
        {"scheme", "extrapolated"},
        {"phase",
         {{"channels", {"dephasing", "spontaneous_emission", "bit_flip"}},
          {"beta_grid", {0.0, 0.05, 0.10, 0.15, 0.20, 0.25}},
          {"blocks", "coherence"}}},
        {"crossover", {{"channel", "dephasing"}, {"beta", 0.1}, {"B_values", {1.0, 2.0}}, {"T_grid", T_grid}}},
        {"verify",
         {{"channels", {"dephasing", "spontaneous_emission", "bit_flip"}},
          {"beta", 0.1},
          {"points", 32},
          {"gauges", 20},
          {"seed", 20240601},
          {"inject_perturbation", 0.0}}},
        {"output", {{"dir", "."}, {"formats", {"csv"}}}},
    };
}

struct ExperimentConfig {
    std::string model{"spin_half"}; // or "static_spin_half" (field frozen at s = 0)
    double B{1.0};
    double theta{std::numbers::pi / 3.0};
    double mu{1.0};
    std::size_t n_grid{1024};
    std::optional<double> cluster_tol;
    PhaseScheme scheme{PhaseScheme::extrapolated};

    std::vector<Channel> phase_channels;
    std::vector<double> beta_grid;
    bool all_blocks{false};

    Channel crossover_channel{Channel::dephasing};
    double crossover_beta{0.1};
    std::vector<double> B_values;
    std::vector<double> T_grid;

    std::vector<Channel> verify_channels;
    double verify_beta{0.1};
    std::size_t verify_points{32};
    std::size_t verify_gauges{20};
    std::uint64_t verify_seed{20240601};
    double inject_perturbation{0.0};

    std::string output_dir{"."};
    std::vector<std::string> formats{"csv"};
    unsigned threads{1};

    bool wants(const std::string& fmt) const {
        return std::find(formats.begin(), formats.end(), fmt) != formats.end();
    }
};

namespace detail {

// every key of `given` must exist in `reference` (objects are checked recursively)
inline void check_keys(const json& given, const json& reference, const std::string& prefix) {
    if (!given.is_object()) return;
    for (auto it = given.begin(); it != given.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!reference.contains(it.key())) throw config_error("unknown config key '" + key + "'");
        if (reference[it.key()].is_object()) {
            if (!it.value().is_object()) throw config_error("config key '" + key + "' must be an object");
            check_keys(it.value(), reference[it.key()], key);
        }
    }
}

inline const json& at_path(const json& j, const std::string& path) {
    const json* cur = &j;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (!cur->is_object() || !cur->contains(part)) throw config_error("missing config key '" + path + "'");
        cur = &(*cur)[part];
    }
    return *cur;
}

inline double number(const json& j, const std::string& path) {
    const json& v = at_path(j, path);
    if (!v.is_number()) throw config_error("config key '" + path + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw config_error("config key '" + path + "' must be finite");
    return x;
}

inline std::size_t count(const json& j, const std::string& path, std::size_t min) {
    const json& v = at_path(j, path);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw config_error("config key '" + path + "' must be a nonnegative integer");
    const auto n = v.get<std::size_t>();
    if (n < min) throw config_error("config key '" + path + "' must be at least " + std::to_string(min));
    return n;
}

inline std::string text(const json& j, const std::string& path) {
    const json& v = at_path(j, path);
    if (!v.is_string()) throw config_error("config key '" + path + "' must be a string");
    return v.get<std::string>();
}

inline std::vector<double> numbers(const json& j, const std::string& path) {
    const json& v = at_path(j, path);
    if (!v.is_array() || v.empty()) throw config_error("config key '" + path + "' must be a nonempty array");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number() || !std::isfinite(x.get<double>()))
            throw config_error("config key '" + path + "' must hold finite numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

inline std::vector<std::string> texts(const json& j, const std::string& path) {
    const json& v = at_path(j, path);
    if (!v.is_array() || v.empty()) throw config_error("config key '" + path + "' must be a nonempty array");
    std::vector<std::string> out;
    for (const auto& x : v) {
        if (!x.is_string()) throw config_error("config key '" + path + "' must hold strings");
        out.push_back(x.get<std::string>());
    }
    return out;
}

inline Channel channel(const std::string& name, const std::string& path) {
    try {
        return channel_from_string(name);
    } catch (const model_error&) {
        throw config_error("config key '" + path + "': unknown channel '" + name + "'");
    }
}

inline std::vector<Channel> channels(const json& j, const std::string& path) {
    std::vector<Channel> out;
    for (const auto& s : texts(j, path)) out.push_back(channel(s, path));
    return out;
}

} // namespace detail

// HOLOQ_THREADS caps the worker count; unset means the hardware concurrency.
inline unsigned threads_from_env() {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const char* env = std::getenv("HOLOQ_THREADS");
    if (!env || !*env) return hw;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1 || v > 4096) throw config_error(std::string("HOLOQ_THREADS must be a positive integer, got '") + env + "'");
    return unsigned(v);
}

inline json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw config_error("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

// key=value with a dotted key; the value is read as JSON when it parses, as a string otherwise
inline void apply_override(json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw config_error("--set expects key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    const json ref = default_config();
    json* cur = &cfg;
    const json* rcur = &ref;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].empty() || !rcur->is_object() || !rcur->contains(parts[i]))
            throw config_error("unknown config key '" + key + "'");
        rcur = &(*rcur)[parts[i]];
        if (i + 1 == parts.size()) {
            (*cur)[parts[i]] = value;
        } else {
            if (!cur->contains(parts[i]) || !(*cur)[parts[i]].is_object()) (*cur)[parts[i]] = json::object();
            cur = &(*cur)[parts[i]];
        }
    }
}

inline ExperimentConfig parse_config(const json& given) {
    if (!given.is_object()) throw config_error("config must be a JSON object");
    const json ref = default_config();
    detail::check_keys(given, ref, "");
    json j = ref;
    j.merge_patch(given); // a null leaf removes the key; handled as "unset" below

    ExperimentConfig c;
    c.model = j["model"].contains("name") ? detail::text(j, "model.name") : "spin_half";
    if (c.model != "spin_half" && c.model != "static_spin_half")
        throw config_error("model.name must be 'spin_half' or 'static_spin_half'");
    c.B = detail::number(j, "model.B");
    c.theta = detail::number(j, "model.theta");
    c.mu = detail::number(j, "model.mu");
    if (!(c.B > 0.0)) throw config_error("model.B must be positive");
    if (!(c.theta > 0.0 && c.theta < std::numbers::pi)) throw config_error("model.theta must lie in (0, pi)");
    if (c.mu == 0.0) throw config_error("model.mu must be nonzero");
    c.n_grid = detail::count(j, "n_grid", min_path_intervals);

    if (j.contains("cluster_tol") && !j["cluster_tol"].is_null()) {
        c.cluster_tol = detail::number(j, "cluster_tol");
        if (!(*c.cluster_tol > 0.0)) throw config_error("cluster_tol must be positive");
    }
    const std::string scheme = detail::text(j, "scheme");
    if (scheme == "product") c.scheme = PhaseScheme::product;
    else if (scheme == "symmetric") c.scheme = PhaseScheme::symmetric;
    else if (scheme == "extrapolated") c.scheme = PhaseScheme::extrapolated;
    else throw config_error("scheme must be product, symmetric or extrapolated");

    c.phase_channels = detail::channels(j, "phase.channels");
    c.beta_grid = detail::numbers(j, "phase.beta_grid");
    const std::string blocks = detail::text(j, "phase.blocks");
    if (blocks != "coherence" && blocks != "all") throw config_error("phase.blocks must be 'coherence' or 'all'");
    c.all_blocks = blocks == "all";

    c.crossover_channel = detail::channel(detail::text(j, "crossover.channel"), "crossover.channel");
    c.crossover_beta = detail::number(j, "crossover.beta");
    c.B_values = detail::numbers(j, "crossover.B_values");
    c.T_grid = detail::numbers(j, "crossover.T_grid");
    for (double b : c.B_values)
        if (!(b > 0.0)) throw config_error("crossover.B_values must be positive");
    for (double T : c.T_grid)
        if (!(T > 0.0)) throw config_error("crossover.T_grid must be positive");

    c.verify_channels = detail::channels(j, "verify.channels");
    c.verify_beta = detail::number(j, "verify.beta");
    c.verify_points = detail::count(j, "verify.points", min_path_intervals);
    c.verify_gauges = detail::count(j, "verify.gauges", 1);
    c.verify_seed = detail::count(j, "verify.seed", 0);
    c.inject_perturbation = detail::number(j, "verify.inject_perturbation");

    for (double b : c.beta_grid)
        if (b < 0.0) throw config_error("phase.beta_grid must be nonnegative");
    if (c.crossover_beta < 0.0 || c.verify_beta < 0.0) throw config_error("channel strengths must be nonnegative");

    c.output_dir = detail::text(j, "output.dir");
    c.formats = detail::texts(j, "output.formats");
    for (const auto& f : c.formats)
        if (f != "csv" && f != "json" && f != "svg") throw config_error("unknown output format '" + f + "'");
    return c;
}

// ---------------------------------------------------------------- models

inline SpinHalfModel spin_model(const ExperimentConfig& c, Channel ch, double beta, double B) {
    SpinHalfModel m;
    m.B = B;
    m.theta = c.theta;
    m.mu = c.mu;
    m.channel = ch;
    m.beta = beta;
    return m;
}

inline ParameterPath spin_path(const ExperimentConfig& c, const SpinHalfModel& m, std::size_t n) {
    const ParameterPath p = m.path(n);
    if (c.model == "static_spin_half") {
        const Eigen::VectorXd b0 = p.at(0.0);
        return make_path([b0](double) { return b0; }, n, true);
    }
    return p;
}

// ---------------------------------------------------------------- formatting

inline std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(17) << x;
    return os.str();
}

// RFC 4180 field quoting
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

inline void csv_row(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os << ',';
        os << csv_field(fields[i]);
    }
    os << "\r\n";
}

struct Series {
    std::string name;
    std::vector<double> x, y;
};

// Minimal static line plot: frame, tick labels at the ends, one polyline per series.
inline std::string svg_plot(const std::vector<Series>& series, const std::string& xlabel, const std::string& ylabel) {
    constexpr double W = 640, H = 420, L = 70, R = 170, Tm = 20, Bm = 50;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    const auto py = [&](double y) { return H - Bm - (y - y0) / (y1 - y0) * (H - Tm - Bm); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - Bm << "\" x2=\"" << W - R << "\" y2=\"" << H - Bm
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << Tm << "\" x2=\"" << L << "\" y2=\"" << H - Bm << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << L << "\" y=\"" << H - Bm + 16 << "\" font-size=\"11\">" << x0 << "</text>\n";
    os << "<text x=\"" << W - R << "\" y=\"" << H - Bm + 16 << "\" font-size=\"11\" text-anchor=\"end\">" << x1
       << "</text>\n";
    os << "<text x=\"" << L - 4 << "\" y=\"" << H - Bm << "\" font-size=\"11\" text-anchor=\"end\">" << y0
       << "</text>\n";
    os << "<text x=\"" << L - 4 << "\" y=\"" << Tm + 10 << "\" font-size=\"11\" text-anchor=\"end\">" << y1
       << "</text>\n";
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" font-size=\"13\" text-anchor=\"middle\">"
       << xlabel << "</text>\n";
    os << "<text x=\"16\" y=\"" << (Tm + H - Bm) / 2 << "\" font-size=\"13\" transform=\"rotate(-90 16 "
       << (Tm + H - Bm) / 2 << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* col = colors[k % 6];
        os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[k].x.size(); ++i) {
            if (!std::isfinite(series[k].y[i])) continue;
            os << px(series[k].x[i]) << ',' << py(series[k].y[i]) << ' ';
        }
        os << "\"/>\n";
        os << "<text x=\"" << W - R + 10 << "\" y=\"" << Tm + 16 * (k + 1) << "\" font-size=\"12\" fill=\"" << col
           << "\">" << series[k].name << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

// ---------------------------------------------------------------- phase

struct PhaseRow {
    Channel channel{Channel::none};
    double beta{0.0};
    int block_id{0};
    cplx eigenvalue;
    AbelianPhase phase;
};

// Block with the largest Im lambda at s_0: the off-diagonal coherence of the
// ground and excited levels.
inline std::size_t coherence_block(const std::vector<SmoothBlockTrack>& tracks) {
    std::size_t best = 0;
    for (std::size_t b = 1; b < tracks.size(); ++b)
        if (tracks[b].eigenvalue[0].imag() > tracks[best].eigenvalue[0].imag()) best = b;
    return best;
}

inline std::vector<PhaseRow> run_phase(const ExperimentConfig& c) {
    struct job {
        Channel ch;
        double beta;
    };
    std::vector<job> jobs;
    for (Channel ch : c.phase_channels)
        for (double b : c.beta_grid) jobs.push_back({ch, b});
    std::vector<std::vector<PhaseRow>> out(jobs.size());
    parallel_for(jobs.size(), c.threads, [&](std::size_t i) {
        const SpinHalfModel m = spin_model(c, jobs[i].ch, jobs[i].beta, c.B);
        const auto samples = sample_family(spin_path(c, m, c.n_grid), m);
        const auto tracks = track_blocks(samples, c.cluster_tol);
        std::vector<std::size_t> pick;
        if (c.all_blocks) {
            // degenerate sets carry a holonomy matrix, not an Abelian phase
            for (std::size_t b = 0; b < tracks.size(); ++b)
                if (tracks[b].degeneracy == 1) pick.push_back(b);
        } else {
            pick.push_back(coherence_block(tracks));
        }
        for (std::size_t b : pick)
            out[i].push_back({jobs[i].ch, jobs[i].beta, tracks[b].label, tracks[b].eigenvalue[0],
                              abelian_phase(tracks[b], c.scheme)});
    });
    std::vector<PhaseRow> rows;
    for (auto& v : out) rows.insert(rows.end(), v.begin(), v.end());
    return rows;
}

inline void write_phase_csv(std::ostream& os, const std::vector<PhaseRow>& rows) {
    csv_row(os, {"channel", "beta", "block_id", "re_gamma", "im_gamma", "re_gamma_mod_2pi", "n_grid", "cluster_tol"});
    for (const auto& r : rows)
        csv_row(os, {to_string(r.channel), fmt(r.beta), std::to_string(r.block_id), fmt(r.phase.gamma.real()),
                     fmt(r.phase.gamma.imag()), fmt(r.phase.re_mod_2pi), std::to_string(r.phase.n_grid),
                     fmt(r.phase.cluster_tol)});
}

inline json phase_json(const std::vector<PhaseRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"channel", to_string(r.channel)},
                       {"beta", r.beta},
                       {"block_id", r.block_id},
                       {"eigenvalue", {r.eigenvalue.real(), r.eigenvalue.imag()}},
                       {"re_gamma", r.phase.gamma.real()},
                       {"im_gamma", r.phase.gamma.imag()},
                       {"re_gamma_mod_2pi", r.phase.re_mod_2pi},
                       {"n_grid", r.phase.n_grid},
                       {"cluster_tol", r.phase.cluster_tol},
                       {"scheme", to_string(r.phase.scheme)}});
    return json{{"rows", arr}};
}

inline std::string phase_svg(const std::vector<PhaseRow>& rows) {
    std::vector<Series> series;
    for (const auto& r : rows) {
        const std::string name = std::string(to_string(r.channel)) + " #" + std::to_string(r.block_id);
        auto it = std::find_if(series.begin(), series.end(), [&](const Series& s) { return s.name == name; });
        if (it == series.end()) {
            series.push_back({name, {}, {}});
            it = series.end() - 1;
        }
        it->x.push_back(r.beta);
        it->y.push_back(r.phase.gamma.real() / std::numbers::pi);
    }
    return svg_plot(series, "beta", "Re gamma / pi");
}

// ---------------------------------------------------------------- crossover

struct CrossoverRun {
    double B{1.0};
    CrossoverReport report;
};

inline std::vector<CrossoverRun> run_crossover(const ExperimentConfig& c) {
    std::vector<CrossoverRun> out(c.B_values.size());
    parallel_for(out.size(), c.threads, [&](std::size_t i) {
        const SpinHalfModel m = spin_model(c, c.crossover_channel, c.crossover_beta, c.B_values[i]);
        AdiabaticOptions opt;
        opt.cluster_tol = c.cluster_tol;
        opt.scheme = c.scheme;
        out[i].B = c.B_values[i];
        out[i].report = max_ratio_curve(m, spin_path(c, m, c.n_grid), c.T_grid, m.equal_superposition(), opt);
    });
    for (const auto& r : out)
        if (r.report.block_labels != out.front().report.block_labels)
            throw structure_change_error("crossover: block structure differs between field magnitudes", 0.0);
    return out;
}

inline void write_crossover_csv(std::ostream& os, const std::vector<CrossoverRun>& runs) {
    std::vector<std::string> head{"B", "T", "max_ratio"};
    for (int l : runs.front().report.block_labels) head.push_back("tc_block_" + std::to_string(l));
    csv_row(os, head);
    for (const auto& r : runs)
        for (std::size_t i = 0; i < r.report.T.size(); ++i) {
            std::vector<std::string> row{fmt(r.B), fmt(r.report.T[i]), fmt(r.report.max_ratio[i])};
            for (double tc : r.report.crossover[i]) row.push_back(fmt(tc));
            csv_row(os, row);
        }
}

inline json crossover_json(const std::vector<CrossoverRun>& runs) {
    json arr = json::array();
    for (const auto& r : runs) {
        json ev = json::array();
        for (auto l : r.report.block_eigenvalues) ev.push_back({l.real(), l.imag()});
        arr.push_back({{"B", r.B},
                       {"T", r.report.T},
                       {"max_ratio", r.report.max_ratio},
                       {"crossover", r.report.crossover},
                       {"block_labels", r.report.block_labels},
                       {"block_eigenvalues", ev},
                       {"n_grid", r.report.n_grid},
                       {"cluster_tol", r.report.cluster_tol}});
    }
    return json{{"runs", arr}};
}

inline std::string crossover_svg(const std::vector<CrossoverRun>& runs) {
    std::vector<Series> series;
    for (const auto& r : runs) series.push_back({"B = " + fmt(r.B), r.report.T, r.report.max_ratio});
    return svg_plot(series, "T", "max T_c / T");
}

// ---------------------------------------------------------------- verify

struct Check {
    std::string name;
    std::string status; // "pass", "fail" or "expected-nonzero"
    double residual{0.0};
    double tolerance{0.0};
    std::string note;

    bool ok() const { return status != "fail"; }
};

namespace detail {

inline Check bound_check(std::string name, double residual, double tol, std::string note = {}) {
    return {std::move(name), residual <= tol ? "pass" : "fail", residual, tol, std::move(note)};
}

// deterministic dense perturbation of the left vectors
inline void perturb_left(JordanDecomposition& dec, double eps) {
    if (eps == 0.0) return;
    for (std::size_t b = 0; b < dec.blocks.size(); ++b)
        for (Eigen::Index i = 0; i < dec.blocks[b].left.rows(); ++i)
            for (Eigen::Index j = 0; j < dec.blocks[b].left.cols(); ++j)
                dec.blocks[b].left(i, j) += eps * std::cos(1.0 + double(b) + 0.7 * double(i) + 0.3 * double(j));
}

// spectral projector of each cluster, in cluster order
inline std::vector<Eigen::MatrixXcd> cluster_projectors(const JordanDecomposition& dec) {
    std::vector<Eigen::MatrixXcd> P(std::size_t(dec.cluster_count),
                                    Eigen::MatrixXcd::Zero(dec.size, dec.size));
    for (const auto& b : dec.blocks) P[std::size_t(b.cluster)] += b.right * b.left;
    return P;
}

} // namespace detail

inline std::vector<Check> run_verify(const ExperimentConfig& c) {
    std::vector<Check> checks;
    const OperatorBasis basis = make_basis(2);
    {
        double dev = 0.0;
        for (int i = 0; i < basis.size(); ++i)
            for (int j = 0; j < basis.size(); ++j)
                dev = std::max(dev, std::abs(holoq::detail::hs_inner(basis.elements[std::size_t(i)], basis.elements[std::size_t(j)]) - (i == j ? 1.0 : 0.0)));
        checks.push_back(detail::bound_check("basis_orthonormality", dev, 1e-12));
    }

    for (Channel ch : c.verify_channels) {
        const std::string tag = to_string(ch);
        const SpinHalfModel m = spin_model(c, ch, c.verify_beta, c.B);
        const ParameterPath path = spin_path(c, m, c.verify_points);
        double bi = 0.0, comp = 0.0, chain = 0.0, comm = 0.0;
        for (std::size_t k = 0; k < c.verify_points; ++k) {
            const Eigen::VectorXd b = path.at(path.s(k));
            const Superoperator L = m(b);
            auto dec = decompose(L, c.cluster_tol);
            detail::perturb_left(dec, c.inject_perturbation);
            const auto rep = verify(dec, L);
            bi = std::max(bi, rep.biorthonormality);
            comp = std::max(comp, rep.completeness);
            chain = std::max(chain, rep.chain);
            const Eigen::MatrixXcd Hs = hamiltonian_superop(m.hamiltonian(b), *m.basis).matrix;
            const Eigen::MatrixXcd Rs = dissipator_superop(m.lindblad_ops(b), *m.basis).matrix;
            comm = std::max(comm, holoq::detail::max_abs(Hs * Rs - Rs * Hs));
        }
        checks.push_back(detail::bound_check("biorthonormality/" + tag, bi, 1e-10));
        checks.push_back(detail::bound_check("completeness/" + tag, comp, 1e-8));
        checks.push_back(detail::bound_check("chain_relations/" + tag, chain, 1e-8));
        if (ch == Channel::bit_flip) {
            checks.push_back({"commutator/" + tag, comm > 1e-6 ? "expected-nonzero" : "fail", comm, 1e-6,
                              "bit flip does not commute with the Hamiltonian superoperator"});
        } else {
            checks.push_back(detail::bound_check("commutator/" + tag, comm, 1e-10));
        }

        if ((ch == Channel::dephasing || ch == Channel::spontaneous_emission) && c.verify_beta > 0.0) {
            // spectral projectors do not depend on the channel strength
            double dev = 0.0;
            SpinHalfModel m2 = m;
            m2.beta = 2.0 * m.beta;
            for (std::size_t k = 0; k < c.verify_points; ++k) {
                const Eigen::VectorXd b = path.at(path.s(k));
                const auto P1 = detail::cluster_projectors(decompose(m(b), c.cluster_tol));
                const auto P2 = detail::cluster_projectors(decompose(m2(b), c.cluster_tol));
                if (P1.size() != P2.size()) {
                    dev = std::numeric_limits<double>::infinity();
                    break;
                }
                for (std::size_t q = 0; q < P1.size(); ++q) dev = std::max(dev, holoq::detail::max_abs(P1[q] - P2[q]));
            }
            checks.push_back(detail::bound_check("beta_independence/" + tag, dev, 1e-8));
        }
    }

    {
        // Abelian phase under random scalar gauges on the dephasing coherence block
        const SpinHalfModel m = spin_model(c, Channel::dephasing, c.verify_beta, c.B);
        const auto tracks = track_blocks(sample_family(spin_path(c, m, c.n_grid), m, c.threads), c.cluster_tol);
        const std::size_t a = coherence_block(tracks);
        const cplx g0 = abelian_phase(tracks[a], c.scheme).gamma;
        std::mt19937_64 rng(c.verify_seed);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        double dev = 0.0;
        const std::size_t N = tracks[a].intervals();
        for (std::size_t r = 0; r < c.verify_gauges; ++r) {
            const double amp = 0.5 * U(rng), ph0 = 3.0 * U(rng), wind = std::round(2.0 * U(rng));
            const double c1 = U(rng), c2 = U(rng);
            auto gauged = gauge_transform({tracks[a]}, [&](std::size_t k) {
                const double s = double(k % N) / double(N);
                const double arg = ph0 + 2.0 * std::numbers::pi * (wind * s + c1 * std::sin(2.0 * std::numbers::pi * s));
                const double mag = std::exp(amp * std::cos(2.0 * std::numbers::pi * s) + 0.2 * c2);
                Eigen::MatrixXcd w(1, 1);
                w(0, 0) = std::polar(mag, arg);
                return w;
            });
            const cplx g = abelian_phase(gauged[0], c.scheme).gamma;
            dev = std::max(dev, std::max(angle_distance(g.real(), g0.real()), std::abs(g.imag() - g0.imag())));
        }
        checks.push_back(detail::bound_check("gauge_invariance/dephasing", dev, 1e-8));
    }

    {
        // beta = 0 coherence phase against the closed-system level phases
        const SpinHalfModel m = spin_model(c, Channel::none, 0.0, c.B);
        const ParameterPath path = spin_path(c, m, c.n_grid);
        const auto tracks = track_blocks(sample_family(path, m, c.threads), c.cluster_tol);
        const cplx g = abelian_phase(tracks[coherence_block(tracks)], c.scheme).gamma;
        const auto cl = closed_limit_phase([&m](const Eigen::VectorXd& b) { return m.hamiltonian(b); }, path,
                                           c.scheme);
        const double expect = cl.phases[0] - cl.phases[1];
        const double dev = std::max(angle_distance(g.real(), expect), std::abs(g.imag()));
        checks.push_back(detail::bound_check("closed_limit", dev, 1e-6, "gamma_ground - gamma_excited"));
    }
    return checks;
}

inline json verify_json(const std::vector<Check>& checks) {
    json arr = json::array();
    bool all = true;
    for (const auto& ch : checks) {
        all = all && ch.ok();
        json e{{"name", ch.name}, {"status", ch.status}, {"residual", ch.residual}, {"tolerance", ch.tolerance}};
        if (!ch.note.empty()) e["note"] = ch.note;
        arr.push_back(e);
    }
    return json{{"passed", all}, {"checks", arr}};
}

} // namespace holoq::cli
