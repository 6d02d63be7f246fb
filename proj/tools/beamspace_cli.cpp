// SPDX-License-Identifier: Apache-2.0
// Command-line front end: dataset generation, capacity bounds, EADoF tables,
// discretization convergence, feed/load optimization and exports.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <beamspace/beamspace.hpp>

#ifndef BEAMSPACE_VERSION
#define BEAMSPACE_VERSION "0.0.0"
#endif

namespace bs = beamspace;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw bs::ValidationError("cannot open for reading", path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

// Records the command, every option value and the dataset hash; written next to
// each output file as <out>.manifest.json.
class Manifest {
public:
    Manifest(const CLI::App& sub, std::uint64_t seed) : started_(utc_now()) {
        doc_["command"] = sub.get_name();
        doc_["tool"] = "beamspace";
        doc_["version"] = BEAMSPACE_VERSION;
        doc_["seed"] = seed;
        json params = json::object();
        for (const CLI::Option* opt : sub.get_options()) {
            const std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
            if (name.empty() || name == "help") continue;
            if (opt->count() > 0) {
                const auto& res = opt->results();
                params[name] = res.size() == 1 ? json(res.front()) : json(res);
            } else if (!opt->get_default_str().empty()) {
                params[name] = opt->get_default_str();
            }
        }
        doc_["params"] = params;
        doc_["threads"] = bs::worker_count();
    }

    void dataset(const std::string& path) {
        doc_["dataset"] = path;
        doc_["dataset_sha256"] = sha256_file(path);
    }

    // Manifest file name for an output path ("" for stdout).
    static std::string name_for(const std::string& out) {
        return out.empty() ? std::string() : std::filesystem::path(out).filename().string() + ".manifest.json";
    }

    void write(const std::string& out, const json& extra = json::object()) {
        if (out.empty()) return;
        json doc = doc_;
        doc["started_utc"] = started_;
        doc["finished_utc"] = utc_now();
        doc["output"] = std::filesystem::path(out).filename().string();
        for (auto it = extra.begin(); it != extra.end(); ++it) doc[it.key()] = it.value();
        std::ofstream f(out + ".manifest.json", std::ios::binary);
        if (!f) throw bs::ValidationError("cannot open for writing", out + ".manifest.json");
        f << doc.dump(2) << "\n";
    }

private:
    json doc_;
    std::string started_;
};

void emit(const bs::CsvTable& table, const std::string& out) {
    if (out.empty()) std::cout << table.str();
    else table.write(out);
}

std::vector<int> one_based(const std::vector<int>& v, const std::string& field) {
    std::vector<int> out;
    for (int x : v) {
        bs::detail::require(x >= 1, "indices are 1-based", field);
        out.push_back(x - 1);
    }
    return out;
}

std::vector<double> snr_list_or(const std::vector<double>& v, double fallback) { return v.empty() ? std::vector<double>{fallback} : v; }

// ---- gen ------------------------------------------------------------------

struct GenArgs {
    int rows = 2, cols = 2;
    double spacing = 0.0, spacing_wl = 0.0, freq = 2.4e9, length = 0.0, self_x = 0.0;
    std::string orientation = "x", pas = "3d", out;
    int angles = 16, pols = 2;
    std::vector<int> feeds;
};

int cmd_gen(const GenArgs& a, const CLI::App& sub) {
    bs::DipoleGridSpec s;
    s.rows = a.rows;
    s.cols = a.cols;
    bs::detail::require(!(a.spacing > 0.0 && a.spacing_wl > 0.0), "give --spacing or --spacing-wl, not both", "spacing");
    s.spacing_m = a.spacing_wl > 0.0 ? a.spacing_wl * bs::kSpeedOfLight / a.freq : a.spacing;
    s.frequency_hz = a.freq;
    s.orientation = bs::parse_orientation(a.orientation);
    s.dipole_length_m = a.length;
    s.self_reactance_ohm = a.self_x;
    bs::detail::require(a.angles >= 1, "must be at least 1", "angles");
    s.grid = bs::parse_pas(a.pas) == bs::Pas::uniform_3d_sphere ? bs::sphere_grid(a.angles, a.pols) : bs::ring_grid(a.angles, a.pols);
    s.feasible_feeds = one_based(a.feeds, "feeds");
    const auto ds = bs::synthesize_dipole_grid(s);
    if (a.out.empty()) {
        std::cout << bs::nport_json::dump(ds);
    } else {
        bs::save_dataset(ds, a.out);
        Manifest m(sub, 0);
        m.write(a.out, {{"ports", ds.ports()}, {"rows_K", ds.rows()}});
    }
    return 0;
}

// ---- bounds ---------------------------------------------------------------

struct BoundsArgs {
    std::string dataset, mode = "dual", policy = "both", timing = "per-trial", ep_rule = "scale", out;
    double snr_db = 20.0, epsilon = 0.02;
    int trials = 500;
    std::uint64_t seed = 1;
    std::vector<int> p_list;
};

int cmd_bounds(const BoundsArgs& a, const CLI::App& sub) {
    const auto ds = bs::load_dataset(a.dataset);
    const auto basis = bs::modal_decomposition(ds);
    bs::CurveOptions o;
    o.mode = bs::parse_mode(a.mode);
    if (a.policy == "both") o.policies = {bs::Policy::ep, bs::Policy::wf};
    else o.policies = {bs::parse_policy(a.policy)};
    o.snr_db = a.snr_db;
    o.epsilon = a.epsilon;
    o.trials = a.trials;
    o.seed = a.seed;
    bs::detail::require(a.timing == "per-trial" || a.timing == "average", "expected per-trial or average", "timing");
    o.timing = a.timing == "per-trial" ? bs::AllocationTiming::per_trial : bs::AllocationTiming::average_channel;
    bs::detail::require(a.ep_rule == "scale" || a.ep_rule == "truncate", "expected scale or truncate", "ep-rule");
    o.dual_ep_rule = a.ep_rule == "scale" ? bs::DualEpRule::scale : bs::DualEpRule::truncate;
    const int limit = basis.usable_rank;
    if (a.p_list.empty())
        for (int p = 1; p <= limit; ++p) o.p_list.push_back(p);
    else
        o.p_list = a.p_list;
    for (int p : o.p_list)
        bs::detail::require(p >= 1 && p <= limit,
                            "P = " + std::to_string(p) + " outside 1.." + std::to_string(limit) + " (usable modes of the dataset)", "p-list");
    const auto pts = bs::monte_carlo_capacity(basis.lambda.head(limit), o);
    Manifest m(sub, a.seed);
    m.dataset(a.dataset);
    emit(bs::bounds_csv(pts, Manifest::name_for(a.out)), a.out);
    m.write(a.out);
    return 0;
}

// ---- eadof ----------------------------------------------------------------

struct EadofArgs {
    std::string dataset, out;
    std::vector<double> epsilon;
    double eps_min = 1e-3, eps_max = 1.0;
    int eps_count = 100;
};

int cmd_eadof(const EadofArgs& a, const CLI::App& sub) {
    const auto ds = bs::load_dataset(a.dataset);
    const auto basis = bs::modal_decomposition(ds);
    auto grid = a.epsilon.empty() ? bs::log_grid(a.eps_min, a.eps_max, a.eps_count) : a.epsilon;
    const auto rows = bs::eadof_table(basis.lambda.head(basis.usable_rank), grid);
    Manifest m(sub, 0);
    m.dataset(a.dataset);
    emit(bs::eadof_csv(rows, Manifest::name_for(a.out)), a.out);
    m.write(a.out);
    return 0;
}

// ---- convergence ----------------------------------------------------------

struct ConvergenceArgs {
    std::vector<int> densities{2, 4, 6, 8, 10};
    double snr_db = 20.0, freq = 2.4e9, size = 1.0;
    int trials = 500, ring = 256;
    std::uint64_t seed = 1;
    std::string rx = "mirror", out;
};

int cmd_convergence(const ConvergenceArgs& a, const CLI::App& sub) {
    bs::ConvergenceOptions o;
    o.densities = a.densities;
    o.snr_db = a.snr_db;
    o.frequency_hz = a.freq;
    o.size_wavelengths = a.size;
    o.trials = a.trials;
    o.ring_points = a.ring;
    o.seed = a.seed;
    o.rx = bs::parse_receiver(a.rx);
    const auto rows = bs::convergence_experiment(o);
    Manifest m(sub, a.seed);
    emit(bs::convergence_csv(rows, Manifest::name_for(a.out)), a.out);
    m.write(a.out);
    return 0;
}

// ---- optimize -------------------------------------------------------------

struct OptimizeArgs {
    std::string dataset, out, out_config = "config.json", log, gradient = "analytic";
    int q = 2, restarts = 4, max_outer = 30, trials = 500, max_iter = 500;
    std::uint64_t seed = 1;
    double epsilon = 0.02, x_max = bs::kDefaultMaxReactance;
    std::vector<double> snr_db{0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0};
};

int cmd_optimize(const OptimizeArgs& a, const CLI::App& sub) {
    const auto ds = bs::load_dataset(a.dataset);
    const bs::LoadedNetwork net(ds);
    bs::AlternateOptions ao;
    ao.seed = a.seed;
    ao.max_outer = a.max_outer;
    ao.loads.max_reactance = a.x_max;
    ao.loads.max_iterations = a.max_iter;
    bs::detail::require(a.gradient == "analytic" || a.gradient == "fd", "expected analytic or fd", "gradient");
    ao.loads.gradient = a.gradient == "analytic" ? bs::GradientMethod::analytic : bs::GradientMethod::central_difference;
    const auto rr = bs::alternate_restarts(net, a.q, a.restarts, ao);
    const auto& best = rr.best;

    bs::FeedLoadConfig open = best.config;
    for (auto& l : open.loads) l.reset();
    const double baseline = bs::synthesized_patterns(ds, open).objective;

    const json log = bs::config_json::iteration_log(best.state);
    bs::save_config(best.config, a.out_config, log);
    if (!a.log.empty()) {
        std::ofstream f(a.log, std::ios::binary);
        if (!f) throw bs::ValidationError("cannot open for writing", a.log);
        f << json{{"best_restart", rr.best_restart},
                  {"restart_objectives", rr.objectives},
                  {"initial_objective", best.state.initial_objective},
                  {"open_load_objective", baseline},
                  {"objective", best.state.objective},
                  {"converged", best.state.converged},
                  {"cycle_detected", best.state.cycle_detected},
                  {"load_warning", best.state.load_warning},
                  {"iteration_log", log}}
                 .dump(2)
          << "\n";
    }
    if (best.state.load_warning) std::cerr << "warning: load optimization stopped on a line-search failure; best iterate kept\n";

    const auto basis = bs::modal_decomposition(ds);
    bs::FedCapacityOptions fo;
    fo.snr_db = a.snr_db;
    fo.epsilon = a.epsilon;
    fo.trials = a.trials;
    fo.seed = a.seed;
    const auto rows = bs::fed_capacity(ds, basis, best.config, fo);
    Manifest m(sub, a.seed);
    m.dataset(a.dataset);
    emit(bs::fed_capacity_csv(rows, Manifest::name_for(a.out)), a.out);
    m.write(a.out, {{"objective", best.state.objective}, {"open_load_objective", baseline}, {"config", a.out_config}});
    return 0;
}

// ---- export ---------------------------------------------------------------

struct ExportArgs {
    std::string dataset, what = "modes", config, out;
};

int cmd_export(const ExportArgs& a, const CLI::App& sub) {
    const auto ds = bs::load_dataset(a.dataset);
    Manifest m(sub, 0);
    m.dataset(a.dataset);
    const std::string mname = Manifest::name_for(a.out);
    if (a.what == "modes") {
        emit(bs::modes_csv(bs::modal_decomposition(ds), mname), a.out);
    } else if (a.what == "patterns" || a.what == "rho") {
        bs::detail::require(!a.config.empty(), "--config is required for this export", "config");
        const auto cfg = bs::load_config(a.config);
        const auto sp = bs::synthesized_patterns(ds, cfg);
        bs::CsvTable t;
        t.manifest = mname;
        if (a.what == "patterns") {
            t.schema = "patterns";
            t.header = {"row", "theta", "phi", "polarization"};
            for (std::size_t q = 0; q < cfg.feeds.size(); ++q) {
                t.header.push_back("re_" + std::to_string(cfg.feeds[q] + 1));
                t.header.push_back("im_" + std::to_string(cfg.feeds[q] + 1));
            }
            const auto n = static_cast<Eigen::Index>(ds.grid.samples());
            for (Eigen::Index r = 0; r < sp.E_T_fed.rows(); ++r) {
                auto row = t.add_row();
                row << static_cast<int>(r) << ds.grid.theta[static_cast<std::size_t>(r % n)] << ds.grid.phi[static_cast<std::size_t>(r % n)]
                    << (r < n ? "theta" : "phi");
                for (Eigen::Index q = 0; q < sp.E_T_fed.cols(); ++q) row << sp.E_T_fed(r, q).real() << sp.E_T_fed(r, q).imag();
            }
        } else {
            t.schema = "rho";
            t.header = {"feed_j", "feed_k", "re", "im", "abs"};
            for (Eigen::Index j = 0; j < sp.rho.rows(); ++j)
                for (Eigen::Index k = 0; k < sp.rho.cols(); ++k)
                    t.add_row() << (cfg.feeds[static_cast<std::size_t>(j)] + 1) << (cfg.feeds[static_cast<std::size_t>(k)] + 1) << sp.rho(j, k).real()
                                << sp.rho(j, k).imag() << std::abs(sp.rho(j, k));
        }
        emit(t, a.out);
    } else {
        throw bs::ValidationError("expected modes, patterns or rho", "what");
    }
    m.write(a.out);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Beamspace MIMO capacity bounds and loaded N-port feed/load synthesis"};
    app.set_version_flag("--version", BEAMSPACE_VERSION);
    app.require_subcommand(1);

    GenArgs ga;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic Hertzian-dipole grid dataset (NPORT-JSON)");
    gen->add_option("--rows", ga.rows, "Grid rows")->capture_default_str();
    gen->add_option("--cols", ga.cols, "Grid columns")->capture_default_str();
    gen->add_option("--spacing", ga.spacing, "Element spacing in meters");
    gen->add_option("--spacing-wl", ga.spacing_wl, "Element spacing in wavelengths");
    gen->add_option("--freq", ga.freq, "Frequency in Hz")->capture_default_str();
    gen->add_option("--orientation", ga.orientation, "Dipole orientations: x, y, z, xy, xyz")->capture_default_str();
    gen->add_option("--length", ga.length, "Dipole length in meters (0: spacing)")->capture_default_str();
    gen->add_option("--self-reactance", ga.self_x, "Diagonal reactance in ohms")->capture_default_str();
    gen->add_option("--pas", ga.pas, "Angular grid: 3d (sphere) or 2d (azimuth ring)")->capture_default_str();
    gen->add_option("--angles", ga.angles, "Theta nodes (3d) or ring points (2d)")->capture_default_str();
    gen->add_option("--polarizations", ga.pols, "1 or 2")->capture_default_str();
    gen->add_option("--feeds", ga.feeds, "Feasible feed ports, 1-based (default: ground-feed ports)")->delimiter(',');
    gen->add_option("--out", ga.out, "Output path (default: stdout)");

    BoundsArgs ba;
    auto* bounds = app.add_subcommand("bounds", "Monte Carlo capacity versus number of modes P");
    bounds->add_option("--dataset", ba.dataset, "NPORT-JSON dataset")->required();
    bounds->add_option("--mode", ba.mode, "radiated, current or dual")->capture_default_str();
    bounds->add_option("--policy", ba.policy, "ep, wf or both")->capture_default_str();
    bounds->add_option("--snr-db", ba.snr_db, "SNR in dB (I^2/sigma^2 for current mode, P_rad/sigma^2 otherwise)")->capture_default_str();
    bounds->add_option("--epsilon", ba.epsilon, "I_in^2 / P_rad in 1/ohm")->capture_default_str();
    bounds->add_option("--trials", ba.trials, "Monte Carlo trials")->capture_default_str();
    bounds->add_option("--seed", ba.seed, "RNG seed")->capture_default_str();
    bounds->add_option("--p-list", ba.p_list, "Comma-separated P values (default: 1..usable rank)")->delimiter(',');
    bounds->add_option("--timing", ba.timing, "per-trial or average (allocation from the mean channel)")->capture_default_str();
    bounds->add_option("--ep-rule", ba.ep_rule, "Dual equal-power rule: scale or truncate")->capture_default_str();
    bounds->add_option("--out", ba.out, "CSV path (default: stdout)");

    EadofArgs ea;
    auto* eadof = app.add_subcommand("eadof", "Effective aerial degrees of freedom versus epsilon");
    eadof->add_option("--dataset", ea.dataset, "NPORT-JSON dataset")->required();
    eadof->add_option("--epsilon", ea.epsilon, "Explicit ascending epsilon values")->delimiter(',');
    eadof->add_option("--eps-min", ea.eps_min, "Log grid lower end")->capture_default_str();
    eadof->add_option("--eps-max", ea.eps_max, "Log grid upper end")->capture_default_str();
    eadof->add_option("--eps-count", ea.eps_count, "Log grid points")->capture_default_str();
    eadof->add_option("--out", ea.out, "CSV path (default: stdout)");

    ConvergenceArgs ca;
    auto* conv = app.add_subcommand("convergence", "Capacity versus sub-elements per wavelength");
    conv->add_option("--densities", ca.densities, "Ascending sub-elements per wavelength")->delimiter(',')->capture_default_str();
    conv->add_option("--snr-db", ca.snr_db, "I_in^2 / sigma^2 in dB")->capture_default_str();
    conv->add_option("--trials", ca.trials, "Monte Carlo trials")->capture_default_str();
    conv->add_option("--seed", ca.seed, "RNG seed")->capture_default_str();
    conv->add_option("--rx", ca.rx, "mirror or ideal receiver")->capture_default_str();
    conv->add_option("--ring-points", ca.ring, "Azimuth samples")->capture_default_str();
    conv->add_option("--size", ca.size, "Aperture side in wavelengths")->capture_default_str();
    conv->add_option("--freq", ca.freq, "Frequency in Hz")->capture_default_str();
    conv->add_option("--out", ca.out, "CSV path (default: stdout)");

    OptimizeArgs oa;
    auto* opt = app.add_subcommand("optimize", "Alternating load/feed optimization and fed-structure capacity");
    opt->add_option("--dataset", oa.dataset, "NPORT-JSON dataset")->required();
    opt->add_option("--q", oa.q, "Number of fed ports Q")->capture_default_str();
    opt->add_option("--restarts", oa.restarts, "Random restarts")->capture_default_str();
    opt->add_option("--seed", oa.seed, "RNG seed")->capture_default_str();
    opt->add_option("--max-outer", oa.max_outer, "Outer iteration limit")->capture_default_str();
    opt->add_option("--max-iter", oa.max_iter, "Quasi-Newton iteration limit")->capture_default_str();
    opt->add_option("--x-max", oa.x_max, "Load reactance bound in ohms")->capture_default_str();
    opt->add_option("--gradient", oa.gradient, "analytic or fd")->capture_default_str();
    opt->add_option("--epsilon", oa.epsilon, "I_in^2 / P_rad in 1/ohm")->capture_default_str();
    opt->add_option("--snr-db", oa.snr_db, "SNR values in dB for the capacity table")->delimiter(',')->capture_default_str();
    opt->add_option("--trials", oa.trials, "Monte Carlo trials")->capture_default_str();
    opt->add_option("--out-config", oa.out_config, "FeedLoadConfig JSON path")->capture_default_str();
    opt->add_option("--log", oa.log, "Run log JSON path");
    opt->add_option("--out", oa.out, "Capacity CSV path (default: stdout)");

    ExportArgs xa;
    auto* exp = app.add_subcommand("export", "Export modal eigenvalues or synthesized patterns");
    exp->add_option("--dataset", xa.dataset, "NPORT-JSON dataset")->required();
    exp->add_option("--what", xa.what, "modes, patterns or rho")->capture_default_str();
    exp->add_option("--config", xa.config, "FeedLoadConfig JSON (patterns, rho)");
    exp->add_option("--out", xa.out, "CSV path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (*gen) return cmd_gen(ga, *gen);
        if (*bounds) return cmd_bounds(ba, *bounds);
        if (*eadof) return cmd_eadof(ea, *eadof);
        if (*conv) return cmd_convergence(ca, *conv);
        if (*opt) return cmd_optimize(oa, *opt);
        if (*exp) return cmd_export(xa, *exp);
    } catch (const bs::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const bs::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitValidation;
}
