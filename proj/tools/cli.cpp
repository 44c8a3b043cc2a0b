#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qonet/network.hpp"
#include "qonet/synth.hpp"
#include "qonet/verify.hpp"

namespace qonet::cli {

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("/", "config must be a JSON object");
    RunConfig c;
    try {
        if (doc.contains("bound")) {
            if (!doc["bound"].is_object()) throw ParseError("/bound", "bound must be an object");
            c.bound = doc["bound"];
        }
        if (doc.contains("family")) c.family = doc["family"].get<std::string>();
        if (doc.contains("d")) c.d = doc["d"].get<int>();
        if (doc.contains("M")) c.M = doc["M"].get<std::size_t>();
        if (doc.contains("M_list")) c.M_list = doc["M_list"].get<std::vector<std::size_t>>();
        if (doc.contains("tau")) c.tau = doc["tau"].get<double>();
        if (doc.contains("pvol")) c.pvol = doc["pvol"].get<double>();
        if (doc.contains("extrapolate")) c.extrapolate = doc["extrapolate"].get<bool>();
        if (doc.contains("sampler")) c.sampler = SamplerSpec::from_json(doc["sampler"]);
        if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
        c.out = doc.value("out", "");
        c.report = doc.value("report", "");
        c.sidecar = doc.value("sidecar", "");
        c.network = doc.value("network", "");
        c.points = doc.value("points", "");
        c.timing_in_csv = doc.value("timing_in_csv", false);
    } catch (const nlohmann::json::type_error& e) {
        throw ParseError("config", e.what());
    }
    if (c.d && *c.d < 1) throw Error(ErrorCategory::Config, "d must be >= 1");
    if (c.M && *c.M < 1) throw Error(ErrorCategory::Config, "M must be >= 1");
    return c;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json doc = {{"bound", bound}, {"family", family}, {"extrapolate", extrapolate}, {"seed", seed}};
    if (d) doc["d"] = *d;
    if (M) doc["M"] = *M;
    if (!M_list.empty()) doc["M_list"] = M_list;
    if (tau) doc["tau"] = *tau;
    if (pvol) doc["pvol"] = *pvol;
    if (sampler) doc["sampler"] = sampler->to_json();
    for (const auto& [key, value] : {std::pair<const char*, const std::string&>{"out", out},
                                     {"report", report},
                                     {"sidecar", sidecar},
                                     {"network", network},
                                     {"points", points}}) {
        if (!value.empty()) doc[key] = value;
    }
    if (timing_in_csv) doc["timing_in_csv"] = true;
    return doc;
}

BoundFunction RunConfig::make_bound() const {
    nlohmann::json spec = bound;
    const std::string kind = spec.value("kind", "");
    if (kind == "isotropic") {
        if (!spec.contains("d")) {
            if (!d) throw Error(ErrorCategory::Config, "isotropic bound needs --d");
            spec["d"] = *d;
        }
    } else if (spec.contains("rho") && d) {
        auto rho = spec["rho"].get<std::vector<double>>();
        if (rho.size() == 1 && *d > 1) rho.assign(static_cast<std::size_t>(*d), rho.front());
        if (static_cast<int>(rho.size()) != *d) {
            throw Error(ErrorCategory::Config, "rho has " + std::to_string(rho.size()) + " entries but d = " +
                                                   std::to_string(*d));
        }
        spec["rho"] = rho;
    }
    BoundFunction b = BoundFunction::from_json(spec);
    if (d && b.dim() != *d) throw Error(ErrorCategory::Config, "bound dimension disagrees with --d");
    return b;
}

PolynomialFamily RunConfig::make_family() const {
    return PolynomialFamily(family_kind_from_string(family));
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

namespace {

struct Flags {
    std::string config;
    std::string bound;
    std::vector<double> rho;
    double log_c = 0.0;
    std::string prefactor;
    int d = 0;
    std::string family;
    std::size_t M = 0;
    std::vector<std::size_t> M_list;
    double tau = 0.0;
    double pvol = 0.0;
    std::string sampler;
    int grid = 0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::string report;
    std::string sidecar;
    std::string network;
    std::string points;
    bool extrapolate = false;
    bool no_extrapolate = false;
    bool timing_in_csv = false;
};

struct Options {
    CLI::Option* config = nullptr;
    CLI::Option* bound = nullptr;
    CLI::Option* rho = nullptr;
    CLI::Option* log_c = nullptr;
    CLI::Option* prefactor = nullptr;
    CLI::Option* d = nullptr;
    CLI::Option* family = nullptr;
    CLI::Option* M = nullptr;
    CLI::Option* M_list = nullptr;
    CLI::Option* tau = nullptr;
    CLI::Option* pvol = nullptr;
    CLI::Option* sampler = nullptr;
    CLI::Option* grid = nullptr;
    CLI::Option* samples = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* out = nullptr;
    CLI::Option* report = nullptr;
    CLI::Option* sidecar = nullptr;
    CLI::Option* network = nullptr;
    CLI::Option* points = nullptr;
    CLI::Option* extrapolate = nullptr;
    CLI::Option* no_extrapolate = nullptr;
    CLI::Option* timing_in_csv = nullptr;
};

bool given(const CLI::Option* o) { return o != nullptr && o->count() > 0; }

void add_problem_flags(CLI::App& sub, Flags& f, Options& o) {
    o.config = sub.add_option("--config", f.config, "JSON run configuration; flags override it");
    o.bound = sub.add_option("--bound", f.bound, "Coefficient bound: isotropic, taylor or legendre")
                  ->check(CLI::IsMember({"isotropic", "taylor", "legendre"}));
    o.rho = sub.add_option("--rho", f.rho, "Anisotropy rates, comma separated")->delimiter(',');
    o.log_c = sub.add_option("--logC", f.log_c, "Additive constant ln C (Taylor)");
    o.prefactor = sub.add_option("--prefactor", f.prefactor, "Legendre prefactor: odd_shifted or literal")
                      ->check(CLI::IsMember({"odd_shifted", "literal"}));
    o.d = sub.add_option("--d", f.d, "Parameter dimension")->check(CLI::PositiveNumber);
}

void add_family_flag(CLI::App& sub, Flags& f, Options& o) {
    o.family = sub.add_option("--family", f.family, "Polynomial family: shifted_legendre or monomial")
                   ->check(CLI::IsMember({"shifted_legendre", "legendre", "monomial"}));
}

void add_pvol_flags(CLI::App& sub, Flags& f, Options& o) {
    o.tau = sub.add_option("--tau", f.tau, "Lattice scale for the |P| estimate")->check(CLI::PositiveNumber);
    o.pvol = sub.add_option("--pvol", f.pvol, "Use this |P| instead of estimating it")->check(CLI::PositiveNumber);
}

void add_sampler_flags(CLI::App& sub, Flags& f, Options& o) {
    o.sampler = sub.add_option("--sampler", f.sampler, "Point set: grid or halton")
                    ->check(CLI::IsMember({"grid", "halton"}));
    o.grid = sub.add_option("--grid", f.grid, "Grid points per axis")->check(CLI::Range(2, 1'000'000));
    o.samples = sub.add_option("--samples", f.samples, "Number of Halton points")->check(CLI::PositiveNumber);
}

void add_seed_flag(CLI::App& sub, Flags& f, Options& o) {
    o.seed = sub.add_option("--seed", f.seed, "Seed for coefficient signs and sampler shift");
}

RunConfig load_config(const Flags& f, const Options& o) {
    RunConfig c;
    if (given(o.config)) {
        std::ifstream in(f.config);
        if (!in) throw Error(ErrorCategory::Io, "cannot open config " + f.config);
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(f.config + ":byte " + std::to_string(e.byte), e.what());
        }
        c = RunConfig::from_json(doc);
    }
    if (given(o.bound)) {
        c.bound = {{"kind", f.bound}};
    }
    if (given(o.rho)) c.bound["rho"] = f.rho;
    if (given(o.log_c)) c.bound["logC"] = f.log_c;
    if (given(o.prefactor)) c.bound["prefactor"] = f.prefactor;
    if (given(o.d)) {
        c.d = f.d;
        if (c.bound.value("kind", "") == "isotropic") c.bound["d"] = f.d;
    }
    if (given(o.family)) c.family = f.family;
    if (given(o.M)) c.M = f.M;
    if (given(o.M_list)) c.M_list = f.M_list;
    if (given(o.tau)) c.tau = f.tau;
    if (given(o.pvol)) c.pvol = f.pvol;
    if (given(o.extrapolate)) c.extrapolate = true;
    if (given(o.no_extrapolate)) c.extrapolate = false;
    if (given(o.seed)) c.seed = f.seed;
    if (given(o.sampler) || given(o.grid) || given(o.samples)) {
        SamplerSpec s = c.sampler.value_or(SamplerSpec::default_for(c.d.value_or(1), c.seed));
        if (given(o.sampler)) s.kind = f.sampler == "grid" ? SamplerKind::Grid : SamplerKind::Halton;
        if (given(o.grid)) s.points_per_axis = f.grid;
        if (given(o.samples)) s.samples = f.samples;
        c.sampler = s;
    }
    if (c.sampler && c.sampler->kind == SamplerKind::Halton) c.sampler->seed = c.seed;
    if (given(o.out)) c.out = f.out;
    if (given(o.report)) c.report = f.report;
    if (given(o.sidecar)) c.sidecar = f.sidecar;
    if (given(o.network)) c.network = f.network;
    if (given(o.points)) c.points = f.points;
    if (given(o.timing_in_csv)) c.timing_in_csv = true;
    return c;
}

std::size_t require_M(const RunConfig& c) {
    if (!c.M) throw Error(ErrorCategory::Config, "M is required (--M or \"M\" in the config)");
    return *c.M;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path);
    if (!f) throw Error(ErrorCategory::Io, "cannot open " + path + " for writing");
    f << text;
    if (!f) throw Error(ErrorCategory::Io, "write to " + path + " failed");
}

double resolve_pvol(const RunConfig& c, const BoundFunction& b, nlohmann::json* echo = nullptr) {
    if (c.pvol) {
        if (echo) *echo = {{"source", "given"}, {"value", *c.pvol}};
        return *c.pvol;
    }
    const auto est = estimate_P_volume(b, c.tau.value_or(default_tau(b)), c.extrapolate);
    if (echo) *echo = {{"source", "estimate"}, {"value", est.value}, {"tau", est.tau}};
    return est.value;
}

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

int cmd_indexset(const RunConfig& c, std::ostream& out) {
    const auto set = enumerate_quasi_optimal(c.make_bound(), require_M(c));
    write_text(c.out, set.to_json().dump(2) + "\n", out);
    return 0;
}

int cmd_pvolume(const RunConfig& c, std::ostream& out) {
    const auto b = c.make_bound();
    const auto est = estimate_P_volume(b, c.tau.value_or(default_tau(b)), c.extrapolate);
    const nlohmann::json doc = {{"bound", b.to_json()},
                                {"value", est.value},
                                {"tau", est.tau},
                                {"lattice_count", est.lattice_count},
                                {"extrapolated", est.extrapolated},
                                {"lattice_count_2tau", est.lattice_count_2tau}};
    write_text(c.out, doc.dump(2) + "\n", out);
    return 0;
}

QuasiOptimalExpansion make_expansion(const RunConfig& c, const BoundFunction& b) {
    return synthetic_expansion(enumerate_quasi_optimal(b, require_M(c)), c.make_family(), c.seed);
}

SynthesisOptions synthesis_options(const RunConfig& c, int d) {
    SynthesisOptions o;
    o.sampler = c.sampler.value_or(SamplerSpec::default_for(d, c.seed));
    return o;
}

int cmd_synth(const RunConfig& c, std::ostream& out) {
    if (c.out.empty()) throw Error(ErrorCategory::Config, "synth needs --out for the network file");
    const auto b = c.make_bound();
    const auto u = make_expansion(c, b);
    const double pvol = resolve_pvol(c, b);
    const auto result = synth_unn(u, pvol, synthesis_options(c, b.dim()));
    std::string report = c.report;
    if (report.empty()) {
        const std::filesystem::path p(c.out);
        report = (p.parent_path() / (p.stem().string() + ".report.json")).string();
    }
    save_synthesis(result, u.index_set(), c.out, report);
    out << "network " << c.out << ", report " << report << ", complexity " << result.report.audit.complexity()
        << ", depth " << result.report.audit.depth << "\n";
    return 0;
}

std::vector<Eigen::VectorXd> read_points(const std::string& path, Eigen::Index d) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCategory::Io, "cannot open points file " + path);
    std::vector<Eigen::VectorXd> pts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> coords;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            char* end = nullptr;
            const double v = std::strtod(field.c_str(), &end);
            while (end && (*end == ' ' || *end == '\t')) ++end;
            if (end == field.c_str() || (end && *end != '\0')) {
                throw ParseError(path + ":" + std::to_string(line_no), "not a number: '" + field + "'");
            }
            coords.push_back(v);
        }
        if (static_cast<Eigen::Index>(coords.size()) != d) {
            throw ParseError(path + ":" + std::to_string(line_no),
                             "expected " + std::to_string(d) + " coordinates, got " + std::to_string(coords.size()));
        }
        pts.push_back(Eigen::Map<const Eigen::VectorXd>(coords.data(), d));
    }
    return pts;
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
    if (c.network.empty()) throw Error(ErrorCategory::Config, "eval needs --network");
    if (c.points.empty()) throw Error(ErrorCategory::Config, "eval needs --points");
    const auto net = load_network(c.network);
    std::ostringstream text;
    for (const auto& y : read_points(c.points, net.input_dim())) {
        const auto v = eval(net, y);
        for (Eigen::Index k = 0; k < v.size(); ++k) text << (k ? "," : "") << fmt17(v(k));
        text << '\n';
    }
    write_text(c.out, text.str(), out);
    return 0;
}

int cmd_verify(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const auto b = c.make_bound();
    const auto u = make_expansion(c, b);
    const double pvol = resolve_pvol(c, b);
    const auto result = synth_unn(u, pvol, synthesis_options(c, b.dim()));
    const auto& r = result.report;
    const auto first = check_first_layer_count(result.network, u.index_set());
    nlohmann::json doc = r.to_json(u.index_set());
    doc["first_layer"] = {{"input_weights", first.input_weights}, {"expected", first.expected}, {"passed", first.passed}};
    write_text(c.out, doc.dump(2) + "\n", out);
    if (!r.all_links_hold() || !first.passed || !(r.measured_total_error <= r.bound_rhs)) {
        err << "numerical error: verification failed (subnet budgets " << r.subnet_budgets_hold() << ", budget sum "
            << r.budget_sum_holds() << ", triangle " << r.triangle_holds() << ", first layer " << first.passed << ")\n";
        return 1;
    }
    return 0;
}

int cmd_study(const RunConfig& c, std::ostream& out, std::ostream& err) {
    if (c.M_list.empty()) throw Error(ErrorCategory::Config, "study needs --M-list");
    const auto b = c.make_bound();
    StudyOptions opt;
    opt.sampler = c.sampler;
    opt.pvol = c.pvol;
    opt.tau = c.tau;
    opt.seed = c.seed;

    std::ofstream csv_file;
    std::ostream* csv = &out;
    if (!c.out.empty() && c.out != "-") {
        csv_file.open(c.out);
        if (!csv_file) throw Error(ErrorCategory::Io, "cannot open " + c.out + " for writing");
        csv = &csv_file;
    }
    std::string sidecar = c.sidecar;
    if (sidecar.empty() && csv == &csv_file) sidecar = c.out + ".json";

    *csv << StudyReport::csv_header() << '\n';
    csv->flush();
    StudyReport partial;
    auto on_row = [&](const StudyReport& rep, const StudyRow& row) {
        rep.write_csv_row(*csv, row, c.timing_in_csv);
        csv->flush();
        partial = rep;
        char line[200];
        std::snprintf(line, sizeof line, "M=%zu sup_error=%.3e bound_rhs=%.3e complexity=%zu depth=%d time=%.2fs",
                      row.M, row.sup_error_uQ_uNN, row.bound_rhs, row.complexity, row.depth, row.wall_time);
        err << line << '\n';
    };
    auto write_sidecar = [&](nlohmann::json doc) {
        doc["run_config"] = c.to_json();
        if (!sidecar.empty()) write_text(sidecar, doc.dump(2) + "\n", out);
    };
    try {
        const auto report = convergence_study(b, c.make_family(), c.M_list, opt, on_row);
        write_sidecar(report.sidecar());
        bool ok = true;
        for (const auto& row : report.rows) ok = ok && row.links_hold();
        if (!ok) {
            err << "numerical error: a study row violates its error chain (see sidecar)\n";
            return 1;
        }
    } catch (const Error& e) {
        auto doc = partial.sidecar();
        doc["error"] = e.what();
        write_sidecar(doc);
        throw;
    }
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Build and check ReLU networks that emulate quasi-optimal polynomial expansions"};
    app.require_subcommand(1);
    Flags f;
    Options o;

    auto* indexset = app.add_subcommand("indexset", "Emit the M indices with the smallest bound as JSON");
    auto* pvolume = app.add_subcommand("pvolume", "Estimate the volume |P| of the normalized sublevel set");
    auto* synth = app.add_subcommand("synth", "Build u_NN for the synthetic target and persist network and report");
    auto* evalc = app.add_subcommand("eval", "Evaluate a persisted network on a CSV of points");
    auto* verify = app.add_subcommand("verify", "Single-M check of the subnetwork, budget and triangle links");
    auto* study = app.add_subcommand("study", "Convergence study over a list of M, written as CSV");

    for (auto* sub : {indexset, pvolume, synth, verify, study}) add_problem_flags(*sub, f, o);
    for (auto* sub : {synth, verify, study}) {
        add_family_flag(*sub, f, o);
        add_pvol_flags(*sub, f, o);
        add_sampler_flags(*sub, f, o);
        add_seed_flag(*sub, f, o);
    }
    for (auto* sub : {indexset, synth, verify}) {
        sub->add_option("--M", f.M, "Number of terms")->check(CLI::PositiveNumber);
    }
    study->add_option("--M-list", f.M_list, "Ascending list of M, comma separated")->delimiter(',');
    pvolume->add_option("--tau", f.tau, "Lattice scale")->check(CLI::PositiveNumber);
    pvolume->add_flag("--extrapolate", f.extrapolate, "Richardson-extrapolate from tau and 2 tau (default)");
    pvolume->add_flag("--no-extrapolate", f.no_extrapolate, "Report the plain lattice estimate");
    for (auto* sub : {indexset, pvolume, synth, evalc, verify, study}) {
        sub->add_option("--out", f.out, "Output path ('-' or absent: standard output)");
    }
    evalc->add_option("--config", f.config, "JSON run configuration; flags override it");
    synth->add_option("--report", f.report, "Report path (default: <out stem>.report.json)");
    evalc->add_option("--network", f.network, "Network JSON file");
    evalc->add_option("--points", f.points, "CSV with one point per line");
    study->add_option("--sidecar", f.sidecar, "JSON sidecar path (default: <out>.json)");
    study->add_flag("--timing-in-csv", f.timing_in_csv, "Write measured wall times into the CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        err << app.help();
        return 2;
    }

    // Options are added per subcommand; look them up on the one that ran.
    CLI::App* sub = app.get_subcommands().front();
    auto lookup = [&](const char* name) -> CLI::Option* {
        try {
            return sub->get_option(name);
        } catch (const CLI::OptionNotFound&) {
            return nullptr;
        }
    };
    o.config = lookup("--config");
    o.bound = lookup("--bound");
    o.rho = lookup("--rho");
    o.log_c = lookup("--logC");
    o.prefactor = lookup("--prefactor");
    o.d = lookup("--d");
    o.family = lookup("--family");
    o.M = lookup("--M");
    o.M_list = lookup("--M-list");
    o.tau = lookup("--tau");
    o.pvol = lookup("--pvol");
    o.sampler = lookup("--sampler");
    o.grid = lookup("--grid");
    o.samples = lookup("--samples");
    o.seed = lookup("--seed");
    o.out = lookup("--out");
    o.report = lookup("--report");
    o.sidecar = lookup("--sidecar");
    o.network = lookup("--network");
    o.points = lookup("--points");
    o.extrapolate = lookup("--extrapolate");
    o.no_extrapolate = lookup("--no-extrapolate");
    o.timing_in_csv = lookup("--timing-in-csv");

    try {
        const RunConfig c = load_config(f, o);
        if (sub == indexset) return cmd_indexset(c, out);
        if (sub == pvolume) return cmd_pvolume(c, out);
        if (sub == synth) return cmd_synth(c, out);
        if (sub == evalc) return cmd_eval(c, out);
        if (sub == verify) return cmd_verify(c, out, err);
        return cmd_study(c, out, err);
    } catch (const Error& e) {
        err << e.what() << '\n';
        return 1;
    } catch (const nlohmann::json::exception& e) {
        err << "parse error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace qonet::cli
