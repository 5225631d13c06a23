#include "robsid/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "robsid/errors.hpp"
#include "robsid/io.hpp"

namespace robsid::cli {

using nlohmann::json;

namespace {

// Raw flag values; applied after the config file so that flags win.
struct FlagValues {
    std::string config;
    Index runs = 0;
    std::uint64_t seed = 0;
    std::string scheme;
    std::vector<std::string> methods;
    std::string gf_variant;
    Index nf = 0;
    Index no = 0;
    std::string out;
    unsigned threads = 1;
    std::string data;
    Index horizon = 0;
    Index past = 0;
    Index nx = 0;
    bool noiseless = false;
    bool no_rao_blackwell = false;
};

struct FlagOptions {
    CLI::Option* config = nullptr;
    CLI::Option* runs = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* scheme = nullptr;
    CLI::Option* method = nullptr;
    CLI::Option* gf_variant = nullptr;
    CLI::Option* nf = nullptr;
    CLI::Option* no = nullptr;
    CLI::Option* out = nullptr;
    CLI::Option* threads = nullptr;
    CLI::Option* data = nullptr;
    CLI::Option* horizon = nullptr;
    CLI::Option* past = nullptr;
    CLI::Option* nx = nullptr;
    CLI::Option* noiseless = nullptr;
    CLI::Option* no_rb = nullptr;
};

bool given(const CLI::Option* o) { return o != nullptr && o->count() > 0; }

void add_common(CLI::App* sub, FlagValues& v, FlagOptions& o) {
    o.config = sub->add_option("--config", v.config, "JSON file with option values");
    o.seed = sub->add_option("--seed", v.seed, "Base random seed");
    o.out = sub->add_option("--out", v.out, "Output directory");
}

void add_estimation(CLI::App* sub, FlagValues& v, FlagOptions& o) {
    o.scheme = sub->add_option("--scheme", v.scheme, "identity|cva|n4sid");
    o.gf_variant = sub->add_option("--gf-variant", v.gf_variant, "hankel|independent");
    o.nf = sub->add_option("--nf", v.nf, "Gibbs chain length N_F");
    o.no = sub->add_option("--no", v.no, "Gibbs burn-in N_o");
    o.no_rb = sub->add_flag("--no-rao-blackwell", v.no_rao_blackwell,
                            "Average raw draws instead of conditional means");
}

Method parse_method_value(const std::string& s) {
    try {
        return parse_method(s);
    } catch (const DataError& e) {
        throw CliError(exit_malformed, e.what());
    }
}

WeightScheme parse_scheme_value(const std::string& s) {
    try {
        return parse_weight_scheme(s);
    } catch (const Error& e) {
        throw CliError(exit_malformed, e.what());
    }
}

GfVariant parse_variant_value(const std::string& s) {
    try {
        return parse_gf_variant(s);
    } catch (const Error& e) {
        throw CliError(exit_malformed, e.what());
    }
}

std::vector<Method> parse_method_list(const std::vector<std::string>& names) {
    std::vector<Method> out;
    for (const auto& n : names) {
        const Method m = parse_method_value(n);
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    if (out.empty()) throw CliError(exit_malformed, "empty method list");
    return out;
}

template <typename T>
T json_get(const json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw CliError(exit_malformed, "config key '" + key + "' has the wrong type");
    }
}

Index json_count(const json& j, const std::string& key) {
    if (!j.is_number_integer()) throw CliError(exit_malformed, "config key '" + key + "' must be an integer");
    return j.get<Index>();
}

void apply_config_file(const std::string& path, CliConfig& cfg) {
    if (!std::filesystem::exists(path)) throw CliError(exit_data, "config file not found: " + path);
    std::ifstream in(path);
    if (!in) throw CliError(exit_data, "cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw CliError(exit_malformed, "config file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw CliError(exit_malformed, "config file must hold a JSON object");
    for (const auto& [key, val] : j.items()) {
        if (key == "runs") cfg.bench.runs = json_count(val, key);
        else if (key == "seed") {
            if (!val.is_number_unsigned()) throw CliError(exit_malformed, "config key 'seed' must be a non-negative integer");
            cfg.bench.seed = val.get<std::uint64_t>();
        } else if (key == "scheme") cfg.bench.scheme = parse_scheme_value(json_get<std::string>(val, key));
        else if (key == "method") {
            if (val.is_array()) cfg.bench.methods = parse_method_list(json_get<std::vector<std::string>>(val, key));
            else {
                cfg.method = parse_method_value(json_get<std::string>(val, key));
                cfg.bench.methods = {cfg.method};
            }
        } else if (key == "gf_variant") cfg.bench.gibbs.gf_variant = parse_variant_value(json_get<std::string>(val, key));
        else if (key == "nf") cfg.bench.gibbs.n_total = json_count(val, key);
        else if (key == "no") cfg.bench.gibbs.n_burn = json_count(val, key);
        else if (key == "rao_blackwell") cfg.bench.gibbs.rao_blackwell = json_get<bool>(val, key);
        else if (key == "out") cfg.out_path = json_get<std::string>(val, key);
        else if (key == "threads") cfg.bench.parallelism = static_cast<unsigned>(json_count(val, key));
        else if (key == "data") cfg.data_path = json_get<std::string>(val, key);
        else if (key == "horizon") cfg.horizon = json_count(val, key);
        else if (key == "past") cfg.past = json_count(val, key);
        else if (key == "nx") cfg.nx = json_count(val, key);
        else if (key == "noiseless") cfg.noiseless = json_get<bool>(val, key);
        else throw CliError(exit_usage, "unknown config key '" + key + "'");
    }
}

void validate(const CliConfig& cfg) {
    const auto& g = cfg.bench.gibbs;
    if (cfg.bench.runs < 1) throw CliError(exit_malformed, "runs must be at least 1");
    if (cfg.bench.parallelism < 1) throw CliError(exit_malformed, "threads must be at least 1");
    if (g.n_burn < 1 || g.n_total <= g.n_burn)
        throw CliError(exit_malformed, "need 1 <= no < nf");
    if (cfg.horizon < 0 || cfg.past < 0) throw CliError(exit_malformed, "horizon and past must be positive");
    if (cfg.nx < 0 || cfg.nx > 10) throw CliError(exit_malformed, "nx must lie in 1..10");
    if (cfg.command == "identify" && cfg.data_path.empty())
        throw CliError(exit_usage, "identify requires --data");
}

std::string join_methods(const std::vector<Method>& methods) {
    std::string s;
    for (Method m : methods) s += (s.empty() ? "" : ",") + to_string(m);
    return s;
}

Metadata base_meta(const CliConfig& cfg) {
    return {{"version", kVersion}, {"command", cfg.command}, {"config", resolved_config_json(cfg)}};
}

std::string out_file(const CliConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.out_path) / name).string();
}

std::string matrices_text(const MatrixSet& set, const Metadata& meta) {
    std::ostringstream os;
    write_matrices(os, set, meta);
    return os.str();
}

Index numeric_rank(const Matrix& m, double scale) {
    if (m.size() == 0) return 0;
    Eigen::BDCSVD<Matrix> svd(m);
    const Vector s = svd.singularValues();
    Index r = 0;
    for (Index k = 0; k < s.size(); ++k) r += s(k) > 1e-9 * scale ? 1 : 0;
    return r;
}

}  // namespace

CliConfig parse_config(const std::vector<std::string>& args) {
    CLI::App app{"Low-rank subspace identification with shrinkage and Bayesian estimators",
                 "robsid"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", kVersion);

    FlagValues v;
    FlagOptions o;
    int verbosity = 0;
    app.add_flag("-v,--verbose", verbosity, "More log output");

    auto* sim = app.add_subcommand("simulate", "Sample a system and write data plus ground truth");
    add_common(sim, v, o);
    FlagOptions os;
    os = o;
    os.nx = sim->add_option("--nx", v.nx, "State dimension (default: sampled in 1..10)");
    os.noiseless = sim->add_flag("--noiseless", v.noiseless, "Zero process and measurement noise");

    auto* ident = app.add_subcommand("identify", "Estimate H_fp from a data file");
    FlagOptions oi;
    add_common(ident, v, oi);
    add_estimation(ident, v, oi);
    oi.method = ident->add_option("--method", v.methods,
                                  "heuristic|midpoint|hard|soft|optimal|sure|bayes");
    oi.data = ident->add_option("--data", v.data, "Data file (u_1..,y_1.. columns)");
    oi.horizon = ident->add_option("--horizon", v.horizon, "Future horizon f");
    oi.past = ident->add_option("--past", v.past, "Past horizon p (default f)");

    auto* bench = app.add_subcommand("benchmark", "Monte Carlo risk comparison");
    FlagOptions ob;
    add_common(bench, v, ob);
    add_estimation(bench, v, ob);
    ob.runs = bench->add_option("--runs", v.runs, "Number of realizations");
    ob.method = bench->add_option("--method", v.methods, "Methods to run (comma list)")
                    ->delimiter(',');
    ob.threads = bench->add_option("--threads", v.threads, "Worker threads");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const CLI::App* target = &app;
        for (const auto* s : {sim, ident, bench})
            if (s->parsed()) target = s;
        throw CliError(exit_ok, target->help());
    } catch (const CLI::CallForVersion&) {
        throw CliError(exit_ok, std::string(kVersion) + "\n");
    } catch (const CLI::ConversionError& e) {
        throw CliError(exit_malformed, e.what());
    } catch (const CLI::ValidationError& e) {
        throw CliError(exit_malformed, e.what());
    } catch (const CLI::ParseError& e) {
        throw CliError(exit_usage, std::string(e.what()) + "\n" + app.help());
    }

    CliConfig cfg;
    FlagOptions* opts = nullptr;
    if (sim->parsed()) {
        cfg.command = "simulate";
        opts = &os;
    } else if (ident->parsed()) {
        cfg.command = "identify";
        opts = &oi;
    } else {
        cfg.command = "benchmark";
        opts = &ob;
    }
    cfg.verbosity = verbosity;

    if (given(opts->config)) {
        cfg.config_path = v.config;
        apply_config_file(v.config, cfg);
    }
    if (given(opts->seed)) cfg.bench.seed = v.seed;
    if (given(opts->out)) cfg.out_path = v.out;
    if (given(opts->runs)) cfg.bench.runs = v.runs;
    if (given(opts->scheme)) cfg.bench.scheme = parse_scheme_value(v.scheme);
    if (given(opts->gf_variant)) cfg.bench.gibbs.gf_variant = parse_variant_value(v.gf_variant);
    if (given(opts->nf)) cfg.bench.gibbs.n_total = v.nf;
    if (given(opts->no)) cfg.bench.gibbs.n_burn = v.no;
    if (given(opts->no_rb)) cfg.bench.gibbs.rao_blackwell = false;
    if (given(opts->threads)) cfg.bench.parallelism = v.threads;
    if (given(opts->data)) cfg.data_path = v.data;
    if (given(opts->horizon)) cfg.horizon = v.horizon;
    if (given(opts->past)) cfg.past = v.past;
    if (given(opts->nx)) cfg.nx = v.nx;
    if (given(opts->noiseless)) cfg.noiseless = v.noiseless;
    if (given(opts->method)) {
        cfg.bench.methods = parse_method_list(v.methods);
        if (cfg.command == "identify") {
            if (cfg.bench.methods.size() != 1)
                throw CliError(exit_malformed, "identify takes exactly one --method");
            cfg.method = cfg.bench.methods.front();
        }
    }
    if (cfg.command == "identify") cfg.bench.methods = {cfg.method};
    if (cfg.command == "simulate" && given(opts->nx) && v.nx < 1)
        throw CliError(exit_malformed, "nx must lie in 1..10");
    validate(cfg);
    return cfg;
}

std::string resolved_config_json(const CliConfig& cfg) {
    json j;
    j["command"] = cfg.command;
    j["seed"] = cfg.bench.seed;
    j["out"] = cfg.out_path;
    if (cfg.config_path) j["config"] = *cfg.config_path;
    if (cfg.command == "simulate") {
        j["nx"] = cfg.nx;
        j["noiseless"] = cfg.noiseless;
    } else {
        j["scheme"] = to_string(cfg.bench.scheme);
        j["gf_variant"] = to_string(cfg.bench.gibbs.gf_variant);
        j["nf"] = cfg.bench.gibbs.n_total;
        j["no"] = cfg.bench.gibbs.n_burn;
        j["rao_blackwell"] = cfg.bench.gibbs.rao_blackwell;
    }
    if (cfg.command == "identify") {
        j["method"] = to_string(cfg.method);
        j["data"] = cfg.data_path;
        j["horizon"] = cfg.horizon;
        j["past"] = cfg.past;
    }
    if (cfg.command == "benchmark") {
        j["runs"] = cfg.bench.runs;
        j["method"] = join_methods(cfg.bench.methods);
        j["threads"] = cfg.bench.parallelism;
    }
    return j.dump();
}

void cmd_simulate(const CliConfig& cfg, std::ostream& log) {
    SystemSpec spec = cfg.bench.system;
    if (cfg.nx > 0) spec.nx_min = spec.nx_max = cfg.nx;
    const Realization real = make_realization(spec, cfg.bench.seed, 0, 0, cfg.noiseless);
    const StateSpaceModel& m = real.system.model;

    Metadata meta = base_meta(cfg);
    meta.emplace_back("seed", std::to_string(cfg.bench.seed));
    meta.emplace_back("n_x", std::to_string(m.n_x()));
    meta.emplace_back("N", std::to_string(real.system.n));
    meta.emplace_back("horizon", std::to_string(real.horizon));
    meta.emplace_back("snr", format_double(real.system.snr));
    meta.emplace_back("noiseless", cfg.noiseless ? "true" : "false");

    std::ostringstream data;
    write_dataset(data, Dataset{real.u, real.y, meta});
    write_text_file(out_file(cfg, "data.csv"), data.str());

    const MatrixSet truth{{"a", m.a},         {"b", m.b},         {"c", m.c},
                          {"d", m.d},         {"k", m.k},         {"sigma", m.sigma},
                          {"r_w", m.r_w},     {"r_v", m.r_v},     {"h_fp", real.truth.h_fp},
                          {"gamma_f", real.truth.gamma_f},        {"l_p", real.truth.l_p},
                          {"h_f", real.truth.h_f},                {"g_f", real.truth.g_f}};
    write_text_file(out_file(cfg, "truth.csv"), matrices_text(truth, meta));

    log << "simulate: n_x=" << m.n_x() << " N=" << real.system.n << " horizon=" << real.horizon
        << " snr=" << format_double(real.system.snr) << " -> " << cfg.out_path << '\n';
}

void cmd_identify(const CliConfig& cfg, std::ostream& log) {
    const Dataset ds = read_dataset_file(cfg.data_path);
    if (cfg.method == Method::bayes && (ds.u.rows() != 1 || ds.y.rows() != 1))
        throw UnsupportedError("method bayes supports single-input single-output data only");

    const Index t = ds.u.cols();
    Index f = cfg.horizon;
    if (f == 0) {
        if (const std::string* h = find_meta(ds.meta, "horizon")) {
            try {
                f = std::stol(*h);
            } catch (const std::exception&) {
                throw DataError(cfg.data_path + ": bad horizon in header '" + *h + "'");
            }
        } else {
            f = (t + 1) / 12;
        }
    }
    const Index p = cfg.past > 0 ? cfg.past : f;
    if (f < 1 || p < 1) throw DataError(cfg.data_path + ": data too short to choose a horizon");

    const HankelData data = assemble(ds.u, ds.y, f, p);
    Rng gibbs_rng = Rng::stream(cfg.bench.seed, 0, 0, 1);
    const std::vector<Method> methods{cfg.method};
    const PipelineResult res = run_pipeline(data, cfg.bench.scheme, methods, cfg.bench.gibbs, gibbs_rng);
    const WeightPair& w = res.rank.weights;
    const Matrix& est = res.estimates.at(cfg.method);

    Index order = 0;
    switch (cfg.method) {
        case Method::heuristic: order = res.order_neff; break;
        case Method::midpoint: order = res.order_midpoint; break;
        case Method::bayes: order = res.gibbs_rank; break;
        default:
            order = numeric_rank(w.apply(est), res.singular_values.size() ? res.singular_values(0) : 1.0);
    }

    Metadata meta = base_meta(cfg);
    meta.emplace_back("method", to_string(cfg.method));
    meta.emplace_back("scheme", to_string(cfg.bench.scheme));
    meta.emplace_back("f", std::to_string(f));
    meta.emplace_back("p", std::to_string(p));
    meta.emplace_back("N", std::to_string(data.n_cols));
    meta.emplace_back("seed", std::to_string(cfg.bench.seed));

    write_text_file(out_file(cfg, "estimate.csv"),
                    matrices_text({{"h_fp_ls", res.ls.h_fp_hat},
                                   {"h_fp_est", est},
                                   {"h_f_ls", res.ls.h_f_hat},
                                   {"w1", w.w1},
                                   {"w2", w.w2}},
                                  meta));
    write_text_file(out_file(cfg, "singular_values.csv"),
                    matrices_text({{"singular_values", Matrix(res.singular_values)}}, meta));

    std::ostringstream summary;
    for (const auto& [k, val] : meta) summary << "# " << k << '=' << val << '\n';
    summary << "key,value\n"
            << "sigma," << format_double(res.rank.sigma_level) << '\n'
            << "r_star," << res.rank.r_star << '\n'
            << "rank_exhausted," << (res.rank.exhausted ? 1 : 0) << '\n'
            << "order_neff," << res.order_neff << '\n'
            << "order_midpoint," << res.order_midpoint << '\n'
            << "order," << order << '\n'
            << "condition," << format_double(res.ls.condition) << '\n';
    if (cfg.method == Method::bayes)
        summary << "gibbs_rank," << res.gibbs_rank << '\n'
                << "gibbs_rank_warning," << (res.gibbs_rank_warning ? 1 : 0) << '\n';
    write_text_file(out_file(cfg, "summary.csv"), summary.str());

    log << "identify: method=" << to_string(cfg.method) << " scheme=" << to_string(cfg.bench.scheme)
        << " f=" << f << " p=" << p << " N=" << data.n_cols << " r*=" << res.rank.r_star
        << " order=" << order << " sigma=" << format_double(res.rank.sigma_level) << '\n';
}

std::string summary_json(const CliConfig& cfg, const RiskReport& report) {
    json j;
    j["version"] = kVersion;
    j["config"] = json::parse(resolved_config_json(cfg));
    j["scheme"] = to_string(report.scheme);
    j["reference"] = to_string(Method::heuristic);
    json methods = json::array();
    for (const auto& s : report.summary) {
        methods.push_back({{"method", to_string(s.method)},
                           {"normalized_risk", s.aggregate.normalized},
                           {"se_factor", s.aggregate.se_factor},
                           {"used", s.aggregate.used},
                           {"excluded", s.aggregate.excluded}});
    }
    j["methods"] = methods;
    j["failures"] = report.failures;
    j["wall_seconds"] = report.wall_seconds;
    return j.dump(2) + "\n";
}

void cmd_benchmark(const CliConfig& cfg, std::ostream& log) {
    const RiskReport report = run_benchmark(cfg.bench);

    std::ostringstream per_run;
    for (const auto& [k, val] : base_meta(cfg)) per_run << "# " << k << '=' << val << '\n';
    write_per_run_csv(per_run, report);
    write_text_file(out_file(cfg, "per_run.csv"), per_run.str());
    write_text_file(out_file(cfg, "summary.json"), summary_json(cfg, report));

    log << "benchmark: scheme=" << to_string(report.scheme) << " runs=" << cfg.bench.runs
        << " failures=" << report.failures << '\n';
    for (const auto& s : report.summary) {
        log << "  " << std::left << std::setw(10) << to_string(s.method) << std::right
            << std::fixed << std::setprecision(3) << s.aggregate.normalized << "  (x/ "
            << s.aggregate.se_factor << ")\n";
        log.unsetf(std::ios::floatfield);
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CliConfig cfg;
    try {
        cfg = parse_config(args);
    } catch (const CliError& e) {
        (e.code() == exit_ok ? out : err) << e.what();
        if (e.code() != exit_ok) err << '\n';
        return e.code();
    }
    try {
        if (cfg.verbosity > 0) err << "config: " << resolved_config_json(cfg) << '\n';
        if (cfg.command == "simulate") cmd_simulate(cfg, out);
        else if (cfg.command == "identify") cmd_identify(cfg, out);
        else cmd_benchmark(cfg, out);
        return exit_ok;
    } catch (const CliError& e) {
        err << "error: " << e.what() << '\n';
        return e.code();
    } catch (const UnsupportedError& e) {
        err << "unsupported: " << e.what() << '\n';
        return exit_usage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << " (value " << e.value() << ")\n";
        return exit_numerical;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace robsid::cli
