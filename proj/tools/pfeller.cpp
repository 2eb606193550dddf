#include "pfeller/analysis.hpp"
#include "pfeller/classify.hpp"
#include "pfeller/errors.hpp"
#include "pfeller/io.hpp"
#include "pfeller/radial_solver.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <future>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

using namespace pfeller;

namespace {

enum Exit { kOk = 0, kInput = 1, kInconclusive = 2, kNonConvergence = 3, kVerifyFailed = 4 };

struct Flags {
    std::string config;
    std::string sigma;
    std::string family;
    double kappa = -1.0;
    int m = 0;
    double p = 0.0;
    double lambda = 0.0;
    double xi = 0.0;
    double R = 0.0;
    double inner = 0.0;
    double window = 0.0;
    int cells = 0;
    int k_max = 0;
    std::string rhs;
    std::string primitive;
    std::string out;
    std::vector<std::string> formats;
};

/// Everything a classify or solve run needs, after config and flags are merged.
struct RunConfig {
    std::string family = "euclidean";
    std::optional<std::string> sigma;
    double kappa = -1.0;
    int m = 3;
    double p = 2.0;
    double R = 1.0;
    std::string rhs = "power";
    double lambda = 1.0;
    std::optional<double> xi;
    std::string expression;
    std::optional<std::string> primitive;
    double inner_value = 1.0;
    double window = 10.0;
    int window_cells = 1024;
    int k_max = 12;
    double tol = 1e-9;
    double exhaustion_tol = 1e-10;
    std::optional<AsymptoticHint> hint;
    std::string out;
    std::vector<std::string> formats{"json"};
};

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void check_schema(const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (!j.contains("schema") || j.at("schema") != 1) throw ConfigError("config needs \"schema\": 1");
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
void take(const Json& j, const char* key, T& dst) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    try {
        dst = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

template <class T>
void take(const Json& j, const char* key, std::optional<T>& dst) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    T v;
    take(j, key, v);
    dst = v;
}

RunConfig load_run_config(const std::string& path) {
    RunConfig c;
    const Json j = read_json_file(path);
    check_schema(j);
    check_keys(j, {"schema", "manifold", "problem", "solver", "output"}, "config");
    if (j.contains("manifold")) {
        const Json& mj = j.at("manifold");
        check_keys(mj, {"family", "sigma", "kappa", "m", "hint"}, "manifold");
        take(mj, "family", c.family);
        take(mj, "sigma", c.sigma);
        take(mj, "kappa", c.kappa);
        take(mj, "m", c.m);
        if (mj.contains("hint")) {
            const Json& h = mj.at("hint");
            AsymptoticHint hint;
            take(h, "c", hint.c);
            take(h, "a", hint.a);
            take(h, "b", hint.b);
            c.hint = hint;
        }
    }
    if (j.contains("problem")) {
        const Json& pj = j.at("problem");
        check_keys(pj, {"p", "R", "rhs", "lambda", "xi", "expression", "primitive", "inner_value"}, "problem");
        take(pj, "p", c.p);
        take(pj, "R", c.R);
        take(pj, "rhs", c.rhs);
        take(pj, "lambda", c.lambda);
        take(pj, "xi", c.xi);
        take(pj, "expression", c.expression);
        take(pj, "primitive", c.primitive);
        take(pj, "inner_value", c.inner_value);
    }
    if (j.contains("solver")) {
        const Json& sj = j.at("solver");
        check_keys(sj, {"window", "window_cells", "k_max", "tol", "exhaustion_tol"}, "solver");
        take(sj, "window", c.window);
        take(sj, "window_cells", c.window_cells);
        take(sj, "k_max", c.k_max);
        take(sj, "tol", c.tol);
        take(sj, "exhaustion_tol", c.exhaustion_tol);
    }
    if (j.contains("output")) {
        const Json& oj = j.at("output");
        check_keys(oj, {"path", "formats"}, "output");
        take(oj, "path", c.out);
        take(oj, "formats", c.formats);
    }
    return c;
}

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON config with \"schema\": 1");
    cmd->add_option("--sigma", f.sigma, "warping function in the variable t");
    cmd->add_option("--family", f.family, "euclidean | hyperbolic | cusp_cubic | flare_cubic");
    cmd->add_option("--kappa", f.kappa, "curvature of the hyperbolic family");
    cmd->add_option("--m", f.m, "dimension");
    cmd->add_option("--p", f.p, "exponent in (1, inf)");
    cmd->add_option("--lambda", f.lambda, "coefficient of the power-law right-hand side");
    cmd->add_option("--xi", f.xi, "power of the right-hand side (default p-1)");
    cmd->add_option("--R", f.R, "inner radius");
    cmd->add_option("--out", f.out, "output path");
    cmd->add_option("--format", f.formats, "json | csv | svg (repeatable)")
        ->check(CLI::IsMember({"json", "csv", "svg"}));
}

RunConfig merge(CLI::App* cmd, const Flags& f) {
    RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
    const auto given = [&](const char* name) { return cmd->get_option_no_throw(name) && cmd->count(name) > 0; };
    if (given("--family")) {
        c.family = f.family;
        c.sigma.reset();
    }
    if (given("--sigma")) c.sigma = f.sigma;
    if (given("--kappa")) c.kappa = f.kappa;
    if (given("--m")) c.m = f.m;
    if (given("--p")) c.p = f.p;
    if (given("--lambda")) c.lambda = f.lambda;
    if (given("--xi")) c.xi = f.xi;
    if (given("--R")) c.R = f.R;
    if (given("--inner")) c.inner_value = f.inner;
    if (given("--window")) c.window = f.window;
    if (given("--cells")) c.window_cells = f.cells;
    if (given("--k-max")) c.k_max = f.k_max;
    if (given("--rhs")) {
        c.rhs = "custom";
        c.expression = f.rhs;
    }
    if (given("--primitive")) c.primitive = f.primitive;
    if (given("--out")) c.out = f.out;
    if (given("--format")) c.formats = f.formats;
    return c;
}

ModelManifold build_manifold(const RunConfig& c) {
    if (c.m < 1) throw ConfigError("dimension m must be at least 1");
    return ModelManifold(c.m, c.sigma ? parse_sigma(*c.sigma) : WarpingFunction::family(c.family, c.kappa));
}

LambdaSpec build_lambda(const RunConfig& c) {
    if (c.rhs == "zero") return LambdaSpec::zero();
    if (c.rhs == "power") return LambdaSpec::power_law(c.lambda, c.xi.value_or(c.p - 1));
    if (c.rhs == "custom") {
        if (c.primitive) return LambdaSpec::custom(c.expression, *c.primitive);
        return LambdaSpec::custom(c.expression);
    }
    throw ConfigError("rhs must be power, zero or custom, got '" + c.rhs + "'");
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << text;
}

std::string strip_extension(const std::string& path) {
    const auto slash = path.find_last_of('/');
    const auto dot = path.find_last_of('.');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) return path.substr(0, dot);
    return path;
}

// ------------------------------------------------------------------ classify

int cmd_classify(const RunConfig& c) {
    const auto manifold = build_manifold(c);
    if (!(c.p > 1.0)) throw ConfigError("p must lie in (1, inf)");
    ClassifyOptions opts;
    opts.hint = c.hint;
    const auto report = classify(manifold, c.p, opts);
    std::cout << classification_table(report);
    if (!c.out.empty()) write_file(c.out, to_json(report).dump(2) + "\n");
    return report.any_inconclusive() ? kInconclusive : kOk;
}

// ------------------------------------------------------------------ solve

int cmd_solve(const RunConfig& c) {
    const auto manifold = build_manifold(c);
    const ExteriorProblem problem{manifold, c.R, c.p, build_lambda(c), c.inner_value};
    problem.validate();
    if (!(c.window > 0)) throw ConfigError("window must be positive");
    if (c.window_cells < 16) throw ConfigError("window_cells must be at least 16");
    if (c.k_max < 0) throw ConfigError("k_max must be nonnegative");

    RadialSolution sol = [&] {
        if (c.inner_value == 0.0) {
            return solve_annulus_bvp(problem, 0.0, Grid::uniform(c.R, c.R + c.window, c.window_cells));
        }
        ExhaustionOptions o;
        o.window_cells = c.window_cells;
        o.k_max = c.k_max;
        o.tol = c.exhaustion_tol;
        o.solver.tol = c.tol;
        return minimal_exterior_solution(problem, c.window, o);
    }();

    std::ostringstream summary;
    summary << "provenance: " << to_string(sol.provenance) << "\n";
    summary << "nodes: " << sol.grid.size() << " on [" << format_double(sol.grid.front()) << ", "
            << format_double(sol.grid.back()) << "]\n";
    summary << "residual: " << format_double(sol.residual_norm) << " (tolerance " << format_double(sol.tolerance)
            << ")\n";
    if (sol.exhaustion) {
        summary << "exhaustion: " << sol.exhaustion->widths.size() << " widths, "
                << (sol.exhaustion->settled ? "settled" : "not settled") << "\n";
        if (!sol.exhaustion->settled) summary << "warning: ExhaustionNotSettled\n";
    }
    if (c.inner_value > 0.0 && sol.grid.back() - sol.grid.front() >= 4 * sol.grid.front()) {
        const auto d = decay_limit(sol);
        summary << "decay: " << to_string(d.classification) << " (limit estimate " << format_double(d.limit_estimate)
                << ")\n";
        if (d.classification == DecayClass::PositiveLimit) summary << "warning: PositiveLimit, no decay on the window\n";
    }

    const std::string title = "u(r), " + manifold.sigma().tag().name() + ", m=" + std::to_string(c.m) +
                              ", p=" + format_double(c.p);
    if (c.out.empty()) {
        std::cerr << summary.str();
        for (const auto& f : c.formats) {
            if (f == "json") std::cout << to_json(sol).dump(2) << "\n";
            if (f == "csv") std::cout << solution_csv(sol);
            if (f == "svg") std::cout << solution_svg(sol, title);
        }
        return kOk;
    }
    std::cout << summary.str();
    const std::string base = strip_extension(c.out);
    bool csv = false;
    for (const auto& f : c.formats) {
        if (f == "json") write_file(base + ".json", to_json(sol).dump(2) + "\n");
        if (f == "csv" || f == "svg") csv = true;
        if (f == "svg") write_file(base + ".svg", solution_svg(sol, title));
    }
    if (csv) write_file(base + ".csv", solution_csv(sol));
    return kOk;
}

// ------------------------------------------------------------------ verify

struct Fixture {
    std::string family;
    double kappa = -1.0;
    int m = 3;
    double p = 2.0;
    double lambda = 1.0;
    double window = 12.0;
    int window_cells = 512;
    std::optional<std::pair<double, double>> comparison;
};

struct Row {
    std::string fixture;
    std::string property;
    bool pass;
    std::string detail;
};

std::string fixture_name(const Fixture& f) {
    return f.family + " m=" + std::to_string(f.m) + " p=" + format_double(f.p);
}

RadialSolution minimal_for(const Fixture& f, double lambda) {
    const ExteriorProblem prob{ModelManifold(f.m, WarpingFunction::family(f.family, f.kappa)), 1.0, f.p,
                               LambdaSpec::power_law(lambda, f.p - 1), 1.0};
    ExhaustionOptions o;
    o.window_cells = f.window_cells;
    return minimal_exterior_solution(prob, f.window, o);
}

std::vector<Row> run_fixture(const Fixture& f) {
    std::vector<Row> rows;
    const std::string name = fixture_name(f);
    const auto row = [&](const std::string& prop, bool pass, const std::string& detail) {
        rows.push_back({name, prop, pass, detail});
    };
    try {
        const ModelManifold manifold(f.m, WarpingFunction::family(f.family, f.kappa));
        const auto report = classify(manifold, f.p);
        row("classification", !report.any_inconclusive() && report.consistent(),
            "feller " + to_string(report.feller.feller) + ", complete " +
                to_string(report.stochastically_complete.status));
        const bool feller = report.feller.feller == Tristate::True;
        const bool complete = report.stochastically_complete.diverges();

        const auto h = minimal_for(f, f.lambda);
        const auto d = decay_limit(h);
        const DecayClass want = feller ? DecayClass::DecaysToZero : DecayClass::PositiveLimit;
        row("decay", d.classification == want,
            to_string(d.classification) + " (expected " + to_string(want) + ", estimate " +
                format_double(d.limit_estimate) + ")");

        if (complete) {
            double rise = 0.0;
            for (std::size_t i = 1; i < h.values.size(); ++i) rise = std::max(rise, h.values[i] - h.values[i - 1]);
            row("monotone", rise <= 1e-8, "max increase " + format_double(rise));

            bool finite = true;
            std::string detail;
            for (double q : {f.p - 1, f.p, std::numeric_limits<double>::infinity()}) {
                const auto n = lq_norm(h, q);
                finite = finite && n.trend == TailTrend::Finite && std::isfinite(n.value);
                detail += "q=" + format_double(q) + ":" + to_string(n.trend) + " ";
            }
            row("integrability", finite, detail);

            const auto g = gradient_lp_check(h);
            row("gradient", g.skipped || g.trend == TailTrend::Finite,
                g.skipped ? g.explanation : "gradient " + to_string(g.trend));
            if (feller) {
                const double C = 0.9 * std::pow(f.lambda * f.p, 1 / f.p);
                const auto w = weighted_sobolev_norm(h, C);
                row("weighted-sobolev", w.trend == TailTrend::Finite,
                    "C=" + format_double(C) + " " + to_string(w.trend));
            }
        }

        if (f.comparison) {
            const auto [small, big] = *f.comparison;
            const auto hs = minimal_for(f, small);
            const auto hb = minimal_for(f, big);
            const auto o = compare_ordering(hb, hs, 1e-6);
            row("comparison", o.holds, "max violation " + format_double(o.max_violation));
            try {
                const auto pc = lambda_power_comparison(hs, hb);
                row("power-comparison", pc.ordering.holds,
                    "alpha " + format_double(pc.alpha) + ", max violation " + format_double(pc.ordering.max_violation));
            } catch (const Error& e) {
                row("power-comparison", false, e.what());
            }
        }
    } catch (const Error& e) {
        row("solve", false, e.what());
    }
    return rows;
}

int cmd_verify(const std::string& path, const std::string& out, int jobs) {
    const Json j = read_json_file(path);
    check_schema(j);
    check_keys(j, {"schema", "name", "mutation", "fixtures"}, "fixture set");
    std::string mutation;
    take(j, "mutation", mutation);
    if (!mutation.empty() && mutation != "flip_lambda_order") throw ConfigError("unknown mutation '" + mutation + "'");
    if (!j.contains("fixtures") || !j.at("fixtures").is_array() || j.at("fixtures").empty())
        throw ConfigError("no fixtures");

    std::vector<Fixture> fixtures;
    for (const auto& fj : j.at("fixtures")) {
        check_keys(fj, {"family", "kappa", "m", "p", "lambda", "window", "window_cells", "comparison"}, "fixture");
        Fixture f;
        take(fj, "family", f.family);
        take(fj, "kappa", f.kappa);
        take(fj, "m", f.m);
        take(fj, "p", f.p);
        take(fj, "lambda", f.lambda);
        take(fj, "window", f.window);
        take(fj, "window_cells", f.window_cells);
        if (fj.contains("comparison")) {
            std::vector<double> pair;
            take(fj, "comparison", pair);
            if (pair.size() != 2) throw ConfigError("comparison needs [lambda_small, lambda_big]");
            f.comparison = mutation == "flip_lambda_order" ? std::pair{pair[1], pair[0]} : std::pair{pair[0], pair[1]};
        }
        // fail on bad names before any computation
        (void)WarpingFunction::family(f.family, f.kappa);
        if (f.m < 1 || !(f.p > 1.0) || !(f.lambda > 0.0)) throw ConfigError("invalid fixture " + fixture_name(f));
        fixtures.push_back(f);
    }

    std::vector<std::vector<Row>> results(fixtures.size());
    const std::size_t batch = static_cast<std::size_t>(std::max(1, jobs));
    for (std::size_t start = 0; start < fixtures.size(); start += batch) {
        std::vector<std::future<std::vector<Row>>> running;
        const std::size_t stop = std::min(fixtures.size(), start + batch);
        for (std::size_t i = start; i < stop; ++i)
            running.push_back(std::async(batch > 1 ? std::launch::async : std::launch::deferred, run_fixture,
                                         std::cref(fixtures[i])));
        for (std::size_t i = start; i < stop; ++i) results[i] = running[i - start].get();
    }

    Json report = Json::array();
    std::vector<Row> failures;
    for (const auto& rows : results) {
        for (const auto& r : rows) {
            std::cout << (r.pass ? "PASS  " : "FAIL  ") << r.fixture << "  " << r.property << "  " << r.detail << "\n";
            report.push_back({{"fixture", r.fixture}, {"property", r.property}, {"pass", r.pass}, {"detail", r.detail}});
            if (!r.pass) failures.push_back(r);
        }
    }
    if (!out.empty()) write_file(out, report.dump(2) + "\n");
    if (failures.empty()) return kOk;
    std::cerr << failures.size() << " failing rows:\n";
    for (const auto& r : failures) std::cerr << "  " << r.fixture << "  " << r.property << "  " << r.detail << "\n";
    return kVerifyFailed;
}

// ------------------------------------------------------------------ export

int cmd_export(const std::string& input, const std::string& format, const std::string& out) {
    const auto sol = solution_from_json(read_json_file(input));
    std::string text;
    if (format == "json") text = to_json(sol).dump(2) + "\n";
    if (format == "csv") text = solution_csv(sol);
    if (format == "svg")
        text = solution_svg(sol, "u(r), " + sol.manifold.sigma().tag().name() + ", m=" + std::to_string(sol.m()));
    if (out.empty())
        std::cout << text;
    else
        write_file(out, text);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"p-Laplace exterior problems on model manifolds"};
    app.require_subcommand(1);

    Flags flags;
    auto* classify_cmd = app.add_subcommand("classify", "p-hyperbolicity, p-stochastic completeness, p-Feller");
    add_common(classify_cmd, flags);

    auto* solve_cmd = app.add_subcommand("solve", "minimal exterior solution");
    add_common(solve_cmd, flags);
    solve_cmd->add_option("--inner", flags.inner, "boundary value on the inner sphere");
    solve_cmd->add_option("--window", flags.window, "report window width W");
    solve_cmd->add_option("--cells", flags.cells, "cells on the report window");
    solve_cmd->add_option("--k-max", flags.k_max, "largest exhaustion index");
    solve_cmd->add_option("--rhs", flags.rhs, "custom nondecreasing right-hand side in the variable u");
    solve_cmd->add_option("--primitive", flags.primitive, "its primitive, if known");

    std::string verify_path;
    std::string verify_out;
    int jobs = 1;
    auto* verify_cmd = app.add_subcommand("verify", "property table over a fixture set");
    verify_cmd->add_option("--config,fixtures", verify_path, "fixture set JSON")->required();
    verify_cmd->add_option("--out", verify_out, "JSON report path");
    verify_cmd->add_option("--jobs", jobs, "fixtures run concurrently");

    std::string input;
    std::string export_format = "csv";
    std::string export_out;
    auto* export_cmd = app.add_subcommand("export", "convert a solution JSON to csv, svg or json");
    export_cmd->add_option("--input", input, "solution JSON written by solve")->required();
    export_cmd->add_option("--format", export_format, "json | csv | svg")->check(CLI::IsMember({"json", "csv", "svg"}));
    export_cmd->add_option("--out", export_out, "output path, standard output if omitted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInput;
    }

    try {
        if (*classify_cmd) return cmd_classify(merge(classify_cmd, flags));
        if (*solve_cmd) return cmd_solve(merge(solve_cmd, flags));
        if (*verify_cmd) return cmd_verify(verify_path, verify_out, jobs);
        if (*export_cmd) return cmd_export(input, export_format, export_out);
    } catch (const NonConvergence& e) {
        std::cerr << "error: " << e.what() << "\n";
        for (const auto& line : e.trace()) std::cerr << "  " << line << "\n";
        return kNonConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInput;
    }
    return kInput;
}
