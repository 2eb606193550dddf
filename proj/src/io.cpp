#include "pfeller/io.hpp"

#include "pfeller/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace pfeller {

namespace {

// JSON has no infinities or NaN; they become strings.
Json number(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

Json optional_number(const std::optional<double>& x) { return x ? number(*x) : Json(nullptr); }

std::string lambda_kind(LambdaSpec::Kind k) {
    switch (k) {
    case LambdaSpec::Kind::PowerLaw:
        return "power";
    case LambdaSpec::Kind::CustomMonotone:
        return "custom";
    case LambdaSpec::Kind::Zero:
        break;
    }
    return "zero";
}

template <class T>
T field(const Json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

double read_number(const Json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return INFINITY;
        if (s == "-inf") return -INFINITY;
        if (s == "nan") return NAN;
    }
    if (!j.is_number()) throw ConfigError("expected a number, got " + j.dump());
    return j.get<double>();
}

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

std::string xml_escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        switch (c) {
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '&':
            out += "&amp;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

std::string family_key(Family f) {
    switch (f) {
    case Family::Euclidean:
        return "euclidean";
    case Family::Hyperbolic:
        return "hyperbolic";
    case Family::CuspCubic:
        return "cusp_cubic";
    case Family::FlareCubic:
        return "flare_cubic";
    case Family::Custom:
        break;
    }
    return "custom";
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

}  // namespace

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

Json to_json(const ConvergenceVerdict& v) {
    Json windows = Json::array();
    for (const auto& w : v.windows) windows.push_back({number(w.upper), number(w.partial), number(w.log_partial)});
    Json j;
    j["status"] = to_string(v.status);
    j["estimate"] = number(v.estimate);
    j["error_bound"] = number(v.error_bound);
    j["growth_exponent"] = number(v.growth_exponent);
    j["source"] = v.source;
    j["evidence"] = v.evidence;
    j["windows"] = windows;
    return j;
}

Json to_json(const FellerVerdict& v) {
    Json j;
    j["feller"] = to_string(v.feller);
    j["branch"] = to_string(v.branch);
    j["hyperbolic"] = to_json(v.hyperbolic);
    j["volume"] = v.volume ? to_json(*v.volume) : Json(nullptr);
    j["tail_ratio"] = v.tail_ratio ? to_json(*v.tail_ratio) : Json(nullptr);
    return j;
}

Json to_json(const ClassificationReport& r) {
    Json j;
    j["sigma"] = r.sigma;
    j["family"] = r.family;
    j["m"] = r.m;
    j["p"] = number(r.p);
    j["p_hyperbolic"] = r.hyperbolic.converges() ? "yes" : r.hyperbolic.diverges() ? "no" : "unknown";
    j["p_stochastically_complete"] = r.stochastically_complete.diverges()    ? "yes"
                                     : r.stochastically_complete.converges() ? "no"
                                                                             : "unknown";
    j["p_feller"] = r.feller.feller == Tristate::True ? "yes" : r.feller.feller == Tristate::False ? "no" : "unknown";
    j["consistent"] = r.consistent();
    j["hyperbolic"] = to_json(r.hyperbolic);
    j["stochastic_completeness"] = to_json(r.stochastically_complete);
    j["feller"] = to_json(r.feller);
    return j;
}

Json to_json(const LambdaSpec& l) {
    Json j;
    j["kind"] = lambda_kind(l.kind());
    if (l.kind() == LambdaSpec::Kind::PowerLaw) {
        j["lambda"] = number(l.lambda());
        j["xi"] = number(l.xi());
    }
    if (l.kind() == LambdaSpec::Kind::CustomMonotone) {
        j["expression"] = l.expression_text();
        const auto prim = l.primitive_text();
        j["primitive"] = prim ? Json(*prim) : Json(nullptr);
    }
    return j;
}

LambdaSpec lambda_from_json(const Json& j) {
    const auto kind = field<std::string>(j, "kind");
    if (kind == "zero") return LambdaSpec::zero();
    if (kind == "power") return LambdaSpec::power_law(read_number(j.at("lambda")), read_number(j.at("xi")));
    if (kind == "custom") {
        const auto text = field<std::string>(j, "expression");
        if (j.contains("primitive") && j.at("primitive").is_string())
            return LambdaSpec::custom(text, j.at("primitive").get<std::string>());
        return LambdaSpec::custom(text);
    }
    throw ConfigError("unknown lambda kind '" + kind + "'");
}

Json to_json(const RadialSolution& s) {
    Json j;
    Json manifold;
    manifold["m"] = s.m();
    manifold["family"] = family_key(s.manifold.sigma().tag().family);
    if (s.manifold.sigma().tag().family == Family::Hyperbolic) manifold["kappa"] = s.manifold.sigma().tag().kappa;
    manifold["sigma"] = s.manifold.sigma().text();
    j["manifold"] = manifold;
    j["p"] = number(s.p);
    j["lambda"] = to_json(s.lambda);
    j["inner_value"] = number(s.inner_value);
    j["outer_value"] = number(s.outer_value);
    j["provenance"] = to_string(s.provenance);
    j["residual_norm"] = number(s.residual_norm);
    j["tolerance"] = number(s.tolerance);
    j["epsilon_final"] = number(s.epsilon_final);
    j["iterations"] = s.iterations;
    j["spacing"] = to_string(s.grid.spacing());
    Json nodes = Json::array();
    Json values = Json::array();
    for (std::size_t i = 0; i < s.grid.size(); ++i) {
        nodes.push_back(s.grid[i]);
        values.push_back(number(s.values[i]));
    }
    j["grid"] = nodes;
    j["values"] = values;
    if (s.exhaustion) {
        Json e;
        e["settled"] = s.exhaustion->settled;
        e["widths"] = s.exhaustion->widths;
        Json diffs = Json::array();
        for (double d : s.exhaustion->sup_differences) diffs.push_back(number(d));
        e["sup_differences"] = diffs;
        e["max_monotonicity_violation"] = number(s.exhaustion->max_monotonicity_violation);
        j["exhaustion"] = e;
    } else {
        j["exhaustion"] = nullptr;
    }
    j["trace"] = s.trace;
    return j;
}

RadialSolution solution_from_json(const Json& j) {
    try {
        const Json& mj = j.at("manifold");
        const auto family = field<std::string>(mj, "family");
        const int m = field<int>(mj, "m");
        WarpingFunction sigma = family == "custom"
                                    ? parse_sigma(field<std::string>(mj, "sigma"))
                                    : WarpingFunction::family(family, mj.contains("kappa") ? read_number(mj.at("kappa")) : -1.0);
        std::vector<double> nodes;
        std::vector<double> values;
        for (const auto& x : j.at("grid")) nodes.push_back(read_number(x));
        for (const auto& x : j.at("values")) values.push_back(read_number(x));
        if (nodes.size() != values.size()) throw ConfigError("grid and values differ in length");
        const auto spacing = field<std::string>(j, "spacing") == "uniform" ? Grid::Spacing::Uniform : Grid::Spacing::Graded;
        const auto prov_text = field<std::string>(j, "provenance");
        Provenance prov = Provenance::Newton;
        if (prov_text == "energy") prov = Provenance::Energy;
        else if (prov_text == "exhaustion-limit") prov = Provenance::ExhaustionLimit;
        else if (prov_text != "newton") throw ConfigError("unknown provenance '" + prov_text + "'");

        std::optional<ExhaustionInfo> info;
        if (j.contains("exhaustion") && j.at("exhaustion").is_object()) {
            const Json& e = j.at("exhaustion");
            ExhaustionInfo x;
            x.settled = field<bool>(e, "settled");
            for (const auto& w : e.at("widths")) x.widths.push_back(read_number(w));
            for (const auto& d : e.at("sup_differences")) x.sup_differences.push_back(read_number(d));
            x.max_monotonicity_violation = read_number(e.at("max_monotonicity_violation"));
            info = std::move(x);
        }
        std::vector<std::string> trace;
        if (j.contains("trace")) trace = j.at("trace").get<std::vector<std::string>>();
        return RadialSolution{ModelManifold(m, std::move(sigma)),
                              read_number(j.at("p")),
                              lambda_from_json(j.at("lambda")),
                              read_number(j.at("inner_value")),
                              read_number(j.at("outer_value")),
                              Grid::from_nodes(std::move(nodes), spacing),
                              std::move(values),
                              read_number(j.at("residual_norm")),
                              read_number(j.at("tolerance")),
                              read_number(j.at("epsilon_final")),
                              prov,
                              field<int>(j, "iterations"),
                              std::move(trace),
                              std::move(info)};
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed solution: ") + e.what());
    }
}

Json to_json(const DecayReport& d) {
    Json j;
    j["classification"] = to_string(d.classification);
    j["limit_estimate"] = number(d.limit_estimate);
    j["method"] = d.method;
    j["window"] = {number(d.window_start), number(d.window_end)};
    j["half_averages"] = {number(d.first_half_average), number(d.second_half_average)};
    return j;
}

Json to_json(const SupportReport& s) {
    Json j;
    j["support_radius"] = optional_number(s.support_radius);
    j["extrapolated_radius"] = optional_number(s.extrapolated_radius);
    j["tau_u"] = number(s.tau_u);
    j["tau_g"] = number(s.tau_g);
    return j;
}

Json to_json(const NormReport& n) {
    return Json{{"value", number(n.value)}, {"trend", to_string(n.trend)}, {"note", n.note}};
}

Json to_json(const WeightedNormReport& w) {
    return Json{{"value", number(w.value)}, {"trend", to_string(w.trend)}, {"hypothesis_holds", w.hypothesis_holds}};
}

Json to_json(const GradientCheck& g) {
    return Json{{"skipped", g.skipped},
                {"explanation", g.explanation},
                {"value", number(g.value)},
                {"trend", to_string(g.trend)}};
}

Json to_json(const OrderingReport& o) { return Json{{"holds", o.holds}, {"max_violation", number(o.max_violation)}}; }

Json to_json(const PowerComparison& c) { return Json{{"alpha", number(c.alpha)}, {"ordering", to_json(c.ordering)}}; }

std::string classification_table(const ClassificationReport& r) {
    const auto verdict = [](const ConvergenceVerdict& v) {
        std::string s = to_string(v.status);
        if (v.converges()) s += " (" + format_double(v.estimate) + ")";
        if (v.source != "quadrature") s += " [" + v.source + "]";
        return s;
    };
    std::ostringstream os;
    os << "sigma = " << r.sigma << ", m = " << r.m << ", p = " << format_double(r.p) << "\n";
    os << pad("property", 14) << pad("answer", 9) << "evidence\n";
    const std::string hyp = r.hyperbolic.converges() ? "yes" : r.hyperbolic.diverges() ? "no" : "unknown";
    const auto& sc = r.stochastically_complete;
    const std::string comp = sc.diverges() ? "yes" : sc.converges() ? "no" : "unknown";
    const std::string fel = r.feller.feller == Tristate::True ? "yes" : r.feller.feller == Tristate::False ? "no" : "unknown";
    os << pad("hyperbolic:", 14) << pad(hyp, 9) << "int sigma^{-(m-1)/(p-1)}: " << verdict(r.hyperbolic) << "\n";
    os << pad("complete:", 14) << pad(comp, 9) << "int (V/sigma^{m-1})^{1/(p-1)}: " << verdict(sc) << "\n";
    os << pad("feller:", 14) << pad(fel, 9) << "branch " << to_string(r.feller.branch) << "\n";
    os << pad("consistent:", 14) << yes_no(r.consistent()) << "\n";
    return os.str();
}

std::string solution_csv(const RadialSolution& s) {
    const auto flux = nodal_flux(s);
    std::string out = "r,u,flux\n";
    for (std::size_t i = 0; i < s.grid.size(); ++i)
        out += format_double(s.grid[i]) + "," + format_double(s.values[i]) + "," + format_double(flux[i]) + "\n";
    return out;
}

std::string solution_svg(const RadialSolution& s, std::string_view title) {
    constexpr double W = 640, H = 400, L = 60, Rm = 20, T = 40, B = 50;
    const double r0 = s.grid.front();
    const double r1 = s.grid.back();
    const double umax = std::max(1e-300, *std::max_element(s.values.begin(), s.values.end()));
    const auto X = [&](double r) { return L + (r - r0) / (r1 - r0) * (W - L - Rm); };
    const auto Y = [&](double u) { return H - B - u / umax * (H - T - B); };

    // thin the polyline to about one point per horizontal pixel
    const std::size_t stride = std::max<std::size_t>(1, s.grid.size() / 1200);
    std::ostringstream os;
    os.precision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << " " << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
       << xml_escape(title) << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - Rm << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double r = r0 + (r1 - r0) * k / 4;
        const double u = umax * k / 4;
        os << "<text x=\"" << X(r) << "\" y=\"" << H - B + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << r << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << Y(u) + 4
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << u << "</text>\n";
    }
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">r</text>\n";
    os << "<text x=\"16\" y=\"" << H / 2 << "\" font-family=\"sans-serif\" font-size=\"12\">u</text>\n";
    os << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.grid.size(); i += stride) os << X(s.grid[i]) << "," << Y(s.values[i]) << " ";
    os << X(s.grid.back()) << "," << Y(s.values.back()) << "\"/>\n</svg>\n";
    return os.str();
}

}  // namespace pfeller
