#pragma once

#include "pfeller/analysis.hpp"
#include "pfeller/classify.hpp"
#include "pfeller/radial_solver.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace pfeller {

/// Key order follows insertion, so equal inputs give byte-identical text.
using Json = nlohmann::ordered_json;

Json to_json(const ConvergenceVerdict& v);
Json to_json(const FellerVerdict& v);
Json to_json(const ClassificationReport& r);
Json to_json(const LambdaSpec& l);
Json to_json(const RadialSolution& s);
Json to_json(const DecayReport& d);
Json to_json(const SupportReport& s);
Json to_json(const NormReport& n);
Json to_json(const WeightedNormReport& w);
Json to_json(const GradientCheck& g);
Json to_json(const OrderingReport& o);
Json to_json(const PowerComparison& c);

/// Inverse of to_json(RadialSolution). Throws ConfigError on missing or malformed fields.
RadialSolution solution_from_json(const Json& j);
LambdaSpec lambda_from_json(const Json& j);

/// Aligned text table of the three verdicts.
std::string classification_table(const ClassificationReport& r);

/// Columns r, u, flux; flux is sigma^{m-1}|u'|^{p-2}u' scaled by the largest sigma^{m-1} on the grid.
std::string solution_csv(const RadialSolution& s);

/// Static polyline chart of u against r.
std::string solution_svg(const RadialSolution& s, std::string_view title);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double x);

}  // namespace pfeller
