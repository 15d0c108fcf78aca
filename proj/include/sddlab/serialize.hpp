#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "sddlab/ensemble.hpp"
#include "sddlab/fp.hpp"
#include "sddlab/pref.hpp"
#include "sddlab/stats.hpp"
#include "sddlab/world.hpp"

namespace sddlab {

using ordered_json = nlohmann::ordered_json;

// {"K", "d", "d_v", "d_s", "sigma", "p", "seed"}; parsing requires exactly these keys.
ordered_json to_json(const GenerationConfig& config);
GenerationConfig generation_config_from_json(const nlohmann::json& j);

ordered_json to_json(const Estimate& e);
ordered_json to_json(const BoundInputs& in);
ordered_json to_json(const GridPointResult& r);
ordered_json to_json(const TheoremReport& report);
ordered_json to_json(const SddComparison& c);

// One row per grid point.
std::string theorem_report_csv(const TheoremReport& report);
// step,pi_yo,pi_yc,objective,benign_acc
std::string trace_csv(const DynamicsTrace& trace);
// label,q_s_0..,[x_<block>_<row>..]
std::string dataset_csv(const std::vector<Sample>& samples, bool include_x);

// Shortest round-trip text for a double ("nan", "inf", "-inf" for non-finite).
std::string format_double(double v);

// RFC 4180 quoting when the field needs it.
std::string csv_field(const std::string& s);

}  // namespace sddlab
