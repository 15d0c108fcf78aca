#include "sddlab/serialize.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include "sddlab/error.hpp"

namespace sddlab {

using json = nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

ordered_json to_json(const GenerationConfig& c) {
  ordered_json j;
  j["K"] = c.K;
  j["d"] = c.d;
  j["d_v"] = c.d_v;
  j["d_s"] = c.d_s;
  j["sigma"] = c.sigma;
  j["p"] = c.p;
  j["seed"] = c.seed;
  return j;
}

GenerationConfig generation_config_from_json(const json& j) {
  static const std::set<std::string> kKeys = {"K", "d", "d_v", "d_s", "sigma", "p", "seed"};
  if (!j.is_object()) throw ValidationError("generation config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!kKeys.count(key)) throw ValidationError("unknown generation config key '" + key + "'");
  for (const auto& key : kKeys)
    if (!j.contains(key)) throw ValidationError("generation config is missing '" + key + "'");
  auto integer = [&](const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ValidationError(std::string("'") + key + "' must be an integer");
    return v.get<int>();
  };
  auto number = [&](const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number()) throw ValidationError(std::string("'") + key + "' must be a number");
    return v.get<double>();
  };
  GenerationConfig c;
  c.K = integer("K");
  c.d = integer("d");
  c.d_v = integer("d_v");
  c.d_s = integer("d_s");
  c.sigma = number("sigma");
  c.p = number("p");
  const auto& seed = j.at("seed");
  if (!seed.is_number_unsigned()) throw ValidationError("'seed' must be a non-negative integer");
  c.seed = seed.get<std::uint64_t>();
  c.validate();
  return c;
}

ordered_json to_json(const Estimate& e) {
  ordered_json j;
  j["value"] = e.value;
  j["stderr"] = e.std_error;
  j["samples"] = e.samples;
  return j;
}

ordered_json to_json(const BoundInputs& in) {
  ordered_json j;
  j["n_bar_v"] = in.n_bar_v;
  j["n_bar_s"] = in.n_bar_s;
  j["n_star_v"] = in.n_star_v;
  j["n_star_s"] = in.n_star_s;
  j["n_star_vo"] = in.n_star_vo;
  j["n_star_so"] = in.n_star_so;
  j["p"] = in.p;
  j["K"] = in.K;
  return j;
}

ordered_json to_json(const GridPointResult& r) {
  ordered_json j;
  j["inputs"] = to_json(r.inputs);
  j["bound"] = to_json(r.bound);
  j["lemma1_bound"] = to_json(r.lemma1);
  j["acc_tilde"] = to_json(r.acc_tilde);
  j["acc_bar"] = to_json(r.acc_bar);
  j["diff"] = r.diff;
  j["se_diff"] = r.se_diff;
  j["bound_violated"] = r.bound_violated;
  j["lemma1_violated"] = r.lemma1_violated;
  j["significant_drop"] = r.significant_drop;
  return j;
}

ordered_json to_json(const TheoremReport& report) {
  ordered_json j;
  j["theorem"] = report.theorem;
  j["samples"] = report.options.samples;
  j["sigma"] = report.options.sigma;
  j["lambda"] = report.options.lambda;
  j["seed"] = report.options.seed;
  j["fp_samples"] = report.options.fp.samples;
  j["points"] = ordered_json::array();
  for (const auto& r : report.points) j["points"].push_back(to_json(r));
  j["violations"] = report.violations;
  j["rejected"] = report.rejected;
  if (report.witness) {
    j["witness_index"] = *report.witness;
  } else {
    j["witness_index"] = nullptr;
  }
  return j;
}

ordered_json to_json(const SddComparison& c) {
  ordered_json j;
  j["protected"] = {{"acc_before", c.protected_run.acc_before},
                    {"acc_after", c.protected_run.acc_after},
                    {"drop", c.protected_run.drop()}};
  j["unprotected"] = {{"acc_before", c.unprotected_run.acc_before},
                      {"acc_after", c.unprotected_run.acc_after},
                      {"drop", c.unprotected_run.drop()}};
  j["protected_benign_fraction"] = c.protected_benign_fraction;
  j["unprotected_disjoint"] = c.unprotected_disjoint;
  return j;
}

std::string theorem_report_csv(const TheoremReport& report) {
  std::string out =
      "n_bar_v,n_bar_s,n_star_v,n_star_s,n_star_vo,n_star_so,p,K,bound,lemma1_bound,acc_tilde,"
      "se_tilde,acc_bar,se_bar,diff,se_diff,bound_violated,significant_drop\n";
  for (const auto& r : report.points) {
    const auto& in = r.inputs;
    out += std::to_string(in.n_bar_v) + "," + std::to_string(in.n_bar_s) + "," +
           std::to_string(in.n_star_v) + "," + std::to_string(in.n_star_s) + "," +
           std::to_string(in.n_star_vo) + "," + std::to_string(in.n_star_so) + "," +
           format_double(in.p) + "," + std::to_string(in.K) + "," + format_double(r.bound.value) +
           "," + format_double(r.lemma1.value) + "," + format_double(r.acc_tilde.value) + "," +
           format_double(r.acc_tilde.std_error) + "," + format_double(r.acc_bar.value) + "," +
           format_double(r.acc_bar.std_error) + "," + format_double(r.diff) + "," +
           format_double(r.se_diff) + "," + (r.bound_violated ? "1" : "0") + "," +
           (r.significant_drop ? "1" : "0") + "\n";
  }
  return out;
}

std::string trace_csv(const DynamicsTrace& trace) {
  std::string out = "step,pi_yo,pi_yc,objective,benign_acc\n";
  for (const auto& r : trace.records) {
    out += std::to_string(r.step) + "," + format_double(r.pi_yo) + "," + format_double(r.pi_yc) +
           "," + format_double(r.objective) + "," + format_double(r.benign_acc) + "\n";
  }
  return out;
}

std::string dataset_csv(const std::vector<Sample>& samples, bool include_x) {
  std::string out = "label";
  if (!samples.empty()) {
    const auto& s0 = samples.front();
    for (std::size_t j = 0; j < s0.q_s.size(); ++j) out += ",q_s_" + std::to_string(j);
    if (include_x)
      for (Eigen::Index b = 0; b < s0.x.cols(); ++b)
        for (Eigen::Index r = 0; r < s0.x.rows(); ++r)
          out += ",x_" + std::to_string(b) + "_" + std::to_string(r);
  }
  out += "\n";
  for (const auto& s : samples) {
    out += std::to_string(s.label);
    for (int q : s.q_s) out += "," + std::to_string(q);
    if (include_x)
      for (Eigen::Index b = 0; b < s.x.cols(); ++b)
        for (Eigen::Index r = 0; r < s.x.rows(); ++r) out += "," + format_double(s.x(r, b));
    out += "\n";
  }
  return out;
}

}  // namespace sddlab
