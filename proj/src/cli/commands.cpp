#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "context.hpp"
#include "sddlab/accuracy.hpp"
#include "sddlab/cli.hpp"
#include "sddlab/embed.hpp"
#include "sddlab/ensemble.hpp"
#include "sddlab/error.hpp"
#include "sddlab/forge.hpp"
#include "sddlab/fp.hpp"
#include "sddlab/io.hpp"
#include "sddlab/log.hpp"
#include "sddlab/pref.hpp"
#include "sddlab/serialize.hpp"
#include "sddlab/world.hpp"

namespace sddlab::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

int as_int(long long v, const char* name) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ValidationError(std::string(name) + " is out of range");
  return static_cast<int>(v);
}

int int_param(const RunContext& ctx, const char* name) { return as_int(ctx.get_int(name), name); }

void emit_stdout(RunContext& ctx, const ordered_json& j) { ctx.out() << j.dump() << '\n'; }

// ---- gen -------------------------------------------------------------------

int cmd_gen(RunContext& ctx) {
  GenerationConfig c;
  c.K = int_param(ctx, "K");
  c.d_v = int_param(ctx, "d_v");
  c.d_s = int_param(ctx, "d_s");
  c.d = int_param(ctx, "d");
  if (c.d == 0) c.d = (c.d_v + c.d_s) * c.K;
  c.sigma = ctx.get_double("sigma");
  c.p = ctx.get_double("p");
  c.seed = ctx.get_uint("seed");
  const auto n = ctx.get_uint("n");
  c.validate();
  const FeatureBank bank = build_feature_bank(c);
  const auto samples = sample_dataset(bank, c, n);

  std::uint64_t matches = 0;
  std::uint64_t total = 0;
  for (const auto& s : samples)
    for (int q : s.q_s) {
      matches += q == s.label;
      ++total;
    }
  ctx.write_output("generation_config.json", to_json(c).dump(2) + "\n");
  ctx.write_output("dataset.csv", dataset_csv(samples, ctx.get_bool("include_x")));
  auto& r = ctx.result();
  r["samples"] = n;
  r["d"] = c.d;
  r["spurious_match_rate"] = total ? static_cast<double>(matches) / static_cast<double>(total) : 0.0;
  r["expected_match_rate"] = 1.0 - c.p + c.p / c.K;
  r["small_noise"] = c.small_noise();
  return kExitOk;
}

// ---- fp / acc / bound --------------------------------------------------------

int cmd_fp(RunContext& ctx) {
  FpParams params{ctx.get_double("p"), int_param(ctx, "K"), ctx.get_double("x")};
  const std::string method = ctx.get_string("method");
  const auto samples = ctx.get_uint("samples");
  const auto seed = ctx.get_uint("seed");
  Estimate e;
  if (method == "auto") {
    e = fp(params, {samples, seed});
  } else if (method == "mc") {
    e = fp_mc(params, samples, seed);
  } else if (method == "closed") {
    if (params.K != 2) throw ValidationError("the closed form exists only for K = 2");
    params.validate();
    e = {fp_closed_form_k2(params.p, params.x), 0.0, 0};
  } else {
    throw ValidationError("--method must be auto, mc or closed");
  }
  ordered_json out;
  out["value"] = e.value;
  out["stderr"] = e.std_error;
  out["params"] = {{"p", params.p}, {"K", params.K}, {"x", params.x}, {"samples", e.samples}, {"method", method}};
  emit_stdout(ctx, out);
  ctx.result()["value"] = e.value;
  ctx.result()["stderr"] = e.std_error;
  return kExitOk;
}

int cmd_acc(RunContext& ctx) {
  const int n_v = int_param(ctx, "n_v");
  const int n_s = int_param(ctx, "n_s");
  GenerationConfig c;
  c.K = int_param(ctx, "K");
  c.d_v = int_param(ctx, "d_v");
  c.d_s = int_param(ctx, "d_s");
  if (c.d_v == 0) c.d_v = n_v;
  if (c.d_s == 0) c.d_s = n_s;
  c.d = (c.d_v + c.d_s) * c.K;
  c.sigma = ctx.get_double("sigma");
  c.p = ctx.get_double("p");
  c.seed = ctx.get_uint("seed");
  if (n_v < 0 || n_s < 0 || n_v > c.d_v || n_s > c.d_s)
    throw ValidationError("learned counts must fit the world: n_v <= d_v and n_s <= d_s");
  c.validate();
  const FeatureBank bank = build_feature_bank(c);
  FeatureSets sets;
  for (int i = 0; i < n_v; ++i) sets.v_set.push_back(i);
  for (int j = 0; j < n_s; ++j) sets.s_set.push_back(j);
  const LinearModel model = construct_oracle_model(bank, sets);
  const Estimate mc = ood_accuracy_mc(model, bank, c, ctx.get_uint("samples"));
  const Estimate formula =
      single_model_accuracy(n_v, n_s, c.p, c.K, {ctx.get_uint("fp_samples"), c.seed});
  ordered_json out;
  out["value"] = mc.value;
  out["stderr"] = mc.std_error;
  out["formula"] = formula.value;
  out["formula_stderr"] = formula.std_error;
  out["params"] = {{"n_v", n_v}, {"n_s", n_s}, {"p", c.p}, {"K", c.K}, {"sigma", c.sigma}, {"samples", mc.samples}};
  emit_stdout(ctx, out);
  auto& r = ctx.result();
  r["accuracy"] = mc.value;
  r["stderr"] = mc.std_error;
  r["formula"] = formula.value;
  r["formula_stderr"] = formula.std_error;
  r["diff"] = mc.value - formula.value;
  return kExitOk;
}

BoundInputs bound_inputs(const RunContext& ctx) {
  BoundInputs in;
  in.n_bar_v = int_param(ctx, "n_bar_v");
  in.n_bar_s = int_param(ctx, "n_bar_s");
  in.n_star_v = int_param(ctx, "n_star_v");
  in.n_star_s = int_param(ctx, "n_star_s");
  in.n_star_vo = int_param(ctx, "n_star_vo");
  in.n_star_so = int_param(ctx, "n_star_so");
  in.p = ctx.get_double("p");
  in.K = int_param(ctx, "K");
  in.validate();
  return in;
}

int cmd_bound(RunContext& ctx) {
  const BoundInputs in = bound_inputs(ctx);
  const FpOptions opt{ctx.get_uint("fp_samples"), ctx.get_uint("seed")};
  const Estimate bound = theorem1_upper_bound(in, opt);
  const Estimate lemma = lemma1_bound(in, opt);
  ordered_json out;
  out["value"] = bound.value;
  out["stderr"] = bound.std_error;
  out["lemma1_bound"] = lemma.value;
  out["params"] = to_json(in);
  emit_stdout(ctx, out);
  auto& r = ctx.result();
  r["bound"] = bound.value;
  r["bound_stderr"] = bound.std_error;
  r["lemma1_bound"] = lemma.value;
  r["interpolated_argument"] = interpolated_argument(in);
  return kExitOk;
}

// ---- thm1 / thm2 / sweep -----------------------------------------------------

TheoremOptions theorem_options(const RunContext& ctx) {
  TheoremOptions o;
  o.samples = ctx.get_uint("samples");
  o.sigma = ctx.get_double("sigma");
  o.lambda = ctx.get_double("lambda");
  o.seed = ctx.get_uint("seed");
  o.fp = {ctx.get_uint("fp_samples"), o.seed};
  return o;
}

BoundInputs bound_inputs_from_json(const json& j) {
  static const std::set<std::string> kKeys = {"n_bar_v", "n_bar_s", "n_star_v", "n_star_s",
                                              "n_star_vo", "n_star_so", "p", "K"};
  if (!j.is_object()) throw ValidationError("grid entries must be objects");
  for (const auto& [key, _] : j.items())
    if (!kKeys.count(key)) throw ValidationError("unknown grid key '" + key + "'");
  auto count = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer())
      throw ValidationError(std::string("grid entry needs integer '") + key + "'");
    return j[key].get<int>();
  };
  BoundInputs in;
  in.n_bar_v = count("n_bar_v");
  in.n_bar_s = count("n_bar_s");
  in.n_star_v = count("n_star_v");
  in.n_star_s = count("n_star_s");
  in.n_star_vo = count("n_star_vo");
  in.n_star_so = count("n_star_so");
  if (!j.contains("p") || !j["p"].is_number()) throw ValidationError("grid entry needs numeric 'p'");
  in.p = j["p"].get<double>();
  in.K = j.contains("K") ? count("K") : 2;
  in.validate();
  return in;
}

double max_excess_z(const TheoremReport& report) {
  double z = -std::numeric_limits<double>::infinity();
  for (const auto& r : report.points) {
    const double se = combined_se(r.se_diff, r.bound.std_error);
    z = std::max(z, (r.diff - r.bound.value) / se);
  }
  return z;
}

int cmd_thm1(RunContext& ctx) {
  const std::string preset = ctx.get_string("preset");
  const std::string grid_path = ctx.get_string("grid");
  std::vector<BoundInputs> grid;
  if (preset == "acceptance") {
    grid = theorem1_acceptance_grid();
  } else if (preset == "overlap") {
    grid = theorem1_overlap_grid();
  } else if (preset == "custom") {
    if (grid_path.empty()) throw ValidationError("--preset custom needs --grid <file.json>");
  } else {
    throw ValidationError("--preset must be acceptance, overlap or custom");
  }
  if (!grid_path.empty()) {
    if (preset != "custom") throw ValidationError("--grid is only read with --preset custom");
    json doc;
    try {
      doc = json::parse(read_file(grid_path));
    } catch (const json::parse_error& e) {
      throw ValidationError("grid file is not valid JSON: " + std::string(e.what()));
    }
    if (!doc.is_array() || doc.empty()) throw ValidationError("grid file must be a non-empty JSON array");
    for (const auto& entry : doc) grid.push_back(bound_inputs_from_json(entry));
    ctx.record_input(grid_path);
  }
  const TheoremReport report = verify_theorem1(grid, theorem_options(ctx));
  ctx.write_output("theorem1_report.json", to_json(report).dump(2) + "\n");
  ctx.write_output("theorem1_report.csv", theorem_report_csv(report));
  int lemma = 0;
  int drops = 0;
  for (const auto& r : report.points) {
    lemma += r.lemma1_violated;
    drops += r.significant_drop;
  }
  auto& res = ctx.result();
  res["points"] = report.points.size();
  res["violations"] = report.violations;
  res["lemma1_violations"] = lemma;
  res["significant_drops"] = drops;
  res["max_excess_z"] = max_excess_z(report);
  if (report.violations > 0)
    throw TheoremCheckFailed{std::to_string(report.violations) + " of " + std::to_string(report.points.size()) +
                             " grid points exceed the bound by more than 3 combined SE"};
  return kExitOk;
}

int cmd_thm2(RunContext& ctx) {
  const std::string preset = ctx.get_string("preset");
  static const char* kLists[] = {"n_bar_v", "n_star_v", "n_bar_s", "n_star_s", "n_star_vo", "n_star_so"};
  Theorem2Space space;
  if (preset == "paper-regime") {
    for (const char* key : kLists)
      if (!ctx.get_int_list(key).empty())
        throw ValidationError(std::string("--") + key + " is only read with --preset custom");
    if (!ctx.get_double_list("p").empty()) throw ValidationError("--p is only read with --preset custom");
    space = theorem2_paper_regime();
  } else if (preset == "custom") {
    space.n_bar_v = ctx.get_int_list("n_bar_v");
    space.n_star_v = ctx.get_int_list("n_star_v");
    space.n_bar_s = ctx.get_int_list("n_bar_s");
    space.n_star_s = ctx.get_int_list("n_star_s");
    space.n_star_vo = ctx.get_int_list("n_star_vo");
    space.n_star_so = ctx.get_int_list("n_star_so");
    space.p = ctx.get_double_list("p");
    space.K = int_param(ctx, "K");
    for (const char* key : kLists)
      if (ctx.get_int_list(key).empty()) throw ValidationError(std::string("--preset custom needs --") + key);
    if (space.p.empty()) throw ValidationError("--preset custom needs --p");
  } else {
    throw ValidationError("--preset must be paper-regime or custom");
  }
  const TheoremReport report = verify_theorem2(space, theorem_options(ctx));
  ctx.write_output("theorem2_report.json", to_json(report).dump(2) + "\n");
  ctx.write_output("theorem2_report.csv", theorem_report_csv(report));
  auto& res = ctx.result();
  res["points"] = report.points.size();
  res["rejected"] = report.rejected;
  res["witness_found"] = report.witness.has_value();
  if (!report.witness) {
    throw TheoremCheckFailed{"no configuration in the search space shows a significant accuracy drop"};
  }
  const auto& w = report.points[*report.witness];
  ordered_json witness;
  witness["inputs"] = to_json(w.inputs);
  witness["seed"] = report.options.seed;
  witness["samples"] = report.options.samples;
  witness["acc_tilde"] = to_json(w.acc_tilde);
  witness["acc_bar"] = to_json(w.acc_bar);
  witness["diff"] = w.diff;
  witness["se_diff"] = w.se_diff;
  witness["z"] = -w.diff / w.se_diff;
  ctx.write_output("witness.json", witness.dump(2) + "\n");
  res["witness_index"] = *report.witness;
  res["witness_diff"] = w.diff;
  res["witness_z"] = -w.diff / w.se_diff;
  return kExitOk;
}

int cmd_sweep(RunContext& ctx) {
  const BoundInputs in = bound_inputs(ctx);
  const auto seed = ctx.get_uint("seed");
  const PairWorld world = make_pair_world(in, ctx.get_double("sigma"), seed);
  const auto lambdas = ctx.get_double_list("lambdas");
  const SweepResult sweep =
      lambda_sweep(world.f_bar, world.f_star, world.bank, world.config, lambdas, ctx.get_uint("samples"), world.task);
  std::string csv = "lambda,accuracy,stderr\n";
  for (const auto& p : sweep.points)
    csv += format_double(p.lambda) + "," + format_double(p.accuracy.value) + "," +
           format_double(p.accuracy.std_error) + "\n";
  ctx.write_output("sweep.csv", csv);
  auto& res = ctx.result();
  res["best_lambda"] = sweep.best_lambda;
  const auto best = std::find_if(sweep.points.begin(), sweep.points.end(),
                                 [&](const SweepPoint& p) { return p.lambda == sweep.best_lambda; });
  res["best_accuracy"] = best->accuracy.value;
  res["points"] = sweep.points.size();
  return kExitOk;
}

// ---- mft / sdd-sim -------------------------------------------------------------

SddWorldOptions sdd_options(const RunContext& ctx) {
  SddWorldOptions o;
  o.benign_prompts = int_param(ctx, "benign_prompts");
  o.harmful_prompts = int_param(ctx, "harmful_prompts");
  o.margin_lo = ctx.get_double("margin_lo");
  o.margin_hi = ctx.get_double("margin_hi");
  o.harmful_penalty = ctx.get_double("harmful_penalty");
  o.steer = ctx.get_double("steer");
  o.noise = ctx.get_double("noise");
  return o;
}

ordered_json nullable(double v) { return std::isnan(v) ? ordered_json(nullptr) : ordered_json(v); }

int cmd_mft(RunContext& ctx) {
  const std::string scenario = ctx.get_string("scenario");
  MftConfig cfg;
  cfg.beta = ctx.get_double("beta");
  cfg.learning_rate = ctx.get_double("learning_rate");
  cfg.steps = int_param(ctx, "steps");
  cfg.seed = ctx.get_uint("seed");
  if (scenario == "single") {
    const int n = int_param(ctx, "responses");
    const int chosen = int_param(ctx, "chosen");
    if (n < 2) throw ValidationError("--responses must be >= 2");
    if (chosen < 0 || chosen >= n) throw ValidationError("--chosen must index a response");
    std::vector<std::string> responses;
    for (int i = 0; i < n; ++i) responses.push_back("y" + std::to_string(i));
    cfg.reference = TabularPolicy::uniform({"x"}, responses);
    cfg.dataset = {{"x", responses[chosen]}};
  } else if (scenario == "sdd-protected" || scenario == "sdd-unprotected") {
    SddWorldOptions o = sdd_options(ctx);
    o.seed = cfg.seed;
    const SddWorld w = build_sdd_world(o);
    cfg.reference = scenario == "sdd-protected" ? w.protected_policy : w.unprotected_policy;
    cfg.dataset = w.attack;
    cfg.benign = w.benign;
  } else {
    throw ValidationError("--scenario must be single, sdd-protected or sdd-unprotected");
  }
  const DynamicsTrace trace = mft_train(cfg);
  ctx.write_output("trace.csv", trace_csv(trace));
  const auto& first = trace.records.front();
  const auto& last = trace.records.back();
  auto& r = ctx.result();
  r["initial_pi_yo"] = first.pi_yo;
  r["final_pi_yo"] = last.pi_yo;
  r["initial_pi_yc"] = first.pi_yc;
  r["final_pi_yc"] = last.pi_yc;
  r["initial_objective"] = first.objective;
  r["final_objective"] = last.objective;
  r["initial_benign_acc"] = nullable(first.benign_acc);
  r["final_benign_acc"] = nullable(last.benign_acc);
  r["halvings"] = trace.halvings;
  r["skipped_steps"] = trace.skipped_steps;
  return kExitOk;
}

ordered_json summary_json(const SddSummary& s, const std::vector<std::uint64_t>& seeds) {
  ordered_json j;
  j["protected_drop"] = s.protected_drop;
  j["unprotected_drop"] = s.unprotected_drop;
  j["runs"] = ordered_json::array();
  for (std::size_t i = 0; i < s.runs.size(); ++i) {
    ordered_json run = to_json(s.runs[i]);
    run["seed"] = seeds[i];
    j["runs"].push_back(std::move(run));
  }
  return j;
}

int cmd_sdd_sim(RunContext& ctx) {
  SddWorldOptions o = sdd_options(ctx);
  const auto seeds = ctx.get_uint_list("seeds");
  const double beta = ctx.get_double("beta");
  const double lr = ctx.get_double("learning_rate");
  const int steps = int_param(ctx, "steps");
  o.coupled = true;
  const SddSummary coupled = sdd_over_seeds(o, seeds, beta, lr, steps);
  o.coupled = false;
  const SddSummary control = sdd_over_seeds(o, seeds, beta, lr, steps);

  const bool ordering = coupled.protected_drop > 0.0 && coupled.protected_drop >= 2.0 * coupled.unprotected_drop;
  const double noise_floor = 1.0 / o.benign_prompts;
  const bool control_equal = std::abs(control.protected_drop - control.unprotected_drop) <= noise_floor;

  ordered_json report;
  report["coupled"] = summary_json(coupled, seeds);
  report["control"] = summary_json(control, seeds);
  report["ordering_holds"] = ordering;
  report["control_equal"] = control_equal;
  report["control_tolerance"] = noise_floor;
  ctx.write_output("sdd_report.json", report.dump(2) + "\n");
  auto& r = ctx.result();
  r["protected_drop"] = coupled.protected_drop;
  r["unprotected_drop"] = coupled.unprotected_drop;
  r["control_protected_drop"] = control.protected_drop;
  r["control_unprotected_drop"] = control.unprotected_drop;
  r["ordering_holds"] = ordering;
  r["control_equal"] = control_equal;
  return kExitOk;
}

// ---- forge -------------------------------------------------------------------

std::unique_ptr<EmbeddingProvider> make_provider(const RunContext& ctx) {
  const std::string kind = ctx.get_string("provider");
  const int dim = int_param(ctx, "dimension");
  if (kind == "builtin") return std::make_unique<BuiltinEmbedder>(dim);
  if (kind == "remote") {
    RemoteOptions o;
    o.endpoint = ctx.get_string("endpoint");
    o.dimension = dim;
    if (o.endpoint.empty()) throw ValidationError("--provider remote needs --endpoint");
    return std::make_unique<RemoteEmbedder>(o);
  }
  throw ValidationError("--provider must be builtin or remote");
}

template <typename Result>
void report_ingest(const Result& r, const std::string& path) {
  for (const auto& e : r.errors) log::warn(path + ":" + std::to_string(e.line) + ": " + e.message);
  if (r.duplicates) log::warn(path + ": " + std::to_string(r.duplicates) + " duplicate text(s) dropped");
}

int cmd_forge(RunContext& ctx) {
  const std::string inst_path = ctx.get_string("instructions");
  const std::string resp_path = ctx.get_string("responses");
  if (inst_path.empty()) throw ValidationError("--instructions is required");
  if (resp_path.empty()) throw ValidationError("--responses is required");
  SelectOptions sel;
  sel.tau = ctx.get_double("tau");
  sel.max_attempts = int_param(ctx, "max_attempts");
  sel.seed = ctx.get_uint("seed");
  sel.variant = parse_variant(ctx.get_string("variant"));
  sel.validate();
  const int per_category = int_param(ctx, "per_category");
  if (per_category < 0) throw ValidationError("--per-category must be >= 0");
  // Names are checked before any work so a bad path fails fast.
  const std::string dataset_name = ctx.get_string("dataset");
  const std::string manifest_name = ctx.get_string("manifest");
  const std::string rejects_name = ctx.get_string("rejects");
  for (const auto* n : {&dataset_name, &manifest_name, &rejects_name}) ctx.output_path(*n);

  std::vector<std::string> categories = harm_categories();
  const std::string categories_path = ctx.get_string("categories");
  if (!categories_path.empty()) {
    json doc;
    try {
      doc = json::parse(read_file(categories_path));
      categories = doc.get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw ValidationError("categories file must be a JSON array of strings: " + std::string(e.what()));
    }
    if (categories.empty()) throw ValidationError("categories file lists no categories");
    ctx.record_input(categories_path);
  }
  const auto provider = make_provider(ctx);

  const auto inst = ingest_instructions(fs::path(inst_path), categories);
  const auto resp = ingest_responses(fs::path(resp_path));
  ctx.record_input(inst_path);
  ctx.record_input(resp_path);
  report_ingest(inst, inst_path);
  report_ingest(resp, resp_path);
  if (inst.records.empty()) throw ValidationError("no usable instructions in '" + inst_path + "'");
  if (resp.records.empty()) throw ValidationError("no usable responses in '" + resp_path + "'");

  const auto pairs = random_match(inst.records, resp.records, sel.seed);
  const SelectionResult selected = irrelevance_select(pairs, inst.records, resp.records, *provider, sel);
  if (selected.accepted.empty()) {
    ctx.write_output(rejects_name, render_rejects(selected.rejected));
    throw RuntimeFailure("all " + std::to_string(pairs.size()) + " candidate pairs were rejected at tau " +
                         format_double(sel.tau) + " after " + std::to_string(sel.max_attempts) +
                         " attempts each; see " + ctx.output_path(rejects_name).string());
  }
  std::vector<PairingRecord> records = selected.accepted;
  if (per_category > 0) records = balance_by_category(records, per_category, sel.seed, categories);

  EmitContext ec;
  ec.seed = sel.seed;
  ec.tau = sel.tau;
  ec.max_attempts = sel.max_attempts;
  ec.provider = provider->describe();
  ec.instructions = inst.records.size();
  ec.responses = resp.records.size();
  ec.candidates = pairs.size();
  ec.rejects = selected.rejected;
  const EmitSummary summary =
      emit_sft_dataset(records, inst.records, resp.records, sel.variant, ctx.output_path(dataset_name),
                       ctx.output_path(manifest_name), ctx.output_path(rejects_name), ec);
  ctx.record_output(dataset_name);
  ctx.record_output(manifest_name);
  ctx.record_output(rejects_name);

  const VerifyReport check = verify_dataset(read_file(ctx.output_path(dataset_name)), *provider, sel.tau);
  if (!check.ok())
    throw RuntimeFailure("verification failed: " + std::to_string(check.below_tau) + " of " +
                         std::to_string(check.records) + " pairs below tau, " + std::to_string(check.leaks) +
                         " leaks, " + std::to_string(check.missing_prefix) + " missing prefixes");

  auto& r = ctx.result();
  r["instructions"] = inst.records.size();
  r["responses"] = resp.records.size();
  r["ingest_errors"] = inst.errors.size() + resp.errors.size();
  r["duplicates"] = inst.duplicates + resp.duplicates;
  r["candidates"] = pairs.size();
  r["accepted"] = selected.accepted.size();
  r["rejected"] = selected.rejected.size();
  r["resampled"] = std::count_if(selected.accepted.begin(), selected.accepted.end(),
                                 [](const PairingRecord& p) { return p.attempts > 1; });
  r["emitted"] = summary.records;
  r["verified_below_tau"] = check.below_tau;
  r["content_hash"] = summary.content_hash;
  return kExitOk;
}

// ---- report ------------------------------------------------------------------

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return csv_field(v.get<std::string>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return v.dump();
  if (v.is_number_float()) return format_double(v.get<double>());
  return csv_field(v.dump());
}

int cmd_report(RunContext& ctx) {
  std::string dir = ctx.get_string("dir");
  if (dir.empty()) dir = ctx.out_dir().string();
  ctx.set_out_dir(dir);
  if (!fs::is_directory(dir)) throw ValidationError("run directory '" + dir + "' does not exist");

  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory()) subdirs.push_back(entry.path());
  std::sort(subdirs.begin(), subdirs.end());

  std::vector<ordered_json> rows;
  std::set<std::string> keys;
  for (const auto& sub : subdirs) {
    const fs::path manifest_path = sub / "run_manifest.json";
    if (!fs::exists(manifest_path)) {
      if (fs::is_empty(sub)) continue;
      throw ValidationError("run '" + sub.string() + "' has no run_manifest.json");
    }
    json manifest;
    json result = json::object();
    try {
      manifest = json::parse(read_file(manifest_path));
      if (!manifest.is_object() || !manifest.contains("subcommand") || !manifest.contains("config"))
        throw ValidationError("missing fields");
      if (fs::exists(sub / "result.json")) result = json::parse(read_file(sub / "result.json"));
    } catch (const std::exception& e) {
      throw ValidationError("corrupt manifest or result in '" + sub.string() + "': " + e.what());
    }
    ordered_json row;
    row["run"] = sub.filename().string();
    row["subcommand"] = manifest["subcommand"];
    const auto& cfg = manifest["config"];
    row["seed"] = cfg.is_object() && cfg.contains("seed") ? cfg["seed"] : json(nullptr);
    row["tool_version"] = manifest.value("tool_version", std::string());
    ordered_json scalars = ordered_json::object();
    if (result.is_object())
      for (const auto& [k, v] : result.items())
        if (v.is_primitive()) {
          scalars[k] = v;
          keys.insert(k);
        }
    row["_scalars"] = scalars;
    rows.push_back(std::move(row));
  }
  if (rows.empty()) log::warn("no runs found in '" + dir + "'");

  std::vector<std::string> columns = {"run", "subcommand", "seed", "tool_version"};
  for (const auto& k : keys)
    if (std::find(columns.begin(), columns.end(), k) == columns.end()) columns.push_back(k);

  std::string csv;
  for (std::size_t i = 0; i < columns.size(); ++i) csv += (i ? "," : "") + csv_field(columns[i]);
  csv += "\n";
  ordered_json table = ordered_json::array();
  for (const auto& row : rows) {
    ordered_json flat;
    for (const auto& c : columns) {
      if (c == "run" || c == "subcommand" || c == "seed" || c == "tool_version") {
        flat[c] = row[c];
      } else {
        flat[c] = row["_scalars"].contains(c) ? row["_scalars"][c] : ordered_json(nullptr);
      }
    }
    for (std::size_t i = 0; i < columns.size(); ++i) csv += (i ? "," : "") + csv_cell(flat[columns[i]]);
    csv += "\n";
    table.push_back(std::move(flat));
  }
  ordered_json summary;
  summary["columns"] = columns;
  summary["rows"] = table;
  ctx.write_output("summary.csv", csv);
  ctx.write_output("summary.json", summary.dump(2) + "\n");
  ctx.result()["runs"] = rows.size();
  ctx.result()["columns"] = columns.size();
  return kExitOk;
}

// ---- table -------------------------------------------------------------------

ordered_json ints(std::initializer_list<int> v) { return ordered_json(std::vector<int>(v)); }

std::vector<Param> bound_params(int bv, int bs, int sv, int ss, int vo, int so, double p) {
  return {{"n_bar_v", Kind::integer, bv, "invariant features of the original model"},
          {"n_bar_s", Kind::integer, bs, "spurious features of the original model"},
          {"n_star_v", Kind::integer, sv, "invariant features of the near-optimal model"},
          {"n_star_s", Kind::integer, ss, "spurious features of the near-optimal model"},
          {"n_star_vo", Kind::integer, vo, "shared invariant features"},
          {"n_star_so", Kind::integer, so, "shared spurious features"},
          {"p", Kind::number, p, "spurious flip probability"},
          {"K", Kind::integer, 2, "number of classes"}};
}

std::vector<Param> theorem_params() {
  return {{"samples", Kind::unsigned_integer, 100000, "Monte Carlo samples per model"},
          {"sigma", Kind::number, 0.001, "feature noise"},
          {"lambda", Kind::number, 0.5, "interpolation weight on the original model"},
          {"seed", Kind::unsigned_integer, 0, "RNG seed"},
          {"fp_samples", Kind::unsigned_integer, 1000000, "F_p samples when K > 2"}};
}

std::vector<Param> sdd_params() {
  return {{"benign_prompts", Kind::integer, 20, "benign prompts in the desk world"},
          {"harmful_prompts", Kind::integer, 10, "harmful prompts in the desk world"},
          {"margin_lo", Kind::number, 0.25, "lower bound of the benign answer lead"},
          {"margin_hi", Kind::number, 1.25, "upper bound of the benign answer lead"},
          {"harmful_penalty", Kind::number, 4.0, "logit penalty of harmful responses on benign prompts"},
          {"steer", Kind::number, 3.0, "logit boost of the aligned answer on harmful prompts"},
          {"noise", Kind::number, 0.1, "logit noise"}};
}

template <typename... Vs>
std::vector<Param> concat(Vs&&... vs) {
  std::vector<Param> out;
  (out.insert(out.end(), vs.begin(), vs.end()), ...);
  return out;
}

std::vector<Command> build_commands() {
  std::vector<Command> c;
  c.push_back({"gen", "sample a synthetic feature-world dataset",
               {{"K", Kind::integer, 2, "number of classes"},
                {"d", Kind::integer, 0, "ambient dimension (0: (d_v + d_s) K)"},
                {"d_v", Kind::integer, 2, "invariant features"},
                {"d_s", Kind::integer, 2, "spurious features"},
                {"sigma", Kind::number, 0.01, "feature noise"},
                {"p", Kind::number, 0.9, "spurious flip probability"},
                {"seed", Kind::unsigned_integer, 0, "RNG seed"},
                {"n", Kind::unsigned_integer, 1000, "samples"},
                {"include_x", Kind::boolean, false, "write flattened features"}},
               cmd_gen});
  c.push_back({"fp", "evaluate the orthant probability F_p(x)",
               {{"K", Kind::integer, 2, "number of classes"},
                {"p", Kind::number, 0.5, "spurious flip probability"},
                {"x", Kind::number, 0.0, "argument"},
                {"samples", Kind::unsigned_integer, 1000000, "Monte Carlo samples"},
                {"seed", Kind::unsigned_integer, 0, "RNG seed"},
                {"method", Kind::string, "auto", "auto, mc or closed"}},
               cmd_fp});
  c.push_back({"acc", "Monte Carlo OOD accuracy of an oracle model against the single-model formula",
               {{"K", Kind::integer, 2, "number of classes"},
                {"n_v", Kind::integer, 4, "learned invariant features"},
                {"n_s", Kind::integer, 1, "learned spurious features"},
                {"d_v", Kind::integer, 0, "invariant features in the world (0: n_v)"},
                {"d_s", Kind::integer, 0, "spurious features in the world (0: n_s)"},
                {"sigma", Kind::number, 0.05, "feature noise"},
                {"p", Kind::number, 0.9, "spurious flip probability"},
                {"samples", Kind::unsigned_integer, 100000, "Monte Carlo samples"},
                {"fp_samples", Kind::unsigned_integer, 1000000, "F_p samples when K > 2"},
                {"seed", Kind::unsigned_integer, 0, "RNG seed"}},
               cmd_acc});
  c.push_back({"bound", "evaluate the interpolation accuracy-difference bound",
               concat(bound_params(8, 1, 2, 9, 1, 0, 0.9),
                      std::vector<Param>{{"fp_samples", Kind::unsigned_integer, 1000000, "F_p samples when K > 2"},
                                         {"seed", Kind::unsigned_integer, 0, "RNG seed"}}),
               cmd_bound});
  c.push_back({"thm1", "check the accuracy-difference bound on a grid",
               concat(std::vector<Param>{{"preset", Kind::string, "acceptance", "acceptance, overlap or custom"},
                                         {"grid", Kind::string, "", "JSON array of grid points (custom)"}},
                      theorem_params()),
               cmd_thm1});
  c.push_back({"thm2", "search for a capability-degradation witness",
               concat(std::vector<Param>{{"preset", Kind::string, "paper-regime", "paper-regime or custom"},
                                         {"n_bar_v", Kind::int_list, ordered_json::array(), "custom search values"},
                                         {"n_star_v", Kind::int_list, ordered_json::array(), "custom search values"},
                                         {"n_bar_s", Kind::int_list, ordered_json::array(), "custom search values"},
                                         {"n_star_s", Kind::int_list, ordered_json::array(), "custom search values"},
                                         {"n_star_vo", Kind::int_list, ordered_json::array(), "custom search values"},
                                         {"n_star_so", Kind::int_list, ordered_json::array(), "custom search values"},
                                         {"p", Kind::number_list, ordered_json::array(), "custom search values"},
                                         {"K", Kind::integer, 2, "number of classes (custom)"}},
                      theorem_params()),
               cmd_thm2});
  c.push_back({"sweep", "accuracy of interpolated models across lambda",
               concat(bound_params(1, 4, 1, 4, 0, 0, 0.9),
                      std::vector<Param>{
                          {"lambdas", Kind::number_list,
                           ordered_json(std::vector<double>{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}),
                           "interpolation weights"},
                          {"samples", Kind::unsigned_integer, 100000, "Monte Carlo samples per lambda"},
                          {"sigma", Kind::number, 0.001, "feature noise"},
                          {"seed", Kind::unsigned_integer, 0, "RNG seed"}}),
               cmd_sweep});
  c.push_back({"mft", "Bradley-Terry fine-tuning dynamics on a tabular policy",
               concat(std::vector<Param>{{"scenario", Kind::string, "single", "single, sdd-protected or sdd-unprotected"},
                                         {"responses", Kind::integer, 3, "responses (single)"},
                                         {"chosen", Kind::integer, 1, "index of y_c (single)"},
                                         {"beta", Kind::number, 1.0, "reward scale"},
                                         {"learning_rate", Kind::number, 0.1, "step size"},
                                         {"steps", Kind::integer, 500, "gradient steps"},
                                         {"seed", Kind::unsigned_integer, 0, "world seed (sdd scenarios)"}},
                      sdd_params()),
               cmd_mft});
  c.push_back({"sdd-sim", "capability collapse of SDD-protected vs unprotected policies under attack",
               concat(std::vector<Param>{{"seeds", Kind::uint_list, ints({0, 1, 2, 3, 4}), "world seeds"},
                                         {"beta", Kind::number, 1.0, "reward scale"},
                                         {"learning_rate", Kind::number, 0.1, "step size"},
                                         {"steps", Kind::integer, 500, "gradient steps"}},
                      sdd_params()),
               cmd_sdd_sim});
  c.push_back({"forge", "build an SDD fine-tuning dataset from instruction and response corpora",
               {{"instructions", Kind::string, "", "instruction JSONL corpus"},
                {"responses", Kind::string, "", "response JSONL corpus"},
                {"seed", Kind::unsigned_integer, 0, "RNG seed"},
                {"tau", Kind::number, 0.3, "similarity threshold"},
                {"max_attempts", Kind::integer, 20, "draws per instruction before rejecting"},
                {"variant", Kind::string, "plain", "plain or reject-prefixed"},
                {"per_category", Kind::integer, 0, "balance to this many records per category (0: off)"},
                {"categories", Kind::string, "", "JSON array of category names (default: built-in 14)"},
                {"provider", Kind::string, "builtin", "builtin or remote"},
                {"dimension", Kind::integer, BuiltinEmbedder::kDefaultDimension, "embedding dimension"},
                {"endpoint", Kind::string, "", "remote embedding URL"},
                {"dataset", Kind::string, "dataset.jsonl", "dataset file name"},
                {"manifest", Kind::string, "dataset_manifest.json", "dataset manifest file name"},
                {"rejects", Kind::string, "rejects.jsonl", "rejects file name"}},
               cmd_forge});
  c.push_back({"report", "merge run outputs under a directory into one summary table",
               {{"dir", Kind::string, "", "directory of runs (default: --out)"}},
               cmd_report});
  return c;
}

}  // namespace

const std::vector<Command>& commands() {
  static const std::vector<Command> kCommands = build_commands();
  return kCommands;
}

}  // namespace sddlab::cli
