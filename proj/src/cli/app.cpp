#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <map>
#include <ostream>
#include <sstream>

#include "context.hpp"
#include "sddlab/cli.hpp"
#include "sddlab/error.hpp"
#include "sddlab/hash.hpp"
#include "sddlab/io.hpp"
#include "sddlab/log.hpp"
#include "sddlab/rng.hpp"

namespace sddlab::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string flag_name(const std::string& key) {
  std::string f = "--";
  for (char c : key) f += c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return f;
}

template <typename T>
T parse_integral(const std::string& text, const std::string& what) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != end)
    throw ValidationError(what + ": expected an integer, got '" + text + "'");
  return v;
}

double parse_number(const std::string& text, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v))
    throw ValidationError(what + ": expected a finite number, got '" + text + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  if (text.empty()) return parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  if (text.back() == ',') parts.emplace_back();
  return parts;
}

ordered_json from_flag(const Param& p, const std::string& text) {
  const std::string what = flag_name(p.name);
  switch (p.kind) {
    case Kind::integer: return parse_integral<long long>(text, what);
    case Kind::unsigned_integer: return parse_integral<std::uint64_t>(text, what);
    case Kind::number: return parse_number(text, what);
    case Kind::string: return text;
    case Kind::boolean:
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw ValidationError(what + ": expected true or false, got '" + text + "'");
    case Kind::int_list: {
      ordered_json a = ordered_json::array();
      for (const auto& s : split_list(text)) a.push_back(parse_integral<long long>(s, what));
      return a;
    }
    case Kind::uint_list: {
      ordered_json a = ordered_json::array();
      for (const auto& s : split_list(text)) a.push_back(parse_integral<std::uint64_t>(s, what));
      return a;
    }
    case Kind::number_list: {
      ordered_json a = ordered_json::array();
      for (const auto& s : split_list(text)) a.push_back(parse_number(s, what));
      return a;
    }
  }
  throw ValidationError("unsupported parameter kind");
}

ordered_json from_config(const Param& p, const json& v) {
  const std::string what = "config key '" + p.name + "'";
  auto check_each = [&](auto pred, const char* expect) {
    if (!v.is_array()) throw ValidationError(what + " must be an array of " + expect);
    for (const auto& e : v)
      if (!pred(e)) throw ValidationError(what + " must be an array of " + expect);
    return ordered_json(v);
  };
  switch (p.kind) {
    case Kind::integer:
      if (!v.is_number_integer()) throw ValidationError(what + " must be an integer");
      return v.get<long long>();
    case Kind::unsigned_integer:
      if (!v.is_number_unsigned()) throw ValidationError(what + " must be a non-negative integer");
      return v.get<std::uint64_t>();
    case Kind::number:
      if (!v.is_number()) throw ValidationError(what + " must be a number");
      return v.get<double>();
    case Kind::string:
      if (!v.is_string()) throw ValidationError(what + " must be a string");
      return v.get<std::string>();
    case Kind::boolean:
      if (!v.is_boolean()) throw ValidationError(what + " must be true or false");
      return v.get<bool>();
    case Kind::int_list:
      return check_each([](const json& e) { return e.is_number_integer(); }, "integers");
    case Kind::uint_list:
      return check_each([](const json& e) { return e.is_number_unsigned(); }, "non-negative integers");
    case Kind::number_list:
      return check_each([](const json& e) { return e.is_number(); }, "numbers");
  }
  throw ValidationError("unsupported parameter kind");
}

struct Resolved {
  ordered_json config;
  std::string out = "./sddlab_out";
  int workers = 0;
};

Resolved resolve(const Command& cmd, const std::map<std::string, std::string>& flags,
                 const std::string& config_path, const std::string* out_flag, const int* workers_flag) {
  Resolved r;
  r.config = ordered_json::object();
  for (const auto& p : cmd.params) r.config[p.name] = p.fallback;
  bool seed_from_config = false;

  if (!config_path.empty()) {
    json doc;
    try {
      doc = json::parse(read_file(config_path));
    } catch (const json::parse_error& e) {
      throw ValidationError("config '" + config_path + "' is not valid JSON: " + e.what());
    } catch (const RuntimeFailure& e) {
      throw ValidationError(e.what());
    }
    if (!doc.is_object()) throw ValidationError("config '" + config_path + "' must be a JSON object");
    // A run manifest replays its recorded configuration.
    if (doc.contains("tool_version") && doc.contains("config")) {
      if (doc.value("subcommand", cmd.name) != cmd.name)
        throw ValidationError("manifest '" + config_path + "' was written by '" +
                              doc["subcommand"].get<std::string>() + "', not '" + cmd.name + "'");
      doc = doc["config"];
      if (!doc.is_object()) throw ValidationError("manifest config block must be an object");
    }
    for (const auto& [key, value] : doc.items()) {
      if (key == "subcommand") {
        if (!value.is_string() || value.get<std::string>() != cmd.name)
          throw ValidationError("config is for subcommand " + value.dump() + ", not '" + cmd.name + "'");
      } else if (key == "out") {
        if (!value.is_string()) throw ValidationError("config key 'out' must be a string");
        r.out = value.get<std::string>();
      } else if (key == "workers") {
        if (!value.is_number_integer()) throw ValidationError("config key 'workers' must be an integer");
        r.workers = value.get<int>();
      } else {
        const auto it = std::find_if(cmd.params.begin(), cmd.params.end(),
                                     [&](const Param& p) { return p.name == key; });
        if (it == cmd.params.end())
          throw ValidationError("unknown config key '" + key + "' for '" + cmd.name + "'");
        r.config[key] = from_config(*it, value);
        seed_from_config |= key == "seed";
      }
    }
  }

  if (r.config.contains("seed") && !seed_from_config && !flags.count("seed")) {
    if (const char* env = std::getenv("SDD_LAB_SEED"); env && *env)
      r.config["seed"] = parse_integral<std::uint64_t>(env, "SDD_LAB_SEED");
  }
  for (const auto& p : cmd.params) {
    const auto it = flags.find(p.name);
    if (it != flags.end()) r.config[p.name] = from_flag(p, it->second);
  }
  if (out_flag) r.out = *out_flag;
  if (workers_flag) r.workers = *workers_flag;
  if (r.workers < 0) throw ValidationError("--workers must be >= 0");
  if (r.out.empty()) throw ValidationError("--out must not be empty");
  return r;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void print_error(std::ostream& err, const char* kind, int code, const std::string& message) {
  ordered_json e;
  e["error"] = {{"kind", kind}, {"exit_code", code}, {"message", message}};
  err << e.dump() << '\n';
}

void finish_run(RunContext& ctx, const std::string& started, double seconds) {
  ctx.write_output("result.json", ctx.result().dump(2) + "\n");
  ordered_json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["subcommand"] = ctx.subcommand();
  manifest["config"] = ctx.config();
  manifest["started_utc"] = started;
  manifest["wall_clock_seconds"] = seconds;
  manifest["inputs"] = ctx.inputs();
  manifest["outputs"] = ordered_json::array();
  for (const auto& name : ctx.outputs())
    manifest["outputs"].push_back({{"file", name}, {"sha256", sha256_file(ctx.output_path(name))}});
  write_file_atomic(ctx.out_dir() / "run_manifest.json", manifest.dump(2) + "\n");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sddlab: feature-world simulations, bound checks and SDD dataset tools", "sddlab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  struct Slot {
    const Command* cmd = nullptr;
    CLI::App* sub = nullptr;
    std::map<std::string, std::string> values;
    std::map<std::string, bool> bools;
    std::string config;
    std::string out;
    int workers = 0;
    CLI::Option* out_opt = nullptr;
    CLI::Option* workers_opt = nullptr;
    std::map<std::string, CLI::Option*> opts;
  };
  std::vector<Slot> slots(commands().size());
  for (std::size_t i = 0; i < commands().size(); ++i) {
    Slot& s = slots[i];
    s.cmd = &commands()[i];
    s.sub = app.add_subcommand(s.cmd->name, s.cmd->help);
    for (const auto& p : s.cmd->params) {
      const std::string help = p.help + " (default " + p.fallback.dump() + ")";
      if (p.kind == Kind::boolean) {
        s.opts[p.name] = s.sub->add_flag(flag_name(p.name), s.bools[p.name], help);
      } else {
        s.opts[p.name] = s.sub->add_option(flag_name(p.name), s.values[p.name], help);
      }
    }
    s.sub->add_option("--config", s.config, "JSON config file or a run_manifest.json to replay");
    s.out_opt = s.sub->add_option("--out", s.out, "output directory (default ./sddlab_out)");
    s.workers_opt = s.sub->add_option("--workers", s.workers, "cap on parallel workers (0 = all)");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    // app.help() already renders the selected subcommand's page when one was given
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    print_error(err, "validation", kExitValidation, e.what());
    const Slot* active = nullptr;
    for (const auto& s : slots)
      if (s.sub->parsed()) active = &s;
    err << (active ? active->sub->help() : app.help());
    return kExitValidation;
  }

  Slot* active = nullptr;
  for (auto& s : slots)
    if (s.sub->parsed()) active = &s;
  if (!active) {
    print_error(err, "validation", kExitValidation, "a subcommand is required");
    err << app.help();
    return kExitValidation;
  }

  const auto previous_sink = log::set_warning_sink([&err](const std::string& m) { err << "warning: " << m << '\n'; });
  struct SinkRestore {
    log::Sink previous;
    ~SinkRestore() { log::set_warning_sink(std::move(previous)); }
  } restore{previous_sink};

  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  try {
    std::map<std::string, std::string> flags;
    for (const auto& p : active->cmd->params) {
      if (active->opts[p.name]->count() == 0) continue;
      flags[p.name] = p.kind == Kind::boolean ? (active->bools[p.name] ? "true" : "false")
                                              : active->values[p.name];
    }
    const std::string* out_flag = active->out_opt->count() ? &active->out : nullptr;
    const int* workers_flag = active->workers_opt->count() ? &active->workers : nullptr;
    const Resolved r = resolve(*active->cmd, flags, active->config, out_flag, workers_flag);
    set_worker_limit(r.workers);

    RunContext ctx(active->cmd->name, r.config, r.out, out);
    int code = kExitOk;
    std::string theorem_message;
    try {
      code = active->cmd->run(ctx);
    } catch (const TheoremCheckFailed& f) {
      code = kExitTheorem;
      theorem_message = f.message;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    finish_run(ctx, started, seconds);
    set_worker_limit(0);
    if (code == kExitTheorem) print_error(err, "theorem", kExitTheorem, theorem_message);
    return code;
  } catch (const ValidationError& e) {
    set_worker_limit(0);
    print_error(err, "validation", kExitValidation, e.what());
    err << active->sub->help();
    return kExitValidation;
  } catch (const RuntimeFailure& e) {
    set_worker_limit(0);
    print_error(err, "runtime", kExitRuntime, e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    set_worker_limit(0);
    print_error(err, "runtime", kExitRuntime, e.what());
    return kExitRuntime;
  }
}

RunContext::RunContext(std::string subcommand, ordered_json config, fs::path out_dir, std::ostream& out)
    : subcommand_(std::move(subcommand)), config_(std::move(config)), out_dir_(std::move(out_dir)), out_(out) {}

long long RunContext::get_int(const std::string& key) const { return config_.at(key).get<long long>(); }
std::uint64_t RunContext::get_uint(const std::string& key) const { return config_.at(key).get<std::uint64_t>(); }
double RunContext::get_double(const std::string& key) const { return config_.at(key).get<double>(); }
std::string RunContext::get_string(const std::string& key) const { return config_.at(key).get<std::string>(); }
bool RunContext::get_bool(const std::string& key) const { return config_.at(key).get<bool>(); }
std::vector<int> RunContext::get_int_list(const std::string& key) const {
  return config_.at(key).get<std::vector<int>>();
}
std::vector<std::uint64_t> RunContext::get_uint_list(const std::string& key) const {
  return config_.at(key).get<std::vector<std::uint64_t>>();
}
std::vector<double> RunContext::get_double_list(const std::string& key) const {
  return config_.at(key).get<std::vector<double>>();
}

fs::path RunContext::output_path(const std::string& name) const {
  const fs::path rel(name);
  if (name.empty() || rel.is_absolute() || rel.has_root_name() || rel.has_root_directory())
    throw ValidationError("output name '" + name + "' must be a relative path inside the output directory");
  for (const auto& part : rel)
    if (part == "..") throw ValidationError("output name '" + name + "' must not contain '..'");
  return out_dir_ / rel;
}

void RunContext::write_output(const std::string& name, std::string_view content) {
  write_file_atomic(output_path(name), content);
  record_output(name);
}

void RunContext::record_output(const std::string& name) {
  output_path(name);
  if (std::find(outputs_.begin(), outputs_.end(), name) == outputs_.end()) outputs_.push_back(name);
}

void RunContext::record_input(const fs::path& path) {
  inputs_.push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
}

}  // namespace sddlab::cli
