#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace sddlab::cli {

using ordered_json = nlohmann::ordered_json;

enum class Kind { integer, unsigned_integer, number, string, boolean, int_list, uint_list, number_list };

struct Param {
  std::string name;  // config key; the flag is --name with '_' -> '-', lowercased
  Kind kind;
  ordered_json fallback;
  std::string help;
};

class RunContext;

struct Command {
  std::string name;
  std::string help;
  std::vector<Param> params;
  std::function<int(RunContext&)> run;
  bool writes_to_out = true;  // report writes into the directory it scans
};

const std::vector<Command>& commands();

class RunContext {
 public:
  RunContext(std::string subcommand, ordered_json config, std::filesystem::path out_dir,
             std::ostream& out);

  const std::string& subcommand() const { return subcommand_; }
  const ordered_json& config() const { return config_; }
  const std::filesystem::path& out_dir() const { return out_dir_; }
  void set_out_dir(std::filesystem::path dir) { out_dir_ = std::move(dir); }
  std::ostream& out() { return out_; }

  long long get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<std::uint64_t> get_uint_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  // `name` must be a relative path that stays inside the output directory.
  void write_output(const std::string& name, std::string_view content);
  std::filesystem::path output_path(const std::string& name) const;
  void record_output(const std::string& name);
  void record_input(const std::filesystem::path& path);

  ordered_json& result() { return result_; }
  const std::vector<std::string>& outputs() const { return outputs_; }
  const ordered_json& inputs() const { return inputs_; }

 private:
  std::string subcommand_;
  ordered_json config_;
  std::filesystem::path out_dir_;
  std::ostream& out_;
  ordered_json result_ = ordered_json::object();
  ordered_json inputs_ = ordered_json::array();
  std::vector<std::string> outputs_;
};

// Thrown by commands whose theorem check fails after outputs are written.
struct TheoremCheckFailed {
  std::string message;
};

}  // namespace sddlab::cli
