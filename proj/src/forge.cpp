#include "sddlab/forge.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "sddlab/error.hpp"
#include "sddlab/hash.hpp"
#include "sddlab/io.hpp"
#include "sddlab/log.hpp"
#include "sddlab/rng.hpp"

namespace sddlab {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const std::vector<std::string>& harm_categories() {
  static const std::vector<std::string> kCategories = {
      "Hate Speech, Offensive Language",
      "Discrimination, Stereotype, Injustice",
      "Violence, Aiding and Abetting, Incitement",
      "Financial Crime, Property Crime, Theft",
      "Privacy Violation",
      "Drug Abuse, Weapons, Banned Substance",
      "Non-Violent Unethical Behavior",
      "Sexually Explicit, Adult Content",
      "Controversial Topics, Politics",
      "Misinformation Re. ethics, laws and safety",
      "Terrorism, Organized Crime",
      "Self-Harm",
      "Animal Abuse",
      "Child Abuse",
  };
  return kCategories;
}

namespace {

std::string content_id(const std::string& text) { return "h" + sha256_hex(text).substr(0, 16); }

std::string optional_string(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

// Shared line loop: `make` turns a parsed object into a record or throws
// ValidationError with the reason.
template <typename Record, typename Make>
IngestResult<Record> ingest_lines(std::istream& in, const char* what, Make make) {
  IngestResult<Record> result;
  std::unordered_set<std::string> texts;
  std::unordered_map<std::string, std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      json obj;
      try {
        obj = json::parse(line);
      } catch (const json::parse_error&) {
        throw ValidationError("not valid JSON");
      }
      if (!obj.is_object()) throw ValidationError("expected a JSON object");
      Record rec = make(obj);
      if (!texts.insert(rec.text).second) {
        ++result.duplicates;
        continue;
      }
      const auto [it, fresh] = ids.emplace(rec.id, rec.text);
      if (!fresh) throw ValidationError("id '" + rec.id + "' already used by a different text");
      result.records.push_back(std::move(rec));
    } catch (const ValidationError& e) {
      result.errors.push_back({line_no, e.what()});
    }
  }
  if (in.bad()) throw RuntimeFailure(std::string("error reading ") + what + " corpus");
  if (result.records.empty() && result.errors.empty() && result.duplicates == 0)
    log::warn(std::string(what) + " corpus is empty");
  return result;
}

std::string required_text(const json& obj) {
  const auto it = obj.find("text");
  if (it == obj.end()) throw ValidationError("missing field 'text'");
  if (!it->is_string()) throw ValidationError("field 'text' must be a string");
  std::string text = it->get<std::string>();
  if (text.empty()) throw ValidationError("field 'text' is empty");
  return text;
}

std::ifstream open_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot read corpus '" + path.string() + "'");
  return in;
}

}  // namespace

IngestResult<InstructionRecord> ingest_instructions(std::istream& in,
                                                    const std::vector<std::string>& categories) {
  return ingest_lines<InstructionRecord>(in, "instruction", [&](const json& obj) {
    InstructionRecord r;
    r.text = required_text(obj);
    r.id = optional_string(obj, "id");
    if (r.id.empty()) r.id = content_id(r.text);
    r.category = optional_string(obj, "category");
    if (r.category.empty()) {
      r.category = kUncategorized;
    } else if (r.category != kUncategorized &&
               std::find(categories.begin(), categories.end(), r.category) == categories.end()) {
      throw ValidationError("unknown category '" + r.category + "'");
    }
    return r;
  });
}

IngestResult<ResponseRecord> ingest_responses(std::istream& in) {
  return ingest_lines<ResponseRecord>(in, "response", [](const json& obj) {
    ResponseRecord r;
    r.text = required_text(obj);
    r.id = optional_string(obj, "id");
    if (r.id.empty()) r.id = content_id(r.text);
    r.source = optional_string(obj, "source");
    return r;
  });
}

IngestResult<InstructionRecord> ingest_instructions(const std::filesystem::path& path,
                                                    const std::vector<std::string>& categories) {
  auto in = open_corpus(path);
  return ingest_instructions(in, categories);
}

IngestResult<ResponseRecord> ingest_responses(const std::filesystem::path& path) {
  auto in = open_corpus(path);
  return ingest_responses(in);
}

std::vector<CandidatePair> random_match(const std::vector<InstructionRecord>& instructions,
                                        const std::vector<ResponseRecord>& responses,
                                        std::uint64_t seed) {
  if (responses.empty()) throw ValidationError("response pool is empty");
  if (instructions.empty()) throw ValidationError("instruction set is empty");
  Rng rng = substream(seed, 1);
  std::uniform_int_distribution<std::size_t> pick(0, responses.size() - 1);
  std::vector<CandidatePair> out;
  out.reserve(instructions.size());
  for (std::size_t i = 0; i < instructions.size(); ++i) out.push_back({i, pick(rng)});
  return out;
}

std::string to_string(Variant v) { return v == Variant::plain ? "plain" : "reject-prefixed"; }

Variant parse_variant(const std::string& s) {
  if (s == "plain") return Variant::plain;
  if (s == "reject-prefixed") return Variant::reject_prefixed;
  throw ValidationError("variant must be 'plain' or 'reject-prefixed', got '" + s + "'");
}

void SelectOptions::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in (0, 1]");
  if (max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
}

bool leaks_instruction(const std::string& instruction, const std::string& response) {
  return ascii_lower(response).find(ascii_lower(instruction)) != std::string::npos;
}

SelectionResult irrelevance_select(const std::vector<CandidatePair>& pairs,
                                   const std::vector<InstructionRecord>& instructions,
                                   const std::vector<ResponseRecord>& responses,
                                   const EmbeddingProvider& provider, const SelectOptions& options) {
  options.validate();
  if (responses.empty()) throw ValidationError("response pool is empty");
  for (const auto& p : pairs)
    if (p.instruction >= instructions.size() || p.response >= responses.size())
      throw ValidationError("candidate pair refers to a record outside the corpus");

  // Every text is embedded once up front; the resampling loop only looks vectors up.
  std::vector<std::string> itexts, rtexts;
  for (const auto& r : instructions) itexts.push_back(r.text);
  for (const auto& r : responses) rtexts.push_back(r.text);
  const EmbeddingBatch ivec = embed(provider, itexts);
  const EmbeddingBatch rvec = embed(provider, rtexts);

  Rng rng = substream(options.seed, 2);
  std::uniform_int_distribution<std::size_t> pick(0, responses.size() - 1);
  SelectionResult out;
  for (const auto& pair : pairs) {
    const auto& inst = instructions[pair.instruction];
    std::size_t resp = pair.response;
    for (int attempt = 1;; ++attempt) {
      PairingRecord rec;
      rec.instruction_id = inst.id;
      rec.response_id = responses[resp].id;
      rec.category = inst.category;
      rec.similarity = ivec.vectors[pair.instruction].dot(rvec.vectors[resp]);
      rec.attempts = attempt;
      rec.variant = options.variant;
      const bool leak = leaks_instruction(inst.text, responses[resp].text);
      if (rec.similarity < options.tau && !leak) {
        out.accepted.push_back(std::move(rec));
        break;
      }
      if (attempt == options.max_attempts) {
        rec.reject_reason = leak ? "leakage" : "similarity";
        out.rejected.push_back(std::move(rec));
        break;
      }
      resp = pick(rng);
    }
  }
  return out;
}

std::vector<PairingRecord> balance_by_category(const std::vector<PairingRecord>& records,
                                               int per_category, std::uint64_t seed,
                                               const std::vector<std::string>& categories) {
  if (per_category < 1) throw ValidationError("per_category must be >= 1");
  std::vector<PairingRecord> out;
  std::ostringstream shortfalls;
  for (std::size_t c = 0; c < categories.size(); ++c) {
    std::vector<PairingRecord> pool;
    for (const auto& r : records)
      if (r.category == categories[c]) pool.push_back(r);
    if (static_cast<int>(pool.size()) < per_category) {
      shortfalls << (shortfalls.tellp() > 0 ? "; " : "") << "category '" << categories[c] << "' has "
                 << pool.size() << " of " << per_category << " (short by "
                 << per_category - static_cast<int>(pool.size()) << ")";
      continue;
    }
    Rng rng = substream(seed, 3 + c);
    std::shuffle(pool.begin(), pool.end(), rng);
    out.insert(out.end(), pool.begin(), pool.begin() + per_category);
  }
  if (shortfalls.tellp() > 0) throw ValidationError("insufficient records: " + shortfalls.str());
  return out;
}

std::string render_dataset(const std::vector<PairingRecord>& records,
                           const std::vector<InstructionRecord>& instructions,
                           const std::vector<ResponseRecord>& responses, Variant variant) {
  std::unordered_map<std::string, const InstructionRecord*> inst;
  std::unordered_map<std::string, const ResponseRecord*> resp;
  for (const auto& r : instructions) inst.emplace(r.id, &r);
  for (const auto& r : responses) resp.emplace(r.id, &r);
  std::string out;
  for (const auto& rec : records) {
    const auto i = inst.find(rec.instruction_id);
    if (i == inst.end()) throw ValidationError("dangling instruction id '" + rec.instruction_id + "'");
    const auto r = resp.find(rec.response_id);
    if (r == resp.end()) throw ValidationError("dangling response id '" + rec.response_id + "'");
    std::string text = r->second->text;
    if (variant == Variant::reject_prefixed) text = std::string(kRejectPrefix) + " " + text;
    ordered_json line;
    line["instruction"] = i->second->text;
    line["response"] = text;
    line["category"] = rec.category;
    line["similarity"] = rec.similarity;
    line["variant"] = to_string(variant);
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::string render_rejects(const std::vector<PairingRecord>& rejects) {
  std::string out;
  for (const auto& rec : rejects) {
    ordered_json line;
    line["instruction_id"] = rec.instruction_id;
    line["response_id"] = rec.response_id;
    line["category"] = rec.category;
    line["similarity"] = rec.similarity;
    line["attempts"] = rec.attempts;
    line["reason"] = rec.reject_reason;
    out += line.dump();
    out += '\n';
  }
  return out;
}

EmitSummary emit_sft_dataset(const std::vector<PairingRecord>& records,
                             const std::vector<InstructionRecord>& instructions,
                             const std::vector<ResponseRecord>& responses, Variant variant,
                             const std::filesystem::path& dataset_path,
                             const std::filesystem::path& manifest_path,
                             const std::filesystem::path& rejects_path, const EmitContext& context) {
  const std::string dataset = render_dataset(records, instructions, responses, variant);
  EmitSummary summary;
  summary.content_hash = sha256_hex(dataset);
  summary.records = records.size();

  ordered_json manifest;
  manifest["seed"] = context.seed;
  manifest["tau"] = context.tau;
  manifest["max_attempts"] = context.max_attempts;
  manifest["provider"] = context.provider;
  manifest["variant"] = to_string(variant);
  manifest["counts"] = {{"instructions", context.instructions},
                        {"responses", context.responses},
                        {"candidates", context.candidates},
                        {"emitted", records.size()},
                        {"rejected", context.rejects.size()}};
  manifest["content_hash"] = summary.content_hash;

  write_file_atomic(dataset_path, dataset);
  if (!rejects_path.empty()) write_file_atomic(rejects_path, render_rejects(context.rejects));
  write_file_atomic(manifest_path, manifest.dump(2) + "\n");
  return summary;
}

VerifyReport verify_dataset(std::string_view jsonl, const EmbeddingProvider& provider, double tau) {
  VerifyReport report;
  std::vector<std::string> instructions, responses;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  const std::string prefix = std::string(kRejectPrefix) + " ";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json obj = json::parse(line);
    std::string response = obj.at("response").get<std::string>();
    if (obj.at("variant").get<std::string>() == "reject-prefixed") {
      if (response.rfind(prefix, 0) == 0) {
        response.erase(0, prefix.size());
      } else {
        ++report.missing_prefix;
      }
    }
    instructions.push_back(obj.at("instruction").get<std::string>());
    responses.push_back(std::move(response));
  }
  report.records = instructions.size();
  if (report.records == 0) return report;
  const auto a = embed(provider, instructions);
  const auto b = embed(provider, responses);
  for (std::size_t i = 0; i < report.records; ++i) {
    report.below_tau += a.vectors[i].dot(b.vectors[i]) < tau;
    report.leaks += leaks_instruction(instructions[i], responses[i]);
  }
  return report;
}

}  // namespace sddlab
