#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "sddlab/embed.hpp"

namespace sddlab {

const std::vector<std::string>& harm_categories();
inline constexpr std::string_view kUncategorized = "uncategorized";
inline constexpr std::string_view kRejectPrefix =
    "I refuse to answer your question for responsible and ethical reasons. "
    "I provided an irrational answer to your question.";

struct InstructionRecord {
  std::string id;
  std::string text;
  std::string category;
};

struct ResponseRecord {
  std::string id;
  std::string text;
  std::string source;
};

struct IngestIssue {
  std::size_t line = 0;  // 1-based
  std::string message;
};

template <typename Record>
struct IngestResult {
  std::vector<Record> records;
  std::vector<IngestIssue> errors;
  std::size_t duplicates = 0;
};

// JSON Lines. Instructions: {"id"?, "text", "category"?}; responses:
// {"id"?, "text", "source"?}. Missing ids become "h" + the first 16 hex digits
// of the text's SHA-256. Bad lines are skipped and reported; exact-duplicate
// texts are dropped and counted. Blank lines are ignored.
IngestResult<InstructionRecord> ingest_instructions(std::istream& in,
                                                    const std::vector<std::string>& categories = harm_categories());
IngestResult<ResponseRecord> ingest_responses(std::istream& in);
IngestResult<InstructionRecord> ingest_instructions(const std::filesystem::path& path,
                                                    const std::vector<std::string>& categories = harm_categories());
IngestResult<ResponseRecord> ingest_responses(const std::filesystem::path& path);

struct CandidatePair {
  std::size_t instruction = 0;  // index into the instruction list
  std::size_t response = 0;     // index into the response pool
};

// One uniformly drawn response per instruction, with replacement.
std::vector<CandidatePair> random_match(const std::vector<InstructionRecord>& instructions,
                                        const std::vector<ResponseRecord>& responses,
                                        std::uint64_t seed);

enum class Variant { plain, reject_prefixed };
std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct PairingRecord {
  std::string instruction_id;
  std::string response_id;
  std::string category;
  double similarity = 0.0;
  int attempts = 0;
  Variant variant = Variant::plain;
  std::string reject_reason;  // set on rejects only: "similarity" or "leakage"
};

struct SelectOptions {
  double tau = 0.3;
  int max_attempts = 20;
  std::uint64_t seed = 0;
  Variant variant = Variant::plain;

  void validate() const;
};

struct SelectionResult {
  std::vector<PairingRecord> accepted;
  std::vector<PairingRecord> rejected;
};

// Accepts a pair when cosine(instruction, response) < tau and the response does
// not contain the instruction text (case-folded). Otherwise a new response is
// drawn from the pool, up to max_attempts draws in total; pairs that never
// qualify go to `rejected`.
SelectionResult irrelevance_select(const std::vector<CandidatePair>& pairs,
                                   const std::vector<InstructionRecord>& instructions,
                                   const std::vector<ResponseRecord>& responses,
                                   const EmbeddingProvider& provider, const SelectOptions& options);

bool leaks_instruction(const std::string& instruction, const std::string& response);

// Exactly per_category records for each listed category, in list order.
// Records in other categories are dropped.
std::vector<PairingRecord> balance_by_category(const std::vector<PairingRecord>& records,
                                               int per_category, std::uint64_t seed,
                                               const std::vector<std::string>& categories = harm_categories());

// JSON Lines with {instruction, response, category, similarity, variant}.
std::string render_dataset(const std::vector<PairingRecord>& records,
                           const std::vector<InstructionRecord>& instructions,
                           const std::vector<ResponseRecord>& responses, Variant variant);
std::string render_rejects(const std::vector<PairingRecord>& rejects);

struct EmitContext {
  std::uint64_t seed = 0;
  double tau = 0.3;
  int max_attempts = 20;
  std::string provider;
  std::size_t instructions = 0;
  std::size_t responses = 0;
  std::size_t candidates = 0;
  std::vector<PairingRecord> rejects;
};

struct EmitSummary {
  std::string content_hash;  // SHA-256 of the dataset bytes
  std::size_t records = 0;
};

// Writes dataset, manifest and (when rejects_path is non-empty) rejects files.
EmitSummary emit_sft_dataset(const std::vector<PairingRecord>& records,
                             const std::vector<InstructionRecord>& instructions,
                             const std::vector<ResponseRecord>& responses, Variant variant,
                             const std::filesystem::path& dataset_path,
                             const std::filesystem::path& manifest_path,
                             const std::filesystem::path& rejects_path, const EmitContext& context);

struct VerifyReport {
  std::size_t records = 0;
  std::size_t below_tau = 0;
  std::size_t leaks = 0;
  std::size_t missing_prefix = 0;  // reject-prefixed records only
  bool ok() const { return records > 0 && below_tau == records && leaks == 0 && missing_prefix == 0; }
};

// Re-embeds each emitted pair (reject prefix stripped) and re-checks tau and leakage.
VerifyReport verify_dataset(std::string_view jsonl, const EmbeddingProvider& provider, double tau);

}  // namespace sddlab
