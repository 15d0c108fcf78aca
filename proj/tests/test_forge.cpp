#include <gtest/gtest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sddlab/error.hpp"
#include "sddlab/forge.hpp"
#include "sddlab/hash.hpp"
#include "sddlab/io.hpp"
#include "sddlab/log.hpp"

using namespace sddlab;
namespace fs = std::filesystem;

namespace {

const fs::path kData = SDDLAB_TEST_DATA;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("sddlab-forge-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<ResponseRecord> pool(std::initializer_list<std::string> texts) {
  std::vector<ResponseRecord> out;
  int i = 0;
  for (const auto& t : texts) out.push_back({"r" + std::to_string(i++), t, "test"});
  return out;
}

std::vector<InstructionRecord> fixture_instructions() {
  auto r = ingest_instructions(kData / "instructions.jsonl");
  EXPECT_TRUE(r.errors.empty());
  return r.records;
}

std::vector<ResponseRecord> fixture_responses() {
  auto r = ingest_responses(kData / "responses.jsonl");
  EXPECT_TRUE(r.errors.empty());
  return r.records;
}

}  // namespace

TEST(Ingest, SkipsMalformedLinesAndHashesMissingIds) {
  std::istringstream in(
      R"({"id": "a", "text": "first", "category": "Privacy Violation"})" "\n"
      "{not json\n"
      "\n"
      R"({"text": "second"})" "\n");
  const auto r = ingest_instructions(in);
  ASSERT_EQ(r.records.size(), 2u);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].line, 2u);
  EXPECT_EQ(r.records[1].id, "h" + sha256_hex("second").substr(0, 16));
  EXPECT_EQ(r.records[1].category, kUncategorized);
}

TEST(Ingest, FieldErrors) {
  std::istringstream in(
      R"({"text": ""})" "\n"
      R"({"text": 4})" "\n"
      R"({"text": "x", "category": "Gardening"})" "\n"
      R"([1, 2])" "\n");
  const auto r = ingest_instructions(in);
  EXPECT_TRUE(r.records.empty());
  ASSERT_EQ(r.errors.size(), 4u);
  EXPECT_NE(r.errors[2].message.find("Gardening"), std::string::npos);
}

TEST(Ingest, DuplicatesAndIdConflicts) {
  std::istringstream in(
      R"({"id": "a", "text": "same"})" "\n"
      R"({"id": "a", "text": "same"})" "\n"
      R"({"text": "same"})" "\n"
      R"({"id": "a", "text": "other"})" "\n");
  const auto r = ingest_responses(in);
  EXPECT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.duplicates, 2u);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].line, 4u);
}

TEST(Ingest, EmptyCorpusWarns) {
  std::vector<std::string> seen;
  auto prev = log::set_warning_sink([&](const std::string& m) { seen.push_back(m); });
  std::istringstream in("");
  const auto r = ingest_responses(in);
  log::set_warning_sink(prev);
  EXPECT_TRUE(r.records.empty());
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_NE(seen[0].find("empty"), std::string::npos);
  EXPECT_THROW(ingest_responses(kData / "does-not-exist.jsonl"), RuntimeFailure);
}

TEST(Ingest, Fixtures) {
  EXPECT_EQ(fixture_instructions().size(), 56u);
  EXPECT_EQ(fixture_responses().size(), 64u);
  EXPECT_EQ(harm_categories().size(), 14u);
}

TEST(RandomMatch, UniformOverPool) {
  std::vector<InstructionRecord> inst(10000, {"i", "t", "c"});
  std::vector<ResponseRecord> resp(10, {"r", "t", "s"});
  const auto pairs = random_match(inst, resp, 17);
  std::vector<double> counts(10, 0.0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(pairs[i].instruction, i);
    counts[pairs[i].response] += 1.0;
  }
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
  EXPECT_LT(chi2, 21.666);  // 99th percentile, 9 degrees of freedom
  EXPECT_EQ(random_match(inst, resp, 17)[123].response, pairs[123].response);
  EXPECT_THROW(random_match(inst, {}, 1), ValidationError);
}

TEST(RandomMatch, SingleResponsePool) {
  std::vector<InstructionRecord> inst(5, {"i", "t", "c"});
  for (const auto& p : random_match(inst, pool({"only"}), 3)) EXPECT_EQ(p.response, 0u);
}

TEST(Select, IdenticalTextIsResampled) {
  const std::vector<InstructionRecord> inst{{"i0", "How do I pick a lock quickly", "Malware"}};
  const auto resp = pool({"How do I pick a lock quickly", "Bake the bread at two hundred degrees"});
  SelectOptions o;
  o.tau = 0.9;
  o.seed = 5;
  const auto r = irrelevance_select({{0, 0}}, inst, resp, BuiltinEmbedder(), o);
  ASSERT_EQ(r.accepted.size(), 1u);
  EXPECT_EQ(r.accepted[0].response_id, "r1");
  EXPECT_GE(r.accepted[0].attempts, 2);
  EXPECT_LT(r.accepted[0].similarity, 0.9);
}

TEST(Select, TauOneAcceptsUnlessLeaking) {
  const std::vector<InstructionRecord> inst{{"i0", "alpha beta", "Malware"}, {"i1", "gamma", "Malware"}};
  const auto resp = pool({"alpha beta gamma", "alpha beta"});
  SelectOptions o;
  o.tau = 1.0;
  o.max_attempts = 1;
  const auto r = irrelevance_select({{0, 0}, {1, 1}}, inst, resp, BuiltinEmbedder(), o);
  ASSERT_EQ(r.accepted.size(), 1u);
  EXPECT_EQ(r.accepted[0].instruction_id, "i1");
  ASSERT_EQ(r.rejected.size(), 1u);
  EXPECT_EQ(r.rejected[0].reject_reason, "leakage");
}

TEST(Select, ExhaustedAttemptsAreRejected) {
  const std::vector<InstructionRecord> inst{{"i0", "same words here", "Malware"}};
  const auto resp = pool({"Same words here!"});
  SelectOptions o;
  o.max_attempts = 4;
  const auto r = irrelevance_select({{0, 0}}, inst, resp, BuiltinEmbedder(), o);
  EXPECT_TRUE(r.accepted.empty());
  ASSERT_EQ(r.rejected.size(), 1u);
  EXPECT_EQ(r.rejected[0].attempts, 4);
  EXPECT_EQ(r.rejected[0].reject_reason, "leakage");
}

TEST(Select, OptionValidation) {
  SelectOptions o;
  o.tau = 0.0;
  EXPECT_THROW(o.validate(), ValidationError);
  o.tau = 1.01;
  EXPECT_THROW(o.validate(), ValidationError);
  o.tau = 0.5;
  o.max_attempts = 0;
  EXPECT_THROW(o.validate(), ValidationError);
  EXPECT_EQ(parse_variant("reject-prefixed"), Variant::reject_prefixed);
  EXPECT_EQ(to_string(Variant::plain), "plain");
  EXPECT_THROW(parse_variant("prefixed"), ValidationError);
}

TEST(Select, FixtureAllBelowTau) {
  const auto inst = fixture_instructions();
  const auto resp = fixture_responses();
  SelectOptions o;
  const auto r = irrelevance_select(random_match(inst, resp, 0), inst, resp, BuiltinEmbedder(), o);
  EXPECT_EQ(r.accepted.size() + r.rejected.size(), inst.size());
  for (const auto& a : r.accepted) {
    EXPECT_LT(a.similarity, o.tau);
    EXPECT_GE(a.attempts, 1);
  }
}

TEST(Balance, ExactCountsPerCategory) {
  std::vector<PairingRecord> recs;
  for (const auto& c : harm_categories())
    for (int i = 0; i < 6; ++i) recs.push_back({c + std::to_string(i), "r", c, 0.1, 1, Variant::plain, ""});
  recs.push_back({"x", "r", std::string(kUncategorized), 0.1, 1, Variant::plain, ""});
  const auto out = balance_by_category(recs, 4, 9);
  ASSERT_EQ(out.size(), 14u * 4u);
  for (std::size_t c = 0; c < 14; ++c)
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out[c * 4 + i].category, harm_categories()[c]);
  EXPECT_EQ(balance_by_category(recs, 4, 9)[7].instruction_id, out[7].instruction_id);
}

TEST(Balance, ShortfallNamesCategory) {
  std::vector<PairingRecord> recs;
  for (const auto& c : harm_categories())
    for (int i = 0; i < 3; ++i) recs.push_back({c + std::to_string(i), "r", c, 0.1, 1, Variant::plain, ""});
  recs.pop_back();
  try {
    balance_by_category(recs, 3, 1);
    FAIL() << "expected a shortfall";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'" + harm_categories().back() + "' has 2 of 3 (short by 1)"), std::string::npos) << msg;
  }
}

TEST(Render, RoundTripAndPrefix) {
  const std::vector<InstructionRecord> inst{{"i0", "question \"quoted\"", "Malware"}};
  const auto resp = pool({"line one\nline two"});
  const std::vector<PairingRecord> recs{{"i0", "r0", "Malware", 0.125, 1, Variant::plain, ""}};

  const std::string plain = render_dataset(recs, inst, resp, Variant::plain);
  const auto j = nlohmann::json::parse(plain.substr(0, plain.find('\n')));
  EXPECT_EQ(j.at("instruction"), inst[0].text);
  EXPECT_EQ(j.at("response"), resp[0].text);
  EXPECT_EQ(j.at("category"), "Malware");
  EXPECT_DOUBLE_EQ(j.at("similarity").get<double>(), 0.125);
  EXPECT_EQ(j.at("variant"), "plain");

  const std::string pre = render_dataset(recs, inst, resp, Variant::reject_prefixed);
  const std::string r = nlohmann::json::parse(pre.substr(0, pre.find('\n'))).at("response");
  EXPECT_EQ(r.rfind(std::string(kRejectPrefix), 0), 0u);
  EXPECT_EQ(r.substr(kRejectPrefix.size()), " " + resp[0].text);

  EXPECT_THROW(render_dataset({{"nope", "r0", "Malware", 0.1, 1, Variant::plain, ""}}, inst, resp, Variant::plain),
               ValidationError);
}

TEST(Emit, ManifestAndVerification) {
  TempDir tmp;
  const auto inst = fixture_instructions();
  const auto resp = fixture_responses();
  const BuiltinEmbedder emb;
  SelectOptions o;
  o.seed = 2;
  o.variant = Variant::reject_prefixed;
  const auto pairs = random_match(inst, resp, o.seed);
  const auto sel = irrelevance_select(pairs, inst, resp, emb, o);
  EmitContext ctx;
  ctx.seed = o.seed;
  ctx.provider = emb.describe();
  ctx.instructions = inst.size();
  ctx.responses = resp.size();
  ctx.candidates = pairs.size();
  ctx.rejects = sel.rejected;
  const auto s = emit_sft_dataset(sel.accepted, inst, resp, o.variant, tmp.path / "d.jsonl",
                                  tmp.path / "m.json", tmp.path / "rej.jsonl", ctx);
  const std::string data = read_file(tmp.path / "d.jsonl");
  EXPECT_EQ(s.content_hash, sha256_hex(data));
  const auto m = nlohmann::json::parse(read_file(tmp.path / "m.json"));
  EXPECT_EQ(m.at("content_hash"), s.content_hash);
  EXPECT_EQ(m.at("counts").at("emitted"), sel.accepted.size());
  EXPECT_EQ(m.at("variant"), "reject-prefixed");
  EXPECT_TRUE(fs::exists(tmp.path / "rej.jsonl"));

  const VerifyReport v = verify_dataset(data, emb, o.tau);
  EXPECT_TRUE(v.ok());
  EXPECT_EQ(v.records, sel.accepted.size());

  // Same inputs, same bytes; a different seed changes the content hash.
  const auto again = emit_sft_dataset(sel.accepted, inst, resp, o.variant, tmp.path / "d2.jsonl",
                                      tmp.path / "m2.json", "", ctx);
  EXPECT_EQ(again.content_hash, s.content_hash);
  const auto other = irrelevance_select(random_match(inst, resp, 99), inst, resp, emb, o);
  const auto s3 = emit_sft_dataset(other.accepted, inst, resp, o.variant, tmp.path / "d3.jsonl",
                                   tmp.path / "m3.json", "", ctx);
  EXPECT_NE(s3.content_hash, s.content_hash);

  const VerifyReport tight = verify_dataset(data, emb, 1e-9);
  EXPECT_FALSE(tight.ok());
}
