#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "oracles.hpp"
#include "sddlab/embed.hpp"
#include "sddlab/error.hpp"

// after Eigen: <resolv.h> (pulled in by httplib) defines a _res macro
#include <httplib.h>
#include <json.hpp>

using namespace sddlab;

TEST(Builtin, IdenticalAndDisjointTexts) {
  const BuiltinEmbedder e;
  const EmbeddingBatch b = embed(e, {"the quick brown fox", "the quick brown fox", "abc", "xyz"});
  EXPECT_NEAR(cosine(b.vectors[0], b.vectors[1]), 1.0, 1e-12);
  EXPECT_NEAR(cosine(b.vectors[2], b.vectors[3]), oracle::trigram_cosine("abc", "xyz"), 1e-12);
  EXPECT_NEAR(cosine(b.vectors[2], b.vectors[3]), 0.0, 1e-12);
  for (const auto& v : b.vectors) EXPECT_NEAR(v.norm(), 1.0, 1e-12);
}

TEST(Builtin, MatchesIndependentEmbedder) {
  const BuiltinEmbedder e;
  const std::vector<std::string> texts{
      "Describe the process of photosynthesis in plants.",
      "Photosynthesis converts light into chemical energy.",
      "A recipe for lentil soup with cumin and lemon.",
      "ok",
      "Mixed CASE text, with Punctuation!"};
  const EmbeddingBatch b = embed(e, texts);
  for (std::size_t i = 0; i < texts.size(); ++i)
    for (std::size_t j = 0; j < texts.size(); ++j)
      EXPECT_NEAR(cosine(b.vectors[i], b.vectors[j]), oracle::trigram_cosine(texts[i], texts[j]), 1e-12)
          << i << " " << j;
}

TEST(Builtin, CaseInsensitive) {
  const BuiltinEmbedder e;
  const EmbeddingBatch b = embed(e, {"Hello World", "hello world"});
  EXPECT_EQ(b.vectors[0], b.vectors[1]);
}

TEST(Builtin, EmptyTextFlagged) {
  const BuiltinEmbedder e;
  const EmbeddingBatch b = embed(e, {"", "fine"});
  EXPECT_TRUE(b.flagged[0]);
  EXPECT_FALSE(b.flagged[1]);
  EXPECT_EQ(b.vectors[0].norm(), 0.0);
  EXPECT_EQ(cosine(b.vectors[0], b.vectors[1]), 0.0);
}

TEST(Builtin, SerialMatchesParallel) {
  std::vector<std::string> texts;
  for (int i = 0; i < 300; ++i) texts.push_back("sample text number " + std::to_string(i * 7919));
  const auto a = BuiltinEmbedder(512, false).embed_raw(texts);
  const auto b = BuiltinEmbedder(512, true).embed_raw(texts);
  for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_EQ(BuiltinEmbedder().describe(), "builtin:trigram-fnv1a:4096");
  EXPECT_THROW(BuiltinEmbedder(0), ValidationError);
}

namespace {

// Minimal embedding service: the vector for a text is (len, count of 'a', 1).
class FakeService {
 public:
  explicit FakeService(int dim, int fail_first = 0) : dim_(dim), fail_left_(fail_first) {
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls_;
      if (fail_left_ > 0) {
        --fail_left_;
        res.status = 503;
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      nlohmann::json out = nlohmann::json::array();
      for (const auto& t : body.at("texts")) {
        const std::string s = t.get<std::string>();
        std::vector<double> v(static_cast<std::size_t>(dim_), 1.0);
        v[0] = static_cast<double>(s.size());
        if (dim_ > 1) v[1] = static_cast<double>(std::count(s.begin(), s.end(), 'a'));
        out.push_back(v);
      }
      res.set_content(nlohmann::json{{"embeddings", out}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeService() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/embed"; }
  int calls() const { return calls_; }

 private:
  httplib::Server server_;
  int dim_;
  std::atomic<int> fail_left_;
  std::atomic<int> calls_{0};
  int port_ = 0;
  std::thread thread_;
};

RemoteOptions opts(const std::string& url, int dim) {
  RemoteOptions o;
  o.endpoint = url;
  o.dimension = dim;
  o.batch_size = 2;
  o.max_retries = 2;
  o.backoff = std::chrono::milliseconds(1);
  o.timeout = std::chrono::milliseconds(2000);
  return o;
}

}  // namespace

TEST(Remote, BatchesAndParses) {
  FakeService svc(3);
  const RemoteEmbedder e(opts(svc.url(), 3));
  const auto v = e.embed_raw({"aaa", "b", "banana"});
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0](0), 3.0);
  EXPECT_EQ(v[2](1), 3.0);
  EXPECT_EQ(svc.calls(), 2);  // batch size 2
  EXPECT_EQ(e.kind(), "remote");
}

TEST(Remote, RetriesTransientFailures) {
  FakeService svc(2, 2);
  const RemoteEmbedder e(opts(svc.url(), 2));
  EXPECT_EQ(e.embed_raw({"x"}).size(), 1u);
  EXPECT_EQ(svc.calls(), 3);
}

TEST(Remote, GivesUpAfterRetries) {
  FakeService svc(2, 100);
  const RemoteEmbedder e(opts(svc.url(), 2));
  EXPECT_THROW(e.embed_raw({"x"}), RuntimeFailure);
  EXPECT_EQ(svc.calls(), 3);
}

TEST(Remote, DimensionMismatchFails) {
  FakeService svc(4);
  const RemoteEmbedder e(opts(svc.url(), 3));
  EXPECT_THROW(e.embed_raw({"x"}), RuntimeFailure);
}

TEST(Remote, UnreachableFails) {
  RemoteOptions o = opts("http://127.0.0.1:1/embed", 2);
  o.max_retries = 0;
  EXPECT_THROW(RemoteEmbedder(o).embed_raw({"x"}), RuntimeFailure);
}

TEST(Remote, BadEndpointRejected) {
  EXPECT_THROW(RemoteEmbedder(opts("https://example.org/x", 2)), ValidationError);
  EXPECT_THROW(RemoteEmbedder(opts("example.org", 2)), ValidationError);
  EXPECT_THROW(RemoteEmbedder(opts("http://127.0.0.1/x", 0)), ValidationError);
}
