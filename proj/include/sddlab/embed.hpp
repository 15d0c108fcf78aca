#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <memory>
#include <string>
#include <vector>

namespace sddlab {

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string kind() const = 0;       // "builtin" or "remote"
  virtual std::string describe() const = 0;   // recorded in manifests
  virtual int dimension() const = 0;
  // Raw (unnormalised) vectors for non-empty texts.
  virtual std::vector<Eigen::VectorXd> embed_raw(const std::vector<std::string>& texts) const = 0;
};

struct EmbeddingBatch {
  std::vector<Eigen::VectorXd> vectors;  // unit norm, or zero when flagged
  std::vector<bool> flagged;             // empty text: no information
};

// One L2-normalised vector per text. Empty texts, and texts whose raw vector
// is zero, come back as zero vectors with flagged = true.
EmbeddingBatch embed(const EmbeddingProvider& provider, const std::vector<std::string>& texts);

// Cosine of two vectors; 0 when either is zero.
double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Lowercased character trigrams (a text shorter than three characters is a
// single gram), hashed with FNV-1a into `dimension` signed buckets.
class BuiltinEmbedder final : public EmbeddingProvider {
 public:
  static constexpr int kDefaultDimension = 4096;

  explicit BuiltinEmbedder(int dimension = kDefaultDimension, bool parallel = true);

  std::string kind() const override { return "builtin"; }
  std::string describe() const override;
  int dimension() const override { return dimension_; }
  std::vector<Eigen::VectorXd> embed_raw(const std::vector<std::string>& texts) const override;

  Eigen::VectorXd embed_one(const std::string& text) const;

 private:
  int dimension_;
  bool parallel_;
};

std::string ascii_lower(std::string s);

struct RemoteOptions {
  std::string endpoint;  // http://host:port/path
  int dimension = 0;
  int batch_size = 64;
  int max_retries = 3;
  std::chrono::milliseconds backoff{200};
  std::chrono::milliseconds timeout{10000};
};

// POSTs {"texts": [...]} and expects {"embeddings": [[...], ...]} with one
// vector of the configured dimension per text. Transport errors, non-200
// replies and malformed bodies are retried with exponential backoff; the batch
// fails with RuntimeFailure once retries are exhausted.
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  explicit RemoteEmbedder(RemoteOptions options);

  std::string kind() const override { return "remote"; }
  std::string describe() const override;
  int dimension() const override { return options_.dimension; }
  std::vector<Eigen::VectorXd> embed_raw(const std::vector<std::string>& texts) const override;

 private:
  std::vector<Eigen::VectorXd> post_batch(const std::vector<std::string>& texts) const;

  RemoteOptions options_;
  std::string host_;
  std::string path_;
};

}  // namespace sddlab
