#include "sddlab/embed.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <thread>

#include "sddlab/error.hpp"
#include "sddlab/hash.hpp"

namespace sddlab {

using json = nlohmann::json;

EmbeddingBatch embed(const EmbeddingProvider& provider, const std::vector<std::string>& texts) {
  const int dim = provider.dimension();
  EmbeddingBatch out;
  out.vectors.assign(texts.size(), Eigen::VectorXd::Zero(dim));
  out.flagged.assign(texts.size(), true);

  std::vector<std::string> live;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) continue;
    live.push_back(texts[i]);
    where.push_back(i);
  }
  if (live.empty()) return out;
  const auto raw = provider.embed_raw(live);
  if (raw.size() != live.size())
    throw RuntimeFailure("embedding provider returned " + std::to_string(raw.size()) +
                         " vectors for " + std::to_string(live.size()) + " texts");
  for (std::size_t j = 0; j < raw.size(); ++j) {
    if (raw[j].size() != dim) throw RuntimeFailure("embedding provider returned a vector of the wrong dimension");
    const double norm = raw[j].norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) continue;
    out.vectors[where[j]] = raw[j] / norm;
    out.flagged[where[j]] = false;
  }
  return out;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

std::string ascii_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

BuiltinEmbedder::BuiltinEmbedder(int dimension, bool parallel)
    : dimension_(dimension), parallel_(parallel) {
  if (dimension < 1) throw ValidationError("embedding dimension must be >= 1");
}

std::string BuiltinEmbedder::describe() const {
  return "builtin:trigram-fnv1a:" + std::to_string(dimension_);
}

Eigen::VectorXd BuiltinEmbedder::embed_one(const std::string& text) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dimension_);
  if (text.empty()) return v;
  const std::string lower = ascii_lower(text);
  auto add = [&](std::string_view gram) {
    const std::uint64_t h = fnv1a64(gram);
    const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dimension_));
    v(bucket) += (h >> 63) ? -1.0 : 1.0;
  };
  if (lower.size() < 3) {
    add(lower);
  } else {
    for (std::size_t i = 0; i + 3 <= lower.size(); ++i) add(std::string_view(lower).substr(i, 3));
  }
  return v;
}

std::vector<Eigen::VectorXd> BuiltinEmbedder::embed_raw(const std::vector<std::string>& texts) const {
  std::vector<Eigen::VectorXd> out(texts.size());
  const auto n = static_cast<std::ptrdiff_t>(texts.size());
#pragma omp parallel for schedule(static) if (parallel_)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = embed_one(texts[i]);
  return out;
}

RemoteEmbedder::RemoteEmbedder(RemoteOptions options) : options_(std::move(options)) {
  if (options_.dimension < 1) throw ValidationError("remote embedder needs a dimension >= 1");
  if (options_.batch_size < 1) throw ValidationError("remote embedder batch size must be >= 1");
  if (options_.max_retries < 0) throw ValidationError("remote embedder retries must be >= 0");
  const std::string& url = options_.endpoint;
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || url.substr(0, scheme) != "http")
    throw ValidationError("remote embedder endpoint must be an http:// URL, got '" + url + "'");
  const auto slash = url.find('/', scheme + 3);
  host_ = url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url.substr(slash);
  if (host_.size() <= scheme + 3) throw ValidationError("remote embedder endpoint has no host");
}

std::string RemoteEmbedder::describe() const {
  return "remote:" + options_.endpoint + ":" + std::to_string(options_.dimension);
}

std::vector<Eigen::VectorXd> RemoteEmbedder::post_batch(const std::vector<std::string>& texts) const {
  const std::string body = json{{"texts", texts}}.dump();
  std::string last_error;
  auto delay = options_.backoff;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Client client(host_);
    const auto secs = options_.timeout.count() / 1000;
    const auto usecs = (options_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    auto res = client.Post(path_, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    try {
      const json reply = json::parse(res->body);
      const auto& rows = reply.at("embeddings");
      if (!rows.is_array() || rows.size() != texts.size()) {
        last_error = "reply has " + std::to_string(rows.is_array() ? rows.size() : 0) +
                     " embeddings for " + std::to_string(texts.size()) + " texts";
        continue;
      }
      std::vector<Eigen::VectorXd> out;
      out.reserve(rows.size());
      bool ok = true;
      for (const auto& row : rows) {
        if (!row.is_array() || static_cast<int>(row.size()) != options_.dimension) {
          last_error = "embedding dimension does not match the configured " +
                       std::to_string(options_.dimension);
          ok = false;
          break;
        }
        Eigen::VectorXd v(options_.dimension);
        for (int k = 0; k < options_.dimension; ++k) v(k) = row[k].get<double>();
        if (!v.allFinite()) {
          last_error = "non-finite embedding value";
          ok = false;
          break;
        }
        out.push_back(std::move(v));
      }
      if (ok) return out;
    } catch (const json::exception& e) {
      last_error = std::string("malformed reply: ") + e.what();
    }
  }
  throw RuntimeFailure("remote embedding failed after " + std::to_string(options_.max_retries + 1) +
                       " attempts: " + last_error);
}

std::vector<Eigen::VectorXd> RemoteEmbedder::embed_raw(const std::vector<std::string>& texts) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += options_.batch_size) {
    const auto end = std::min(texts.size(), start + static_cast<std::size_t>(options_.batch_size));
    const std::vector<std::string> batch(texts.begin() + start, texts.begin() + end);
    for (auto& v : post_batch(batch)) out.push_back(std::move(v));
  }
  return out;
}

}  // namespace sddlab
