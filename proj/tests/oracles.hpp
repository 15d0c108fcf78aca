#pragma once

// Independent reference computations used to freeze expected values. Nothing
// here calls into the library.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace oracle {

// Standard normal CDF by composite Simpson integration of the density on
// [-12, x]; agrees with erf-based forms to ~1e-13.
inline double normal_cdf_simpson(double x, int intervals = 20000) {
  const double lo = -12.0;
  if (x <= lo) return 0.0;
  const double h = (x - lo) / intervals;
  auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); };
  double s = pdf(lo) + pdf(x);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(lo + i * h);
  return s * h / 3.0;
}

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Exact accuracy of a K = 2 mean-classifier oracle with n_v invariant and n_s
// spurious features in the zero-noise limit: each spurious feature votes for
// the true class with probability 1 - p/2, ties are broken by vanishing noise.
inline double exact_k2_accuracy(int n_v, int n_s, double p) {
  const double q = 1.0 - p / 2.0;
  double acc = 0.0;
  for (int a = 0; a <= n_s; ++a) {
    const double pr = binomial(n_s, a) * std::pow(q, a) * std::pow(1.0 - q, n_s - a);
    const int margin = n_v + a - (n_s - a);
    acc += pr * (margin > 0 ? 1.0 : margin == 0 ? 0.5 : 0.0);
  }
  return acc;
}

// Bytewise FNV-1a, written out separately from the library's.
inline std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < s.size(); ++i) {
    h = h ^ static_cast<unsigned char>(s[i]);
    h = h * 1099511628211ull;
  }
  return h;
}

// Sparse re-implementation of the hashed trigram embedder.
inline std::map<std::uint64_t, double> trigram_vector(const std::string& text, std::uint64_t dim) {
  std::string t;
  for (char c : text) t += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
  std::vector<std::string> grams;
  if (t.empty()) return {};
  if (t.size() < 3) {
    grams.push_back(t);
  } else {
    for (std::size_t i = 0; i + 3 <= t.size(); ++i) grams.push_back(t.substr(i, 3));
  }
  std::map<std::uint64_t, double> v;
  for (const auto& g : grams) {
    const std::uint64_t h = fnv(g);
    v[h % dim] += (h >> 63) != 0 ? -1.0 : 1.0;
  }
  return v;
}

inline double sparse_cosine(const std::map<std::uint64_t, double>& a,
                            const std::map<std::uint64_t, double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [k, v] : a) {
    na += v * v;
    const auto it = b.find(k);
    if (it != b.end()) dot += v * it->second;
  }
  for (const auto& [k, v] : b) nb += v * v;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

inline double trigram_cosine(const std::string& a, const std::string& b, std::uint64_t dim = 4096) {
  return sparse_cosine(trigram_vector(a, dim), trigram_vector(b, dim));
}

}  // namespace oracle
