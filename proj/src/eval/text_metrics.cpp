/*
 * Copyright 2026 The duonav Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "duonav/eval/text_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace duonav::eval {

namespace {

std::map<Sentence, int> ngram_counts(const Sentence& s, int n) {
  std::map<Sentence, int> out;
  if (static_cast<int>(s.size()) < n) return out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= s.size(); ++i)
    ++out[Sentence(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(i) + n)];
  return out;
}

void require_references(std::span<const Sentence> refs) {
  if (refs.empty()) throw std::invalid_argument("text metrics need at least one reference");
}

}  // namespace

Sentence tokenize(const std::string& text) {
  std::istringstream in(text);
  Sentence out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

double bleu(const Sentence& candidate, std::span<const Sentence> references, int n) {
  require_references(references);
  if (n < 1) throw std::invalid_argument("bleu order must be >= 1");
  if (candidate.empty()) return 0.0;
  double log_sum = 0;
  for (int k = 1; k <= n; ++k) {
    const auto cand = ngram_counts(candidate, k);
    std::map<Sentence, int> max_ref;
    for (const auto& r : references)
      for (const auto& [g, c] : ngram_counts(r, k)) max_ref[g] = std::max(max_ref[g], c);
    int matched = 0, total = 0;
    for (const auto& [g, c] : cand) {
      total += c;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) matched += std::min(c, it->second);
    }
    if (matched == 0 || total == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched) / total);
  }
  const double c = static_cast<double>(candidate.size());
  double r = static_cast<double>(references[0].size());
  for (const auto& ref : references) {
    const double len = static_cast<double>(ref.size());
    if (std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r)) r = len;
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / n);
}

int lcs_length(const Sentence& a, const Sentence& b) {
  std::vector<int> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Sentence& candidate, std::span<const Sentence> references, double beta) {
  require_references(references);
  double best = 0;
  for (const auto& ref : references) {
    if (candidate.empty() || ref.empty()) continue;
    const double l = lcs_length(candidate, ref);
    if (l == 0) continue;
    const double p = l / static_cast<double>(candidate.size());
    const double r = l / static_cast<double>(ref.size());
    const double f = (1 + beta * beta) * p * r / (r + beta * beta * p);
    best = std::max(best, f);
  }
  return best;
}

Cider::Cider(std::span<const TextEvalRecord> corpus, int max_n)
    : max_n_(max_n), documents_(static_cast<int>(corpus.size())), df_(static_cast<std::size_t>(max_n)) {
  if (max_n < 1) throw std::invalid_argument("cider order must be >= 1");
  for (const auto& rec : corpus) {
    require_references(rec.references);
    for (int n = 1; n <= max_n; ++n) {
      std::set<Sentence> seen;
      for (const auto& r : rec.references)
        for (const auto& [g, c] : ngram_counts(r, n)) seen.insert(g);
      for (const auto& g : seen) ++df_[static_cast<std::size_t>(n - 1)][g];
    }
  }
}

Cider::Vector Cider::tfidf(const Sentence& s, int n, double* norm) const {
  Vector v;
  const auto counts = ngram_counts(s, n);
  int total = 0;
  for (const auto& [g, c] : counts) total += c;
  double sq = 0;
  const auto& df = df_[static_cast<std::size_t>(n - 1)];
  for (const auto& [g, c] : counts) {
    auto it = df.find(g);
    const double d = it == df.end() ? 1.0 : static_cast<double>(std::max(1, it->second));
    const double w = (static_cast<double>(c) / total) * std::log(static_cast<double>(documents_) / d);
    v[g] = w;
    sq += w * w;
  }
  *norm = std::sqrt(sq);
  return v;
}

double Cider::score(const Sentence& candidate, std::span<const Sentence> references) const {
  require_references(references);
  double total = 0;
  for (int n = 1; n <= max_n_; ++n) {
    double cn;
    const Vector c = tfidf(candidate, n, &cn);
    double sum = 0;
    for (const auto& ref : references) {
      double rn;
      const Vector r = tfidf(ref, n, &rn);
      if (cn == 0 || rn == 0) continue;
      double dot = 0;
      for (const auto& [g, w] : c)
        if (auto it = r.find(g); it != r.end()) dot += w * it->second;
      sum += dot / (cn * rn);
    }
    total += sum / static_cast<double>(references.size());
  }
  return total / max_n_;
}

CiderResult cider(std::span<const TextEvalRecord> corpus, int max_n) {
  CiderResult out;
  if (corpus.empty()) return out;
  Cider model(corpus, max_n);
  for (const auto& rec : corpus) out.per_record.push_back(model.score(rec.candidate, rec.references));
  double s = 0;
  for (double v : out.per_record) s += v;
  out.corpus = s / static_cast<double>(out.per_record.size());
  return out;
}

}  // namespace duonav::eval
