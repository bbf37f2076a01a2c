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

#ifndef DUONAV_EVAL_TEXT_METRICS_HPP
#define DUONAV_EVAL_TEXT_METRICS_HPP

#include <map>
#include <span>
#include <string>
#include <vector>

namespace duonav::eval {

using Sentence = std::vector<std::string>;

Sentence tokenize(const std::string& text);

struct TextEvalRecord {
  Sentence candidate;
  std::vector<Sentence> references;
};

/// Sentence BLEU up to order n: clipped n-gram precisions, geometric mean,
/// brevity penalty against the closest reference length (shorter on ties).
/// No smoothing, so any zero precision gives 0.
double bleu(const Sentence& candidate, std::span<const Sentence> references, int n = 4);

/// Longest common subsequence length.
int lcs_length(const Sentence& a, const Sentence& b);

/// LCS F-measure with recall weight beta, maximised over references.
double rouge_l(const Sentence& candidate, std::span<const Sentence> references, double beta = 1.2);

/// CIDEr with n-gram orders 1..max_n weighted uniformly. Document frequencies
/// come from the reference sets of the corpus; a record's score is the mean
/// over its references of the tf-idf cosine, averaged over orders.
class Cider {
 public:
  explicit Cider(std::span<const TextEvalRecord> corpus, int max_n = 4);
  double score(const Sentence& candidate, std::span<const Sentence> references) const;
  int corpus_size() const { return documents_; }

 private:
  using Vector = std::map<Sentence, double>;
  Vector tfidf(const Sentence& s, int n, double* norm) const;

  int max_n_;
  int documents_;
  std::vector<std::map<Sentence, int>> df_;
};

struct CiderResult {
  double corpus = 0;
  std::vector<double> per_record;
};

CiderResult cider(std::span<const TextEvalRecord> corpus, int max_n = 4);

}  // namespace duonav::eval

#endif  // DUONAV_EVAL_TEXT_METRICS_HPP
