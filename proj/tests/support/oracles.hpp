// Copyright 2026 The Triage Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Independent reference implementations used by the unit and acceptance
// tests. They favour the plainest possible formulation over speed.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "triage/classifiers.hpp"
#include "triage/eval.hpp"
#include "triage/features.hpp"
#include "triage/random.hpp"

namespace triage::oracle {

// ---------------------------------------------------------------------------
// TF-IDF

/// Random corpus of up to 8 docs over up to 12 terms "t0".."t11".
inline std::vector<TokenList> random_corpus(Rng& rng) {
  const std::size_t n_docs = 1 + rng.uniform_index(8);
  const std::size_t n_terms = 1 + rng.uniform_index(12);
  std::vector<TokenList> docs(n_docs);
  for (auto& d : docs) {
    const std::size_t len = rng.uniform_index(7);
    for (std::size_t i = 0; i < len; ++i)
      d.push_back("t" + std::to_string(rng.uniform_index(n_terms)));
  }
  return docs;
}

/// Dense tf-idf row for docs[i] with columns in first-appearance order.
inline std::vector<double> dense_tfidf(const std::vector<TokenList>& docs, std::size_t i) {
  std::vector<std::string> terms;
  for (const auto& d : docs) {
    for (const auto& t : d) {
      if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
    }
  }
  const double n = static_cast<double>(docs.size());
  std::vector<double> row(terms.size(), 0.0);
  for (std::size_t c = 0; c < terms.size(); ++c) {
    double df = 0.0, tf = 0.0;
    for (const auto& d : docs) {
      if (std::count(d.begin(), d.end(), terms[c]) > 0) df += 1.0;
    }
    tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), terms[c]));
    row[c] = tf * (std::log((1.0 + n) / (1.0 + df)) + 1.0);
  }
  double norm = 0.0;
  for (double v : row) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& v : row) v /= norm;
  }
  return row;
}

// ---------------------------------------------------------------------------
// Metrics

using Counts = std::vector<std::vector<std::uint64_t>>;

inline Counts random_counts(Rng& rng, std::size_t k, std::uint64_t max_cell) {
  Counts m(k, std::vector<std::uint64_t>(k, 0));
  std::uint64_t total = 0;
  for (auto& row : m) {
    for (auto& c : row) {
      // Sprinkle zeros so empty rows and columns occur.
      c = rng.uniform() < 0.3 ? 0 : rng.uniform_index(max_cell + 1);
      total += c;
    }
  }
  if (total == 0) m[0][0] = 1;
  return m;
}

/// Straight from the definitions: per-class precision, recall and F1,
/// then the support-weighted mean.
inline MetricsReport metrics(const Counts& m) {
  const std::size_t k = m.size();
  double total = 0.0, diag = 0.0;
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t p = 0; p < k; ++p) total += static_cast<double>(m[t][p]);
    diag += static_cast<double>(m[t][t]);
  }
  MetricsReport r;
  r.accuracy = diag / total;
  for (std::size_t c = 0; c < k; ++c) {
    double tp = static_cast<double>(m[c][c]), fn = 0.0, fp = 0.0;
    for (std::size_t o = 0; o < k; ++o) {
      if (o == c) continue;
      fn += static_cast<double>(m[c][o]);
      fp += static_cast<double>(m[o][c]);
    }
    const double support = tp + fn;
    if (support == 0.0) continue;
    const double precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    const double recall = tp / support;
    const double f1 =
        precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    const double w = support / total;
    r.precision += w * precision;
    r.recall += w * recall;
    r.f_measure += w * f1;
  }
  return r;
}

inline ConfusionMatrix to_matrix(const Counts& m) {
  const int k = static_cast<int>(m.size());
  ConfusionMatrix cm(k);
  for (int t = 0; t < k; ++t) {
    for (int p = 0; p < k; ++p) {
      for (std::uint64_t i = 0; i < m[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
           ++i) {
        cm.add(t, p);
      }
    }
  }
  return cm;
}

// ---------------------------------------------------------------------------
// CART on binary features, by exhaustive search over every (feature, 0.5)
// split at every node.

struct CartOracle {
  struct Node {
    int feature = -1;
    std::vector<double> proba;
    int left = -1, right = -1;
  };
  std::vector<Node> nodes;

  int build(const std::vector<std::vector<int>>& x, const std::vector<int>& y, int k,
            const std::vector<std::size_t>& rows, int depth, int max_depth, int min_split) {
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (auto r : rows) counts[static_cast<std::size_t>(y[r])] += 1.0;
    const int classes_present = static_cast<int>(
        std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }));

    // Gini cost is n - sum_side(sum_c count^2 / side_size); minimising it
    // maximises the rational score num/den, compared exactly.
    int best_f = -1;
    std::uint64_t best_num = 0, best_den = 1;
    if (depth < max_depth && static_cast<int>(rows.size()) >= min_split && classes_present > 1) {
      for (std::size_t f = 0; f < x[0].size(); ++f) {
        std::vector<std::uint64_t> l(static_cast<std::size_t>(k), 0),
            r(static_cast<std::size_t>(k), 0);
        std::uint64_t wl = 0, wr = 0;
        for (auto i : rows) {
          if (x[i][f] == 0) {
            l[static_cast<std::size_t>(y[i])] += 1;
            wl += 1;
          } else {
            r[static_cast<std::size_t>(y[i])] += 1;
            wr += 1;
          }
        }
        if (wl == 0 || wr == 0) continue;
        std::uint64_t sl = 0, sr = 0;
        for (auto c : l) sl += c * c;
        for (auto c : r) sr += c * c;
        const std::uint64_t num = sl * wr + sr * wl, den = wl * wr;
        if (best_f < 0 || num * best_den > best_num * den) {
          best_f = static_cast<int>(f);
          best_num = num;
          best_den = den;
        }
      }
    }
    if (best_f < 0) {
      for (double& c : counts) c /= static_cast<double>(rows.size());
      nodes[static_cast<std::size_t>(id)].proba = counts;
      return id;
    }
    std::vector<std::size_t> lr, rr;
    for (auto i : rows) (x[i][static_cast<std::size_t>(best_f)] == 0 ? lr : rr).push_back(i);
    nodes[static_cast<std::size_t>(id)].feature = best_f;
    const int l = build(x, y, k, lr, depth + 1, max_depth, min_split);
    const int r = build(x, y, k, rr, depth + 1, max_depth, min_split);
    nodes[static_cast<std::size_t>(id)].left = l;
    nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  std::vector<double> predict_proba(const std::vector<int>& row) const {
    int n = 0;
    while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
      const auto& node = nodes[static_cast<std::size_t>(n)];
      n = row[static_cast<std::size_t>(node.feature)] == 0 ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(n)].proba;
  }
};

inline FeatureMatrix binary_matrix(const std::vector<std::vector<int>>& x) {
  FeatureMatrix m;
  m.dim = x.empty() ? 0 : x[0].size();
  for (const auto& row : x) {
    std::vector<std::pair<std::uint32_t, double>> e;
    for (std::size_t f = 0; f < row.size(); ++f) {
      if (row[f]) e.emplace_back(static_cast<std::uint32_t>(f), 1.0);
    }
    m.rows.emplace_back(m.dim, std::move(e));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Finite differences

/// Central-difference gradient of f over `params`.
inline std::vector<double> numeric_gradient(std::vector<double>& params,
                                            const std::function<double()>& f, double h = 1e-5) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = f();
    params[i] = saved - h;
    const double down = f();
    params[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a|| + ||b||, 1e-12).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nb), 1e-12);
}

}  // namespace triage::oracle
