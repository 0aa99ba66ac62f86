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

// CART trees over a presorted sparse column index, and the two ensembles
// built from them (random forest, multiclass gradient boosting).
//
// Split search only walks the non-zero entries of each column; the implicit
// zeros of a node form one block whose statistics are the node total minus
// the non-zero part. Best split = lowest child cost, ties to the lowest
// feature index and then the lowest threshold. Costs within a relative
// 1e-12 count as tied, so rounding cannot override the tie rule. Rows go
// left when x[f] <= threshold.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "model_impl.hpp"
#include "triage/random.hpp"

namespace triage::detail {

namespace {

struct Node {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> value;  // leaves only
};

struct Tree {
  std::vector<Node> nodes;

  const std::vector<double>& leaf_value(const SparseVector& x) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
      const Node& n = nodes[i];
      i = static_cast<std::size_t>(
          x.at(static_cast<std::uint32_t>(n.feature)) <= n.threshold ? n.left : n.right);
    }
    return nodes[i].value;
  }

  nlohmann::json to_json() const {
    std::vector<int> feature, left, right;
    std::vector<double> threshold;
    nlohmann::json value = nlohmann::json::array();
    for (const auto& n : nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    return {{"feature", feature},
            {"threshold", threshold},
            {"left", left},
            {"right", right},
            {"value", value}};
  }

  static Tree from_json(const nlohmann::json& j, std::size_t n_features, std::size_t value_size) {
    const auto feature = j.at("feature").get<std::vector<int>>();
    const std::size_t n = feature.size();
    const auto threshold = vector_from_json<double>(j.at("threshold"), n);
    const auto left = vector_from_json<int>(j.at("left"), n);
    const auto right = vector_from_json<int>(j.at("right"), n);
    const auto& value = j.at("value");
    if (n == 0 || value.size() != n) throw DataError("malformed tree");
    Tree t;
    t.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      Node& node = t.nodes[i];
      node.feature = feature[i];
      node.threshold = threshold[i];
      node.left = left[i];
      node.right = right[i];
      if (node.feature >= 0) {
        // Children always follow their parent in pre-order storage.
        const auto lo = static_cast<int>(i);
        const auto hi = static_cast<int>(n);
        if (static_cast<std::size_t>(node.feature) >= n_features || node.left <= lo ||
            node.right <= lo || node.left >= hi || node.right >= hi) {
          throw DataError("malformed tree node");
        }
      } else {
        node.value = value[i].get<std::vector<double>>();
        if (node.value.size() != value_size) throw DataError("malformed tree leaf");
      }
    }
    return t;
  }
};

struct Entry {
  double value;
  std::uint32_t row;
};

// Per feature: the non-zero entries sorted by (value, row).
class ColumnIndex {
 public:
  explicit ColumnIndex(const FeatureMatrix& x) : columns_(x.dim) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto& row = x.rows[i];
      for (std::size_t k = 0; k < row.nnz(); ++k) {
        columns_[row.indices()[k]].push_back({row.values()[k], static_cast<std::uint32_t>(i)});
      }
    }
    for (auto& col : columns_) {
      std::sort(col.begin(), col.end(), [](const Entry& a, const Entry& b) {
        return a.value < b.value || (a.value == b.value && a.row < b.row);
      });
    }
  }

  std::span<const Entry> column(std::size_t f) const { return columns_[f]; }
  std::size_t dim() const { return columns_.size(); }

 private:
  std::vector<std::vector<Entry>> columns_;
};

struct TreeParams {
  int max_depth = 20;
  double min_samples_split = 2;
  std::size_t max_features = 0;  // 0 = every feature
};

// Classification: stats are per-class weights, cost is weighted Gini.
struct GiniCriterion {
  std::span<const int> y;
  std::size_t n_classes;

  std::size_t n_stats() const { return n_classes; }
  void add(std::vector<double>& stats, std::uint32_t row, double w) const {
    stats[static_cast<std::size_t>(y[row])] += w;
  }
  double cost(const std::vector<double>& left, double wl, const std::vector<double>& right,
              double wr) const {
    return (wl * gini_impurity(left) + wr * gini_impurity(right)) / (wl + wr);
  }
  bool pure(const std::vector<double>& stats) const {
    return std::count_if(stats.begin(), stats.end(), [](double c) { return c > 0.0; }) <= 1;
  }
  std::vector<double> leaf(std::span<const std::uint32_t> rows,
                           std::span<const double> weights) const {
    std::vector<double> v(n_classes, 0.0);
    double total = 0.0;
    for (auto r : rows) {
      v[static_cast<std::size_t>(y[r])] += weights[r];
      total += weights[r];
    }
    for (double& p : v) p /= total;
    return v;
  }
};

// Regression on softmax residuals: squared-error splits, Newton-step leaves.
struct ResidualCriterion {
  std::span<const double> residual;
  std::size_t n_classes;

  std::size_t n_stats() const { return 2; }
  void add(std::vector<double>& stats, std::uint32_t row, double w) const {
    stats[0] += w * residual[row];
    stats[1] += w * residual[row] * residual[row];
  }
  double cost(const std::vector<double>& left, double wl, const std::vector<double>& right,
              double wr) const {
    return (left[1] - left[0] * left[0] / wl) + (right[1] - right[0] * right[0] / wr);
  }
  bool pure(const std::vector<double>&) const { return false; }
  std::vector<double> leaf(std::span<const std::uint32_t> rows,
                           std::span<const double> weights) const {
    double num = 0.0, den = 0.0;
    for (auto r : rows) {
      const double g = residual[r];
      num += weights[r] * g;
      den += weights[r] * std::abs(g) * (1.0 - std::abs(g));
    }
    const double k = static_cast<double>(n_classes);
    const double v = den < 1e-150 ? 0.0 : (k - 1.0) / k * num / den;
    return {v};
  }
};

/// a < b by more than rounding noise.
bool lower_cost(double a, double b) {
  return a < b - 1e-12 * std::max(1.0, std::abs(b));
}

template <class Criterion>
class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, const ColumnIndex& columns, const Criterion& crit,
              std::span<const double> weights, TreeParams params, Rng* rng)
      : x_(x),
        columns_(columns),
        crit_(crit),
        weights_(weights),
        params_(params),
        rng_(rng),
        mark_(x.size(), 0),
        feature_mark_(x.dim, 0) {}

  Tree build() {
    std::vector<std::uint32_t> rows;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      if (weights_[i] > 0.0) rows.push_back(static_cast<std::uint32_t>(i));
    }
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    double cost = std::numeric_limits<double>::infinity();
    int feature = -1;
    double threshold = 0.0;
  };

  int grow(std::vector<std::uint32_t> rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    std::vector<double> total(crit_.n_stats(), 0.0);
    double total_w = 0.0;
    for (auto r : rows) {
      crit_.add(total, r, weights_[r]);
      total_w += weights_[r];
    }

    std::optional<Split> split;
    if (depth < params_.max_depth && total_w >= params_.min_samples_split && !crit_.pure(total)) {
      split = best_split(rows, total, total_w);
    }
    if (!split) {
      tree_.nodes[static_cast<std::size_t>(id)].value = crit_.leaf(rows, weights_);
      return id;
    }

    std::vector<std::uint32_t> left, right;
    for (auto r : rows) {
      const double v = x_.rows[r].at(static_cast<std::uint32_t>(split->feature));
      (v <= split->threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    tree_.nodes[static_cast<std::size_t>(id)].feature = split->feature;
    tree_.nodes[static_cast<std::size_t>(id)].threshold = split->threshold;
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    tree_.nodes[static_cast<std::size_t>(id)].left = l;
    tree_.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  std::optional<Split> best_split(const std::vector<std::uint32_t>& rows,
                                  const std::vector<double>& total, double total_w) {
    ++stamp_;
    for (auto r : rows) mark_[r] = stamp_;

    Split best;
    bool found = false;
    auto consider = [&](std::size_t f) {
      Split s;
      if (!scan_feature(f, total, total_w, s)) return false;
      if (!found || lower_cost(s.cost, best.cost) ||
          (!lower_cost(best.cost, s.cost) &&
           (s.feature < best.feature ||
            (s.feature == best.feature && s.threshold < best.threshold)))) {
        best = s;
        found = true;
      }
      return true;
    };

    const std::size_t d = x_.dim;
    if (params_.max_features == 0 || params_.max_features >= d) {
      // Features absent from every row of the node are constant zero.
      std::vector<std::uint32_t> present;
      for (auto r : rows) {
        for (auto f : x_.rows[r].indices()) {
          if (feature_mark_[f] != stamp_) {
            feature_mark_[f] = stamp_;
            present.push_back(f);
          }
        }
      }
      std::sort(present.begin(), present.end());
      for (auto f : present) consider(f);
    } else {
      // Draw features in random order until max_features non-constant ones
      // have been evaluated.
      std::vector<std::uint32_t> order(d);
      for (std::size_t f = 0; f < d; ++f) order[f] = static_cast<std::uint32_t>(f);
      std::size_t visited = 0;
      for (std::size_t i = 0; i < d && visited < params_.max_features; ++i) {
        const std::size_t j = i + rng_->uniform_index(d - i);
        std::swap(order[i], order[j]);
        if (consider(order[i])) ++visited;
      }
    }
    if (!found) return std::nullopt;
    return best;
  }

  // Evaluates every threshold of feature f; false if f is constant in the node.
  bool scan_feature(std::size_t f, const std::vector<double>& total, double total_w, Split& out) {
    buf_.clear();
    std::vector<double> nz(crit_.n_stats(), 0.0);
    double nz_w = 0.0;
    for (const auto& e : columns_.column(f)) {
      if (mark_[e.row] != stamp_) continue;
      buf_.push_back(e);
      crit_.add(nz, e.row, weights_[e.row]);
      nz_w += weights_[e.row];
    }
    const double zero_w = total_w - nz_w;
    if (buf_.empty()) return false;
    if (zero_w <= 0.0 && buf_.front().value == buf_.back().value) return false;

    std::vector<double> zero_stats(total.size());
    for (std::size_t s = 0; s < total.size(); ++s) zero_stats[s] = total[s] - nz[s];

    std::vector<double> left(total.size(), 0.0), right(total.size());
    double wl = 0.0;
    std::size_t i = 0;
    bool zero_done = zero_w <= 0.0;
    auto zero_next = [&] { return !zero_done && (i >= buf_.size() || buf_[i].value > 0.0); };
    auto next_value = [&]() -> std::optional<double> {
      if (zero_next()) return 0.0;
      if (i < buf_.size()) return buf_[i].value;
      return std::nullopt;
    };

    bool any = false;
    while (true) {
      const auto v = next_value();
      if (!v) break;
      if (zero_next()) {
        for (std::size_t s = 0; s < left.size(); ++s) left[s] += zero_stats[s];
        wl += zero_w;
        zero_done = true;
      } else {
        while (i < buf_.size() && buf_[i].value == *v) {
          crit_.add(left, buf_[i].row, weights_[buf_[i].row]);
          wl += weights_[buf_[i].row];
          ++i;
        }
      }
      const auto nv = next_value();
      if (!nv) break;
      const double wr = total_w - wl;
      for (std::size_t s = 0; s < left.size(); ++s) right[s] = total[s] - left[s];
      const double cost = crit_.cost(left, wl, right, wr);
      double thr = *v + (*nv - *v) / 2.0;
      if (!(thr < *nv)) thr = *v;
      if (!any || lower_cost(cost, out.cost)) {
        out.cost = cost;
        out.threshold = thr;
        out.feature = static_cast<int>(f);
        any = true;
      }
    }
    return any;
  }

  const FeatureMatrix& x_;
  const ColumnIndex& columns_;
  const Criterion& crit_;
  std::span<const double> weights_;
  TreeParams params_;
  Rng* rng_;
  std::vector<std::uint32_t> mark_;
  std::vector<std::uint32_t> feature_mark_;
  std::uint32_t stamp_ = 0;
  std::vector<Entry> buf_;
  Tree tree_;
};

TreeParams tree_params(const ClassifierSpec& spec) {
  TreeParams p;
  p.max_depth = static_cast<int>(spec.param("max_depth"));
  p.min_samples_split = spec.param("min_samples_split");
  return p;
}

nlohmann::json trees_to_json(const std::vector<Tree>& trees) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : trees) arr.push_back(t.to_json());
  return arr;
}

// ---------------------------------------------------------------------------

class DecisionTreeModel final : public ModelImpl {
 public:
  explicit DecisionTreeModel(Tree tree) : tree_(std::move(tree)) {}

  std::vector<double> predict_proba(const SparseVector& x) const override {
    return tree_.leaf_value(x);
  }
  nlohmann::json params_json() const override { return {{"tree", tree_.to_json()}}; }

 private:
  Tree tree_;
};

class RandomForestModel final : public ModelImpl {
 public:
  RandomForestModel(std::vector<Tree> trees, std::size_t n_classes)
      : trees_(std::move(trees)), n_classes_(n_classes) {}

  std::vector<double> predict_proba(const SparseVector& x) const override {
    std::vector<double> votes(n_classes_, 0.0);
    for (const auto& t : trees_) votes[static_cast<std::size_t>(argmax(t.leaf_value(x)))] += 1.0;
    for (double& v : votes) v /= static_cast<double>(trees_.size());
    return votes;
  }
  nlohmann::json params_json() const override { return {{"trees", trees_to_json(trees_)}}; }

 private:
  std::vector<Tree> trees_;
  std::size_t n_classes_;
};

class GradientBoostingModel final : public ModelImpl {
 public:
  GradientBoostingModel(std::vector<double> init, std::vector<Tree> trees, double learning_rate)
      : init_(std::move(init)), trees_(std::move(trees)), learning_rate_(learning_rate) {}

  std::vector<double> raw_scores(const SparseVector& x) const {
    std::vector<double> f = init_;
    const std::size_t k = init_.size();
    for (std::size_t t = 0; t < trees_.size(); ++t) {
      f[t % k] += learning_rate_ * trees_[t].leaf_value(x)[0];
    }
    return f;
  }

  std::vector<double> predict_proba(const SparseVector& x) const override {
    return softmax(raw_scores(x));
  }
  nlohmann::json params_json() const override {
    return {{"init", init_}, {"learning_rate", learning_rate_}, {"trees", trees_to_json(trees_)}};
  }

 private:
  std::vector<double> init_;
  std::vector<Tree> trees_;  // round-major: trees_[round * K + k]
  double learning_rate_;
};

double mean_log_loss(const std::vector<std::vector<double>>& scores, std::span<const int> y) {
  double loss = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto p = softmax(scores[i]);
    loss -= std::log(std::max(p[static_cast<std::size_t>(y[i])], 1e-300));
  }
  return loss / static_cast<double>(scores.size());
}

std::vector<Tree> trees_from_json(const nlohmann::json& arr, std::size_t n_features,
                                  std::size_t value_size) {
  std::vector<Tree> trees;
  for (const auto& t : arr) trees.push_back(Tree::from_json(t, n_features, value_size));
  if (trees.empty()) throw DataError("ensemble without trees");
  return trees;
}

}  // namespace

ModelPtr fit_decision_tree(const FitInput& in) {
  ColumnIndex columns(in.x);
  GiniCriterion crit{in.y, static_cast<std::size_t>(in.n_classes)};
  std::vector<double> weights(in.x.size(), 1.0);
  TreeBuilder<GiniCriterion> builder(in.x, columns, crit, weights, tree_params(in.spec), nullptr);
  return std::make_shared<DecisionTreeModel>(builder.build());
}

ModelPtr fit_random_forest(const FitInput& in) {
  ColumnIndex columns(in.x);
  GiniCriterion crit{in.y, static_cast<std::size_t>(in.n_classes)};
  TreeParams params = tree_params(in.spec);
  const auto mf = as_count(in.spec.param("max_features"));
  params.max_features =
      mf == 0 ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(in.x.dim)))) : mf;
  const bool bootstrap = in.spec.param("bootstrap") != 0.0;
  const std::size_t n_trees = as_count(in.spec.param("n_trees"));
  const std::size_t n = in.x.size();

  std::vector<Tree> trees;
  trees.reserve(n_trees);
  for (std::size_t t = 0; t < n_trees; ++t) {
    Rng rng(derive_seed(in.spec.seed, t));
    std::vector<double> weights(n, bootstrap ? 0.0 : 1.0);
    if (bootstrap) {
      for (std::size_t k = 0; k < n; ++k) weights[rng.uniform_index(n)] += 1.0;
    }
    TreeBuilder<GiniCriterion> builder(in.x, columns, crit, weights, params, &rng);
    trees.push_back(builder.build());
  }
  return std::make_shared<RandomForestModel>(std::move(trees),
                                             static_cast<std::size_t>(in.n_classes));
}

ModelPtr fit_gradient_boosting(const FitInput& in) {
  const std::size_t n = in.x.size();
  const auto k = static_cast<std::size_t>(in.n_classes);
  const std::size_t rounds = as_count(in.spec.param("n_rounds"));
  const double lr = in.spec.param("learning_rate");
  TreeParams params = tree_params(in.spec);

  std::vector<double> prior(k, 0.0);
  for (int c : in.y) prior[static_cast<std::size_t>(c)] += 1.0;
  std::vector<double> init(k);
  for (std::size_t c = 0; c < k; ++c) init[c] = std::log(prior[c] / static_cast<double>(n));

  std::vector<std::vector<double>> scores(n, init);
  if (in.trace) in.trace->loss_history.push_back(mean_log_loss(scores, in.y));

  ColumnIndex columns(in.x);
  const std::vector<double> weights(n, 1.0);
  std::vector<double> residual(n);
  std::vector<Tree> trees;
  trees.reserve(rounds * k);
  for (std::size_t round = 0; round < rounds; ++round) {
    std::vector<std::vector<double>> probs(n);
    for (std::size_t i = 0; i < n; ++i) probs[i] = softmax(scores[i]);
    std::vector<Tree> round_trees;
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const double target = static_cast<std::size_t>(in.y[i]) == c ? 1.0 : 0.0;
        residual[i] = target - probs[i][c];
      }
      ResidualCriterion crit{residual, k};
      TreeBuilder<ResidualCriterion> builder(in.x, columns, crit, weights, params, nullptr);
      round_trees.push_back(builder.build());
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        scores[i][c] += lr * round_trees[c].leaf_value(in.x.rows[i])[0];
      }
    }
    for (auto& t : round_trees) trees.push_back(std::move(t));
    if (in.trace) in.trace->loss_history.push_back(mean_log_loss(scores, in.y));
  }
  return std::make_shared<GradientBoostingModel>(std::move(init), std::move(trees), lr);
}

ModelPtr load_decision_tree(const LoadInput& in) {
  return std::make_shared<DecisionTreeModel>(
      Tree::from_json(in.params.at("tree"), in.n_features, static_cast<std::size_t>(in.n_classes)));
}

ModelPtr load_random_forest(const LoadInput& in) {
  return std::make_shared<RandomForestModel>(
      trees_from_json(in.params.at("trees"), in.n_features, static_cast<std::size_t>(in.n_classes)),
      static_cast<std::size_t>(in.n_classes));
}

ModelPtr load_gradient_boosting(const LoadInput& in) {
  const auto k = static_cast<std::size_t>(in.n_classes);
  auto trees = trees_from_json(in.params.at("trees"), in.n_features, 1);
  if (trees.size() % k != 0) throw DataError("boosting tree count not a multiple of classes");
  return std::make_shared<GradientBoostingModel>(vector_from_json<double>(in.params.at("init"), k),
                                                 std::move(trees),
                                                 in.params.at("learning_rate").get<double>());
}

}  // namespace triage::detail
