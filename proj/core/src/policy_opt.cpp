#include "rxprice/policy_opt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <tuple>

#include "rxprice/error.hpp"
#include "rxprice/simplex.hpp"

namespace rxprice {

std::vector<double> DefaultSlackPenalty(const CounterfactualMatrix& cf) {
  std::vector<double> c(cf.samples(), 0.0);
  for (Eigen::Index i = 0; i < cf.g.rows(); ++i) {
    c[static_cast<std::size_t>(i)] = cf.g.cols() > 0 ? 2.0 * cf.g.row(i).maxCoeff() : 0.0;
  }
  return c;
}

std::vector<std::size_t> PolicyAssignment(const PricingPolicy& policy, std::size_t samples,
                                          std::size_t fallback_price_index) {
  std::vector<std::size_t> a(samples, fallback_price_index);
  for (const auto& rule : policy.rules) {
    for (auto i : rule.covered) a.at(i) = rule.price_index;
  }
  return a;
}

double PolicyObjective(const std::vector<Rule>& rules, std::span<const double> slack_penalty) {
  std::vector<bool> covered(slack_penalty.size(), false);
  double value = 0.0;
  for (const auto& rule : rules) {
    value += rule.outcome;
    for (auto i : rule.covered) covered.at(i) = true;
  }
  for (std::size_t i = 0; i < slack_penalty.size(); ++i) {
    if (!covered[i]) value -= slack_penalty[i];
  }
  return value;
}

void CheckPolicyInvariants(const PricingPolicy& policy, std::size_t samples) {
  if (policy.rules.size() > policy.m) {
    throw Error(ErrorCode::kInvalidArgument, "policy has more rules than allowed");
  }
  std::vector<int> hits(samples, 0);
  for (const auto& rule : policy.rules) {
    for (auto i : rule.covered) {
      if (i >= samples) throw Error(ErrorCode::kInvalidArgument, "covered sample out of range");
      ++hits[i];
    }
  }
  for (auto i : policy.uncovered) {
    if (i >= samples) throw Error(ErrorCode::kInvalidArgument, "uncovered sample out of range");
    ++hits[i];
  }
  for (std::size_t i = 0; i < samples; ++i) {
    if (hits[i] != 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "sample " + std::to_string(i) + " is not covered exactly once");
    }
  }
}

namespace {

bool RuleLess(const Rule& a, const Rule& b) {
  if (a.conditions != b.conditions) return ConditionsLess(a.conditions, b.conditions);
  return a.price_index < b.price_index;
}

PricingPolicy MakePolicy(const FeatureGraph& graph, std::vector<Rule> rules,
                         std::span<const double> slack_penalty, std::size_t m) {
  std::sort(rules.begin(), rules.end(), RuleLess);
  PricingPolicy policy;
  policy.layers = graph.layers;
  policy.price_grid = graph.price_grid;
  policy.m = m;
  policy.bounds = graph.bounds;
  std::vector<bool> covered(slack_penalty.size(), false);
  for (const auto& rule : rules) {
    for (auto i : rule.covered) covered.at(i) = true;
  }
  for (std::size_t i = 0; i < covered.size(); ++i) {
    if (!covered[i]) policy.uncovered.push_back(i);
  }
  policy.objective = PolicyObjective(rules, slack_penalty);
  policy.rules = std::move(rules);
  return policy;
}

std::size_t SaturatingSubsetCount(std::size_t n, std::size_t m, std::size_t cap) {
  // sum_{k<=m} C(n, k), stopping once it exceeds cap
  std::size_t total = 1;
  double term = 1.0;
  for (std::size_t k = 1; k <= std::min(n, m); ++k) {
    term = term * static_cast<double>(n - k + 1) / static_cast<double>(k);
    if (term + static_cast<double>(total) > static_cast<double>(cap)) return cap + 1;
    total += static_cast<std::size_t>(std::llround(term));
  }
  return total;
}

}  // namespace

PricingPolicy SolveBruteForce(const FeatureGraph& graph, const std::vector<Rule>& rules,
                              std::span<const double> slack_penalty, std::size_t m,
                              std::size_t max_subsets) {
  if (m == 0) throw Error(ErrorCode::kInvalidArgument, "rule cardinality must be at least 1");
  const std::size_t n = slack_penalty.size();

  // Same coverage set: only the best outcome can be part of an optimum.
  std::map<std::vector<std::size_t>, std::size_t> best_by_coverage;
  for (std::size_t j = 0; j < rules.size(); ++j) {
    if (rules[j].covered.empty()) continue;
    auto [it, inserted] = best_by_coverage.emplace(rules[j].covered, j);
    if (inserted) continue;
    const Rule& incumbent = rules[it->second];
    if (rules[j].outcome > incumbent.outcome ||
        (rules[j].outcome == incumbent.outcome && RuleLess(rules[j], incumbent))) {
      it->second = j;
    }
  }
  std::vector<const Rule*> pool;
  for (const auto& [coverage, j] : best_by_coverage) pool.push_back(&rules[j]);
  std::sort(pool.begin(), pool.end(), [](const Rule* a, const Rule* b) { return RuleLess(*a, *b); });

  if (SaturatingSubsetCount(pool.size(), m, max_subsets) > max_subsets) {
    throw Error(ErrorCode::kTooLarge, "too many rule subsets for exhaustive search");
  }

  std::vector<SampleSet> coverage;
  std::vector<double> value;  // outcome plus the slack penalty it avoids
  for (const Rule* rule : pool) {
    SampleSet s(n);
    double avoided = 0.0;
    for (auto i : rule->covered) {
      s.set(i);
      avoided += slack_penalty[i];
    }
    coverage.push_back(std::move(s));
    value.push_back(rule->outcome + avoided);
  }
  const double total_penalty = std::accumulate(slack_penalty.begin(), slack_penalty.end(), 0.0);

  std::vector<std::size_t> chosen;
  std::vector<std::size_t> best_choice;
  double best = -total_penalty;

  // Candidate beats incumbent: larger objective, then fewer rules, then
  // lexicographically smaller rule list (pool is sorted, so index order works).
  auto better = [&](double objective) {
    const double eps = 1e-9 * std::max(1.0, std::abs(best));
    if (objective > best + eps) return true;
    if (objective < best - eps) return false;
    if (chosen.size() != best_choice.size()) return chosen.size() < best_choice.size();
    return std::lexicographical_compare(chosen.begin(), chosen.end(), best_choice.begin(),
                                        best_choice.end());
  };

  SampleSet used(n);
  auto search = [&](auto&& self, std::size_t start, double partial) -> void {
    const double objective = partial - total_penalty;
    if (better(objective)) {
      best = objective;
      best_choice = chosen;
    }
    if (chosen.size() == m) return;
    for (std::size_t j = start; j < pool.size(); ++j) {
      if (used.intersects(coverage[j])) continue;
      chosen.push_back(j);
      used |= coverage[j];
      self(self, j + 1, partial + value[j]);
      used ^= coverage[j];
      chosen.pop_back();
    }
  };
  search(search, 0, 0.0);

  std::vector<Rule> selected;
  for (auto j : best_choice) selected.push_back(*pool[j]);
  return MakePolicy(graph, std::move(selected), slack_penalty, m);
}

// ---------------------------------------------------------------------------
// Column generation

namespace {

using ClassSet = boost::dynamic_bitset<>;
using Clock = std::chrono::steady_clock;

// Samples with identical levels on every layer are covered by exactly the same
// rules, so the master works on these classes instead of raw samples.
struct CoverageClasses {
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::vector<std::size_t>> levels;
  std::vector<std::size_t> sample_class;
  Eigen::MatrixXd revenue;  // class x grid price
  Eigen::VectorXd penalty;
  std::vector<std::vector<ClassSet>> level_sets;

  std::size_t size() const { return members.size(); }
};

CoverageClasses BuildClasses(const FeatureGraph& graph, const LayerLevels& levels,
                             const CounterfactualMatrix& cf, std::span<const double> slack) {
  CoverageClasses classes;
  std::map<std::vector<std::size_t>, std::size_t> index;
  classes.sample_class.resize(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    auto [it, inserted] = index.emplace(levels[i], classes.members.size());
    if (inserted) {
      classes.members.emplace_back();
      classes.levels.push_back(levels[i]);
    }
    classes.members[it->second].push_back(i);
    classes.sample_class[i] = it->second;
  }
  const auto nc = static_cast<Eigen::Index>(classes.size());
  classes.revenue = Eigen::MatrixXd::Zero(nc, static_cast<Eigen::Index>(cf.prices()));
  classes.penalty = Eigen::VectorXd::Zero(nc);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(classes.sample_class[i]);
    classes.revenue.row(c) += cf.g.row(static_cast<Eigen::Index>(i));
    classes.penalty[c] += slack[i];
  }
  classes.level_sets.resize(graph.layers.size());
  for (std::size_t l = 0; l < graph.layers.size(); ++l) {
    classes.level_sets[l].assign(graph.layers[l].levels.size(), ClassSet(classes.size()));
    for (std::size_t c = 0; c < classes.size(); ++c) {
      classes.level_sets[l][classes.levels[c][l]].set(c);
    }
  }
  return classes;
}

struct Column {
  std::vector<std::size_t> conditions;
  std::size_t price_index = 0;
  ClassSet coverage;
  double value = 0.0;
};

using ColumnKey = std::pair<ClassSet, std::size_t>;

struct PricingRequest {
  const Eigen::VectorXd* duals = nullptr;  // per class (only active rows used)
  double mu = 0.0;
  const ClassSet* forbidden_classes = nullptr;
  const std::set<ColumnKey>* forbidden_keys = nullptr;
  const std::set<ColumnKey>* known_keys = nullptr;
};

struct PricingResult {
  std::vector<std::pair<double, Column>> columns;  // reduced cost, column
  bool heuristic = false;
};

class PricingSearch {
 public:
  PricingSearch(const FeatureGraph& graph, const CoverageClasses& classes,
                const ColumnGenerationLimits& limits)
      : graph_(graph), classes_(classes), limits_(limits) {}

  PricingResult Run(const PricingRequest& request) {
    request_ = &request;
    const auto nc = classes_.size();
    gain_.assign(nc, 0.0);
    for (std::size_t c = 0; c < nc; ++c) {
      if (request.forbidden_classes->test(c)) continue;
      double best = 0.0;
      for (auto k : graph_.action_prices) {
        best = std::max(best, classes_.revenue(static_cast<Eigen::Index>(c),
                                               static_cast<Eigen::Index>(k)) -
                                  (*request.duals)[static_cast<Eigen::Index>(c)]);
      }
      gain_[c] = best;
    }
    found_.clear();
    seen_.clear();
    PricingResult result;
    ClassSet all(nc);
    all.set();
    if (graph_.PathCount() <= limits_.path_budget) {
      std::vector<std::size_t> conditions(graph_.layers.size(), kSkip);
      Exact(0, all, conditions);
    } else {
      result.heuristic = true;
      Beam(all);
    }
    std::sort(found_.begin(), found_.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      if (a.second.conditions != b.second.conditions) {
        return ConditionsLess(a.second.conditions, b.second.conditions);
      }
      return a.second.price_index < b.second.price_index;
    });
    if (found_.size() > limits_.max_columns_per_round) found_.resize(limits_.max_columns_per_round);
    result.columns = std::move(found_);
    return result;
  }

 private:
  double Bound(const ClassSet& s) const {
    double bound = -request_->mu;
    for (auto c = s.find_first(); c != ClassSet::npos; c = s.find_next(c)) bound += gain_[c];
    return bound;
  }

  double Revenue(const ClassSet& s, std::size_t k) const {
    double r = 0.0;
    for (auto c = s.find_first(); c != ClassSet::npos; c = s.find_next(c)) {
      r += classes_.revenue(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
    }
    return r;
  }

  double DualSum(const ClassSet& s) const {
    double u = 0.0;
    for (auto c = s.find_first(); c != ClassSet::npos; c = s.find_next(c)) {
      u += (*request_->duals)[static_cast<Eigen::Index>(c)];
    }
    return u;
  }

  void Leaf(const ClassSet& s, const std::vector<std::size_t>& conditions) {
    if (s.none() || s.intersects(*request_->forbidden_classes)) return;
    const double duals = DualSum(s);
    for (auto k : graph_.action_prices) {
      ColumnKey key{s, k};
      if (request_->forbidden_keys->count(key) || request_->known_keys->count(key)) continue;
      const double value = Revenue(s, k);
      const double reduced = value - duals - request_->mu;
      if (reduced <= limits_.reduced_cost_tol) continue;
      // The first path reaching a key has the smallest conditions.
      if (!seen_.insert(key).second) continue;
      found_.push_back({reduced, Column{conditions, k, s, value}});
    }
  }

  void Exact(std::size_t layer, const ClassSet& s, std::vector<std::size_t>& conditions) {
    if (s.none() || Bound(s) <= limits_.reduced_cost_tol) return;
    if (layer == graph_.layers.size()) {
      Leaf(s, conditions);
      return;
    }
    for (std::size_t level = 0; level < graph_.layers[layer].levels.size(); ++level) {
      conditions[layer] = level;
      Exact(layer + 1, s & classes_.level_sets[layer][level], conditions);
    }
    conditions[layer] = kSkip;
    Exact(layer + 1, s, conditions);
  }

  // K-best partial paths per layer, scored by the reduced cost of completing
  // them with SKIP on every remaining layer.
  void Beam(const ClassSet& all) {
    struct Partial {
      std::vector<std::size_t> conditions;
      ClassSet s;
      double score;
    };
    std::vector<Partial> frontier{{std::vector<std::size_t>(graph_.layers.size(), kSkip), all, 0.0}};
    for (std::size_t layer = 0; layer < graph_.layers.size(); ++layer) {
      std::vector<Partial> next;
      for (const auto& partial : frontier) {
        for (std::size_t level = 0; level <= graph_.layers[layer].levels.size(); ++level) {
          Partial child = partial;
          if (level < graph_.layers[layer].levels.size()) {
            child.conditions[layer] = level;
            child.s &= classes_.level_sets[layer][level];
          }
          if (child.s.none() || Bound(child.s) <= limits_.reduced_cost_tol) continue;
          const double duals = DualSum(child.s);
          child.score = -std::numeric_limits<double>::infinity();
          for (auto k : graph_.action_prices) {
            child.score = std::max(child.score, Revenue(child.s, k) - duals - request_->mu);
          }
          next.push_back(std::move(child));
        }
      }
      std::stable_sort(next.begin(), next.end(),
                       [](const Partial& a, const Partial& b) { return a.score > b.score; });
      if (next.size() > limits_.beam_width) next.resize(limits_.beam_width);
      frontier = std::move(next);
    }
    for (const auto& partial : frontier) Leaf(partial.s, partial.conditions);
  }

  const FeatureGraph& graph_;
  const CoverageClasses& classes_;
  const ColumnGenerationLimits& limits_;
  const PricingRequest* request_ = nullptr;
  std::vector<double> gain_;
  std::vector<std::pair<double, Column>> found_;
  std::set<ColumnKey> seen_;
};

struct Node {
  std::vector<std::size_t> fixed_one;
  std::vector<std::size_t> fixed_zero;
  double bound = std::numeric_limits<double>::infinity();
  std::size_t order = 0;
};

struct NodeWorse {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.order > b.order;
  }
};

struct NodeOutcome {
  bool solved = false;      // LP reached optimality
  bool heuristic = false;   // pricing ran in beam mode
  double bound = 0.0;
  std::vector<std::pair<std::size_t, double>> z;  // pool column, value (> 0)
  Eigen::VectorXd duals;                          // per class (+ mu last)
};

class BranchAndPrice {
 public:
  BranchAndPrice(const FeatureGraph& graph, const CoverageClasses& classes,
                 std::size_t m, const ColumnGenerationLimits& limits, Clock::time_point deadline)
      : graph_(graph), classes_(classes), m_(m), limits_(limits), deadline_(deadline),
        pricing_(graph, classes, limits) {
    // Seed pool: one all-SKIP rule per allowed price.
    ClassSet all(classes.size());
    all.set();
    for (auto k : graph.action_prices) {
      Column col{std::vector<std::size_t>(graph.layers.size(), kSkip), k, all, 0.0};
      col.value = classes.revenue.col(static_cast<Eigen::Index>(k)).sum();
      AddColumn(std::move(col));
    }
  }

  NodeOutcome Solve(const Node& node, std::size_t& lp_solves) {
    NodeOutcome out;
    ClassSet forbidden(classes_.size());
    double fixed_value = 0.0;
    for (auto j : node.fixed_one) {
      forbidden |= pool_[j].coverage;
      fixed_value += pool_[j].value;
    }
    std::set<ColumnKey> forbidden_keys;
    for (auto j : node.fixed_zero) forbidden_keys.insert(Key(pool_[j]));
    std::set<std::size_t> excluded(node.fixed_zero.begin(), node.fixed_zero.end());
    excluded.insert(node.fixed_one.begin(), node.fixed_one.end());

    std::vector<std::size_t> rows;
    for (std::size_t c = 0; c < classes_.size(); ++c) {
      if (!forbidden.test(c)) rows.push_back(c);
    }
    const std::size_t remaining = m_ - node.fixed_one.size();
    const auto nr = static_cast<Eigen::Index>(rows.size());

    std::optional<std::vector<Eigen::Index>> basis;
    std::vector<std::size_t> active;
    while (true) {
      if (Clock::now() > deadline_) return out;
      active.clear();
      for (std::size_t j = 0; j < pool_.size(); ++j) {
        if (excluded.count(j) || pool_[j].coverage.intersects(forbidden)) continue;
        active.push_back(j);
      }
      // Variables: slack per row, cardinality slack, then the active columns.
      const Eigen::Index nv = nr + 1 + static_cast<Eigen::Index>(active.size());
      LinearProgram lp;
      lp.a = Eigen::MatrixXd::Zero(nr + 1, nv);
      lp.b = Eigen::VectorXd::Ones(nr + 1);
      lp.b[nr] = static_cast<double>(remaining);
      lp.c = Eigen::VectorXd::Zero(nv);
      for (Eigen::Index r = 0; r < nr; ++r) {
        lp.a(r, r) = 1.0;
        lp.c[r] = -classes_.penalty[static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)])];
      }
      lp.a(nr, nr) = 1.0;
      for (std::size_t t = 0; t < active.size(); ++t) {
        const Column& col = pool_[active[t]];
        const Eigen::Index v = nr + 1 + static_cast<Eigen::Index>(t);
        for (Eigen::Index r = 0; r < nr; ++r) {
          if (col.coverage.test(rows[static_cast<std::size_t>(r)])) lp.a(r, v) = 1.0;
        }
        lp.a(nr, v) = 1.0;
        lp.c[v] = col.value;
      }
      if (!basis) {
        basis.emplace();
        for (Eigen::Index r = 0; r <= nr; ++r) basis->push_back(r);
      }
      const LpSolution sol = SolveLp(lp, {}, basis);
      ++lp_solves;
      if (sol.status != LpStatus::kOptimal) return out;
      basis = sol.basis;

      Eigen::VectorXd duals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(classes_.size()));
      for (Eigen::Index r = 0; r < nr; ++r) {
        duals[static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)])] = sol.duals[r];
      }
      PricingRequest request{&duals, sol.duals[nr], &forbidden, &forbidden_keys, &keys_};
      PricingResult priced = pricing_.Run(request);
      out.heuristic = out.heuristic || priced.heuristic;
      if (priced.columns.empty()) {
        out.solved = true;
        out.bound = fixed_value + sol.objective;
        for (std::size_t t = 0; t < active.size(); ++t) {
          const double z = sol.x[nr + 1 + static_cast<Eigen::Index>(t)];
          if (z > 1e-9) out.z.push_back({active[t], z});
        }
        out.duals.resize(static_cast<Eigen::Index>(classes_.size()) + 1);
        out.duals.head(static_cast<Eigen::Index>(classes_.size())) = duals;
        out.duals[static_cast<Eigen::Index>(classes_.size())] = sol.duals[nr];
        return out;
      }
      for (auto& [reduced, column] : priced.columns) AddColumn(std::move(column));
    }
  }

  const Column& column(std::size_t j) const { return pool_[j]; }
  std::size_t pool_size() const { return pool_.size(); }

 private:
  static ColumnKey Key(const Column& c) { return {c.coverage, c.price_index}; }

  void AddColumn(Column col) {
    if (!keys_.insert(Key(col)).second) return;
    pool_.push_back(std::move(col));
  }

  const FeatureGraph& graph_;
  const CoverageClasses& classes_;
  std::size_t m_;
  const ColumnGenerationLimits& limits_;
  Clock::time_point deadline_;
  PricingSearch pricing_;
  std::vector<Column> pool_;
  std::set<ColumnKey> keys_;
};

}  // namespace

PricingPolicy SolveColumnGeneration(const FeatureGraph& graph, const LayerLevels& levels,
                                    const CounterfactualMatrix& cf, std::size_t m,
                                    std::span<const double> slack_penalty,
                                    const ColumnGenerationLimits& limits,
                                    ColumnGenerationStats* stats) {
  if (m == 0) throw Error(ErrorCode::kInvalidArgument, "rule cardinality must be at least 1");
  if (levels.size() != cf.samples() || slack_penalty.size() != cf.samples()) {
    throw Error(ErrorCode::kInvalidArgument, "samples, counterfactuals and penalties disagree");
  }
  const auto deadline = Clock::now() + limits.time_budget;
  const CoverageClasses classes = BuildClasses(graph, levels, cf, slack_penalty);
  BranchAndPrice solver(graph, classes, m, limits, deadline);

  auto to_rules = [&](const std::vector<std::size_t>& chosen) {
    std::vector<Rule> rules;
    for (auto j : chosen) {
      const Column& col = solver.column(j);
      Rule rule{col.conditions, col.price_index, {}, 0.0};
      for (auto c = col.coverage.find_first(); c != ClassSet::npos; c = col.coverage.find_next(c)) {
        rule.covered.insert(rule.covered.end(), classes.members[c].begin(), classes.members[c].end());
      }
      std::sort(rule.covered.begin(), rule.covered.end());
      for (auto i : rule.covered) {
        rule.outcome += cf.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col.price_index));
      }
      rules.push_back(std::move(rule));
    }
    return rules;
  };

  // Incumbent: best seed column on its own (always feasible for m >= 1).
  std::vector<std::size_t> incumbent;
  double incumbent_value = -classes.penalty.sum();
  for (std::size_t j = 0; j < solver.pool_size(); ++j) {
    if (solver.column(j).value > incumbent_value + 1e-12) {
      incumbent_value = solver.column(j).value;
      incumbent = {j};
    }
  }

  std::priority_queue<Node, std::vector<Node>, NodeWorse> open;
  open.push(Node{});
  std::size_t order = 0;
  std::size_t nodes = 0;
  std::size_t lp_solves = 0;
  bool proven = true;
  bool heuristic = false;
  bool root = true;

  while (!open.empty()) {
    Node node = open.top();
    open.pop();
    const double eps = 1e-9 * std::max(1.0, std::abs(incumbent_value));
    if (node.bound <= incumbent_value + eps) continue;
    if (nodes >= limits.max_nodes || Clock::now() > deadline) {
      proven = false;
      break;
    }
    ++nodes;
    NodeOutcome outcome = solver.Solve(node, lp_solves);
    heuristic = heuristic || outcome.heuristic;
    if (!outcome.solved) {
      proven = false;
      continue;
    }
    if (root && stats) {
      stats->root_bound = outcome.bound;
      stats->root_duals = outcome.duals;
    }
    root = false;
    if (outcome.bound <= incumbent_value + eps) continue;

    // Most fractional column, lowest pool index on ties.
    std::optional<std::size_t> branch;
    double best_gap = 1.0;
    std::vector<std::size_t> ones = node.fixed_one;
    for (const auto& [j, z] : outcome.z) {
      if (z >= 1.0 - 1e-9) {
        ones.push_back(j);
        continue;
      }
      const double gap = std::abs(z - 0.5);
      if (gap < best_gap) {
        best_gap = gap;
        branch = j;
      }
    }
    if (!branch) {
      incumbent_value = outcome.bound;
      incumbent = ones;
      continue;
    }
    Node one = node;
    one.fixed_one.push_back(*branch);
    one.bound = outcome.bound;
    one.order = ++order;
    Node zero = node;
    zero.fixed_zero.push_back(*branch);
    zero.bound = outcome.bound;
    zero.order = ++order;
    open.push(std::move(one));
    open.push(std::move(zero));
  }

  if (stats) {
    stats->nodes = nodes;
    stats->lp_solves = lp_solves;
    stats->columns = solver.pool_size();
    stats->sample_class = classes.sample_class;
  }
  PricingPolicy policy = MakePolicy(graph, to_rules(incumbent), slack_penalty, m);
  policy.proven_optimal = proven && !heuristic;
  policy.heuristic_pricing = heuristic;
  return policy;
}

PricingPolicy BasePolicy(const FeatureGraph& graph, const CounterfactualMatrix& cf,
                         std::size_t price_index, std::span<const double> slack_penalty) {
  if (price_index >= cf.prices()) {
    throw Error(ErrorCode::kInvalidArgument, "base price index out of range");
  }
  Rule rule{std::vector<std::size_t>(graph.layers.size(), kSkip), price_index, {}, 0.0};
  rule.covered.resize(cf.samples());
  std::iota(rule.covered.begin(), rule.covered.end(), std::size_t{0});
  rule.outcome = cf.g.col(static_cast<Eigen::Index>(price_index)).sum();
  FeatureGraph unbounded = graph;
  unbounded.bounds.reset();
  return MakePolicy(unbounded, {std::move(rule)}, slack_penalty, 1);
}

namespace {

std::size_t NearestInBounds(const std::vector<double>& grid, std::size_t k,
                            const PriceBounds& bounds) {
  if (bounds.Contains(grid[k])) return k;
  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    if (!bounds.Contains(grid[c])) continue;
    if (!best || std::abs(grid[c] - grid[k]) < std::abs(grid[*best] - grid[k])) best = c;
  }
  if (!best) {
    throw Error(ErrorCode::kEmptyPriceRange, "price bounds exclude every candidate price");
  }
  return *best;
}

}  // namespace

ClampResult ClampPolicy(const PricingPolicy& policy, const PriceBounds& bounds,
                        const CounterfactualMatrix& cf,
                        std::span<const std::size_t> base_assignment,
                        std::span<const double> slack_penalty,
                        std::size_t fallback_price_index) {
  const auto& grid = policy.price_grid;
  ClampResult out{policy, {}};
  for (auto& rule : out.policy.rules) {
    const std::size_t k = NearestInBounds(grid, rule.price_index, bounds);
    if (k == rule.price_index) continue;
    rule.price_index = k;
    rule.outcome = 0.0;
    for (auto i : rule.covered) {
      rule.outcome += cf.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
  }
  const std::size_t fallback = NearestInBounds(grid, fallback_price_index, bounds);
  out.policy.bounds = bounds;
  out.policy.objective = PolicyObjective(out.policy.rules, slack_penalty);
  const auto assignment = PolicyAssignment(out.policy, cf.samples(), fallback);
  out.kpis = EvaluatePolicy(cf, assignment, base_assignment);
  return out;
}

}  // namespace rxprice
