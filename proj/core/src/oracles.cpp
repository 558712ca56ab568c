#include "semihoc/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>
#include <sstream>

#include "semihoc/error.hpp"
#include "semihoc/heads.hpp"
#include "semihoc/prohoc.hpp"

namespace semihoc::oracles {

namespace {

constexpr std::pair<Fault, std::string_view> kFaultNames[] = {
    {Fault::kNone, "none"},         {Fault::kLca, "lca"},       {Fault::kDistance, "distance"},
    {Fault::kCutoff, "cutoff"},     {Fault::kGradient, "gradient"}, {Fault::kFusion, "fusion"},
    {Fault::kTargets, "targets"},
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void fail(OracleResult& r, const std::string& what) {
  if (r.failures++ == 0) r.first_failure = what;
}

std::vector<double> random_distribution(Rng& rng, std::size_t k) {
  std::uniform_int_distribution<int> style(0, 3);
  std::vector<double> p(k, 0.0);
  switch (style(rng)) {
    case 0: {  // one-hot
      p[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)] = 1.0;
      return p;
    }
    case 1:  // uniform
      std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(k));
      return p;
    default: {
      std::normal_distribution<double> logit(0.0, style(rng) == 2 ? 1.0 : 8.0);
      for (auto& v : p) v = logit(rng);
      const double m = *std::max_element(p.begin(), p.end());
      double s = 0.0;
      for (auto& v : p) s += (v = std::exp(v - m));
      for (auto& v : p) v /= s;
      return p;
    }
  }
}

std::string describe_tree(const Hierarchy& h) {
  std::ostringstream os;
  os << h.size() << " nodes, depth " << h.max_depth();
  return os.str();
}

}  // namespace

Fault parse_fault(std::string_view name) {
  std::string valid;
  for (const auto& [f, n] : kFaultNames) {
    if (n == name) return f;
    valid += (valid.empty() ? "" : ", ") + std::string(n);
  }
  throw InputError("unknown fault '" + std::string(name) + "'; valid: " + valid);
}

std::string_view to_string(Fault f) {
  for (const auto& [fault, n] : kFaultNames)
    if (fault == f) return n;
  return "unknown";
}

Hierarchy random_hierarchy(Rng& rng, std::size_t max_nodes) {
  const std::size_t n = std::uniform_int_distribution<std::size_t>(2, std::max<std::size_t>(2, max_nodes))(rng);
  // Attachment bias toward recent nodes gives deeper trees than uniform attachment.
  const bool deep = std::bernoulli_distribution(0.5)(rng);
  std::vector<std::size_t> parent(n, 0);
  std::vector<bool> has_child(n, false);
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t lo = deep && i > 3 ? i - 3 : 0;
    parent[i] = std::uniform_int_distribution<std::size_t>(lo, i - 1)(rng);
    has_child[parent[i]] = true;
  }
  std::vector<std::size_t> label(n);
  std::iota(label.begin(), label.end(), 0);
  std::shuffle(label.begin() + 1, label.end(), rng);
  auto name = [&](std::size_t i) { return "v" + std::to_string(label[i]); };

  std::vector<std::pair<std::string, std::string>> edges;
  for (std::size_t i = 1; i < n; ++i) edges.emplace_back(name(i), name(parent[i]));
  std::shuffle(edges.begin(), edges.end(), rng);

  std::vector<std::string> id_names;
  std::bernoulli_distribution pick(0.7);
  std::string fallback;
  for (std::size_t i = 1; i < n; ++i) {
    if (has_child[i]) continue;
    fallback = name(i);
    if (pick(rng)) id_names.push_back(name(i));
  }
  if (id_names.empty()) id_names.push_back(fallback);
  return Hierarchy::from_edges(edges, id_names);
}

namespace {

std::vector<bool> ancestor_marks(const Hierarchy& h, NodeId a) {
  std::vector<bool> marks(h.size(), false);
  for (NodeId x = a;; x = h.parent(x)) {
    marks[x] = true;
    if (x == kRootNode) break;
  }
  return marks;
}

NodeId first_marked_ancestor(const Hierarchy& h, const std::vector<bool>& marks, NodeId b) {
  for (NodeId x = b;; x = h.parent(x)) {
    if (marks[x]) return x;
    if (x == kRootNode) break;
  }
  return kRootNode;
}

using Adjacency = std::vector<std::vector<NodeId>>;

Adjacency undirected_adjacency(const Hierarchy& h) {
  Adjacency adj(h.size());
  for (NodeId c = 1; c < h.size(); ++c) {
    adj[c].push_back(h.parent(c));
    adj[h.parent(c)].push_back(c);
  }
  return adj;
}

std::vector<int> bfs(const Adjacency& adj, NodeId source) {
  std::vector<int> dist(adj.size(), -1);
  std::deque<NodeId> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const NodeId x = queue.front();
    queue.pop_front();
    for (NodeId y : adj[x])
      if (dist[y] < 0) {
        dist[y] = dist[x] + 1;
        queue.push_back(y);
      }
  }
  return dist;
}

}  // namespace

NodeId brute_lca(const Hierarchy& h, NodeId a, NodeId b) {
  return first_marked_ancestor(h, ancestor_marks(h, a), b);
}

std::vector<int> bfs_distances(const Hierarchy& h, NodeId source) { return bfs(undirected_adjacency(h), source); }

Epoch brute_cutoff(std::span<const Epoch> epochs, Epoch current_epoch, int bin_width, double drop_threshold) {
  if (epochs.empty()) return kNoCutoff;
  std::vector<long> counts;
  for (Epoch left = 0; left <= current_epoch; left += bin_width)
    counts.push_back(std::count_if(epochs.begin(), epochs.end(),
                                   [&](Epoch e) { return e >= left && e < left + bin_width; }));
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const long peak = *std::max_element(counts.begin(), counts.begin() + static_cast<long>(i) + 1);
    if (static_cast<double>(counts[i]) < drop_threshold * static_cast<double>(peak))
      return static_cast<Epoch>(i) * bin_width;
  }
  return kNoCutoff;
}

std::vector<NodeId> brute_s_mapping(const Hierarchy& h, NodeId c, int d) {
  std::set<NodeId> related;
  for (NodeId x = c;; x = h.parent(x)) {
    related.insert(x);
    if (x == kRootNode) break;
  }
  std::deque<NodeId> queue(h.children(c).begin(), h.children(c).end());
  while (!queue.empty()) {
    const NodeId x = queue.front();
    queue.pop_front();
    related.insert(x);
    for (NodeId y : h.children(x)) queue.push_back(y);
  }
  std::set<NodeId> space;
  for (NodeId x = 0; x < h.size(); ++x)
    if (h.depth(x) == d || (h.depth(x) < d && h.is_id_class(x))) space.insert(x);
  std::vector<NodeId> out;
  std::set_intersection(related.begin(), related.end(), space.begin(), space.end(), std::back_inserter(out));
  return out;
}

OracleResult check_tree_algebra(std::size_t trees, std::uint64_t seed, Fault fault, std::size_t max_nodes) {
  OracleResult r;
  r.name = "tree-algebra";
  Timer timer;
  Rng rng = make_stream(seed, Stream::kOracle, 1);
  for (std::size_t t = 0; t < trees; ++t) {
    const Hierarchy h = random_hierarchy(rng, max_nodes);
    ++r.cases;
    const Adjacency adj = undirected_adjacency(h);
    for (NodeId a = 0; a < h.size(); ++a) {
      const auto dist = bfs(adj, a);
      const auto marks = ancestor_marks(h, a);
      for (NodeId b = 0; b < h.size(); ++b) {
        NodeId lca = h.lca(a, b);
        int d = h.tree_distance(a, b);
        if (fault == Fault::kLca && a != b) lca = h.parent(lca) == lca ? a : h.parent(lca);
        if (fault == Fault::kDistance && a != b) d += 1;
        r.checks += 2;
        if (lca != first_marked_ancestor(h, marks, b))
          fail(r, "lca(" + std::to_string(a) + "," + std::to_string(b) + ") on " + describe_tree(h));
        if (d != dist[b])
          fail(r, "distance(" + std::to_string(a) + "," + std::to_string(b) + ") on " + describe_tree(h));
      }
    }
  }
  r.seconds = timer.seconds();
  return r;
}

OracleResult check_fusion(std::size_t cases, std::uint64_t seed, Fault fault) {
  OracleResult r;
  r.name = "fusion";
  Timer timer;
  Rng rng = make_stream(seed, Stream::kOracle, 2);
  for (std::size_t t = 0; t < cases; ++t) {
    const Hierarchy h = random_hierarchy(rng, 120);
    std::vector<std::vector<double>> outputs;
    for (int d = 1; d <= h.max_depth(); ++d) outputs.push_back(random_distribution(rng, h.depth_space(d).members.size()));
    HierarchicalDistribution dist = fuse(outputs, h);
    if (fault == Fault::kFusion) dist.probs.back() += 1e-6;
    ++r.cases;

    double total = 0.0;
    for (double p : dist.probs) {
      total += p;
      if (!(p >= 0.0)) fail(r, "negative or NaN probability on " + describe_tree(h));
    }
    const double err = std::abs(total - 1.0);
    r.max_error = std::max(r.max_error, err);
    ++r.checks;
    if (!(err <= 1e-9)) fail(r, "mass " + std::to_string(total) + " on " + describe_tree(h));

    const auto sub = subtree_confidences(dist, h);
    for (NodeId c = 1; c < h.size(); ++c) {
      ++r.checks;
      if (sub[c] > sub[h.parent(c)]) fail(r, "subtree confidence increases below node " + std::to_string(h.parent(c)));
    }
  }
  r.seconds = timer.seconds();
  return r;
}

OracleResult check_cutoff(std::size_t cases, std::uint64_t seed, Fault fault) {
  OracleResult r;
  r.name = "cutoff";
  Timer timer;
  Rng rng = make_stream(seed, Stream::kOracle, 3);
  std::uniform_int_distribution<int> current(0, 80), width(1, 6), length(0, 150);
  std::uniform_real_distribution<double> gamma(0.001, 0.999);
  for (std::size_t t = 0; t < cases; ++t) {
    const Epoch e = current(rng);
    const int w = width(rng);
    const double g = std::bernoulli_distribution(0.2)(rng) ? 0.5 : gamma(rng);
    // Clustered lists: a burst of early assignments followed by a sparse tail.
    std::vector<Epoch> epochs(static_cast<std::size_t>(length(rng)));
    const Epoch burst = std::uniform_int_distribution<Epoch>(0, e)(rng);
    std::geometric_distribution<Epoch> spread(std::uniform_real_distribution<double>(0.05, 0.9)(rng));
    for (auto& x : epochs) x = std::min<Epoch>(e, burst + spread(rng));
    std::shuffle(epochs.begin(), epochs.end(), rng);

    Epoch got = detect_cutoff(epochs, e, w, g);
    if (fault == Fault::kCutoff && got != kNoCutoff) got += w;
    if (fault == Fault::kCutoff && got == kNoCutoff) got = 0;
    const Epoch want = brute_cutoff(epochs, e, w, g);
    ++r.cases;
    ++r.checks;
    if (got != want)
      fail(r, "E=" + std::to_string(e) + " w=" + std::to_string(w) + " n=" + std::to_string(epochs.size()) +
                  ": got " + std::to_string(got) + ", oracle " + std::to_string(want));
  }
  r.seconds = timer.seconds();
  return r;
}

OracleResult check_gradients(std::size_t heads, std::uint64_t seed, Fault fault, double tolerance) {
  OracleResult r;
  r.name = "gradient";
  Timer timer;
  Rng rng = make_stream(seed, Stream::kOracle, 4);
  std::uniform_int_distribution<int> small(2, 6);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr double kStep = 1e-5;

  for (std::size_t t = 0; t < heads; ++t) {
    const double rate = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
    MlpHead head(1, small(rng), small(rng), small(rng), rate);
    head.init_he_uniform(rng);
    for (auto& l : head.params.layers)
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = 0.1 * normal(rng);
    std::vector<double> x(static_cast<std::size_t>(head.input_dim()));
    for (auto& v : x) v = normal(rng);
    const auto target = random_distribution(rng, static_cast<std::size_t>(head.output_dim()));
    const DropoutMasks frozen = sample_dropout_masks(head, 1, rng);
    ++r.cases;

    for (const DropoutMasks* masks : {static_cast<const DropoutMasks*>(nullptr), &frozen}) {
      LossAndGrad analytic = ce_loss_and_grad(head, x, target, masks);
      if (fault == Fault::kGradient) analytic.grads.layers.front().weight(0, 0) += 1e-3;

      Eigen::MatrixXd xm = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
      const ForwardPass base = forward(head, xm, masks);
      auto same_pattern = [&](const ForwardPass& p) {
        for (std::size_t l = 0; l < base.pre_activations.size(); ++l)
          if (((p.pre_activations[l].array() > 0) != (base.pre_activations[l].array() > 0)).any()) return false;
        return (p.clamped == base.clamped).all();
      };

      MlpHead probe = head;
      auto params = probe.params.coefficients();
      const auto grads = std::as_const(analytic.grads).coefficients();
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = *params[i];
        *params[i] = saved + kStep;
        const ForwardPass plus = forward(probe, xm, masks);
        *params[i] = saved - kStep;
        const ForwardPass minus = forward(probe, xm, masks);
        *params[i] = saved;
        if (!same_pattern(plus) || !same_pattern(minus)) {
          ++r.skipped;
          continue;
        }
        const double numeric = (cross_entropy(target, plus.log_probs.col(0)) -
                                cross_entropy(target, minus.log_probs.col(0))) / (2 * kStep);
        const double a = *grads[i];
        const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
        r.max_error = std::max(r.max_error, err);
        ++r.checks;
        if (!(err <= tolerance))
          fail(r, std::string(masks ? "train" : "eval") + " head " + std::to_string(t) + " coefficient " +
                      std::to_string(i) + ": analytic " + std::to_string(a) + ", numeric " + std::to_string(numeric));
      }
    }
  }
  r.seconds = timer.seconds();
  return r;
}

OracleResult check_targets(std::size_t trees, std::uint64_t seed, Fault fault) {
  OracleResult r;
  r.name = "targets";
  Timer timer;
  Rng rng = make_stream(seed, Stream::kOracle, 5);
  for (std::size_t t = 0; t < trees; ++t) {
    const Hierarchy h = random_hierarchy(rng, 60);
    ++r.cases;
    for (int d = 1; d <= h.max_depth(); ++d) {
      const auto& members = h.depth_space(d).members;
      for (NodeId c = 0; c < h.size(); ++c) {
        const auto oracle = brute_s_mapping(h, c, d);
        auto q = h.target_distribution(c, d);
        if (fault == Fault::kTargets && q && q->probs.size() > 1) q->probs[0] += 0.5;
        ++r.checks;
        const std::string where = "node " + std::to_string(c) + " depth " + std::to_string(d);
        if (!q) {
          if (!oracle.empty()) fail(r, where + ": missing target");
          continue;
        }
        double total = 0.0;
        std::vector<NodeId> support;
        for (std::size_t k = 0; k < q->probs.size(); ++k) {
          total += q->probs[k];
          if (q->probs[k] != 0.0) support.push_back(members[k]);
        }
        if (std::abs(total - 1.0) > 1e-12) fail(r, where + ": mass " + std::to_string(total));
        if (support != oracle) fail(r, where + ": support differs from set intersection");
        const bool one_hot = std::count(q->probs.begin(), q->probs.end(), 1.0) == 1;
        if (one_hot != (oracle.size() == 1)) fail(r, where + ": one-hot mismatch");
      }
    }
  }
  r.seconds = timer.seconds();
  return r;
}

std::vector<OracleResult> run_all(std::optional<std::size_t> cases, std::uint64_t seed, Fault fault) {
  auto n = [&](std::size_t fallback) { return cases.value_or(fallback); };
  return {check_tree_algebra(n(1000), seed, fault), check_fusion(n(1000), seed, fault),
          check_cutoff(n(10000), seed, fault), check_gradients(n(100), seed, fault),
          check_targets(n(200), seed, fault)};
}

}  // namespace semihoc::oracles
