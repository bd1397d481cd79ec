#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "chatgnn/autodiff.hpp"
#include "chatgnn/gradcheck.hpp"
#include "chatgnn/graph.hpp"
#include "chatgnn/layers.hpp"
#include "chatgnn/model.hpp"
#include "chatgnn/rng.hpp"

namespace chatgnn {
namespace {

constexpr std::size_t kMaxNodes = 8;
constexpr std::size_t kMaxWidth = 5;

Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(rows, cols);
  for (Real& x : t.data()) x = rng.uniform(lo, hi);
  return t;
}

// Entries with |x| >= 0.1, keeping piecewise-linear ops away from their kinks.
Tensor off_kink_tensor(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t(rows, cols);
  for (Real& x : t.data()) {
    const double mag = rng.uniform(0.1, 1.0);
    x = rng.below(2) == 0 ? mag : -mag;
  }
  return t;
}

std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

Graph random_graph(Rng& rng, bool directed) {
  const std::size_t n = between(rng, 2, kMaxNodes);
  const std::size_t m = between(rng, 1, 2 * n);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t i = 0; i < m; ++i) edges.emplace_back(rng.below(n), rng.below(n));
  return build_graph(n, edges, directed);
}

// Contracting with a fixed random tensor gives every output entry a distinct
// weight in the scalar loss.
Tensor project_to_scalar(const Tensor& out, const Tensor& weights) {
  return sum(hadamard(out, weights));
}

// A scalar-valued function together with the tensors it is differentiated by.
struct Prepared {
  std::function<Tensor()> f;
  std::vector<Tensor> params;
};

using CaseFn = std::function<Prepared(Rng&)>;

// Points closer than this to a relu kink are redrawn.
constexpr double kKinkMargin = 1e-3;
// Layer-norm rows need variance well above the stabilising epsilon.
constexpr double kLayerNormVarianceFloor = 100.0 * kLayerNormEps;
constexpr std::size_t kMaxRedraws = 1000;

bool smooth_at(const Prepared& p) {
  NoGradGuard no_grad;
  SmoothnessProbe probe;
  p.f();
  return probe.min_kink_distance() >= kKinkMargin &&
         probe.min_layer_norm_variance() >= kLayerNormVarianceFloor;
}

struct Case {
  std::string name;
  double tolerance;
  CaseFn run;
};

template <class Op>
Prepared check_unary(Rng& rng, bool off_kink, Op op) {
  const std::size_t r = between(rng, 1, 6), c = between(rng, 1, kMaxWidth);
  Tensor a = off_kink ? off_kink_tensor(r, c, rng) : random_tensor(r, c, rng, -2.0, 2.0);
  Tensor w = random_tensor(r, c, rng);
  return Prepared{[=] { return project_to_scalar(op(a), w); }, {a}};
}

template <class Op>
Prepared check_binary(Rng& rng, Op op) {
  const std::size_t r = between(rng, 1, 6), c = between(rng, 1, kMaxWidth);
  Tensor a = random_tensor(r, c, rng), b = random_tensor(r, c, rng);
  Tensor w = random_tensor(r, c, rng);
  return Prepared{[=] { return project_to_scalar(op(a, b), w); }, {a, b}};
}

ChatLayerParams random_chat_params(std::size_t d, Rng& rng) {
  const bool projection = rng.below(2) == 1;
  const bool norm = rng.below(2) == 1;
  auto p = ChatLayerParams::init(d, projection, norm, rng);
  // Move the layer-norm affine pair off its identity initialisation.
  if (p.ln_gamma) p.ln_gamma = random_tensor(1, d, rng, 0.5, 1.5);
  if (p.ln_beta) p.ln_beta = random_tensor(1, d, rng);
  return p;
}

std::vector<Case> make_cases() {
  const double tol = kGradCheckTolerance;
  const double ew = kElementwiseGradCheckTolerance;
  std::vector<Case> cases;

  cases.push_back({"matmul", tol, [](Rng& rng) {
    const std::size_t n = between(rng, 1, 5), k = between(rng, 1, 5), m = between(rng, 1, 5);
    Tensor a = random_tensor(n, k, rng), b = random_tensor(k, m, rng), w = random_tensor(n, m, rng);
    return Prepared{[=] { return project_to_scalar(matmul(a, b), w); }, {a, b}};
  }});
  cases.push_back({"linear", tol, [](Rng& rng) {
    const std::size_t n = between(rng, 1, 5), in = between(rng, 1, 5), out = between(rng, 1, 5);
    Tensor x = random_tensor(n, in, rng), wt = random_tensor(out, in, rng);
    Tensor b = random_tensor(1, out, rng), w = random_tensor(n, out, rng);
    return Prepared{[=] { return project_to_scalar(linear(x, wt, b), w); }, {x, wt, b}};
  }});
  cases.push_back({"transpose", tol, [](Rng& rng) {
    const std::size_t r = between(rng, 1, 6), c = between(rng, 1, kMaxWidth);
    Tensor a = random_tensor(r, c, rng), w = random_tensor(c, r, rng);
    return Prepared{[=] { return project_to_scalar(transpose(a), w); }, {a}};
  }});
  cases.push_back({"add", ew, [](Rng& rng) {
    return check_binary(rng, [](const Tensor& a, const Tensor& b) { return add(a, b); });
  }});
  cases.push_back({"add_bias_row", ew, [](Rng& rng) {
    const std::size_t r = between(rng, 1, 6), c = between(rng, 1, kMaxWidth);
    Tensor a = random_tensor(r, c, rng), b = random_tensor(1, c, rng), w = random_tensor(r, c, rng);
    return Prepared{[=] { return project_to_scalar(add(a, b), w); }, {a, b}};
  }});
  cases.push_back({"sub", ew, [](Rng& rng) {
    return check_binary(rng, [](const Tensor& a, const Tensor& b) { return sub(a, b); });
  }});
  cases.push_back({"hadamard", ew, [](Rng& rng) {
    return check_binary(rng, [](const Tensor& a, const Tensor& b) { return hadamard(a, b); });
  }});
  cases.push_back({"scale", ew, [](Rng& rng) {
    const double c = rng.uniform(-2.0, 2.0);
    return check_unary(rng, false, [c](const Tensor& a) { return scale(a, c); });
  }});
  cases.push_back({"mul_rows", ew, [](Rng& rng) {
    const std::size_t r = between(rng, 1, 6), c = between(rng, 1, kMaxWidth);
    Tensor a = random_tensor(r, c, rng), s = random_tensor(r, 1, rng), w = random_tensor(r, c, rng);
    return Prepared{[=] { return project_to_scalar(mul_rows(a, s), w); }, {a, s}};
  }});
  cases.push_back({"sum", ew, [](Rng& rng) {
    Tensor a = random_tensor(between(rng, 1, 6), between(rng, 1, kMaxWidth), rng);
    const double c = rng.uniform(-2.0, 2.0);
    return Prepared{[=] { return scale(sum(a), c); }, {a}};
  }});
  cases.push_back({"tanh", ew, [](Rng& rng) {
    return check_unary(rng, false, [](const Tensor& a) { return tanh(a); });
  }});
  cases.push_back({"relu", ew, [](Rng& rng) {
    return check_unary(rng, true, [](const Tensor& a) { return relu(a); });
  }});
  cases.push_back({"leaky_relu", ew, [](Rng& rng) {
    return check_unary(rng, true,
                       [](const Tensor& a) { return leaky_relu(a, kAttentionNegativeSlope); });
  }});
  cases.push_back({"layer_norm", tol, [](Rng& rng) {
    const std::size_t r = between(rng, 1, 6), c = between(rng, 2, kMaxWidth);
    Tensor a = random_tensor(r, c, rng, -2.0, 2.0), g = random_tensor(1, c, rng, 0.5, 1.5);
    Tensor b = random_tensor(1, c, rng), w = random_tensor(r, c, rng);
    return Prepared{[=] { return project_to_scalar(layer_norm(a, g, b), w); }, {a, g, b}};
  }});
  cases.push_back({"gather_rows", tol, [](Rng& rng) {
    const std::size_t n = between(rng, 1, 6), c = between(rng, 1, kMaxWidth), k = between(rng, 1, 10);
    std::vector<std::size_t> idx(k);
    for (auto& i : idx) i = rng.below(n);
    Tensor a = random_tensor(n, c, rng), w = random_tensor(k, c, rng);
    return Prepared{[=] { return project_to_scalar(gather_rows(a, idx), w); }, {a}};
  }});
  cases.push_back({"scatter_add_rows", tol, [](Rng& rng) {
    const std::size_t n = between(rng, 1, 6), c = between(rng, 1, kMaxWidth), k = between(rng, 1, 10);
    std::vector<std::size_t> idx(k);
    for (auto& i : idx) i = rng.below(n);
    Tensor a = random_tensor(k, c, rng), w = random_tensor(n, c, rng);
    return Prepared{[=] { return project_to_scalar(scatter_add_rows(a, idx, n), w); }, {a}};
  }});
  cases.push_back({"segment_softmax", tol, [](Rng& rng) {
    const std::size_t n = between(rng, 1, 5), k = between(rng, 1, 12);
    std::vector<std::size_t> seg(k);
    for (auto& i : seg) i = rng.below(n);
    Tensor s = random_tensor(k, 1, rng, -3.0, 3.0), w = random_tensor(k, 1, rng);
    return Prepared{[=] { return project_to_scalar(segment_softmax(s, seg, n), w); }, {s}};
  }});
  cases.push_back({"softmax_cross_entropy", tol, [](Rng& rng) {
    const std::size_t n = between(rng, 1, 6), k = between(rng, 2, 5);
    Tensor z = random_tensor(n, k, rng, -3.0, 3.0);
    std::vector<std::size_t> labels(n), mask;
    for (auto& l : labels) l = rng.below(k);
    for (std::size_t i = 0; i < n; ++i)
      if (rng.below(2) == 1 || mask.empty()) mask.push_back(i);
    return Prepared{[=] { return softmax_cross_entropy(z, labels, mask); }, {z}};
  }});

  cases.push_back({"channel_beta", tol, [](Rng& rng) {
    const Graph g = random_graph(rng, false);
    const EdgeArrays e = edge_arrays(g);
    const std::size_t d = between(rng, 1, kMaxWidth);
    auto p = ChatLayerParams::init(d, false, false, rng);
    Tensor h = random_tensor(g.num_nodes(), d, rng), w = random_tensor(e.num_arcs(), d, rng);
    return Prepared{[=] { return project_to_scalar(channel_beta(h, e, p), w); },
                      {h, p.w1, p.w2}};
  }});
  cases.push_back({"chat_aggregate", tol, [](Rng& rng) {
    const Graph g = random_graph(rng, rng.below(2) == 1);
    const EdgeArrays e = edge_arrays(g);
    const std::size_t d = between(rng, 1, kMaxWidth);
    Tensor h = random_tensor(g.num_nodes(), d, rng), beta = random_tensor(e.num_arcs(), d, rng);
    Tensor w = random_tensor(g.num_nodes(), d, rng);
    return Prepared{[=] { return project_to_scalar(chat_aggregate(h, e, beta), w); },
                      {h, beta}};
  }});
  cases.push_back({"chat_layer_forward", tol, [](Rng& rng) {
    const Graph g = random_graph(rng, false);
    const EdgeArrays e = edge_arrays(g);
    const std::size_t d = between(rng, 2, kMaxWidth);
    const auto p = random_chat_params(d, rng);
    Tensor h = random_tensor(g.num_nodes(), d, rng), h0 = random_tensor(g.num_nodes(), d, rng);
    Tensor w = random_tensor(g.num_nodes(), d, rng);
    std::vector<Tensor> params{h, h0};
    for (const auto& q : p.parameters()) params.push_back(q);
    return Prepared{[=] { return project_to_scalar(chat_layer_forward(h, h0, e, p), w); },
                      params};
  }});
  cases.push_back({"dir_chat_forward", tol, [](Rng& rng) {
    const Graph g = random_graph(rng, true);
    const EdgeArrays fwd = edge_arrays(g), rev = edge_arrays(reverse(g));
    const std::size_t d = between(rng, 2, kMaxWidth);
    const auto p_out = random_chat_params(d, rng);
    auto p_in = ChatLayerParams::init(d, p_out.use_projection(), false, rng);
    Tensor h = random_tensor(g.num_nodes(), d, rng), h0 = random_tensor(g.num_nodes(), d, rng);
    Tensor w = random_tensor(g.num_nodes(), d, rng);
    std::vector<Tensor> params{h, h0};
    for (const auto& q : p_out.parameters()) params.push_back(q);
    for (const auto& q : p_in.parameters()) params.push_back(q);
    return Prepared{
        [=] { return project_to_scalar(dir_chat_forward(h, h0, fwd, rev, p_out, p_in), w); },
        params};
  }});

  for (BaselineTag tag : {BaselineTag::gcn, BaselineTag::scalar_attention, BaselineTag::freq_gate}) {
    cases.push_back({"baseline_" + std::string(to_string(tag)), tol, [tag](Rng& rng) {
      const Graph g = random_graph(rng, false);
      const EdgeArrays e = edge_arrays(g);
      const std::size_t d = between(rng, 2, kMaxWidth);
      const auto p = BaselineParams::init(tag, d, rng.below(2) == 1, rng.below(2) == 1, rng);
      Tensor h = random_tensor(g.num_nodes(), d, rng), h0 = random_tensor(g.num_nodes(), d, rng);
      Tensor w = random_tensor(g.num_nodes(), d, rng);
      std::vector<Tensor> params{h, h0};
      for (const auto& q : p.parameters()) params.push_back(q);
      return Prepared{[=] { return project_to_scalar(baseline_forward(p, h, h0, e), w); },
                        params};
    }});
  }

  const std::pair<const char*, LayerKind> model_kinds[] = {
      {"model_chat", LayerKind::chat}, {"model_gcn", LayerKind::gcn},
      {"model_scalar_attention", LayerKind::scalar_attention},
      {"model_freq_gate", LayerKind::freq_gate}};
  for (const auto& [name, kind] : model_kinds) {
    cases.push_back({name, tol, [kind](Rng& rng) {
      ModelConfig cfg;
      cfg.layer_kind = kind;
      cfg.directed_mode = kind == LayerKind::chat && rng.below(2) == 1;
      const Graph g = random_graph(rng, cfg.directed_mode);
      cfg.in_features = between(rng, 1, 4);
      // Two-channel layer norm degenerates to a sign function; keep D >= 3.
      cfg.hidden = between(rng, 3, 4);
      cfg.classes = between(rng, 2, 3);
      cfg.layers = between(rng, 1, 2);
      cfg.use_layer_norm = rng.below(2) == 1;
      cfg.use_projection = rng.below(2) == 1;
      cfg.seed = rng.next_u64();
      const ChatGnnModel model = init_model(cfg);
      const PropagationGraph pg = PropagationGraph::from(g);
      Tensor x = random_tensor(g.num_nodes(), cfg.in_features, rng);
      std::vector<std::size_t> labels(g.num_nodes()), mask;
      for (auto& l : labels) l = rng.below(cfg.classes);
      for (std::size_t i = 0; i < g.num_nodes(); ++i) mask.push_back(i);
      return Prepared{
          [=] { return softmax_cross_entropy(model_forward(model, x, pg), labels, mask); },
          model.parameters()};
    }});
  }
  return cases;
}

}  // namespace

std::vector<GradCheckCaseResult> run_gradcheck_suite(std::size_t instances, std::uint64_t seed) {
  std::vector<GradCheckCaseResult> results;
  Rng root(seed);
  std::uint64_t stream = 0;
  for (const auto& c : make_cases()) {
    GradCheckCaseResult r;
    r.name = c.name;
    r.tolerance = c.tolerance;
    Rng rng = root.fork(stream++);
    for (std::size_t i = 0; i < instances; ++i) {
      Prepared p = c.run(rng);
      std::size_t redraws = 0;
      while (!smooth_at(p) && redraws < kMaxRedraws) {
        p = c.run(rng);
        ++redraws;
      }
      r.redraws += redraws;
      const GradCheckReport report = grad_check(p.f, p.params, c.tolerance);
      ++r.instances;
      if (!report.passed) ++r.failures;
      r.worst_error = std::max(r.worst_error, report.max_rel_error);
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace chatgnn
