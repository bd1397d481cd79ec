#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "chatgnn/autodiff.hpp"
#include "chatgnn/errors.hpp"
#include "chatgnn/model.hpp"
#include "oracles.hpp"

using namespace chatgnn;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.in_features = 7;
  cfg.hidden = 16;
  cfg.classes = 3;
  cfg.layers = 2;
  cfg.seed = 4;
  return cfg;
}

bool models_equal(const ChatGnnModel& a, const ChatGnnModel& b) {
  const auto pa = a.named_parameters();
  const auto pb = b.named_parameters();
  if (pa.size() != pb.size() || !(a.config == b.config)) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (pa[i].name != pb[i].name || !pa[i].tensor.values_equal(pb[i].tensor)) return false;
  return true;
}

void zero_message_weights(ChatGnnModel& m) {
  for (auto& layer : m.layers) {
    for (double& w : layer.w1.data()) w = 0.0;
    for (double& w : layer.w2.data()) w = 0.0;
  }
}

}  // namespace

TEST(Model, ParameterCountFollowsConfig) {
  const ChatGnnModel m = init_model(small_config());
  EXPECT_EQ(m.parameter_count(), 7u * 16 + 16 + 2 * (2 * 256 + 2 * 16) + 16 * 3 + 3);
  EXPECT_EQ(m.parameter_count(), 1267u);

  ModelConfig proj = small_config();
  proj.use_projection = true;
  proj.use_layer_norm = false;
  EXPECT_EQ(init_model(proj).parameter_count(), 7u * 16 + 16 + 2 * (4 * 256) + 16 * 3 + 3);

  ModelConfig dir = small_config();
  dir.directed_mode = true;
  // Reverse-direction layers carry only their attention weights.
  EXPECT_EQ(init_model(dir).parameter_count(), 1267u + 2 * (2 * 256));
}

TEST(Model, InitialisationBoundsAndDefaults) {
  const ChatGnnModel m = init_model(small_config());
  const double bound = std::sqrt(6.0 / 23.0);
  for (double w : m.w_in.data()) EXPECT_LE(std::abs(w), bound);
  for (double b : m.b_in.data()) EXPECT_EQ(b, 0.0);
  for (double b : m.b_out.data()) EXPECT_EQ(b, 0.0);
  for (const auto& layer : m.layers) {
    for (double g : layer.ln_gamma->data()) EXPECT_EQ(g, 1.0);
    for (double b : layer.ln_beta->data()) EXPECT_EQ(b, 0.0);
  }
}

TEST(Model, SameSeedSameParameters) {
  EXPECT_TRUE(models_equal(init_model(small_config()), init_model(small_config())));
  ModelConfig other = small_config();
  other.seed = 5;
  EXPECT_FALSE(init_model(other).w_in.values_equal(init_model(small_config()).w_in));
}

TEST(Model, LogitShape) {
  NoGradGuard guard;
  Rng rng(1);
  const Graph g = oracle::random_graph(rng, 5, 0.5, false);
  const Tensor z = model_forward(init_model(small_config()), oracle::random_tensor(5, 7, rng),
                                 edge_arrays(g));
  EXPECT_EQ(z.rows(), 5u);
  EXPECT_EQ(z.cols(), 3u);
}

TEST(Model, ZeroMessageWeightsScaleTheInitialRepresentation) {
  NoGradGuard guard;
  for (std::size_t layers : {1u, 2u, 5u}) {
    ModelConfig cfg = small_config();
    cfg.layers = layers;
    cfg.use_layer_norm = false;
    ChatGnnModel m = init_model(cfg);
    zero_message_weights(m);
    Rng rng(layers);
    const Graph g = oracle::random_graph(rng, 6, 0.5, false);
    const Tensor x = oracle::random_tensor(6, 7, rng);
    const Tensor z = model_forward(m, x, edge_arrays(g));

    for (std::size_t v = 0; v < 6; ++v) {
      std::vector<double> h0 = oracle::mat_vec(m.w_in, oracle::row_of(x, v));
      for (double& a : h0) a = std::max(0.0, a) * static_cast<double>(layers + 1);
      const auto expected = oracle::mat_vec(m.w_out, h0);
      for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(z(v, k), expected[k], 1e-12);
    }
  }
}

TEST(Model, TraceHoldsEveryLayer) {
  NoGradGuard guard;
  Rng rng(2);
  const Graph g = oracle::random_graph(rng, 6, 0.5, false);
  ForwardTrace trace;
  model_forward(init_model(small_config()), oracle::random_tensor(6, 7, rng),
                PropagationGraph::from(g), &trace);
  EXPECT_EQ(trace.hidden.size(), 3u);
  ASSERT_EQ(trace.betas.size(), 2u);
  EXPECT_EQ(trace.betas[0].rows(), g.num_arcs());
}

TEST(Model, LogitsPermuteWithNodes) {
  NoGradGuard guard;
  Rng rng(3);
  const std::size_t n = 9;
  const Graph g = oracle::random_graph(rng, n, 0.4, false);
  std::vector<NodeId> perm(n);
  for (NodeId v = 0; v < n; ++v) perm[v] = (v * 4 + 1) % n;
  const Tensor x = oracle::random_tensor(n, 7, rng);
  Tensor xp(n, 7);
  for (NodeId v = 0; v < n; ++v)
    for (std::size_t f = 0; f < 7; ++f) xp(perm[v], f) = x(v, f);
  const ChatGnnModel m = init_model(small_config());
  const Tensor z = model_forward(m, x, edge_arrays(g));
  const Tensor zp = model_forward(m, xp, edge_arrays(permute(g, perm)));
  for (NodeId v = 0; v < n; ++v)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(zp(perm[v], k), z(v, k), 1e-12);
}

TEST(Model, DeepStackStaysFinite) {
  NoGradGuard guard;
  ModelConfig cfg = small_config();
  cfg.layers = 64;
  Rng rng(4);
  const Graph g = oracle::random_graph(rng, 12, 0.3, false);
  const Tensor z = model_forward(init_model(cfg), oracle::random_tensor(12, 7, rng, 0, 10),
                                 edge_arrays(g));
  for (double v : z.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Model, WrongFeatureWidthThrows) {
  NoGradGuard guard;
  const Graph g = grid_graph(2, 2);
  EXPECT_THROW(model_forward(init_model(small_config()), Tensor(4, 6), edge_arrays(g)),
               DimensionError);
}

TEST(Model, InvalidConfigRejected) {
  ModelConfig cfg = small_config();
  cfg.layers = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.hidden = 0;
  EXPECT_THROW(init_model(cfg), std::invalid_argument);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  NoGradGuard guard;
  for (LayerKind kind : {LayerKind::chat, LayerKind::gcn, LayerKind::scalar_attention,
                         LayerKind::freq_gate}) {
    ModelConfig cfg = small_config();
    cfg.layer_kind = kind;
    cfg.use_projection = true;
    const ChatGnnModel m = init_model(cfg);
    const ChatGnnModel back = checkpoint_from_string(checkpoint_to_string(m));
    EXPECT_TRUE(models_equal(m, back)) << to_string(kind);

    Rng rng(5);
    const Graph g = oracle::random_graph(rng, 6, 0.5, false);
    const Tensor x = oracle::random_tensor(6, 7, rng);
    EXPECT_TRUE(model_forward(m, x, edge_arrays(g)).values_equal(model_forward(back, x, edge_arrays(g))));
  }
}

TEST(Checkpoint, FileRoundTripAndDirectedMode) {
  ModelConfig cfg = small_config();
  cfg.directed_mode = true;
  const ChatGnnModel m = init_model(cfg);
  const auto path = std::filesystem::temp_directory_path() / "chatgnn_test_checkpoint.json";
  save_checkpoint(m, path);
  EXPECT_TRUE(models_equal(m, load_checkpoint(path)));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Checkpoint, TruncatedOrForeignDocumentIsAFormatError) {
  const std::string text = checkpoint_to_string(init_model(small_config()));
  EXPECT_THROW(checkpoint_from_string(text.substr(0, text.size() / 2)), FormatError);
  EXPECT_THROW(checkpoint_from_string("{}"), FormatError);
  EXPECT_THROW(checkpoint_from_string(""), FormatError);
}
