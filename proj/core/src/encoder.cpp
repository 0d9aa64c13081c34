#include "d3as/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace d3as::nn {

void EncoderConfig::validate() const {
  if (width < 1) throw std::invalid_argument("encoder width < 1");
  if (heads < 1) throw std::invalid_argument("encoder heads < 1");
  if (blocks < 1) throw std::invalid_argument("encoder blocks < 1");
  if (ffn_hidden < 1) throw std::invalid_argument("encoder ffn_hidden < 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("encoder dropout outside [0, 1)");
  if (max_positions < 1) throw std::invalid_argument("max_positions < 1");
}

void init_uniform_fan_in(Tensor& t, int fan_in, RandomStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index j = 0; j < t.value.cols(); ++j) {
    for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
      t.value(i, j) = rng.uniform(-bound, bound);
    }
  }
}

namespace {
void init_normal(Tensor& t, double stddev, RandomStream& rng) {
  for (Eigen::Index j = 0; j < t.value.cols(); ++j) {
    for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
      t.value(i, j) = rng.normal(0.0, stddev);
    }
  }
}
}  // namespace

EncoderParams make_encoder(ParamStore& store, const EncoderConfig& cfg,
                           const std::string& prefix, RandomStream& rng) {
  cfg.validate();
  const int d = cfg.width;
  EncoderParams params;
  params.positions = &store.add(prefix + ".positions", cfg.max_positions, d);
  init_normal(*params.positions, 0.02, rng);

  for (int b = 0; b < cfg.blocks; ++b) {
    const std::string bp = prefix + ".block" + std::to_string(b);
    BlockParams block;
    for (int h = 0; h < cfg.heads; ++h) {
      const std::string hp = bp + ".head" + std::to_string(h);
      block.wq.push_back(&store.add(hp + ".wq", d, d));
      block.wk.push_back(&store.add(hp + ".wk", d, d));
      block.wv.push_back(&store.add(hp + ".wv", d, d));
      init_uniform_fan_in(*block.wq.back(), d, rng);
      init_uniform_fan_in(*block.wk.back(), d, rng);
      init_uniform_fan_in(*block.wv.back(), d, rng);
    }
    block.w_out = &store.add(bp + ".w_out", d, d * cfg.heads);
    init_uniform_fan_in(*block.w_out, d * cfg.heads, rng);

    block.ln1_gain = &store.add(bp + ".ln1_gain", d, 1);
    block.ln1_bias = &store.add(bp + ".ln1_bias", d, 1);
    block.ln2_gain = &store.add(bp + ".ln2_gain", d, 1);
    block.ln2_bias = &store.add(bp + ".ln2_bias", d, 1);
    block.ln1_gain->value.setOnes();
    block.ln2_gain->value.setOnes();

    block.ffn_w1 = &store.add(bp + ".ffn_w1", cfg.ffn_hidden, d);
    block.ffn_b1 = &store.add(bp + ".ffn_b1", cfg.ffn_hidden, 1);
    block.ffn_w2 = &store.add(bp + ".ffn_w2", d, cfg.ffn_hidden);
    block.ffn_b2 = &store.add(bp + ".ffn_b2", d, 1);
    init_uniform_fan_in(*block.ffn_w1, d, rng);
    init_uniform_fan_in(*block.ffn_b1, d, rng);
    init_uniform_fan_in(*block.ffn_w2, cfg.ffn_hidden, rng);
    init_uniform_fan_in(*block.ffn_b2, cfg.ffn_hidden, rng);

    params.blocks.push_back(std::move(block));
  }
  return params;
}

Graph::Id multihead_self_attention(Graph& g, Graph::Id a,
                                   const BlockParams& p, int heads) {
  const int d = g.rows(a);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<Graph::Id> head_outputs;
  head_outputs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const Graph::Id q = g.matmul(g.param(*p.wq[h]), a);
    const Graph::Id k = g.matmul(g.param(*p.wk[h]), a);
    const Graph::Id v = g.matmul(g.param(*p.wv[h]), a);
    const Graph::Id scores = g.scale(g.matmul(g.transpose(k), q), scale);
    head_outputs.push_back(g.matmul(v, g.softmax_cols(scores)));
  }
  const Graph::Id stacked =
      heads == 1 ? head_outputs[0] : g.vstack(head_outputs);
  return g.matmul(g.param(*p.w_out), stacked);
}

Graph::Id encoder_forward(Graph& g, Graph::Id inputs,
                          const std::vector<int>& positions,
                          const EncoderParams& params,
                          const EncoderConfig& cfg, bool train,
                          RandomStream* dropout_rng) {
  cfg.validate();
  if (static_cast<int>(positions.size()) != g.cols(inputs)) {
    throw std::invalid_argument("encoder_forward: one position per column");
  }
  const Graph::Id pos = g.lookup_rows_as_cols(*params.positions, positions);
  Graph::Id a = inputs;
  for (const BlockParams& block : params.blocks) {
    const Graph::Id a_pos = g.add(a, pos);
    const Graph::Id attended = multihead_self_attention(g, a_pos, block,
                                                        cfg.heads);
    const Graph::Id after_attn =
        g.layer_norm_cols(g.add(a_pos, attended), g.param(*block.ln1_gain),
                          g.param(*block.ln1_bias));
    Graph::Id hidden = g.relu(g.add_col_broadcast(
        g.matmul(g.param(*block.ffn_w1), after_attn), g.param(*block.ffn_b1)));
    hidden = g.dropout(hidden, cfg.dropout, train, dropout_rng);
    const Graph::Id ffn = g.add_col_broadcast(
        g.matmul(g.param(*block.ffn_w2), hidden), g.param(*block.ffn_b2));
    a = g.layer_norm_cols(g.add(after_attn, ffn), g.param(*block.ln2_gain),
                          g.param(*block.ln2_bias));
  }
  return a;
}

MlpParams make_mlp(ParamStore& store, const std::string& prefix, int in,
                   int out, const MlpSpec& spec, RandomStream& rng) {
  if (spec.layers < 1) throw std::invalid_argument("mlp layers < 1");
  if (spec.layers > 1 && spec.hidden < 1)
    throw std::invalid_argument("mlp hidden < 1");
  MlpParams params;
  int prev = in;
  for (int l = 0; l < spec.layers; ++l) {
    const bool last = l == spec.layers - 1;
    const int width = last ? out : spec.hidden;
    const std::string lp = prefix + ".l" + std::to_string(l);
    Tensor& w = store.add(lp + ".w", width, prev);
    Tensor& b = store.add(lp + ".b", width, 1);
    init_uniform_fan_in(w, prev, rng);
    init_uniform_fan_in(b, prev, rng);
    params.weights.push_back(&w);
    params.biases.push_back(&b);
    prev = width;
  }
  return params;
}

Graph::Id mlp_forward(Graph& g, Graph::Id x, const MlpParams& p) {
  Graph::Id h = x;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    h = g.add_col_broadcast(g.matmul(g.param(*p.weights[l]), h),
                            g.param(*p.biases[l]));
    if (l + 1 < p.weights.size()) h = g.relu(h);
  }
  return h;
}

}  // namespace d3as::nn
