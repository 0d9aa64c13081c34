#pragma once

#include <string>
#include <vector>

#include "d3as/graph.hpp"
#include "d3as/random.hpp"
#include "d3as/tensor.hpp"

namespace d3as::nn {

struct EncoderConfig {
  int width = 32;        // embedding dimension d
  int heads = 2;         // attention heads, each full width
  int blocks = 2;
  int ffn_hidden = 64;
  double dropout = 0.1;  // applied to FFN hidden activations only
  int max_positions = 16;

  void validate() const;  // throws std::invalid_argument
};

struct BlockParams {
  std::vector<Tensor*> wq, wk, wv;  // one d x d triple per head, no biases
  Tensor* w_out = nullptr;          // d x (d * heads)
  Tensor* ln1_gain = nullptr;
  Tensor* ln1_bias = nullptr;
  Tensor* ln2_gain = nullptr;
  Tensor* ln2_bias = nullptr;
  Tensor* ffn_w1 = nullptr;
  Tensor* ffn_b1 = nullptr;
  Tensor* ffn_w2 = nullptr;
  Tensor* ffn_b2 = nullptr;
};

struct EncoderParams {
  std::vector<BlockParams> blocks;
  Tensor* positions = nullptr;  // max_positions x d lookup table
};

// Fill with uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), column-major order.
void init_uniform_fan_in(Tensor& t, int fan_in, RandomStream& rng);

// Allocates all encoder parameters in `store` under `prefix`. Weights use
// fan-in uniform init; the positional table is N(0, 0.02^2); layer norm
// gains start at 1 and biases at 0.
EncoderParams make_encoder(ParamStore& store, const EncoderConfig& cfg,
                           const std::string& prefix, RandomStream& rng);

// Scaled dot-product self-attention over columns. Per head h:
//   Q = Wq A, K = Wk A, V = Wv A, out_h = V softmax_cols(K^T Q / sqrt(d)).
// Heads are stacked vertically and mixed by w_out.
Graph::Id multihead_self_attention(Graph& g, Graph::Id a,
                                   const BlockParams& p, int heads);

// Full encoder stack. Positional embeddings (rows of the lookup table
// selected by `positions`) are added to the block input at the start of
// every block. Each block then applies attention and a ReLU FFN, both with
// residual connection and column layer norm; dropout acts on the FFN hidden
// activations when train is set.
Graph::Id encoder_forward(Graph& g, Graph::Id inputs,
                          const std::vector<int>& positions,
                          const EncoderParams& params,
                          const EncoderConfig& cfg, bool train,
                          RandomStream* dropout_rng);

// Plain MLP head: `layers` linear maps in -> hidden -> ... -> out with ReLU
// between them and no activation after the last.
struct MlpSpec {
  int layers = 2;
  int hidden = 64;
};

struct MlpParams {
  std::vector<Tensor*> weights;
  std::vector<Tensor*> biases;
};

MlpParams make_mlp(ParamStore& store, const std::string& prefix, int in,
                   int out, const MlpSpec& spec, RandomStream& rng);

Graph::Id mlp_forward(Graph& g, Graph::Id x, const MlpParams& p);

}  // namespace d3as::nn
