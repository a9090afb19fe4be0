#pragma once

#include "ramcg/graph.hpp"
#include "ramcg/tensor.hpp"

#include <vector>

namespace ramcg {

/// One relation channel: scores every adjacency entry from the concatenated
/// endpoint features, then projects the attention-weighted neighborhood.
struct DisentangleChannel {
  Parameter pair_proj;   // 2*d_in x d_hid
  Parameter score_proj;  // d_hid x 1
  Parameter feat_proj;   // d_in x d_out
};

/// A stack element: m channels plus the projection mixing their outputs.
struct RelationModule {
  std::vector<DisentangleChannel> channels;
  Parameter mix_proj;  // (m*d_out) x d_module_out

  int num_channels() const { return static_cast<int>(channels.size()); }
};

struct RelationEncoderConfig {
  int channels = 6;
  int stack = 2;
  int d_in = 0;      // input feature dim
  int d_out = 16;    // channel output dim == module output dim
  int d_hid = 0;     // 0 means same as d_out
  Scalar leaky_slope = 0.2;
};

/// Stacked relation-discovery modules producing per-node invariant features.
struct RelationEncoder {
  RelationEncoderConfig cfg;
  std::vector<RelationModule> modules;
  bool frozen = false;

  int output_dim() const { return cfg.d_out; }
  std::vector<Parameter*> parameters();
  uint64_t digest() const;
  void set_frozen(bool f);
};

RelationEncoder make_relation_encoder(const RelationEncoderConfig& cfg, Rng& rng);

/// Per-entry relation scores for one channel: for every CSR entry (u <- v),
/// sigmoid(score_proj . leaky_relu(pair_proj . [h_u, h_v])). Output is Ex1 in
/// CSR entry order.
Var channel_edge_scores(Tape& t, Var feats, const Csr& csr, DisentangleChannel& ch,
                        Scalar leaky_slope);

/// Softmax of the scores within each node's CSR row.
Var normalize_over_neighbors(Tape& t, Var scores, const Csr& csr);

/// feat_proj applied to the attention-weighted neighborhood sums.
Var channel_aggregate(Tape& t, Var weights, Var feats, const Csr& csr, DisentangleChannel& ch);

/// Channel outputs concatenated feature-wise, mixed and activated.
Var module_forward(Tape& t, Var feats, const Csr& csr, RelationModule& mod, Scalar leaky_slope);

/// Full stack; the output of each module feeds the next.
Var encoder_forward(Tape& t, Var feats, const Csr& csr, RelationEncoder& enc);

/// Two-layer mean-aggregation graph convolution (ablation substitute and
/// baseline backbone).
struct PlainGcn {
  Parameter layer1;  // d_in x d_out
  Parameter layer2;  // d_out x d_out
  Scalar leaky_slope = 0.2;

  int output_dim() const { return static_cast<int>(layer2.value.cols()); }
  std::vector<Parameter*> parameters() { return {&layer1, &layer2}; }
};

PlainGcn make_plain_gcn(int d_in, int d_out, Scalar leaky_slope, Rng& rng);

Var plain_gcn_forward(Tape& t, Var feats, const Csr& csr, PlainGcn& gcn);

/// Uniform 1/deg(u) weights over each CSR row, as a constant Ex1 tensor.
Var mean_neighbor_weights(Tape& t, const Csr& csr);

}  // namespace ramcg
