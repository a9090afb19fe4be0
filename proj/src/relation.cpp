#include "ramcg/relation.hpp"

namespace ramcg {

std::vector<Parameter*> RelationEncoder::parameters() {
  std::vector<Parameter*> out;
  for (auto& mod : modules) {
    for (auto& ch : mod.channels) {
      out.push_back(&ch.pair_proj);
      out.push_back(&ch.score_proj);
      out.push_back(&ch.feat_proj);
    }
    out.push_back(&mod.mix_proj);
  }
  return out;
}

uint64_t RelationEncoder::digest() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& mod : modules) {
    for (const auto& ch : mod.channels) {
      h = digest_matrix(ch.pair_proj.value, h);
      h = digest_matrix(ch.score_proj.value, h);
      h = digest_matrix(ch.feat_proj.value, h);
    }
    h = digest_matrix(mod.mix_proj.value, h);
  }
  return h;
}

void RelationEncoder::set_frozen(bool f) {
  frozen = f;
  for (Parameter* p : parameters()) p->trainable = !f;
}

RelationEncoder make_relation_encoder(const RelationEncoderConfig& cfg, Rng& rng) {
  if (cfg.channels < 1) throw ConfigError("encoder: channels must be >= 1");
  if (cfg.stack < 1) throw ConfigError("encoder: stack must be >= 1");
  if (cfg.d_in < 1 || cfg.d_out < 1) throw ConfigError("encoder: dims must be >= 1");

  RelationEncoder enc;
  enc.cfg = cfg;
  const int d_hid = cfg.d_hid > 0 ? cfg.d_hid : cfg.d_out;
  enc.cfg.d_hid = d_hid;
  int d_in = cfg.d_in;
  for (int l = 0; l < cfg.stack; ++l) {
    RelationModule mod;
    for (int i = 0; i < cfg.channels; ++i) {
      const std::string tag = "enc.m" + std::to_string(l) + ".c" + std::to_string(i);
      DisentangleChannel ch;
      ch.pair_proj = glorot_uniform(tag + ".pair_proj", 2 * d_in, d_hid, rng);
      ch.score_proj = glorot_uniform(tag + ".score_proj", d_hid, 1, rng);
      ch.feat_proj = glorot_uniform(tag + ".feat_proj", d_in, cfg.d_out, rng);
      mod.channels.push_back(std::move(ch));
    }
    mod.mix_proj = glorot_uniform("enc.m" + std::to_string(l) + ".mix_proj",
                                  cfg.channels * cfg.d_out, cfg.d_out, rng);
    enc.modules.push_back(std::move(mod));
    d_in = cfg.d_out;
  }
  return enc;
}

namespace {

std::vector<int> row_owners(const Csr& csr) {
  std::vector<int> owner(static_cast<size_t>(csr.num_entries()));
  for (int u = 0; u < csr.num_nodes(); ++u)
    for (int e = csr.offsets[u]; e < csr.offsets[u + 1]; ++e) owner[static_cast<size_t>(e)] = u;
  return owner;
}

}  // namespace

Var channel_edge_scores(Tape& t, Var feats, const Csr& csr, DisentangleChannel& ch,
                        Scalar leaky_slope) {
  if (t.value(feats).rows() != csr.num_nodes())
    throw DimensionError("channel_edge_scores: feature rows " + shape_str(t.value(feats)) +
                         " vs " + std::to_string(csr.num_nodes()) + " nodes");
  Var u_feats = gather_rows(t, feats, row_owners(csr));
  Var v_feats = gather_rows(t, feats, csr.targets);
  Var pairs = concat_cols(t, u_feats, v_feats);
  Var hidden = leaky_relu(t, matmul(t, pairs, t.param(ch.pair_proj)), leaky_slope);
  return sigmoid(t, matmul(t, hidden, t.param(ch.score_proj)));
}

Var normalize_over_neighbors(Tape& t, Var scores, const Csr& csr) {
  return segment_softmax(t, scores, csr.offsets);
}

Var channel_aggregate(Tape& t, Var weights, Var feats, const Csr& csr, DisentangleChannel& ch) {
  Var agg = weighted_neighbor_sum(t, weights, feats, csr.offsets, csr.targets);
  return matmul(t, agg, t.param(ch.feat_proj));
}

Var module_forward(Tape& t, Var feats, const Csr& csr, RelationModule& mod, Scalar leaky_slope) {
  Var mixed;
  for (auto& ch : mod.channels) {
    Var scores = channel_edge_scores(t, feats, csr, ch, leaky_slope);
    Var weights = normalize_over_neighbors(t, scores, csr);
    Var out = channel_aggregate(t, weights, feats, csr, ch);
    mixed = (mixed.id < 0) ? out : concat_cols(t, mixed, out);
  }
  return leaky_relu(t, matmul(t, mixed, t.param(mod.mix_proj)), leaky_slope);
}

Var encoder_forward(Tape& t, Var feats, const Csr& csr, RelationEncoder& enc) {
  Var h = feats;
  for (auto& mod : enc.modules) h = module_forward(t, h, csr, mod, enc.cfg.leaky_slope);
  return h;
}

PlainGcn make_plain_gcn(int d_in, int d_out, Scalar leaky_slope, Rng& rng) {
  PlainGcn gcn;
  gcn.layer1 = glorot_uniform("gcn.layer1", d_in, d_out, rng);
  gcn.layer2 = glorot_uniform("gcn.layer2", d_out, d_out, rng);
  gcn.leaky_slope = leaky_slope;
  return gcn;
}

Var mean_neighbor_weights(Tape& t, const Csr& csr) {
  Mat w(csr.num_entries(), 1);
  for (int u = 0; u < csr.num_nodes(); ++u) {
    const Scalar inv = 1.0 / static_cast<Scalar>(csr.degree(u));
    for (int e = csr.offsets[u]; e < csr.offsets[u + 1]; ++e) w(e, 0) = inv;
  }
  return t.constant(std::move(w));
}

Var plain_gcn_forward(Tape& t, Var feats, const Csr& csr, PlainGcn& gcn) {
  Var w = mean_neighbor_weights(t, csr);
  Var h1 = weighted_neighbor_sum(t, w, feats, csr.offsets, csr.targets);
  h1 = leaky_relu(t, matmul(t, h1, t.param(gcn.layer1)), gcn.leaky_slope);
  Var h2 = weighted_neighbor_sum(t, w, h1, csr.offsets, csr.targets);
  return leaky_relu(t, matmul(t, h2, t.param(gcn.layer2)), gcn.leaky_slope);
}

}  // namespace ramcg
