#include "ramcg/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ramcg {

namespace fs = std::filesystem;

void SynthStreamConfig::validate() const {
  if (num_tasks < 2) throw ConfigError("synth: num_tasks must be >= 2");
  if (nodes_per_task < 4) throw ConfigError("synth: nodes_per_task must be >= 4");
  if (num_relations < 1) throw ConfigError("synth: num_relations must be >= 1");
  if (num_classes < 2) throw ConfigError("synth: num_classes must be >= 2");
  if (feature_dim < 1) throw ConfigError("synth: feature_dim must be >= 1");
  if (edge_prob.empty() ||
      (edge_prob.size() != 1 && edge_prob.size() != static_cast<size_t>(num_relations)))
    throw ConfigError("synth: edge_prob needs 1 or num_relations entries");
  for (Scalar p : edge_prob)
    if (p < 0.0 || p > 1.0) throw ConfigError("synth: edge_prob outside [0,1]");
  if (!relation_class_weights.empty()) {
    if (relation_class_weights.size() != static_cast<size_t>(num_tasks))
      throw ConfigError("synth: relation_class_weights needs one matrix per task");
    for (const auto& w : relation_class_weights)
      if (w.rows() != num_classes || w.cols() != num_relations)
        throw ConfigError("synth: relation_class_weights must be num_classes x num_relations");
  }
}

std::vector<Mat> default_relation_weights(int num_tasks, int num_classes, int num_relations,
                                          bool shift, uint64_t seed) {
  Rng rng = Rng(seed).fork(0xA11C);
  std::vector<Mat> out;
  std::vector<int> perm(static_cast<size_t>(num_relations));
  std::iota(perm.begin(), perm.end(), 0);
  for (int t = 0; t < num_tasks; ++t) {
    if (shift && t > 0) {
      // re-shuffle until the class assignment actually changes
      const std::vector<int> prev = perm;
      do {
        for (size_t i = perm.size(); i > 1; --i)
          std::swap(perm[i - 1], perm[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);
      } while (num_relations > 1 && [&] {
        for (size_t i = 0; i < perm.size(); ++i)
          if (perm[i] % num_classes != prev[i] % num_classes) return false;
        return true;
      }());
    }
    Mat w = Mat::Zero(num_classes, num_relations);
    for (int r = 0; r < num_relations; ++r) w(perm[static_cast<size_t>(r)] % num_classes, r) = 1.0;
    out.push_back(std::move(w));
  }
  return out;
}

namespace {

Mat random_unit_rows(int rows, int dim, Rng& rng) {
  Mat m(rows, dim);
  for (int r = 0; r < rows; ++r) {
    Scalar norm2 = 0.0;
    for (int d = 0; d < dim; ++d) {
      m(r, d) = rng.normal();
      norm2 += m(r, d) * m(r, d);
    }
    const Scalar inv = 1.0 / std::sqrt(std::max(norm2, Scalar(1e-12)));
    m.row(r) *= inv;
  }
  return m;
}

}  // namespace

SynthStream synth_stream(const SynthStreamConfig& cfg) {
  cfg.validate();
  SynthStream out;

  const int R = cfg.num_relations;
  const int C = cfg.num_classes;
  const int D = cfg.feature_dim;
  const int n = cfg.nodes_per_task;

  std::vector<Scalar> edge_prob(static_cast<size_t>(R), cfg.edge_prob[0]);
  if (cfg.edge_prob.size() > 1)
    for (int r = 0; r < R; ++r) edge_prob[static_cast<size_t>(r)] = cfg.edge_prob[static_cast<size_t>(r)];

  std::vector<Mat> weights = cfg.relation_class_weights;
  if (weights.empty())
    weights = default_relation_weights(cfg.num_tasks, C, R, cfg.relation_shift, cfg.seed);

  bool any_shift = false;
  for (size_t t = 1; t < weights.size(); ++t)
    if (weights[t] != weights[0]) any_shift = true;
  if (R < 2) out.warnings.push_back("degenerate: single relation type, no relations to disentangle");
  if (!any_shift && cfg.drift == 0.0)
    out.warnings.push_back("degenerate: identical relation weights and zero drift, stream has no shift");

  Rng root(cfg.seed);
  // base class means shared by all tasks; per-task drift directions move them
  Rng mean_rng = root.fork(0xBA5E);
  const Mat base_means = random_unit_rows(C, D, mean_rng) * cfg.mean_separation;

  for (int t = 0; t < cfg.num_tasks; ++t) {
    Rng trng = root.fork(0x7A50 + static_cast<uint64_t>(t));
    TaskGraph g;
    g.num_nodes = n;
    g.num_classes = C;

    // (a) hidden relation affinities: one dominant relation per node
    Mat affinity(n, R);
    for (int u = 0; u < n; ++u) {
      const int primary = trng.uniform_int(R);
      Scalar z = 0.0;
      for (int r = 0; r < R; ++r) {
        const Scalar logit =
            (r == primary ? cfg.affinity_sharpness : Scalar(0.0)) + 0.5 * trng.normal();
        affinity(u, r) = std::exp(logit);
        z += affinity(u, r);
      }
      affinity.row(u) /= z;
    }

    // (b) edges between pairs sharing high affinity in some relation
    std::vector<int> edge_rel;
    std::vector<Scalar> per_rel(static_cast<size_t>(R));
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) {
        Scalar p_edge = 0.0;
        for (int r = 0; r < R; ++r) {
          per_rel[r] = edge_prob[static_cast<size_t>(r)] * static_cast<Scalar>(R) * affinity(u, r) *
                       affinity(v, r);
          p_edge += per_rel[r];
        }
        p_edge = std::min(p_edge, Scalar(1.0));
        if (trng.uniform() >= p_edge) continue;
        // attribute the edge to one relation, proportional to its share
        Scalar pick = trng.uniform() * p_edge;
        int rel = R - 1;
        for (int r = 0; r < R; ++r) {
          if (pick < per_rel[r]) {
            rel = r;
            break;
          }
          pick -= per_rel[r];
        }
        g.edges.emplace_back(u, v);
        edge_rel.push_back(rel);
      }
    g.csr = build_csr(g.edges, n);

    // realized relation mix from the sampled edges (affinity fallback for
    // nodes without incident edges)
    Mat mix = Mat::Zero(n, R);
    for (size_t e = 0; e < g.edges.size(); ++e) {
      mix(g.edges[e].first, edge_rel[e]) += 1.0;
      mix(g.edges[e].second, edge_rel[e]) += 1.0;
    }
    for (int u = 0; u < n; ++u) {
      const Scalar total = mix.row(u).sum();
      if (total > 0.0)
        mix.row(u) /= total;
      else
        mix.row(u) = affinity.row(u);
    }

    // (c) labels: argmax of task weights applied to the mix, blended with a
    // per-node propensity that also leaks into the features
    Mat propensity(n, C);
    g.labels.resize(static_cast<size_t>(n));
    for (int u = 0; u < n; ++u) {
      int best = 0;
      Scalar best_score = -1e300;
      for (int c = 0; c < C; ++c) {
        propensity(u, c) = trng.normal();
        const Scalar s =
            weights[static_cast<size_t>(t)].row(c).dot(mix.row(u)) + cfg.label_noise * propensity(u, c);
        if (s > best_score) {
          best_score = s;
          best = c;
        }
      }
      g.labels[static_cast<size_t>(u)] = best;
    }

    // (d) class-conditioned Gaussian features with drifting means
    Rng drift_rng = root.fork(0xD81F + static_cast<uint64_t>(t));
    Mat task_means = base_means;
    if (t > 0 && cfg.drift != 0.0)
      task_means += random_unit_rows(C, D, drift_rng) * (cfg.drift * static_cast<Scalar>(t));
    g.features.resize(n, D);
    for (int u = 0; u < n; ++u) {
      const int y = g.labels[static_cast<size_t>(u)];
      for (int d = 0; d < D; ++d)
        g.features(u, d) = task_means(y, d) + cfg.feature_noise * trng.normal();
    }

    g.split = make_splits(t, n, g.labels, C, root.fork(0x5917).seed() + static_cast<uint64_t>(t));

    g.validate();
    out.sequence.tasks.push_back(std::move(g));
    out.hidden.edge_relation.push_back(std::move(edge_rel));
    out.hidden.node_relation_mix.push_back(std::move(mix));
  }

  out.sequence.feature_dim = D;
  out.sequence.validate();
  return out;
}

void save_synth_stream(const SynthStream& stream, const fs::path& dir,
                       const std::vector<std::string>& provenance) {
  std::vector<std::string> notes;
  for (const auto& w : stream.warnings) notes.push_back("warning: " + w);
  for (const auto& p : provenance) notes.push_back(p);
  save_sequence_dir(stream.sequence, dir, notes);
  // hidden relations live beside the model-facing files; the loader ignores them
  for (size_t t = 0; t < stream.hidden.edge_relation.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "task_%03zu", t);
    std::ofstream rel(dir / name / "edge_relations_hidden.tsv");
    for (int r : stream.hidden.edge_relation[t]) rel << r << "\n";
  }
}

}  // namespace ramcg
