#include "ramcg/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace ramcg {

namespace fs = std::filesystem;

std::vector<uint8_t> TaskGraph::split_mask(Split s) const {
  std::vector<uint8_t> m(split.size(), 0);
  for (size_t i = 0; i < split.size(); ++i) m[i] = (split[i] == s) ? 1 : 0;
  return m;
}

int TaskGraph::count_split(Split s) const {
  int c = 0;
  for (auto v : split)
    if (v == s) ++c;
  return c;
}

void TaskGraph::validate() const {
  if (num_nodes <= 0) throw DataError("task: no nodes");
  if (features.rows() != num_nodes)
    throw DataError("task: feature rows " + std::to_string(features.rows()) + " vs " +
                    std::to_string(num_nodes) + " nodes");
  if (!features.allFinite()) throw DataError("task: non-finite feature value");
  if (static_cast<int>(labels.size()) != num_nodes || static_cast<int>(split.size()) != num_nodes)
    throw DataError("task: labels/split length mismatch");
  if (csr.num_nodes() != num_nodes) throw DataError("task: csr node count mismatch");

  for (int u = 0; u < num_nodes; ++u) {
    bool self = false;
    int prev = -1;
    for (int e = csr.offsets[u]; e < csr.offsets[u + 1]; ++e) {
      const int v = csr.targets[e];
      if (v < 0 || v >= num_nodes) throw DataError("task: csr target out of range");
      if (v <= prev) throw DataError("task: csr row not sorted/deduplicated");
      prev = v;
      if (v == u) self = true;
      // symmetry: u must appear in v's row
      const auto lo = csr.targets.begin() + csr.offsets[v];
      const auto hi = csr.targets.begin() + csr.offsets[v + 1];
      if (!std::binary_search(lo, hi, u)) throw DataError("task: csr not symmetric");
    }
    if (!self) throw DataError("task: node " + std::to_string(u) + " missing self-loop");
  }

  for (int u = 0; u < num_nodes; ++u) {
    if (labels[u] != kUnlabeled && (labels[u] < 0 || labels[u] >= num_classes))
      throw DataError("task: label out of range at node " + std::to_string(u));
    if (split[u] == Split::Train && labels[u] == kUnlabeled)
      throw DataError("task: train mask contains unlabeled node " + std::to_string(u));
  }
}

int TaskSequence::max_classes() const {
  int c = 0;
  for (const auto& t : tasks) c = std::max(c, t.num_classes);
  return c;
}

void TaskSequence::validate() const {
  if (tasks.size() < 2) throw DataError("sequence: need at least 2 tasks");
  for (const auto& t : tasks) {
    t.validate();
    if (t.features.cols() != feature_dim) throw DataError("sequence: feature dim mismatch");
  }
}

Csr build_csr(const std::vector<std::pair<int, int>>& edges, int n) {
  std::vector<std::set<int>> adj(static_cast<size_t>(n));
  for (auto [u, v] : edges) {
    if (u < 0 || u >= n || v < 0 || v >= n)
      throw DataError("build_csr: edge (" + std::to_string(u) + "," + std::to_string(v) +
                      ") out of range for n=" + std::to_string(n));
    adj[static_cast<size_t>(u)].insert(v);
    adj[static_cast<size_t>(v)].insert(u);
  }
  for (int u = 0; u < n; ++u) adj[static_cast<size_t>(u)].insert(u);

  Csr csr;
  csr.offsets.resize(static_cast<size_t>(n) + 1, 0);
  for (int u = 0; u < n; ++u) csr.offsets[u + 1] = csr.offsets[u] + static_cast<int>(adj[u].size());
  csr.targets.reserve(static_cast<size_t>(csr.offsets.back()));
  for (int u = 0; u < n; ++u) csr.targets.insert(csr.targets.end(), adj[u].begin(), adj[u].end());
  return csr;
}

std::vector<Split> make_splits(int task_index, int n, const std::vector<int>& labels,
                               int num_classes, uint64_t seed) {
  std::vector<int> labeled;
  for (int u = 0; u < n; ++u)
    if (labels[u] != kUnlabeled) labeled.push_back(u);
  if (labeled.empty()) throw DataError("make_splits: no labeled nodes");
  if (static_cast<int>(labeled.size()) < num_classes)
    throw DataError("make_splits: fewer labeled nodes (" + std::to_string(labeled.size()) +
                    ") than classes (" + std::to_string(num_classes) + ")");

  Rng rng(splitmix64(seed ^ 0x5eedu) + static_cast<uint64_t>(task_index));
  // Fisher-Yates
  for (size_t i = labeled.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.uniform_int(static_cast<int>(i)));
    std::swap(labeled[i - 1], labeled[j]);
  }

  const Scalar train_frac = task_index == 0 ? 0.6 : 0.3;
  const Scalar val_frac = 0.2;
  const auto m = labeled.size();
  const size_t n_train = static_cast<size_t>(train_frac * static_cast<Scalar>(m));
  const size_t n_val = static_cast<size_t>(val_frac * static_cast<Scalar>(m));

  std::vector<Split> out(static_cast<size_t>(n), Split::None);
  for (size_t i = 0; i < m; ++i) {
    Split s = Split::Test;
    if (i < n_train)
      s = Split::Train;
    else if (i < n_train + n_val)
      s = Split::Val;
    out[static_cast<size_t>(labeled[i])] = s;
  }
  return out;
}

namespace {

struct LineReader {
  std::ifstream in;
  std::string file;
  int line_no = 0;

  LineReader(const fs::path& p) : in(p), file(p.string()) {
    if (!in) throw DataError("missing or unreadable file: " + file);
  }

  bool next(std::string& line) {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(file + ":" + std::to_string(line_no) + ": " + what);
  }
};

int parse_int(LineReader& r, const std::string& tok) {
  try {
    size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size()) r.fail("trailing characters in integer '" + tok + "'");
    return v;
  } catch (const DataError&) {
    throw;
  } catch (...) {
    r.fail("expected integer, got '" + tok + "'");
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

void write_or_throw(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << content;
  if (!out) throw DataError("write failed: " + p.string());
}

}  // namespace

TaskGraph load_task_dir(const fs::path& dir) {
  TaskGraph g;
  int feature_dim = -1;

  {
    LineReader meta(dir / "meta.tsv");
    std::string line;
    while (meta.next(line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string key;
      long value = 0;
      if (!(ss >> key >> value)) meta.fail("expected 'key value'");
      if (key == "num_nodes")
        g.num_nodes = static_cast<int>(value);
      else if (key == "feature_dim")
        feature_dim = static_cast<int>(value);
      else if (key == "num_classes")
        g.num_classes = static_cast<int>(value);
      else
        meta.fail("unknown meta key '" + key + "'");
    }
    if (g.num_nodes <= 0 || feature_dim <= 0 || g.num_classes <= 0)
      throw DataError(meta.file + ": incomplete meta (need num_nodes, feature_dim, num_classes)");
  }

  {
    LineReader er(dir / "edges.tsv");
    std::string line;
    std::set<std::pair<int, int>> seen;
    while (er.next(line)) {
      if (line.empty()) continue;
      const auto toks = split_tabs(line);
      if (toks.size() != 2) er.fail("expected 'u<TAB>v'");
      int u = parse_int(er, toks[0]);
      int v = parse_int(er, toks[1]);
      if (u < 0 || u >= g.num_nodes || v < 0 || v >= g.num_nodes)
        er.fail("node index out of range [0," + std::to_string(g.num_nodes) + ")");
      auto key = std::minmax(u, v);
      if (!seen.insert({key.first, key.second}).second) er.fail("duplicate edge line");
      g.edges.emplace_back(key.first, key.second);
    }
  }

  {
    LineReader fr(dir / "features.tsv");
    g.features.resize(g.num_nodes, feature_dim);
    std::string line;
    for (int u = 0; u < g.num_nodes; ++u) {
      if (!fr.next(line)) fr.fail("expected " + std::to_string(g.num_nodes) + " feature rows");
      const auto toks = split_tabs(line);
      if (static_cast<int>(toks.size()) != feature_dim)
        fr.fail("expected " + std::to_string(feature_dim) + " values, got " +
                std::to_string(toks.size()));
      for (int d = 0; d < feature_dim; ++d) {
        try {
          size_t pos = 0;
          g.features(u, d) = std::stod(toks[static_cast<size_t>(d)], &pos);
          if (pos != toks[static_cast<size_t>(d)].size()) throw std::invalid_argument("trail");
        } catch (...) {
          fr.fail("bad float '" + toks[static_cast<size_t>(d)] + "'");
        }
      }
    }
  }

  {
    LineReader lr(dir / "labels.tsv");
    g.labels.resize(static_cast<size_t>(g.num_nodes));
    std::string line;
    for (int u = 0; u < g.num_nodes; ++u) {
      if (!lr.next(line)) lr.fail("expected " + std::to_string(g.num_nodes) + " label rows");
      const int y = parse_int(lr, line);
      if (y != kUnlabeled && (y < 0 || y >= g.num_classes))
        lr.fail("label " + std::to_string(y) + " out of range");
      g.labels[static_cast<size_t>(u)] = y;
    }
  }

  {
    LineReader sr(dir / "splits.tsv");
    g.split.resize(static_cast<size_t>(g.num_nodes));
    std::string line;
    for (int u = 0; u < g.num_nodes; ++u) {
      if (!sr.next(line)) sr.fail("expected " + std::to_string(g.num_nodes) + " split rows");
      Split s;
      if (line == "train")
        s = Split::Train;
      else if (line == "val")
        s = Split::Val;
      else if (line == "test")
        s = Split::Test;
      else if (line == "none")
        s = Split::None;
      else
        sr.fail("expected train|val|test|none, got '" + line + "'");
      g.split[static_cast<size_t>(u)] = s;
    }
  }

  g.csr = build_csr(g.edges, g.num_nodes);
  g.validate();
  return g;
}

void save_task_dir(const TaskGraph& g, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ostringstream s;
    s << "num_nodes\t" << g.num_nodes << "\n";
    s << "feature_dim\t" << g.features.cols() << "\n";
    s << "num_classes\t" << g.num_classes << "\n";
    write_or_throw(dir / "meta.tsv", s.str());
  }
  {
    std::ostringstream s;
    for (auto [u, v] : g.edges) s << u << "\t" << v << "\n";
    write_or_throw(dir / "edges.tsv", s.str());
  }
  {
    std::ostringstream s;
    char buf[64];
    for (int u = 0; u < g.num_nodes; ++u) {
      for (Index d = 0; d < g.features.cols(); ++d) {
        std::snprintf(buf, sizeof(buf), "%.17g", g.features(u, d));
        if (d) s << '\t';
        s << buf;
      }
      s << '\n';
    }
    write_or_throw(dir / "features.tsv", s.str());
  }
  {
    std::ostringstream s;
    for (int y : g.labels) s << y << "\n";
    write_or_throw(dir / "labels.tsv", s.str());
  }
  {
    std::ostringstream s;
    for (Split sp : g.split) {
      switch (sp) {
        case Split::Train: s << "train\n"; break;
        case Split::Val: s << "val\n"; break;
        case Split::Test: s << "test\n"; break;
        case Split::None: s << "none\n"; break;
      }
    }
    write_or_throw(dir / "splits.tsv", s.str());
  }
}

TaskSequence load_sequence_dir(const fs::path& dir) {
  LineReader mr(dir / "manifest.tsv");
  TaskSequence seq;
  std::string line;
  while (mr.next(line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto toks = split_tabs(line);
    if (toks[0] != "task") continue;  // notes and provenance lines
    if (toks.size() < 2) mr.fail("expected 'task<TAB><subdir>'");
    seq.tasks.push_back(load_task_dir(dir / toks[1]));
  }
  if (seq.tasks.empty()) throw DataError(mr.file + ": no tasks listed");
  seq.feature_dim = static_cast<int>(seq.tasks[0].features.cols());
  seq.validate();
  return seq;
}

void save_sequence_dir(const TaskSequence& seq, const fs::path& dir,
                       const std::vector<std::string>& manifest_notes) {
  fs::create_directories(dir);
  std::ostringstream manifest;
  for (int t = 0; t < seq.num_tasks(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "task_%03d", t);
    save_task_dir(seq.tasks[static_cast<size_t>(t)], dir / name);
    manifest << "task\t" << name << "\n";
  }
  for (const auto& note : manifest_notes) manifest << "# " << note << "\n";
  write_or_throw(dir / "manifest.tsv", manifest.str());
}

}  // namespace ramcg
