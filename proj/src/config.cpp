#include "ramcg/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ramcg {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

long parse_long(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long out = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trail");
    return out;
  } catch (...) {
    throw ConfigError(key + ": expected integer, got '" + v + "'");
  }
}

Scalar parse_float(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    Scalar out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trail");
    return out;
  } catch (...) {
    throw ConfigError(key + ": expected number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError(key + ": expected boolean, got '" + v + "'");
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, const std::string& v, Parse p) {
  std::vector<T> out;
  std::string item;
  std::istringstream ss(v);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError(key + ": empty list element");
    out.push_back(p(key, item));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string fmt_float(Scalar v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
std::string fmt_list(const std::vector<T>& v, std::string (*fmt)(T)) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt(v[i]);
  }
  return out;
}

}  // namespace

void apply_config_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  auto& p = cfg.plan;
  auto& s = cfg.synth;
  if (key == "dataset")
    cfg.dataset = value;
  else if (key == "out")
    cfg.out_dir = value;
  else if (key == "seed")
    cfg.set_seed(static_cast<uint64_t>(parse_long(key, value)));
  else if (key == "epochs_per_task")
    p.epochs_per_task = static_cast<int>(parse_long(key, value));
  else if (key == "lr")
    p.lr = parse_float(key, value);
  else if (key == "channels")
    p.channels = static_cast<int>(parse_long(key, value));
  else if (key == "stack")
    p.stack = static_cast<int>(parse_long(key, value));
  else if (key == "d_enc")
    p.d_enc = static_cast<int>(parse_long(key, value));
  else if (key == "d_hid")
    p.d_hid = static_cast<int>(parse_long(key, value));
  else if (key == "select_ratio")
    p.select_ratio = parse_float(key, value);
  else if (key == "leaky_slope")
    p.leaky_slope = parse_float(key, value);
  else if (key == "adam_beta1")
    p.adam_beta1 = parse_float(key, value);
  else if (key == "adam_beta2")
    p.adam_beta2 = parse_float(key, value);
  else if (key == "adam_eps")
    p.adam_eps = parse_float(key, value);
  else if (key == "ablation")
    p.ablation = ablation_from_string(value);
  else if (key == "baseline")
    p.baseline = baseline_from_string(value);
  else if (key == "early_keep")
    p.early_keep = parse_bool(key, value);
  else if (key == "deterministic")
    p.deterministic = parse_bool(key, value);
  else if (key == "use_bias")
    p.use_bias = parse_bool(key, value);
  else if (key == "extra_self_channel")
    p.extra_self_channel = parse_bool(key, value);
  else if (key == "plan_seed")
    p.seed = static_cast<uint64_t>(parse_long(key, value));
  else if (key == "synth.num_tasks")
    s.num_tasks = static_cast<int>(parse_long(key, value));
  else if (key == "synth.nodes_per_task")
    s.nodes_per_task = static_cast<int>(parse_long(key, value));
  else if (key == "synth.num_relations")
    s.num_relations = static_cast<int>(parse_long(key, value));
  else if (key == "synth.num_classes")
    s.num_classes = static_cast<int>(parse_long(key, value));
  else if (key == "synth.feature_dim")
    s.feature_dim = static_cast<int>(parse_long(key, value));
  else if (key == "synth.edge_prob")
    s.edge_prob = parse_list<Scalar>(key, value, parse_float);
  else if (key == "synth.relation_shift")
    s.relation_shift = parse_bool(key, value);
  else if (key == "synth.drift")
    s.drift = parse_float(key, value);
  else if (key == "synth.mean_separation")
    s.mean_separation = parse_float(key, value);
  else if (key == "synth.feature_noise")
    s.feature_noise = parse_float(key, value);
  else if (key == "synth.label_noise")
    s.label_noise = parse_float(key, value);
  else if (key == "synth.affinity_sharpness")
    s.affinity_sharpness = parse_float(key, value);
  else if (key == "synth.seed")
    s.seed = static_cast<uint64_t>(parse_long(key, value));
  else if (key == "sweep_channels")
    cfg.sweep_channels = parse_list<int>(
        key, value, [](const std::string& k, const std::string& v) {
          return static_cast<int>(parse_long(k, v));
        });
  else if (key == "sweep_ratios")
    cfg.sweep_ratios = parse_list<Scalar>(key, value, parse_float);
  else
    throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": empty key");
    apply_config_kv(cfg, key, value);
  }
}

std::string resolved_config(const ExperimentConfig& cfg) {
  const auto& p = cfg.plan;
  const auto& s = cfg.synth;
  std::ostringstream out;
  out << "dataset = " << cfg.dataset << "\n";
  out << "out = " << cfg.out_dir << "\n";
  out << "epochs_per_task = " << p.epochs_per_task << "\n";
  out << "lr = " << fmt_float(p.lr) << "\n";
  out << "channels = " << p.channels << "\n";
  out << "stack = " << p.stack << "\n";
  out << "d_enc = " << p.d_enc << "\n";
  out << "d_hid = " << p.d_hid << "\n";
  out << "select_ratio = " << fmt_float(p.select_ratio) << "\n";
  out << "leaky_slope = " << fmt_float(p.leaky_slope) << "\n";
  out << "adam_beta1 = " << fmt_float(p.adam_beta1) << "\n";
  out << "adam_beta2 = " << fmt_float(p.adam_beta2) << "\n";
  out << "adam_eps = " << fmt_float(p.adam_eps) << "\n";
  out << "ablation = " << to_string(p.ablation) << "\n";
  out << "baseline = " << to_string(p.baseline) << "\n";
  out << "early_keep = " << (p.early_keep ? "true" : "false") << "\n";
  out << "deterministic = " << (p.deterministic ? "true" : "false") << "\n";
  out << "use_bias = " << (p.use_bias ? "true" : "false") << "\n";
  out << "extra_self_channel = " << (p.extra_self_channel ? "true" : "false") << "\n";
  out << "plan_seed = " << p.seed << "\n";
  out << "synth.num_tasks = " << s.num_tasks << "\n";
  out << "synth.nodes_per_task = " << s.nodes_per_task << "\n";
  out << "synth.num_relations = " << s.num_relations << "\n";
  out << "synth.num_classes = " << s.num_classes << "\n";
  out << "synth.feature_dim = " << s.feature_dim << "\n";
  out << "synth.edge_prob = " << fmt_list<Scalar>(s.edge_prob, [](Scalar v) { return fmt_float(v); })
      << "\n";
  out << "synth.relation_shift = " << (s.relation_shift ? "true" : "false") << "\n";
  out << "synth.drift = " << fmt_float(s.drift) << "\n";
  out << "synth.mean_separation = " << fmt_float(s.mean_separation) << "\n";
  out << "synth.feature_noise = " << fmt_float(s.feature_noise) << "\n";
  out << "synth.label_noise = " << fmt_float(s.label_noise) << "\n";
  out << "synth.affinity_sharpness = " << fmt_float(s.affinity_sharpness) << "\n";
  out << "synth.seed = " << s.seed << "\n";
  out << "sweep_channels = "
      << fmt_list<int>(cfg.sweep_channels, [](int v) { return std::to_string(v); }) << "\n";
  out << "sweep_ratios = "
      << fmt_list<Scalar>(cfg.sweep_ratios, [](Scalar v) { return fmt_float(v); }) << "\n";
  return out.str();
}

}  // namespace ramcg
