#include "ramcg/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace ramcg {

namespace fs = std::filesystem;

namespace {
constexpr const char* kTensorTag = "ramcg.tensor.v1";
constexpr const char* kCheckpointTag = "ramcg.checkpoint.v1";
constexpr const char* kMasksTag = "ramcg.masks.v1";

static_assert(sizeof(Scalar) == 8, "checkpoint format assumes 64-bit floats");
}  // namespace

void save_tensor(const fs::path& file, const std::string& name, const Mat& m) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  out << kTensorTag << "\n" << name << "\n" << m.rows() << " " << m.cols() << "\n";
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) {
      const Scalar v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  if (!out) throw DataError("write failed: " + file.string());
}

Mat load_tensor(const fs::path& file, std::string* name_out) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("missing or unreadable tensor file: " + file.string());
  std::string tag, name, shape;
  if (!std::getline(in, tag) || tag != kTensorTag)
    throw DataError(file.string() + ": bad tensor format tag");
  if (!std::getline(in, name)) throw DataError(file.string() + ": missing tensor name");
  if (!std::getline(in, shape)) throw DataError(file.string() + ": missing tensor shape");
  std::istringstream ss(shape);
  Index rows = 0, cols = 0;
  if (!(ss >> rows >> cols) || rows < 0 || cols < 0)
    throw DataError(file.string() + ": bad tensor shape '" + shape + "'");
  Mat m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      Scalar v;
      if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw DataError(file.string() + ": truncated tensor payload");
      m(r, c) = v;
    }
  if (name_out) *name_out = name;
  return m;
}

void save_checkpoint(const fs::path& dir, RamCgModel& model) {
  fs::create_directories(dir / "tensors");
  std::ostringstream manifest;
  manifest << kCheckpointTag << "\n";
  manifest << "ablation\t" << to_string(model.ablation) << "\n";
  manifest << "num_classes\t" << model.num_classes << "\n";
  for (Parameter* p : model.parameters()) {
    const fs::path file = dir / "tensors" / (p->name + ".bin");
    save_tensor(file, p->name, p->value);
    manifest << "tensor\t" << p->name << "\n";
  }
  {
    std::ofstream out(dir / "masks.tsv", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "masks.tsv").string());
    out << kMasksTag << "\n";
    out << "n_theta\t" << model.registry.n_theta() << "\n";
    for (int t = 0; t < model.registry.num_committed(); ++t)
      out << "task\t" << t << "\t" << model.registry.task_mask(t).to_hex() << "\n";
  }
  {
    std::ofstream out(dir / "checkpoint.tsv", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "checkpoint.tsv").string());
    out << manifest.str();
  }
}

void load_checkpoint(const fs::path& dir, RamCgModel& model) {
  std::ifstream manifest(dir / "checkpoint.tsv");
  if (!manifest) throw DataError("missing checkpoint manifest in " + dir.string());
  std::string line;
  if (!std::getline(manifest, line) || line != kCheckpointTag)
    throw DataError(dir.string() + ": bad checkpoint format tag");

  std::map<std::string, Parameter*> by_name;
  for (Parameter* p : model.parameters()) by_name[p->name] = p;

  size_t loaded = 0;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string kind, value;
    std::getline(ss, kind, '\t');
    std::getline(ss, value);
    if (kind == "ablation") {
      if (ablation_from_string(value) != model.ablation)
        throw DataError("checkpoint ablation mode '" + value + "' does not match the model");
    } else if (kind == "num_classes") {
      if (std::stoi(value) != model.num_classes)
        throw DataError("checkpoint class count does not match the model");
    } else if (kind == "tensor") {
      auto it = by_name.find(value);
      if (it == by_name.end()) throw DataError("checkpoint names unknown tensor '" + value + "'");
      Mat m = load_tensor(dir / "tensors" / (value + ".bin"));
      if (m.rows() != it->second->value.rows() || m.cols() != it->second->value.cols())
        throw DataError("checkpoint tensor '" + value + "' shape " + shape_str(m) +
                        " does not match model shape " + shape_str(it->second->value));
      it->second->value = std::move(m);
      ++loaded;
    } else {
      throw DataError(dir.string() + ": unknown checkpoint entry '" + kind + "'");
    }
  }
  if (loaded != by_name.size())
    throw DataError("checkpoint loaded " + std::to_string(loaded) + " of " +
                    std::to_string(by_name.size()) + " tensors");

  std::ifstream masks(dir / "masks.tsv");
  if (!masks) throw DataError("missing masks.tsv in " + dir.string());
  if (!std::getline(masks, line) || line != kMasksTag)
    throw DataError(dir.string() + ": bad masks format tag");
  if (!std::getline(masks, line)) throw DataError(dir.string() + ": missing n_theta header");
  size_t n_theta = 0;
  {
    std::istringstream ss(line);
    std::string key;
    ss >> key >> n_theta;
    if (key != "n_theta" || n_theta != model.backbone.n_theta())
      throw DataError(dir.string() + ": n_theta mismatch with model");
  }
  model.registry = TaskMaskRegistry(n_theta);
  while (std::getline(masks, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key, hex;
    int task = -1;
    ss >> key >> task >> hex;
    if (key != "task") throw DataError(dir.string() + ": bad masks line '" + line + "'");
    model.registry.commit(task, Bitmask::from_hex(n_theta, hex));
  }

  if (model.registry.num_committed() > 0) {
    if (model.ablation == AblationMode::None) model.encoder.set_frozen(true);
    if (model.ablation == AblationMode::PlainGcnEncoder) {
      model.gcn.layer1.trainable = false;
      model.gcn.layer2.trainable = false;
    }
    model.classifier.trainable = false;
  }
}

}  // namespace ramcg
