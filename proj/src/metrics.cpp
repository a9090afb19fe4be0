#include "ramcg/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ramcg {

void RMatrix::push_row(std::vector<Scalar> row) {
  if (row.size() != rows_.size() + 1)
    throw DimensionError("rmatrix: step " + std::to_string(rows_.size() + 1) + " needs " +
                         std::to_string(rows_.size() + 1) + " entries, got " +
                         std::to_string(row.size()));
  for (Scalar v : row)
    if (v < 0.0 || v > 1.0) throw DataError("rmatrix: accuracy outside [0,1]");
  rows_.push_back(std::move(row));
}

Scalar RMatrix::at(int step, int task) const {
  if (step < 0 || step >= num_steps() || task < 0 || task > step)
    throw DimensionError("rmatrix: (" + std::to_string(step) + "," + std::to_string(task) +
                         ") outside lower triangle");
  return rows_[static_cast<size_t>(step)][static_cast<size_t>(task)];
}

const std::vector<Scalar>& RMatrix::row(int step) const {
  if (step < 0 || step >= num_steps()) throw DimensionError("rmatrix: no row " + std::to_string(step));
  return rows_[static_cast<size_t>(step)];
}

Scalar acc_at(const RMatrix& r, int T) {
  if (T < 1 || T > r.num_steps())
    throw DimensionError("acc: row " + std::to_string(T) + " not recorded");
  Scalar s = 0.0;
  for (int t = 0; t < T; ++t) s += r.at(T - 1, t);
  return s / static_cast<Scalar>(T);
}

Scalar bwf_at(const RMatrix& r, int T) {
  if (T < 2) throw DimensionError("bwf: undefined for T < 2");
  if (T > r.num_steps()) throw DimensionError("bwf: row " + std::to_string(T) + " not recorded");
  Scalar s = 0.0;
  for (int t = 0; t < T - 1; ++t) s += r.at(T - 1, t) - r.at(t, t);
  return s / static_cast<Scalar>(T - 1);
}

void emit_report(const RMatrix& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  char buf[64];
  {
    std::ofstream out(dir / "rmatrix.tsv", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "rmatrix.tsv").string());
    for (int i = 0; i < r.num_steps(); ++i) {
      for (int j = 0; j <= i; ++j) {
        std::snprintf(buf, sizeof(buf), "%.6f", r.at(i, j));
        if (j) out << '\t';
        out << buf;
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "metrics.tsv", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "metrics.tsv").string());
    out << "step\tacc\tbwf\n";
    for (int T = 1; T <= r.num_steps(); ++T) {
      std::snprintf(buf, sizeof(buf), "%.6f", acc_at(r, T));
      out << T << '\t' << buf << '\t';
      if (T >= 2) {
        std::snprintf(buf, sizeof(buf), "%.6f", bwf_at(r, T));
        out << buf;
      }
      out << '\n';
    }
  }
}

RMatrix load_rmatrix(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("missing or unreadable file: " + file.string());
  RMatrix r;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<Scalar> row;
    Scalar v;
    while (ss >> v) row.push_back(v);
    r.push_row(std::move(row));
  }
  return r;
}

}  // namespace ramcg
