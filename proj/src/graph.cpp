#include "graphood/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "graphood/errors.hpp"

namespace graphood {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& file, int line, const std::string& msg) {
  throw DataError(file + ":" + std::to_string(line) + ": " + msg);
}

std::ifstream open_or_throw(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing or unreadable file: " + path.string());
  return in;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

int parse_int(const std::string& s, const std::string& file, int line) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    fail(file, line, "expected integer, got '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s, const std::string& file, int line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    fail(file, line, "expected number, got '" + s + "'");
  }
  return v;
}

// Shortest representation that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

}  // namespace

void GraphDataset::validate() const {
  const int n = num_nodes;
  if (features.rows() != n || features.cols() != num_features) {
    throw DataError("features shape " + features.shape_str() + " does not match graph.json (" +
                    std::to_string(n) + "x" + std::to_string(num_features) + ")");
  }
  if (static_cast<int>(labels.size()) != n) throw DataError("labels length mismatch");
  for (const Mask* m : {&train_mask, &val_mask, &test_id_mask, &test_ood_mask, &expose_ood_mask}) {
    if (static_cast<int>(m->size()) != n) throw DataError("mask length mismatch");
  }
  adjacency.validate();
  if (adjacency.n != n) throw DataError("adjacency dimension mismatch");

  // symmetry and zero diagonal
  for (int i = 0; i < n; ++i) {
    for (int k = adjacency.row_offsets[i]; k < adjacency.row_offsets[i + 1]; ++k) {
      const int j = adjacency.col_indices[k];
      if (j == i) throw DataError("self-loop at node " + std::to_string(i));
      const double w = adjacency.values[k];
      bool found = false;
      for (int k2 = adjacency.row_offsets[j]; k2 < adjacency.row_offsets[j + 1]; ++k2) {
        if (adjacency.col_indices[k2] == i) {
          if (adjacency.values[k2] != w) {
            throw DataError("asymmetric edge weight between " + std::to_string(i) + " and " +
                            std::to_string(j));
          }
          found = true;
          break;
        }
      }
      if (!found) {
        throw DataError("edge (" + std::to_string(i) + "," + std::to_string(j) +
                        ") present without its mirror");
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    const int flags = (train_mask[i] != 0) + (val_mask[i] != 0) + (test_id_mask[i] != 0) +
                      (test_ood_mask[i] != 0) + (expose_ood_mask[i] != 0);
    if (flags > 1) throw DataError("node " + std::to_string(i) + " has multiple role masks");
    if (labels[i] < -1 || labels[i] >= num_classes) {
      throw DataError("node " + std::to_string(i) + " label " + std::to_string(labels[i]) +
                      " outside [-1," + std::to_string(num_classes) + ")");
    }
    if ((train_mask[i] || val_mask[i] || test_id_mask[i]) && labels[i] < 0) {
      throw DataError("node " + std::to_string(i) + " has an ID role but no label");
    }
  }
}

GraphDataset load_dataset(const std::string& dir) {
  const fs::path base(dir);
  GraphDataset g;

  {
    std::ifstream in = open_or_throw(base / "graph.json");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError((base / "graph.json").string() + ": " + e.what());
    }
    for (const char* key : {"num_nodes", "num_features", "num_classes"}) {
      if (!j.contains(key) || !j[key].is_number_integer()) {
        throw DataError((base / "graph.json").string() + ": missing integer key '" +
                        std::string(key) + "'");
      }
    }
    g.num_nodes = j["num_nodes"].get<int>();
    g.num_features = j["num_features"].get<int>();
    g.num_classes = j["num_classes"].get<int>();
    if (g.num_nodes <= 0 || g.num_features <= 0 || g.num_classes <= 0) {
      throw DataError((base / "graph.json").string() + ": dimensions must be positive");
    }
  }

  const int n = g.num_nodes;

  {
    const std::string file = (base / "edges.csv").string();
    std::ifstream in = open_or_throw(file);
    std::vector<std::pair<int, int>> edges;
    std::set<std::pair<int, int>> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      auto parts = split_csv_line(line);
      if (parts.size() != 2) fail(file, lineno, "expected 'src,dst'");
      const int a = parse_int(parts[0], file, lineno);
      const int b = parse_int(parts[1], file, lineno);
      if (a < 0 || a >= n || b < 0 || b >= n) fail(file, lineno, "node index out of range");
      if (a == b) fail(file, lineno, "self-loop rejected");
      const auto key = std::minmax(a, b);
      if (!seen.insert(key).second) fail(file, lineno, "duplicate edge rejected");
      edges.emplace_back(a, b);
    }
    g.adjacency = adjacency_from_edges(n, edges);
  }

  {
    const std::string file = (base / "features.csv").string();
    std::ifstream in = open_or_throw(file);
    g.features = Matrix(n, g.num_features);
    std::string line;
    int lineno = 0;
    int row = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      if (row >= n) fail(file, lineno, "more feature rows than num_nodes");
      auto parts = split_csv_line(line);
      if (static_cast<int>(parts.size()) != g.num_features) {
        fail(file, lineno, "expected " + std::to_string(g.num_features) + " values, got " +
                               std::to_string(parts.size()));
      }
      for (int j = 0; j < g.num_features; ++j) {
        g.features(row, j) = parse_double(parts[j], file, lineno);
      }
      ++row;
    }
    if (row != n) throw DataError(file + ": expected " + std::to_string(n) + " rows, got " +
                                  std::to_string(row));
  }

  {
    const std::string file = (base / "labels.csv").string();
    std::ifstream in = open_or_throw(file);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      const int v = parse_int(split_csv_line(line)[0], file, lineno);
      if (v < -1 || v >= g.num_classes) {
        fail(file, lineno, "label " + std::to_string(v) + " outside [-1," +
                               std::to_string(g.num_classes) + ")");
      }
      g.labels.push_back(v);
    }
    if (static_cast<int>(g.labels.size()) != n) {
      throw DataError(file + ": expected " + std::to_string(n) + " labels, got " +
                      std::to_string(g.labels.size()));
    }
  }

  {
    const std::string file = (base / "masks.csv").string();
    std::ifstream in = open_or_throw(file);
    std::string line;
    if (!std::getline(in, line)) throw DataError(file + ": empty file");
    std::string header = line;
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header != "train,val,test_id,test_ood,expose_ood") {
      fail(file, 1, "bad header '" + header + "'");
    }
    for (Mask* m : {&g.train_mask, &g.val_mask, &g.test_id_mask, &g.test_ood_mask,
                    &g.expose_ood_mask}) {
      m->assign(n, 0);
    }
    int lineno = 1;
    int row = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      if (row >= n) fail(file, lineno, "more mask rows than num_nodes");
      auto parts = split_csv_line(line);
      if (parts.size() != 5) fail(file, lineno, "expected five flags");
      Mask* masks[5] = {&g.train_mask, &g.val_mask, &g.test_id_mask, &g.test_ood_mask,
                        &g.expose_ood_mask};
      int set_count = 0;
      for (int j = 0; j < 5; ++j) {
        const int v = parse_int(parts[j], file, lineno);
        if (v != 0 && v != 1) fail(file, lineno, "flags must be 0 or 1");
        (*masks[j])[row] = static_cast<std::uint8_t>(v);
        set_count += v;
      }
      if (set_count > 1) fail(file, lineno, "at most one role flag per node");
      ++row;
    }
    if (row != n) throw DataError(file + ": expected " + std::to_string(n) + " rows, got " +
                                  std::to_string(row));
  }

  g.validate();
  return g;
}

void save_dataset(const GraphDataset& g, const std::string& dir) {
  g.validate();
  const fs::path base(dir);
  fs::create_directories(base);

  {
    nlohmann::json j;
    j["num_nodes"] = g.num_nodes;
    j["num_features"] = g.num_features;
    j["num_classes"] = g.num_classes;
    std::ofstream out(base / "graph.json");
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out(base / "edges.csv");
    // each undirected edge written once, lower endpoint first
    for (int i = 0; i < g.adjacency.n; ++i) {
      for (int k = g.adjacency.row_offsets[i]; k < g.adjacency.row_offsets[i + 1]; ++k) {
        const int j = g.adjacency.col_indices[k];
        if (i < j) out << i << "," << j << "\n";
      }
    }
  }
  {
    std::ofstream out(base / "features.csv");
    for (int i = 0; i < g.num_nodes; ++i) {
      for (int j = 0; j < g.num_features; ++j) {
        if (j) out << ",";
        out << format_double(g.features(i, j));
      }
      out << "\n";
    }
  }
  {
    std::ofstream out(base / "labels.csv");
    for (int v : g.labels) out << v << "\n";
  }
  {
    std::ofstream out(base / "masks.csv");
    out << "train,val,test_id,test_ood,expose_ood\n";
    for (int i = 0; i < g.num_nodes; ++i) {
      out << int(g.train_mask[i]) << "," << int(g.val_mask[i]) << "," << int(g.test_id_mask[i])
          << "," << int(g.test_ood_mask[i]) << "," << int(g.expose_ood_mask[i]) << "\n";
    }
  }
}

SparseMatrix adjacency_from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::tuple<int, int, double>> entries;
  entries.reserve(edges.size() * 2);
  for (const auto& [a, b] : edges) {
    entries.emplace_back(a, b, 1.0);
    entries.emplace_back(b, a, 1.0);
  }
  return SparseMatrix::from_coo(n, std::move(entries));
}

std::vector<int> node_degrees(const SparseMatrix& adjacency) {
  std::vector<int> deg(adjacency.n);
  for (int i = 0; i < adjacency.n; ++i) {
    deg[i] = adjacency.row_offsets[i + 1] - adjacency.row_offsets[i];
  }
  return deg;
}

SparseMatrix sym_normalize(const GraphDataset& g) {
  const SparseMatrix& a = g.adjacency;
  const int n = a.n;
  std::vector<double> inv_sqrt_deg(n);
  for (int i = 0; i < n; ++i) {
    double d = 1.0;  // self-loop
    for (int k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) d += a.values[k];
    inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
  }
  std::vector<std::tuple<int, int, double>> entries;
  entries.reserve(a.nnz() + n);
  for (int i = 0; i < n; ++i) {
    entries.emplace_back(i, i, inv_sqrt_deg[i] * inv_sqrt_deg[i]);
    for (int k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
      const int j = a.col_indices[k];
      entries.emplace_back(i, j, inv_sqrt_deg[i] * a.values[k] * inv_sqrt_deg[j]);
    }
  }
  return SparseMatrix::from_coo(n, std::move(entries));
}

SparseMatrix row_normalize(const GraphDataset& g) {
  const SparseMatrix& a = g.adjacency;
  SparseMatrix p = a;
  for (int i = 0; i < a.n; ++i) {
    double d = 0.0;
    for (int k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) d += a.values[k];
    if (d == 0.0) continue;  // isolated node keeps an all-zero row
    for (int k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) p.values[k] = a.values[k] / d;
  }
  return p;
}

std::vector<int> mask_to_indices(const Mask& mask) {
  std::vector<int> out;
  for (size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace graphood
