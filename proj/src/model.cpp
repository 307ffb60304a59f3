#include "himoc/model.hpp"

#include <algorithm>
#include <deque>
#include <unordered_set>

namespace himoc {

void ContiguityGraph::add_edge(std::size_t a, std::size_t b) {
  if (a == b) return;
  auto insert = [](std::vector<std::size_t>& v, std::size_t x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end() || *it != x) v.insert(it, x);
  };
  insert(adj_[a], b);
  insert(adj_[b], a);
}

bool ContiguityGraph::has_edge(std::size_t a, std::size_t b) const {
  return std::binary_search(adj_[a].begin(), adj_[a].end(), b);
}

std::size_t ContiguityGraph::edge_count() const {
  std::size_t s = 0;
  for (const auto& n : adj_) s += n.size();
  return s / 2;
}

std::vector<std::pair<std::size_t, std::size_t>> ContiguityGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < adj_.size(); ++a) {
    for (std::size_t b : adj_[a]) {
      if (a < b) out.emplace_back(a, b);
    }
  }
  return out;
}

std::vector<std::size_t> ContiguityGraph::components() const {
  constexpr auto unset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> comp(adj_.size(), unset);
  std::size_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < adj_.size(); ++s) {
    if (comp[s] != unset) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto w : adj_[v]) {
        if (comp[w] == unset) {
          comp[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  return comp;
}

std::vector<std::size_t> ContiguityGraph::neighborhood(std::size_t v, int order) const {
  std::vector<std::size_t> out{v};
  std::unordered_set<std::size_t> seen{v};
  std::size_t frontier_begin = 0;
  for (int d = 0; d < order; ++d) {
    const std::size_t frontier_end = out.size();
    for (std::size_t i = frontier_begin; i < frontier_end; ++i) {
      for (auto w : adj_[out[i]]) {
        if (seen.insert(w).second) out.push_back(w);
      }
    }
    frontier_begin = frontier_end;
    if (frontier_begin == out.size()) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

FeatureTable::FeatureTable(std::vector<Id> row_ids, std::vector<std::string> columns)
    : ids_(std::move(row_ids)), names_(std::move(columns)) {
  std::vector<std::string> sorted = names_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error("duplicate column name in feature table");
  }
  data_.assign(names_.size(), std::vector<double>(ids_.size(), kMissing));
}

std::size_t FeatureTable::column_index(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error("unknown column: " + name);
  return static_cast<std::size_t>(it - names_.begin());
}

std::size_t FeatureTable::missing_count() const {
  std::size_t n = 0;
  for (const auto& c : data_) n += static_cast<std::size_t>(std::count_if(c.begin(), c.end(), is_missing));
  return n;
}

Matrix Matrix::from_table(const FeatureTable& t) {
  Matrix m(t.rows(), t.cols());
  for (std::size_t c = 0; c < t.cols(); ++c) {
    for (std::size_t r = 0; r < t.rows(); ++r) m(r, c) = t.at(r, c);
  }
  return m;
}

}  // namespace himoc
