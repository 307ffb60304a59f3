#include "himoc/sa3.hpp"

#include "himoc/io.hpp"
#include "himoc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace himoc {

std::size_t Dendrogram::inversions() const {
  std::size_t n = 0;
  for (std::size_t i = 1; i < merges.size(); ++i) n += merges[i].height < merges[i - 1].height;
  return n;
}

FeatureTable quantile_transform(const FeatureTable& t) {
  FeatureTable out = t;
  const std::size_t n = t.rows();
  for (std::size_t c = 0; c < t.cols(); ++c) {
    const auto& col = t.column(c);
    for (double v : col) {
      if (is_missing(v)) throw Error("quantile_transform: missing value in column " + t.columns()[c]);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return col[a] < col[b]; });
    auto& dst = out.column(c);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && col[order[j + 1]] == col[order[i]]) ++j;
      const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
      const double v = n > 1 ? (avg_rank - 1.0) / static_cast<double>(n - 1) : 0.5;
      for (std::size_t k = i; k <= j; ++k) dst[order[k]] = v;
      i = j + 1;
    }
  }
  return out;
}

namespace {

// Merge sequence of one component. Leaves keep their global index; internal
// clusters are numbered n + local counter, which preserves the relative id
// order a global run would produce inside this component.
struct LocalMerge {
  double delta;
  std::size_t a, b, size;
};

double ward_delta(std::span<const double> ca, std::size_t na, std::span<const double> cb, std::size_t nb) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < ca.size(); ++k) {
    const double d = ca[k] - cb[k];
    d2 += d * d;
  }
  const double fa = static_cast<double>(na), fb = static_cast<double>(nb);
  return fa * fb / (fa + fb) * d2;
}

std::vector<LocalMerge> agglomerate(const Matrix& x, const ContiguityGraph& g, const std::vector<std::size_t>& nodes) {
  const std::size_t n = x.rows, dim = x.cols;
  const std::size_t m = nodes.size();
  // local slot per cluster: leaves 0..m-1, then one slot per merge
  std::vector<std::size_t> id(2 * m);
  std::vector<std::vector<double>> centroid(2 * m);
  std::vector<std::size_t> size(2 * m, 0);
  std::vector<char> alive(2 * m, 0);
  std::vector<std::set<std::size_t>> nbr(2 * m);
  std::unordered_map<std::size_t, std::size_t> slot_of;
  for (std::size_t i = 0; i < m; ++i) slot_of.emplace(nodes[i], i);
  for (std::size_t i = 0; i < m; ++i) {
    id[i] = nodes[i];
    const auto row = x.row(nodes[i]);
    centroid[i].assign(row.begin(), row.end());
    size[i] = 1;
    alive[i] = 1;
    for (auto w : g.neighbors(nodes[i])) nbr[i].insert(slot_of.at(w));
  }
  using Entry = std::tuple<double, std::size_t, std::size_t, std::size_t, std::size_t>;  // delta, lo id, hi id, slots
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  auto push = [&](std::size_t s, std::size_t t) {
    const double d = ward_delta(centroid[s], size[s], centroid[t], size[t]);
    const auto lo = std::min(id[s], id[t]), hi = std::max(id[s], id[t]);
    pq.emplace(d, lo, hi, id[s] == lo ? s : t, id[s] == lo ? t : s);
  };
  for (std::size_t i = 0; i < m; ++i) {
    for (auto j : nbr[i]) {
      if (i < j) push(i, j);
    }
  }
  std::vector<LocalMerge> out;
  std::size_t next = m;
  while (!pq.empty()) {
    const auto [d, lo, hi, s, t] = pq.top();
    pq.pop();
    if (!alive[s] || !alive[t]) continue;
    const std::size_t c = next++;
    id[c] = n + out.size();
    size[c] = size[s] + size[t];
    centroid[c].resize(dim);
    const double fs = static_cast<double>(size[s]), ft = static_cast<double>(size[t]);
    for (std::size_t k = 0; k < dim; ++k) {
      centroid[c][k] = (fs * centroid[s][k] + ft * centroid[t][k]) / (fs + ft);
    }
    alive[s] = alive[t] = 0;
    alive[c] = 1;
    for (auto side : {s, t}) {
      for (auto w : nbr[side]) {
        if (w == s || w == t) continue;
        nbr[c].insert(w);
        nbr[w].erase(side);
        nbr[w].insert(c);
      }
      std::set<std::size_t>().swap(nbr[side]);
      std::vector<double>().swap(centroid[side]);
    }
    out.push_back({d, lo, hi, size[c]});
    for (auto w : nbr[c]) push(c, w);
  }
  return out;
}

}  // namespace

Dendrogram constrained_ward(const Matrix& x, const ContiguityGraph& g, unsigned workers) {
  if (x.rows != g.size()) throw Error("constrained_ward: table rows and graph nodes differ");
  Dendrogram d;
  d.leaves = x.rows;
  if (x.rows == 0) return d;
  const auto comp = g.components();
  std::size_t ncomp = 0;
  for (auto c : comp) ncomp = std::max(ncomp, c + 1);
  std::vector<std::vector<std::size_t>> nodes(ncomp);
  for (std::size_t v = 0; v < comp.size(); ++v) nodes[comp[v]].push_back(v);
  std::vector<std::vector<LocalMerge>> local(ncomp);
  parallel_for(ncomp, workers, [&](std::size_t c) { local[c] = agglomerate(x, g, nodes[c]); });

  // Interleave exactly as one global run would: at every step the global
  // minimum is the next merge of some component; ids are made global here.
  const std::size_t n = x.rows;
  std::vector<std::size_t> cursor(ncomp, 0);
  std::vector<std::vector<std::size_t>> global_id(ncomp);
  auto resolve = [&](std::size_t c, std::size_t local_id) {
    return local_id < n ? local_id : global_id[c][local_id - n];
  };
  using Key = std::tuple<double, std::size_t, std::size_t, std::size_t>;  // delta, lo, hi, component
  std::priority_queue<Key, std::vector<Key>, std::greater<>> heads;
  auto offer = [&](std::size_t c) {
    if (cursor[c] >= local[c].size()) return;
    const auto& lm = local[c][cursor[c]];
    const auto a = resolve(c, lm.a), b = resolve(c, lm.b);
    heads.emplace(lm.delta, std::min(a, b), std::max(a, b), c);
  };
  for (std::size_t c = 0; c < ncomp; ++c) offer(c);
  while (!heads.empty()) {
    const auto [delta, a, b, c] = heads.top();
    heads.pop();
    const auto& lm = local[c][cursor[c]++];
    global_id[c].push_back(n + d.merges.size());
    d.merges.push_back({a, b, std::sqrt(2.0 * delta), lm.size});
    offer(c);
  }
  return d;
}

std::vector<int> leaf_extract(const Dendrogram& d, std::size_t min_size) {
  if (min_size < 2) throw Error("leaf_extract: min_size must be at least 2");
  const std::size_t n = d.leaves;
  enum class State : char { open, marked, closed };
  std::vector<State> state(n + d.merges.size(), State::open);
  std::vector<std::vector<std::size_t>> members(n + d.merges.size());
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  std::vector<std::vector<std::size_t>> emitted;
  auto emit = [&](std::size_t c) { emitted.push_back(std::move(members[c])); };
  std::vector<char> has_parent(n + d.merges.size(), 0);
  for (std::size_t k = 0; k < d.merges.size(); ++k) {
    const auto& mg = d.merges[k];
    const std::size_t c = n + k;
    has_parent[mg.a] = has_parent[mg.b] = 1;
    const State sa = state[mg.a], sb = state[mg.b];
    if (sa == State::marked && sb == State::marked) {
      emit(mg.a);
      emit(mg.b);
      state[c] = State::closed;
    } else if (sa == State::closed || sb == State::closed) {
      if (sa == State::marked) emit(mg.a);
      if (sb == State::marked) emit(mg.b);
      state[c] = State::closed;
    } else {
      auto& into = members[c];
      into = std::move(members[mg.a]);
      into.insert(into.end(), members[mg.b].begin(), members[mg.b].end());
      state[c] = (sa == State::marked || sb == State::marked || into.size() >= min_size) ? State::marked : State::open;
    }
    if (state[c] == State::closed) {
      members[mg.a].clear();
      members[mg.b].clear();
    }
  }
  for (std::size_t c = 0; c < state.size(); ++c) {
    if (!has_parent[c] && state[c] == State::marked) emit(c);
  }
  for (auto& e : emitted) std::sort(e.begin(), e.end());
  std::sort(emitted.begin(), emitted.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  std::vector<int> labels(n, kNoise);
  for (std::size_t l = 0; l < emitted.size(); ++l) {
    for (auto v : emitted[l]) labels[v] = static_cast<int>(l);
  }
  return labels;
}

void check_morphotopes(const std::vector<int>& labels, const ContiguityGraph& g, std::size_t min_size) {
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(max_label + 1));
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] != kNoise) members[static_cast<std::size_t>(labels[v])].push_back(v);
  }
  for (std::size_t l = 0; l < members.size(); ++l) {
    const auto& mem = members[l];
    if (mem.size() < min_size) {
      throw Error("morphotope " + std::to_string(l) + " has " + std::to_string(mem.size()) + " members, below " +
                  std::to_string(min_size));
    }
    std::vector<char> seen(labels.size(), 0);
    std::vector<std::size_t> stack{mem.front()};
    seen[mem.front()] = 1;
    std::size_t reached = 0;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      ++reached;
      for (auto w : g.neighbors(v)) {
        if (!seen[w] && labels[w] == static_cast<int>(l)) {
          seen[w] = 1;
          stack.push_back(w);
        }
      }
    }
    if (reached != mem.size()) throw Error("morphotope " + std::to_string(l) + " is not contiguous");
  }
}

Sa3Result sa3(const FeatureTable& t, const ContiguityGraph& g, std::size_t min_size, unsigned workers) {
  Sa3Result r;
  const Matrix x = Matrix::from_table(quantile_transform(t));
  r.dendrogram = constrained_ward(x, g, workers);
  r.labels = leaf_extract(r.dendrogram, min_size);
  check_morphotopes(r.labels, g, min_size);
  std::set<int> distinct;
  for (int l : r.labels) {
    if (l == kNoise) {
      ++r.noise;
    } else {
      distinct.insert(l);
    }
  }
  r.clusters = distinct.size();
  return r;
}

std::string dendrogram_to_csv(const Dendrogram& d) {
  std::ostringstream os;
  os << "child_a,child_b,height,size\n";
  for (const auto& m : d.merges) os << m.a << ',' << m.b << ',' << io::format_number(m.height) << ',' << m.size << '\n';
  return os.str();
}

std::string labels_to_csv(const std::vector<Id>& ids, const std::vector<int>& labels) {
  std::ostringstream os;
  os << "cell_id,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) os << ids[i] << ',' << labels[i] << '\n';
  return os.str();
}

}  // namespace himoc
