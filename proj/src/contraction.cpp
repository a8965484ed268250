#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <queue>
#include <tuple>

#include "affect_router/error.hpp"
#include "affect_router/routing.hpp"

namespace affect_router {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct OverlayArc {
  NodeIndex other;
  double weight;
  std::uint32_t arc;
};

struct Shortcut {
  NodeIndex from;
  NodeIndex to;
  double weight;
  std::uint32_t first;
  std::uint32_t second;
};

// Dynamic graph over the not-yet-contracted nodes.
class Contractor {
 public:
  Contractor(const RoadGraph& graph, const WeightedView& weights)
      : n_(graph.node_count()), out_(n_), in_(n_), contracted_(n_, false), contracted_neighbors_(n_, 0),
        dist_(n_, kInf) {
    arcs_.reserve(graph.edge_count() * 2);
    for (const RoadEdge& edge : graph.edges()) {
      const double w = weights[edge.id];
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw ValidationError("contraction hierarchy needs positive finite weights (edge " +
                              std::to_string(edge.id) + ")");
      }
      const auto arc = static_cast<std::uint32_t>(arcs_.size());
      arcs_.push_back(CHArc{edge.from, edge.to, w, edge.id, 0, 0, kInvalidNode});
      if (edge.from != edge.to) insert_or_improve(edge.from, edge.to, w, arc);
    }
  }

  std::vector<std::uint32_t> run() {
    std::vector<std::uint32_t> rank(n_, 0);
    using Entry = std::pair<long, NodeIndex>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    for (NodeIndex v = 0; v < n_; ++v) queue.emplace(priority(v), v);
    std::uint32_t next_rank = 0;
    std::vector<Shortcut> shortcuts;
    while (!queue.empty()) {
      const NodeIndex v = queue.top().second;
      queue.pop();
      const Entry updated{priority(v), v};
      if (!queue.empty() && queue.top() < updated) {
        queue.push(updated);
        continue;
      }
      contract(v, shortcuts);
      rank[v] = next_rank++;
    }
    return rank;
  }

  std::vector<CHArc> take_arcs() { return std::move(arcs_); }

 private:
  void insert_or_improve(NodeIndex from, NodeIndex to, double weight, std::uint32_t arc) {
    auto& outs = out_[from];
    const auto it = std::find_if(outs.begin(), outs.end(), [&](const OverlayArc& a) { return a.other == to; });
    if (it == outs.end()) {
      outs.push_back({to, weight, arc});
      in_[to].push_back({from, weight, arc});
      return;
    }
    if (weight < it->weight) {
      it->weight = weight;
      it->arc = arc;
      auto& ins = in_[to];
      const auto jt = std::find_if(ins.begin(), ins.end(), [&](const OverlayArc& a) { return a.other == from; });
      jt->weight = weight;
      jt->arc = arc;
    }
  }

  // Shortest distances from source avoiding `excluded`, settled up to `limit`.
  void witness_search(NodeIndex source, NodeIndex excluded, double limit) {
    for (NodeIndex v : touched_) dist_[v] = kInf;
    touched_.clear();
    using Entry = std::pair<double, NodeIndex>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    dist_[source] = 0.0;
    touched_.push_back(source);
    queue.emplace(0.0, source);
    while (!queue.empty()) {
      const auto [d, v] = queue.top();
      queue.pop();
      if (d > dist_[v]) continue;
      if (d > limit) break;
      for (const OverlayArc& a : out_[v]) {
        if (a.other == excluded) continue;
        const double nd = d + a.weight;
        if (nd < dist_[a.other]) {
          if (dist_[a.other] == kInf) touched_.push_back(a.other);
          dist_[a.other] = nd;
          queue.emplace(nd, a.other);
        }
      }
    }
  }

  void find_shortcuts(NodeIndex v, std::vector<Shortcut>& shortcuts) {
    shortcuts.clear();
    for (const OverlayArc& in : in_[v]) {
      double limit = 0.0;
      for (const OverlayArc& out : out_[v]) {
        if (out.other != in.other) limit = std::max(limit, in.weight + out.weight);
      }
      if (limit == 0.0) continue;
      witness_search(in.other, v, limit);
      for (const OverlayArc& out : out_[v]) {
        if (out.other == in.other) continue;
        const double via = in.weight + out.weight;
        if (dist_[out.other] > via) shortcuts.push_back({in.other, out.other, via, in.arc, out.arc});
      }
    }
  }

  long priority(NodeIndex v) {
    find_shortcuts(v, scratch_);
    const long edge_difference =
        static_cast<long>(scratch_.size()) - static_cast<long>(in_[v].size() + out_[v].size());
    return edge_difference + contracted_neighbors_[v];
  }

  void contract(NodeIndex v, std::vector<Shortcut>& shortcuts) {
    find_shortcuts(v, shortcuts);
    for (const Shortcut& s : shortcuts) {
      const auto arc = static_cast<std::uint32_t>(arcs_.size());
      arcs_.push_back(CHArc{s.from, s.to, s.weight, kInvalidEdge, s.first, s.second, v});
      insert_or_improve(s.from, s.to, s.weight, arc);
    }
    std::vector<NodeIndex> neighbors;
    for (const OverlayArc& a : in_[v]) {
      auto& outs = out_[a.other];
      outs.erase(std::remove_if(outs.begin(), outs.end(), [&](const OverlayArc& x) { return x.other == v; }),
                 outs.end());
      neighbors.push_back(a.other);
    }
    for (const OverlayArc& a : out_[v]) {
      auto& ins = in_[a.other];
      ins.erase(std::remove_if(ins.begin(), ins.end(), [&](const OverlayArc& x) { return x.other == v; }),
                ins.end());
      neighbors.push_back(a.other);
    }
    std::sort(neighbors.begin(), neighbors.end());
    neighbors.erase(std::unique(neighbors.begin(), neighbors.end()), neighbors.end());
    for (NodeIndex u : neighbors) ++contracted_neighbors_[u];
    in_[v].clear();
    out_[v].clear();
    contracted_[v] = true;
  }

  std::size_t n_;
  std::vector<std::vector<OverlayArc>> out_;
  std::vector<std::vector<OverlayArc>> in_;
  std::vector<bool> contracted_;
  std::vector<long> contracted_neighbors_;
  std::vector<CHArc> arcs_;
  std::vector<double> dist_;
  std::vector<NodeIndex> touched_;
  std::vector<Shortcut> scratch_;
};

}  // namespace

CHIndex::CHIndex(std::uint64_t graph_fingerprint, std::uint64_t weights_fingerprint, std::vector<std::uint32_t> rank,
                 std::vector<CHArc> arcs)
    : graph_fingerprint_(graph_fingerprint),
      weights_fingerprint_(weights_fingerprint),
      rank_(std::move(rank)),
      arcs_(std::move(arcs)) {
  const std::size_t n = rank_.size();
  std::vector<std::uint32_t> up_count(n, 0);
  std::vector<std::uint32_t> down_count(n, 0);
  for (const CHArc& a : arcs_) {
    if (a.from >= n || a.to >= n) throw ValidationError("contraction index: arc endpoint out of range");
    if (rank_[a.from] < rank_[a.to]) ++up_count[a.from];
    if (rank_[a.from] > rank_[a.to]) ++down_count[a.to];
  }
  up_offsets_.assign(n + 1, 0);
  down_offsets_.assign(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) {
    up_offsets_[v + 1] = up_offsets_[v] + up_count[v];
    down_offsets_[v + 1] = down_offsets_[v] + down_count[v];
  }
  up_arcs_.resize(up_offsets_[n]);
  down_arcs_.resize(down_offsets_[n]);
  std::vector<std::uint32_t> up_fill(up_offsets_.begin(), up_offsets_.end() - 1);
  std::vector<std::uint32_t> down_fill(down_offsets_.begin(), down_offsets_.end() - 1);
  for (std::uint32_t i = 0; i < arcs_.size(); ++i) {
    const CHArc& a = arcs_[i];
    if (rank_[a.from] < rank_[a.to]) up_arcs_[up_fill[a.from]++] = i;
    if (rank_[a.from] > rank_[a.to]) down_arcs_[down_fill[a.to]++] = i;
  }
}

std::size_t CHIndex::shortcut_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(arcs_.begin(), arcs_.end(), [](const CHArc& a) { return a.is_shortcut(); }));
}

void CHIndex::unpack(std::uint32_t arc, std::vector<EdgeId>& out) const {
  std::vector<std::uint32_t> stack{arc};
  while (!stack.empty()) {
    const CHArc& a = arcs_.at(stack.back());
    stack.pop_back();
    if (!a.is_shortcut()) {
      out.push_back(a.original);
    } else {
      stack.push_back(a.second);
      stack.push_back(a.first);
    }
  }
}

CHIndex ch_preprocess(const RoadGraph& graph, const WeightedView& weights) {
  if (weights.size() != graph.edge_count() || weights.graph_fingerprint() != graph.fingerprint()) {
    throw ValidationError("weights do not match graph");
  }
  Contractor contractor(graph, weights);
  auto rank = contractor.run();
  return CHIndex(graph.fingerprint(), weights.fingerprint(), std::move(rank), contractor.take_arcs());
}

Path ch_query(const CHIndex& index, const WeightedView& weights, NodeIndex source, NodeIndex target) {
  if (weights.fingerprint() != index.weights_fingerprint()) {
    throw ValidationError("contraction index is stale: weights fingerprint mismatch");
  }
  const std::size_t n = index.node_count();
  if (source >= n || target >= n) throw ValidationError("node out of range");
  if (source == target) return Path{{}, 0.0, source, target};

  constexpr std::uint32_t kNoArc = std::numeric_limits<std::uint32_t>::max();
  std::array<std::vector<double>, 2> dist{std::vector<double>(n, kInf), std::vector<double>(n, kInf)};
  std::array<std::vector<std::uint32_t>, 2> pred{std::vector<std::uint32_t>(n, kNoArc),
                                                 std::vector<std::uint32_t>(n, kNoArc)};
  using Entry = std::pair<double, NodeIndex>;
  using Queue = std::priority_queue<Entry, std::vector<Entry>, std::greater<>>;
  std::array<Queue, 2> queue;
  dist[0][source] = 0.0;
  dist[1][target] = 0.0;
  queue[0].emplace(0.0, source);
  queue[1].emplace(0.0, target);

  double best = kInf;
  NodeIndex meet = kInvalidNode;
  const auto arcs = index.arcs();
  while (true) {
    const double top0 = queue[0].empty() ? kInf : queue[0].top().first;
    const double top1 = queue[1].empty() ? kInf : queue[1].top().first;
    if (std::min(top0, top1) >= best || (top0 == kInf && top1 == kInf)) break;
    const int side = top0 <= top1 ? 0 : 1;
    const auto [d, v] = queue[side].top();
    queue[side].pop();
    if (d > dist[side][v]) continue;
    if (dist[1 - side][v] < kInf) {
      const double candidate = d + dist[1 - side][v];
      if (candidate < best) {
        best = candidate;
        meet = v;
      }
    }
    const auto adjacent = side == 0 ? index.up(v) : index.down(v);
    for (std::uint32_t a : adjacent) {
      const CHArc& arc = arcs[a];
      const NodeIndex u = side == 0 ? arc.to : arc.from;
      const double nd = d + arc.weight;
      if (nd < dist[side][u]) {
        dist[side][u] = nd;
        pred[side][u] = a;
        queue[side].emplace(nd, u);
      }
    }
  }
  if (meet == kInvalidNode) throw NoRouteError();

  std::vector<std::uint32_t> forward;
  for (NodeIndex v = meet; pred[0][v] != kNoArc; v = arcs[pred[0][v]].from) forward.push_back(pred[0][v]);
  std::reverse(forward.begin(), forward.end());
  for (NodeIndex v = meet; pred[1][v] != kNoArc; v = arcs[pred[1][v]].to) forward.push_back(pred[1][v]);

  Path path{{}, 0.0, source, target};
  for (std::uint32_t a : forward) index.unpack(a, path.edges);
  path.total_weight = path_weight(path.edges, weights);
  return path;
}

namespace {

constexpr char kMagic[8] = {'A', 'F', 'R', 'T', 'C', 'H', '0', '1'};
constexpr std::uint32_t kSidecarVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw ParseError("contraction sidecar truncated");
  return value;
}

}  // namespace

void save_ch(const CHIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put(out, kSidecarVersion);
  put(out, index.graph_fingerprint());
  put(out, index.weights_fingerprint());
  put(out, static_cast<std::uint64_t>(index.node_count()));
  for (auto r : index.rank()) put(out, r);
  put(out, static_cast<std::uint64_t>(index.arcs().size()));
  for (const CHArc& a : index.arcs()) {
    put(out, a.from);
    put(out, a.to);
    put(out, a.weight);
    put(out, a.original);
    put(out, a.first);
    put(out, a.second);
    put(out, a.middle);
  }
  if (!out) throw Error("write failed: " + path.string());
}

CHIndex load_ch(const std::filesystem::path& path, const WeightedView& weights) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("not a contraction sidecar: " + path.string());
  }
  if (get<std::uint32_t>(in) != kSidecarVersion) throw ValidationError("unsupported contraction sidecar version");
  const auto graph_fp = get<std::uint64_t>(in);
  const auto weights_fp = get<std::uint64_t>(in);
  if (graph_fp != weights.graph_fingerprint() || weights_fp != weights.fingerprint()) {
    throw ValidationError("contraction sidecar does not match the current weights");
  }
  const auto n = get<std::uint64_t>(in);
  std::vector<std::uint32_t> rank(n);
  for (auto& r : rank) r = get<std::uint32_t>(in);
  const auto m = get<std::uint64_t>(in);
  std::vector<CHArc> arcs(m);
  for (auto& a : arcs) {
    a.from = get<NodeIndex>(in);
    a.to = get<NodeIndex>(in);
    a.weight = get<double>(in);
    a.original = get<EdgeId>(in);
    a.first = get<std::uint32_t>(in);
    a.second = get<std::uint32_t>(in);
    a.middle = get<NodeIndex>(in);
  }
  return CHIndex(graph_fp, weights_fp, std::move(rank), std::move(arcs));
}

}  // namespace affect_router
