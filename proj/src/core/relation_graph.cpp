#include "orthoplanes/relation_graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "orthoplanes/error.hpp"
#include "orthoplanes/union_find.hpp"

namespace orthoplanes {

std::vector<PlaneHypothesis> hypotheses_of(const std::vector<OppCandidate>& candidates) {
  std::vector<PlaneHypothesis> out;
  out.reserve(2 * candidates.size());
  for (const auto& c : candidates) {
    out.push_back({c.plane_ref, c.reference_point, static_cast<double>(c.votes)});
    out.push_back({c.plane_other, c.other_anchor, static_cast<double>(c.votes)});
  }
  return out;
}

namespace {

struct Item {
  PlaneHypothesis hyp;
  std::size_t support;
};

// Flat copies of the hypotheses for the all-pairs merge test: two planes
// match when their normals agree up to sign within the merge angle and each
// anchor lies within merge_dist of the other plane.
struct PairTable {
  std::vector<double> nx, ny, nz, d, ax, ay, az;

  explicit PairTable(const std::vector<Item>& items) {
    for (const auto& it : items) {
      const Plane& p = it.hyp.plane;
      nx.push_back(p.normal.x());
      ny.push_back(p.normal.y());
      nz.push_back(p.normal.z());
      d.push_back(p.offset);
      ax.push_back(it.hyp.anchor.x());
      ay.push_back(it.hyp.anchor.y());
      az.push_back(it.hyp.anchor.z());
    }
  }

  bool parallel(std::size_t a, std::size_t b, double cos_angle) const {
    return std::abs(nx[a] * nx[b] + ny[a] * ny[b] + nz[a] * nz[b]) > cos_angle;
  }
  bool close(std::size_t a, std::size_t b, double merge_dist) const {
    return std::abs(nx[b] * ax[a] + ny[b] * ay[a] + nz[b] * az[a] + d[b]) < merge_dist &&
           std::abs(nx[a] * ax[b] + ny[a] * ay[b] + nz[a] * az[b] + d[a]) < merge_dist;
  }
};

}  // namespace

PlaneClustering cluster_hypotheses(const std::vector<PlaneHypothesis>& hyps,
                                   const ClusterParams& params) {
  const double cos_angle = std::cos(params.merge_angle);
  std::vector<Item> items;
  items.reserve(hyps.size());
  for (const auto& h : hyps) items.push_back({h, 1});
  std::vector<std::size_t> item_of_hyp(hyps.size());
  std::iota(item_of_hyp.begin(), item_of_hyp.end(), std::size_t{0});

  bool merged = true;
  while (merged) {
    UnionFind uf(items.size());
    const PairTable table(items);
    // Normals within the merge angle (up to sign) differ by less than the
    // chord 2·sin(angle/2) in |n_x| and in |n_y|, so only neighboring
    // buckets of those two values can hold a match. Components do not
    // depend on the order of unions.
    const double chord = 2.0 * std::sin(0.5 * params.merge_angle);
    std::map<std::pair<int, int>, std::vector<std::size_t>> buckets;
    std::vector<std::pair<int, int>> bucket_of(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      bucket_of[i] = {static_cast<int>(std::abs(table.nx[i]) / chord),
                      static_cast<int>(std::abs(table.ny[i]) / chord)};
      buckets[bucket_of[i]].push_back(i);
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
      std::size_t root = uf.find(i);
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy) {
          const auto it = buckets.find({bucket_of[i].first + dx, bucket_of[i].second + dy});
          if (it == buckets.end()) continue;
          const auto& members = it->second;
          // Pairs already joined need no geometric test.
          for (auto j = std::upper_bound(members.begin(), members.end(), i); j != members.end(); ++j)
            if (uf.find(*j) != root && table.parallel(i, *j, cos_angle) &&
                table.close(i, *j, params.merge_dist)) {
              uf.unite(i, *j);
              root = uf.find(i);
            }
        }
    }
    const std::vector<std::size_t> label = uf.labels();
    const std::size_t n_clusters =
        label.empty() ? 0 : *std::max_element(label.begin(), label.end()) + 1;
    merged = n_clusters < items.size();

    // Vote-weighted representative; normals sign-aligned to the heaviest member.
    std::vector<std::size_t> heaviest(n_clusters, static_cast<std::size_t>(-1));
    for (std::size_t i = 0; i < items.size(); ++i) {
      std::size_t& h = heaviest[label[i]];
      if (h == static_cast<std::size_t>(-1) || items[i].hyp.weight > items[h].hyp.weight) h = i;
    }
    std::vector<Vec3> nsum(n_clusters, Vec3::Zero()), asum(n_clusters, Vec3::Zero());
    std::vector<double> dsum(n_clusters, 0.0), wsum(n_clusters, 0.0);
    std::vector<std::size_t> support(n_clusters, 0);
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::size_t c = label[i];
      const PlaneHypothesis& h = items[i].hyp;
      const double s = h.plane.normal.dot(items[heaviest[c]].hyp.plane.normal) < 0.0 ? -1.0 : 1.0;
      nsum[c] += h.weight * s * h.plane.normal;
      dsum[c] += h.weight * s * h.plane.offset;
      asum[c] += h.weight * h.anchor;
      wsum[c] += h.weight;
      support[c] += items[i].support;
    }
    std::vector<Item> next(n_clusters);
    for (std::size_t c = 0; c < n_clusters; ++c) {
      if (support[c] == 1) {
        next[c] = items[heaviest[c]];
        continue;
      }
      const double norm = nsum[c].norm();
      next[c].hyp.plane = Plane{nsum[c] / norm, dsum[c] / norm};
      next[c].hyp.anchor = asum[c] / wsum[c];
      next[c].hyp.weight = wsum[c];
      next[c].support = support[c];
    }
    for (auto& it : item_of_hyp) it = label[it];
    items = std::move(next);
  }

  PlaneClustering out;
  std::vector<std::size_t> renumber(items.size(), PlaneClustering::kDropped);
  for (std::size_t c = 0; c < items.size(); ++c) {
    if (items[c].support < params.min_support) continue;
    renumber[c] = out.planes.size();
    out.planes.push_back(items[c].hyp.plane.canonical());
    out.anchors.push_back(items[c].hyp.anchor);
    out.weights.push_back(items[c].hyp.weight);
    out.support.push_back(items[c].support);
  }
  out.hypothesis_cluster.reserve(hyps.size());
  for (std::size_t it : item_of_hyp) out.hypothesis_cluster.push_back(renumber[it]);
  return out;
}

PlaneClustering cluster_candidates(const std::vector<OppCandidate>& candidates,
                                   const ClusterParams& params) {
  return cluster_hypotheses(hypotheses_of(candidates), params);
}

std::vector<std::vector<std::size_t>> PlaneGraph::adjacency() const {
  std::vector<std::vector<std::size_t>> adj(vertices.size());
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

PlaneGraph build_graph(const PlaneClustering& clusters, const std::vector<OppCandidate>& candidates,
                       const DetectionParams& params) {
  PlaneGraph g;
  g.vertices = clusters.planes;
  const double s = std::sin(params.delta_n);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (2 * i + 1 >= clusters.hypothesis_cluster.size()) break;
    const std::size_t a = clusters.hypothesis_cluster[2 * i];
    const std::size_t b = clusters.hypothesis_cluster[2 * i + 1];
    if (a == PlaneClustering::kDropped || b == PlaneClustering::kDropped || a == b) continue;
    if (std::abs(g.vertices[a].normal.dot(g.vertices[b].normal)) < s)
      g.edges.insert(a < b ? Edge{a, b} : Edge{b, a});
  }
  return g;
}

std::vector<CornerTriangle> enumerate_triangles(const PlaneGraph& g) {
  const auto adj = g.adjacency();
  std::vector<CornerTriangle> out;
  std::vector<std::size_t> common;
  for (const auto& [u, v] : g.edges) {
    common.clear();
    std::set_intersection(adj[u].begin(), adj[u].end(), adj[v].begin(), adj[v].end(),
                          std::back_inserter(common));
    for (std::size_t w : common)
      if (w > v) out.push_back({{u, v, w}});
  }
  // std::set iterates edges lexicographically, so out is already ordered.
  return out;
}

void sort_bundle_distances(std::vector<ParallelBundle>& bundles) {
  for (auto& b : bundles) {
    std::vector<std::size_t> order(b.distances.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return b.distances[x] < b.distances[y]; });
    std::vector<double> d;
    std::vector<std::size_t> m;
    for (std::size_t k : order) {
      d.push_back(b.distances[k]);
      if (k < b.members.size()) m.push_back(b.members[k]);
    }
    b.distances = std::move(d);
    if (m.size() == b.members.size()) b.members = std::move(m);
  }
}

std::vector<ParallelBundle> reduce_parallel(const PlaneGraph& g, double parallel_angle) {
  const std::size_t n = g.vertices.size();
  const double cos_angle = std::cos(parallel_angle);
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(g.vertices[i].normal.dot(g.vertices[j].normal)) > cos_angle) uf.unite(i, j);
  const std::vector<std::size_t> label = uf.labels();
  const std::size_t n_bundles = n == 0 ? 0 : *std::max_element(label.begin(), label.end()) + 1;

  std::vector<std::vector<std::size_t>> groups(n_bundles);
  for (std::size_t i = 0; i < n; ++i) groups[label[i]].push_back(i);

  std::vector<ParallelBundle> bundles(n_bundles);
  for (std::size_t b = 0; b < n_bundles; ++b) {
    const auto& members = groups[b];
    for (std::size_t x = 0; x < members.size(); ++x)
      for (std::size_t y = x + 1; y < members.size(); ++y)
        if (g.has_edge(members[x], members[y]))
          throw Error(ErrorCode::ConflictingStructure,
                      "planes " + std::to_string(members[x]) + " and " + std::to_string(members[y]) +
                          " are both parallel and orthogonal");
    const Vec3 ref = g.vertices[members.front()].normal;
    Vec3 sum = Vec3::Zero();
    for (std::size_t m : members) {
      const Vec3& nm = g.vertices[m].normal;
      sum += nm.dot(ref) < 0.0 ? Vec3(-nm) : nm;
    }
    ParallelBundle& bundle = bundles[b];
    bundle.normal = canonical_direction(sum.normalized());
    for (std::size_t m : members) {
      const Plane& p = g.vertices[m];
      const double s = p.normal.dot(bundle.normal) < 0.0 ? -1.0 : 1.0;
      bundle.distances.push_back(s * p.offset);
      bundle.members.push_back(m);
    }
  }
  for (const auto& [a, b] : g.edges) {
    bundles[label[a]].neighbors.insert(label[b]);
    bundles[label[b]].neighbors.insert(label[a]);
  }
  sort_bundle_distances(bundles);
  return bundles;
}

std::set<Edge> bundle_edges(const std::vector<ParallelBundle>& bundles) {
  std::set<Edge> out;
  for (std::size_t k = 0; k < bundles.size(); ++k)
    for (std::size_t j : bundles[k].neighbors)
      if (k != j) out.insert(k < j ? Edge{k, j} : Edge{j, k});
  return out;
}

std::vector<Line3D> graph_lines(const PlaneGraph& g) {
  std::vector<Line3D> out;
  out.reserve(g.edges.size());
  for (const auto& [a, b] : g.edges) out.push_back(intersect_two_planes(g.vertices[a], g.vertices[b]));
  return out;
}

}  // namespace orthoplanes
