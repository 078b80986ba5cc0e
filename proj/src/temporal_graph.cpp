#include "fraudkit/temporal_graph.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "fraudkit/errors.hpp"

namespace fraudkit {

namespace {

std::uint64_t edge_key(NodeIndex src, NodeIndex dst) {
    return (static_cast<std::uint64_t>(src) << 32) | dst;
}

}  // namespace

void TemporalGraph::require_finalized(const char* op) const {
    if (!finalized_)
        throw ContractError(std::string(op) + " requires a finalized graph");
}

void TemporalGraph::require_mutable(const char* op) const {
    if (finalized_)
        throw ContractError(std::string(op) + " called after finalize()");
}

void TemporalGraph::add_node(NodeId id, TimeStep timestep) {
    require_mutable("add_node");
    if (timestep == 0)
        throw DataError("node " + std::to_string(id) + " has timestep 0; timesteps are 1-based");
    if (id_to_index_.count(id))
        throw DataError("duplicate node id " + std::to_string(id));
    if (ids_.size() >= std::numeric_limits<NodeIndex>::max())
        throw DataError("node count exceeds the 2^32-1 supported maximum");
    id_to_index_.emplace(id, static_cast<NodeIndex>(ids_.size()));
    ids_.push_back(id);
    timesteps_.push_back(timestep);
    max_timestep_ = std::max(max_timestep_, timestep);
}

void TemporalGraph::add_edge(NodeId src, NodeId dst) {
    require_mutable("add_edge");
    auto s = id_to_index_.find(src);
    if (s == id_to_index_.end())
        throw DataError("edge endpoint " + std::to_string(src) + " is not a registered node");
    auto d = id_to_index_.find(dst);
    if (d == id_to_index_.end())
        throw DataError("edge endpoint " + std::to_string(dst) + " is not a registered node");
    if (s->second == d->second) {
        ++self_loops_;
        return;
    }
    if (!edge_keys_.insert(edge_key(s->second, d->second)).second) {
        ++duplicate_edges_;
        return;
    }
    TimeStep etime = std::max(timesteps_[s->second], timesteps_[d->second]);
    edges_.push_back({s->second, d->second, etime});
}

NodeIndex TemporalGraph::index_of(NodeId id) const {
    auto it = id_to_index_.find(id);
    if (it == id_to_index_.end())
        throw ContractError("unknown node id " + std::to_string(id));
    return it->second;
}

TemporalGraph::Csr TemporalGraph::build_csr(
    const std::vector<std::pair<NodeIndex, AdjEntry>>& half_edges) const {
    const std::size_t n = ids_.size();
    Csr csr;
    csr.offsets.assign(n + 1, 0);
    for (const auto& [v, entry] : half_edges) csr.offsets[v + 1]++;
    for (std::size_t v = 0; v < n; ++v) csr.offsets[v + 1] += csr.offsets[v];
    csr.entries.resize(half_edges.size());
    std::vector<std::uint64_t> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
    for (const auto& [v, entry] : half_edges) csr.entries[cursor[v]++] = entry;
    for (std::size_t v = 0; v < n; ++v) {
        auto begin = csr.entries.begin() + static_cast<std::ptrdiff_t>(csr.offsets[v]);
        auto end = csr.entries.begin() + static_cast<std::ptrdiff_t>(csr.offsets[v + 1]);
        std::sort(begin, end, [this](const AdjEntry& a, const AdjEntry& b) {
            if (a.etime != b.etime) return a.etime < b.etime;
            return ids_[a.nbr] < ids_[b.nbr];
        });
    }
    return csr;
}

void TemporalGraph::finalize() {
    if (finalized_) return;
    const std::size_t n = ids_.size();

    time_order_.resize(n);
    std::iota(time_order_.begin(), time_order_.end(), NodeIndex{0});
    std::sort(time_order_.begin(), time_order_.end(), [this](NodeIndex a, NodeIndex b) {
        if (timesteps_[a] != timesteps_[b]) return timesteps_[a] < timesteps_[b];
        return ids_[a] < ids_[b];
    });
    time_pos_.resize(n);
    for (std::size_t p = 0; p < n; ++p) time_pos_[time_order_[p]] = static_cast<std::uint32_t>(p);

    for (std::size_t p = 0; p < n; ++p) {
        TimeStep t = timesteps_[time_order_[p]];
        if (distinct_timesteps_.empty() || distinct_timesteps_.back() != t)
            distinct_timesteps_.push_back(t);
    }

    nodes_le_.assign(static_cast<std::size_t>(max_timestep_) + 1, 0);
    for (TimeStep t : timesteps_) nodes_le_[t]++;
    for (std::size_t t = 1; t < nodes_le_.size(); ++t) nodes_le_[t] += nodes_le_[t - 1];

    edges_le_.assign(static_cast<std::size_t>(max_timestep_) + 1, 0);
    for (const Edge& e : edges_) edges_le_[e.etime]++;
    for (std::size_t t = 1; t < edges_le_.size(); ++t) edges_le_[t] += edges_le_[t - 1];

    std::vector<std::pair<NodeIndex, AdjEntry>> half;
    half.reserve(edges_.size());
    for (const Edge& e : edges_) half.push_back({e.src, {e.dst, e.etime}});
    out_ = build_csr(half);

    half.clear();
    for (const Edge& e : edges_) half.push_back({e.dst, {e.src, e.etime}});
    in_ = build_csr(half);

    // Undirected projection: u<->v pairs collapse to one neighbor entry.
    // Mutual directed edges produce duplicates with equal etime; dedup after
    // the (etime, external id) sort.
    half.clear();
    half.reserve(edges_.size() * 2);
    for (const Edge& e : edges_) {
        half.push_back({e.src, {e.dst, e.etime}});
        half.push_back({e.dst, {e.src, e.etime}});
    }
    und_ = build_csr(half);
    std::vector<AdjEntry> deduped;
    deduped.reserve(und_.entries.size());
    std::vector<std::uint64_t> new_offsets(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v) {
        std::size_t start = deduped.size();
        NodeIndex prev = std::numeric_limits<NodeIndex>::max();
        for (std::uint64_t i = und_.offsets[v]; i < und_.offsets[v + 1]; ++i) {
            const AdjEntry& e = und_.entries[i];
            if (e.nbr == prev) continue;
            deduped.push_back(e);
            prev = e.nbr;
        }
        new_offsets[v + 1] = new_offsets[v] + (deduped.size() - start);
    }
    und_.entries = std::move(deduped);
    und_.offsets = std::move(new_offsets);

    edge_keys_.clear();
    finalized_ = true;
}

std::span<const AdjEntry> TemporalGraph::clip(std::span<const AdjEntry> all,
                                              TimeStep horizon) {
    auto end = std::upper_bound(all.begin(), all.end(), horizon,
                                [](TimeStep h, const AdjEntry& e) { return h < e.etime; });
    return all.first(static_cast<std::size_t>(end - all.begin()));
}

std::size_t TemporalGraph::nodes_at_or_before(TimeStep t) const {
    require_finalized("nodes_at_or_before");
    if (nodes_le_.empty()) return 0;
    return nodes_le_[std::min<std::size_t>(t, nodes_le_.size() - 1)];
}

std::size_t TemporalGraph::edges_at_or_before(TimeStep t) const {
    require_finalized("edges_at_or_before");
    if (edges_le_.empty()) return 0;
    return edges_le_[std::min<std::size_t>(t, edges_le_.size() - 1)];
}

SnapshotView TemporalGraph::snapshot_at(TimeStep t) const {
    require_finalized("snapshot_at");
    if (t == 0) throw ContractError("snapshot horizon must be >= 1");
    return SnapshotView(*this, t, nodes_at_or_before(t), edges_at_or_before(t));
}

SnapshotView TemporalGraph::full_view() const {
    require_finalized("full_view");
    TimeStep t = max_timestep_ == 0 ? 1 : max_timestep_;
    return snapshot_at(t);
}

NodeIndex SnapshotView::node_at(std::size_t position) const {
    if (position >= node_count_)
        throw ContractError("snapshot position " + std::to_string(position) +
                            " out of range (node count " + std::to_string(node_count_) + ")");
    return graph_->time_order_[position];
}

void SnapshotView::require_member(NodeIndex v, const char* op) const {
    if (v >= graph_->node_count())
        throw ContractError(std::string(op) + ": node index out of range");
    if (!contains(v))
        throw ContractError(std::string(op) + ": node " + std::to_string(graph_->ids_[v]) +
                            " (timestep " + std::to_string(graph_->timesteps_[v]) +
                            ") is not in the snapshot at t=" + std::to_string(horizon_));
}

std::uint32_t SnapshotView::position(NodeIndex v) const {
    require_member(v, "position");
    return graph_->time_pos_[v];
}

std::span<const AdjEntry> SnapshotView::out_neighbors(NodeIndex v) const {
    require_member(v, "out_neighbors");
    return TemporalGraph::clip(graph_->out_.slice(v), horizon_);
}

std::span<const AdjEntry> SnapshotView::in_neighbors(NodeIndex v) const {
    require_member(v, "in_neighbors");
    return TemporalGraph::clip(graph_->in_.slice(v), horizon_);
}

UndirectedView SnapshotView::undirected() const { return UndirectedView(*this); }

std::span<const AdjEntry> UndirectedView::neighbors(NodeIndex v) const {
    snap_.require_member(v, "neighbors");
    return TemporalGraph::clip(snap_.graph_->und_.slice(v), snap_.horizon_);
}

}  // namespace fraudkit
