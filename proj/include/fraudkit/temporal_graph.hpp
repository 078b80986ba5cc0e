#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace fraudkit {

using NodeId = std::uint64_t;     // external transaction identifier
using NodeIndex = std::uint32_t;  // dense internal index (insertion order)
using TimeStep = std::uint32_t;   // 1-based discrete timestep

// Adjacency record: neighbor plus the edge's timestep, defined as the max of
// the two endpoint timesteps (a transaction edge exists once both sides do).
struct AdjEntry {
    NodeIndex nbr;
    TimeStep etime;
};

class SnapshotView;
class UndirectedView;

// Directed transaction graph with per-node timesteps. Build once with
// add_node/add_edge, call finalize(), then take snapshot views. Views are
// index filters over shared immutable storage (no copies), so any number can
// be used concurrently from different threads.
//
// Self-loops and duplicate directed edges are dropped at insertion and
// counted. Adjacency lists are kept sorted by (etime, neighbor external id):
// a snapshot's neighbor list is then a prefix, and iteration order is a
// function of the graph content alone, never of file row order.
class TemporalGraph {
public:
    void add_node(NodeId id, TimeStep timestep);
    void add_edge(NodeId src, NodeId dst);
    void finalize();

    bool finalized() const { return finalized_; }
    std::size_t node_count() const { return ids_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    std::size_t self_loops_dropped() const { return self_loops_; }
    std::size_t duplicate_edges_dropped() const { return duplicate_edges_; }
    TimeStep max_timestep() const { return max_timestep_; }  // 0 when empty

    bool has_node(NodeId id) const { return id_to_index_.count(id) != 0; }
    NodeIndex index_of(NodeId id) const;  // ContractError when unknown
    NodeId id_of(NodeIndex v) const { return ids_[v]; }
    TimeStep timestep_of(NodeIndex v) const { return timesteps_[v]; }

    // View of everything with timestep <= t. Requires finalize(); t >= 1.
    SnapshotView snapshot_at(TimeStep t) const;
    SnapshotView full_view() const;

    // All nodes ordered by (timestep, external id). Every snapshot's node set
    // is a prefix of this order; feature extraction emits rows in it.
    std::span<const NodeIndex> time_order() const { return time_order_; }
    std::uint32_t time_position(NodeIndex v) const { return time_pos_[v]; }
    std::span<const TimeStep> timesteps_present() const { return distinct_timesteps_; }
    std::size_t nodes_at_or_before(TimeStep t) const;
    std::size_t edges_at_or_before(TimeStep t) const;

private:
    friend class SnapshotView;
    friend class UndirectedView;

    struct Csr {
        std::vector<std::uint64_t> offsets;  // node_count + 1
        std::vector<AdjEntry> entries;       // per node, sorted by (etime, nbr ext id)
        std::span<const AdjEntry> slice(NodeIndex v) const {
            return {entries.data() + offsets[v],
                    static_cast<std::size_t>(offsets[v + 1] - offsets[v])};
        }
    };

    struct Edge {
        NodeIndex src, dst;
        TimeStep etime;
    };

    void require_finalized(const char* op) const;
    void require_mutable(const char* op) const;
    Csr build_csr(const std::vector<std::pair<NodeIndex, AdjEntry>>& half_edges) const;

    // Longest prefix of a sorted adjacency list with etime <= horizon.
    static std::span<const AdjEntry> clip(std::span<const AdjEntry> all, TimeStep horizon);

    std::vector<NodeId> ids_;
    std::vector<TimeStep> timesteps_;
    std::unordered_map<NodeId, NodeIndex> id_to_index_;
    std::vector<Edge> edges_;
    std::unordered_set<std::uint64_t> edge_keys_;
    std::size_t self_loops_ = 0;
    std::size_t duplicate_edges_ = 0;
    TimeStep max_timestep_ = 0;
    bool finalized_ = false;

    Csr out_, in_, und_;
    std::vector<NodeIndex> time_order_;
    std::vector<std::uint32_t> time_pos_;
    std::vector<TimeStep> distinct_timesteps_;
    std::vector<std::uint64_t> nodes_le_;  // nodes with timestep <= t, index t
    std::vector<std::uint64_t> edges_le_;  // edges with etime <= t, index t
};

// Immutable filter G<=t: the nodes with timestep <= t and the edges with
// etime <= t. Positions (0..node_count) index the snapshot's node list, which
// is a prefix of the base graph's time order.
class SnapshotView {
public:
    const TemporalGraph& base() const { return *graph_; }
    TimeStep horizon() const { return horizon_; }
    std::size_t node_count() const { return node_count_; }
    std::size_t edge_count() const { return edge_count_; }

    std::span<const NodeIndex> nodes() const {
        return {graph_->time_order_.data(), node_count_};
    }
    bool contains(NodeIndex v) const { return graph_->time_pos_[v] < node_count_; }
    NodeIndex node_at(std::size_t position) const;
    std::uint32_t position(NodeIndex v) const;  // ContractError if absent

    std::span<const AdjEntry> out_neighbors(NodeIndex v) const;
    std::span<const AdjEntry> in_neighbors(NodeIndex v) const;
    std::size_t out_degree(NodeIndex v) const { return out_neighbors(v).size(); }
    std::size_t in_degree(NodeIndex v) const { return in_neighbors(v).size(); }

    UndirectedView undirected() const;

private:
    friend class TemporalGraph;
    friend class UndirectedView;
    SnapshotView(const TemporalGraph& g, TimeStep horizon, std::size_t node_count,
                 std::size_t edge_count)
        : graph_(&g), horizon_(horizon), node_count_(node_count), edge_count_(edge_count) {}

    void require_member(NodeIndex v, const char* op) const;

    const TemporalGraph* graph_;
    TimeStep horizon_;
    std::size_t node_count_;
    std::size_t edge_count_;
};

// Undirected projection of a snapshot: neighbors are the union of in- and
// out-neighbors, each counted once. Same node set and positions.
class UndirectedView {
public:
    explicit UndirectedView(const SnapshotView& snap) : snap_(snap) {}

    const SnapshotView& snapshot() const { return snap_; }
    std::size_t node_count() const { return snap_.node_count(); }
    std::span<const NodeIndex> nodes() const { return snap_.nodes(); }
    bool contains(NodeIndex v) const { return snap_.contains(v); }
    NodeIndex node_at(std::size_t position) const { return snap_.node_at(position); }
    std::uint32_t position(NodeIndex v) const { return snap_.position(v); }

    std::span<const AdjEntry> neighbors(NodeIndex v) const;
    std::size_t degree(NodeIndex v) const { return neighbors(v).size(); }

private:
    SnapshotView snap_;
};

inline UndirectedView undirected_projection(const SnapshotView& snap) {
    return UndirectedView(snap);
}

}  // namespace fraudkit
