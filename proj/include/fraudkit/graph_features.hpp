#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fraudkit/feature_matrix.hpp"
#include "fraudkit/temporal_graph.hpp"

namespace fraudkit {

// Base structural descriptors, in canonical column order.
inline constexpr const char* kBaseDescriptors[] = {
    "in_degree", "out_degree", "total_degree", "pagerank",     "hub",
    "authority", "kcore",      "nbr_deg_mean", "nbr_deg_max",  "two_hop_reach",
};

// Which descriptors to compute and with what iteration constants. `names`
// may mix base descriptors and log1p_<name> variants of the degree- and
// reach-based ones; the order given here is the persisted column order.
struct DescriptorSpec {
    std::vector<std::string> names;
    double pagerank_damping = 0.85;
    double pagerank_tol = 1e-9;
    int pagerank_max_iter = 200;
    double hits_tol = 1e-9;
    int hits_max_iter = 200;

    // All ten base descriptors followed by every log1p variant.
    static DescriptorSpec all();

    // True for degree- and reach-based descriptors (the log1p-eligible set).
    static bool log1p_eligible(std::string_view base_name);

    void validate() const;  // ContractError on empty/duplicate/unknown names
};

struct DegreeTriple {
    std::uint32_t in = 0;
    std::uint32_t out = 0;
    std::uint32_t total = 0;  // distinct undirected neighbors
};
DegreeTriple degrees(const SnapshotView& view, NodeIndex v);
DegreeTriple degrees(const UndirectedView& view, NodeIndex v);

struct PageRankResult {
    std::vector<double> scores;  // indexed by snapshot position
    bool converged = false;
    int iterations = 0;
};
// Damped power iteration on the directed snapshot; dangling mass is spread
// uniformly. Stops when the L1 change drops below spec.pagerank_tol.
PageRankResult pagerank(const SnapshotView& view, const DescriptorSpec& spec);

struct HitsResult {
    std::vector<double> hub;        // indexed by snapshot position
    std::vector<double> authority;  // indexed by snapshot position
    bool converged = false;
    int iterations = 0;
};
// Alternating power iteration, L2-normalized each half-step. An edgeless
// snapshot yields all-zero vectors (converged immediately).
HitsResult hits(const SnapshotView& view, const DescriptorSpec& spec);

// Exact core numbers via bucket peeling; indexed by snapshot position.
std::vector<std::uint32_t> kcore(const UndirectedView& view);

struct NeighborDegreeStats {
    double mean = 0.0;
    std::uint32_t max = 0;
};
NeighborDegreeStats neighbor_degree_stats(const UndirectedView& view, NodeIndex v);

// Reusable visit-stamp scratch so repeated queries on one view don't rescan.
class TwoHopWorkspace {
public:
    void reset(std::size_t n);

private:
    friend std::uint32_t two_hop_reach(const UndirectedView&, NodeIndex, TwoHopWorkspace&);
    std::vector<std::uint32_t> stamp_;
    std::uint32_t epoch_ = 0;
};

// |{u != v : undirected distance(v,u) <= 2}|.
std::uint32_t two_hop_reach(const UndirectedView& view, NodeIndex v);
std::uint32_t two_hop_reach(const UndirectedView& view, NodeIndex v, TwoHopWorkspace& ws);

// Appends log1p_<name> for every log1p-eligible column present in `m` that
// does not already have a variant. DataError (naming row and column) if a
// targeted column holds a negative value.
FeatureMatrix apply_log1p(const FeatureMatrix& m, const DescriptorSpec& spec);

// One row per node; the row for a node with timestep t is computed on
// snapshot_at(t), so no future edge can influence it. Rows are ordered by
// (timestep, node id). Distinct timesteps may be processed concurrently;
// output is identical for any thread count.
FeatureMatrix extract_causal(const TemporalGraph& g, const DescriptorSpec& spec,
                             int threads = 1);

// The leaky baseline: every descriptor computed once on the full graph.
FeatureMatrix extract_full(const TemporalGraph& g, const DescriptorSpec& spec);

struct LeakageAuditReport {
    double tolerance = 0.0;
    struct ColumnStats {
        std::string column;
        double differing_fraction = 0.0;  // rows with |causal-full| > tol / rows
        double mean_abs_diff = 0.0;
    };
    struct TimestepStats {
        TimeStep t = 0;
        std::size_t rows = 0;
        double differing_row_fraction = 0.0;  // rows with any differing column
        double mean_abs_diff = 0.0;           // over all cells of the timestep
    };
    std::vector<ColumnStats> columns;
    std::vector<TimestepStats> timesteps;  // ascending t
};

// Quantifies look-ahead leakage by differencing the causal and full-graph
// matrices. Matrices must agree on row ids, row order, and columns.
LeakageAuditReport leakage_audit(const FeatureMatrix& causal, const FeatureMatrix& full,
                                 double tol);

}  // namespace fraudkit
