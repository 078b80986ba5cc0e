#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "fraudkit/errors.hpp"
#include "fraudkit/graph_features.hpp"
#include "fraudkit/rng.hpp"
#include "fraudkit/temporal_graph.hpp"
#include "test_support.hpp"

using namespace fraudkit;

namespace {

// One-timestep builder for the hand-checked topology examples.
TemporalGraph static_graph(const std::vector<NodeId>& nodes,
                           const std::vector<std::pair<NodeId, NodeId>>& edges) {
    TemporalGraph g;
    for (NodeId id : nodes) g.add_node(id, 1);
    for (auto [s, d] : edges) g.add_edge(s, d);
    g.finalize();
    return g;
}

double cell(const FeatureMatrix& m, NodeId id, const std::string& column) {
    auto c = m.column_index(column);
    REQUIRE(c.has_value());
    for (std::size_t r = 0; r < m.rows(); ++r)
        if (m.row_ids[r] == id) return m.at(r, *c);
    FAIL("node ", id, " not found");
    return 0.0;
}

}  // namespace

TEST_CASE("descriptor spec validation") {
    auto spec = DescriptorSpec::all();
    CHECK(spec.names.size() == 16);  // 10 base + 6 log1p variants
    spec.validate();

    DescriptorSpec bad;
    CHECK_THROWS_AS(bad.validate(), ContractError);  // empty
    bad.names = {"pagerank", "no_such_thing"};
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("no_such_thing"), ContractError);
    bad.names = {"pagerank", "pagerank"};
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad.names = {"log1p_kcore"};  // kcore is not log1p-eligible
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad.names = {"pagerank"};
    bad.pagerank_damping = 1.0;
    CHECK_THROWS_AS(bad.validate(), ContractError);

    CHECK(DescriptorSpec::log1p_eligible("in_degree"));
    CHECK(DescriptorSpec::log1p_eligible("two_hop_reach"));
    CHECK_FALSE(DescriptorSpec::log1p_eligible("kcore"));
    CHECK_FALSE(DescriptorSpec::log1p_eligible("pagerank"));
}

TEST_CASE("degree example: two edges into one sink") {
    auto g = static_graph({1, 2, 3}, {{1, 2}, {3, 2}});
    auto snap = g.full_view();
    auto d = degrees(snap, g.index_of(2));
    CHECK(d.in == 2);
    CHECK(d.out == 0);
    CHECK(d.total == 2);
    auto d1 = degrees(snap, g.index_of(1));
    CHECK(d1.in == 0);
    CHECK(d1.out == 1);
    CHECK(d1.total == 1);
}

TEST_CASE("pagerank on a directed 4-cycle is uniform 0.25") {
    auto g = static_graph({1, 2, 3, 4}, {{1, 2}, {2, 3}, {3, 4}, {4, 1}});
    auto pr = pagerank(g.full_view(), DescriptorSpec::all());
    CHECK(pr.converged);
    for (double s : pr.scores) CHECK_NEAR(s, 0.25, 1e-12);
}

TEST_CASE("pagerank on a single node is 1.0 and sums to one in general") {
    auto g1 = static_graph({42}, {});
    auto pr1 = pagerank(g1.full_view(), DescriptorSpec::all());
    CHECK(pr1.scores.size() == 1);
    CHECK(pr1.scores[0] == 1.0);

    Rng rng(404);
    for (int trial = 0; trial < 10; ++trial) {
        auto raw = support::random_raw_graph(rng, 50, 4);
        auto g = support::build_graph(raw, rng);
        auto pr = pagerank(g.full_view(), DescriptorSpec::all());
        double total = 0.0;
        for (double s : pr.scores) total += s;
        CHECK_NEAR(total, 1.0, 1e-9);
    }
}

TEST_CASE("hits example: two hubs pointing at one authority") {
    auto g = static_graph({7, 8, 9}, {{7, 9}, {8, 9}});
    auto h = hits(g.full_view(), DescriptorSpec::all());
    CHECK(h.converged);
    auto snap = g.full_view();
    CHECK_NEAR(h.authority[snap.position(g.index_of(9))], 1.0, 1e-9);
    CHECK_NEAR(h.hub[snap.position(g.index_of(7))], 1.0 / std::sqrt(2.0), 1e-9);
    CHECK_NEAR(h.hub[snap.position(g.index_of(8))], 1.0 / std::sqrt(2.0), 1e-9);
    CHECK_NEAR(h.hub[snap.position(g.index_of(9))], 0.0, 1e-12);
}

TEST_CASE("kcore examples: triangle and path") {
    auto tri = static_graph({1, 2, 3}, {{1, 2}, {2, 3}, {3, 1}});
    auto cores = kcore(tri.full_view().undirected());
    for (auto c : cores) CHECK(c == 2);

    auto path = static_graph({1, 2, 3, 4}, {{1, 2}, {2, 3}, {3, 4}});
    for (auto c : kcore(path.full_view().undirected())) CHECK(c == 1);
}

TEST_CASE("neighbor degree stats on a star") {
    auto star = static_graph({10, 1, 2, 3, 4}, {{10, 1}, {10, 2}, {10, 3}, {10, 4}});
    auto und = star.full_view().undirected();
    auto center = neighbor_degree_stats(und, star.index_of(10));
    CHECK(center.mean == 1.0);  // every leaf has undirected degree 1
    CHECK(center.max == 1);
    auto leaf = neighbor_degree_stats(und, star.index_of(1));
    CHECK(leaf.mean == 4.0);
    CHECK(leaf.max == 4);

    auto lonely = static_graph({5}, {});
    auto stats = neighbor_degree_stats(lonely.full_view().undirected(),
                                       lonely.index_of(5));
    CHECK(stats.mean == 0.0);
    CHECK(stats.max == 0);
}

TEST_CASE("two-hop reach on a path counts both hops and excludes self") {
    auto path = static_graph({1, 2, 3, 4}, {{1, 2}, {2, 3}, {3, 4}});
    auto und = path.full_view().undirected();
    CHECK(two_hop_reach(und, path.index_of(1)) == 2);  // 2 and 3
    CHECK(two_hop_reach(und, path.index_of(2)) == 3);  // everyone else
}

TEST_CASE("descriptors match brute-force oracles on random graphs") {
    Rng rng(161803);
    const auto spec = DescriptorSpec::all();
    for (int trial = 0; trial < 40; ++trial) {
        auto raw = support::random_raw_graph(rng, 45, 5);
        auto g = support::build_graph(raw, rng);
        auto m = extract_causal(g, spec, 1);
        REQUIRE(m.rows() == raw.nodes.size());

        for (const auto& node : raw.nodes) {
            auto deg = oracle::degrees(raw, node.t).at(node.id);
            CHECK(cell(m, node.id, "in_degree") == static_cast<double>(deg.in));
            CHECK(cell(m, node.id, "out_degree") == static_cast<double>(deg.out));
            CHECK(cell(m, node.id, "total_degree") == static_cast<double>(deg.und));

            CHECK_NEAR(cell(m, node.id, "pagerank"),
                       oracle::pagerank(raw, node.t, spec.pagerank_damping,
                                        spec.pagerank_tol, spec.pagerank_max_iter)
                           .at(node.id),
                       1e-8);
            auto ho = oracle::hits(raw, node.t, spec.hits_tol, spec.hits_max_iter);
            CHECK_NEAR(cell(m, node.id, "hub"), ho.hub.at(node.id), 1e-6);
            CHECK_NEAR(cell(m, node.id, "authority"), ho.authority.at(node.id), 1e-6);

            CHECK(cell(m, node.id, "kcore") ==
                  static_cast<double>(oracle::kcore(raw, node.t).at(node.id)));
            auto ns = oracle::nbr_stats(raw, node.t).at(node.id);
            CHECK(cell(m, node.id, "nbr_deg_mean") == ns.mean);
            CHECK(cell(m, node.id, "nbr_deg_max") == ns.max);
            CHECK(cell(m, node.id, "two_hop_reach") ==
                  static_cast<double>(oracle::two_hop(raw, node.t).at(node.id)));
        }
    }
}

TEST_CASE("edgeless graph: structural columns zero, pagerank uniform") {
    TemporalGraph g;
    g.add_node(1, 1);
    g.add_node(2, 1);
    g.add_node(3, 2);
    g.finalize();
    auto m = extract_full(g, DescriptorSpec::all());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (const auto& col :
             {"in_degree", "out_degree", "total_degree", "hub", "authority", "kcore",
              "nbr_deg_mean", "nbr_deg_max", "two_hop_reach"})
            CHECK(m.at(r, *m.column_index(col)) == 0.0);
        // Probability mass still sums to one with no edges to move it.
        CHECK_NEAR(m.at(r, *m.column_index("pagerank")), 1.0 / 3.0, 1e-12);
    }
}

TEST_CASE("rows are ordered by (timestep, node id) and computed at own timestep") {
    TemporalGraph g;
    g.add_node(50, 2);
    g.add_node(8, 1);
    g.add_node(9, 2);
    g.add_edge(8, 50);  // etime 2: invisible to node 8's own row
    g.finalize();
    auto m = extract_causal(g, DescriptorSpec::all(), 1);
    CHECK(m.row_ids == std::vector<NodeId>{8, 9, 50});
    CHECK(m.row_times == std::vector<TimeStep>{1, 2, 2});
    CHECK(m.provenance == "causal");
    CHECK(cell(m, 8, "out_degree") == 0.0);   // at t=1 the edge is future
    CHECK(cell(m, 50, "in_degree") == 1.0);   // at t=2 it exists

    auto full = extract_full(g, DescriptorSpec::all());
    CHECK(full.provenance == "full");
    CHECK(cell(full, 8, "out_degree") == 1.0);  // full graph sees everything
}

TEST_CASE("extract_causal equals extract_full on a single-timestep graph") {
    Rng rng(42424);
    auto raw = support::random_raw_graph(rng, 40, 1);
    auto g = support::build_graph(raw, rng);
    auto causal = extract_causal(g, DescriptorSpec::all(), 1);
    auto full = extract_full(g, DescriptorSpec::all());
    REQUIRE(causal.values.size() == full.values.size());
    for (std::size_t i = 0; i < causal.values.size(); ++i)
        CHECK(std::bit_cast<std::uint64_t>(causal.values[i]) ==
              std::bit_cast<std::uint64_t>(full.values[i]));
}

TEST_CASE("future edge injection never changes rows at or before the horizon") {
    Rng rng(271828);
    for (int trial = 0; trial < 30; ++trial) {
        auto raw = support::random_raw_graph(rng, 30, 4);
        TimeStep horizon = 1 + static_cast<TimeStep>(rng.uniform_index(3));

        auto spec = DescriptorSpec::all();
        auto before = extract_causal(support::build_graph(raw, rng), spec, 1);

        // Inject brand-new future nodes plus edges whose etime exceeds the
        // horizon (any edge touching a future node qualifies).
        auto injected = raw;
        std::size_t extra = 1 + rng.uniform_index(5);
        for (std::size_t i = 0; i < extra; ++i)
            injected.nodes.push_back(
                {900000 + i, horizon + 1 + static_cast<TimeStep>(rng.uniform_index(2))});
        for (std::size_t i = 0; i < extra * 2; ++i) {
            const auto& a = injected.nodes[rng.uniform_index(injected.nodes.size())];
            std::uint64_t future = 900000 + rng.uniform_index(extra);
            if (a.id == future) continue;
            if (rng.bernoulli(0.5))
                injected.edges.push_back({a.id, future});
            else
                injected.edges.push_back({future, a.id});
        }
        auto after = extract_causal(support::build_graph(injected, rng), spec, 1);

        std::map<NodeId, std::vector<double>> after_rows;
        for (std::size_t r = 0; r < after.rows(); ++r) {
            auto row = after.row(r);
            after_rows[after.row_ids[r]] = {row.begin(), row.end()};
        }
        for (std::size_t r = 0; r < before.rows(); ++r) {
            if (before.row_times[r] > horizon) continue;
            const auto& now = after_rows.at(before.row_ids[r]);
            auto then = before.row(r);
            for (std::size_t c = 0; c < then.size(); ++c)
                CHECK(std::bit_cast<std::uint64_t>(then[c]) ==
                      std::bit_cast<std::uint64_t>(now[c]));
        }
    }
}

TEST_CASE("extraction output is identical for any thread count") {
    Rng rng(99999);
    auto raw = support::random_raw_graph(rng, 50, 6);
    auto g = support::build_graph(raw, rng);
    auto spec = DescriptorSpec::all();
    auto one = extract_causal(g, spec, 1);
    auto four = extract_causal(g, spec, 4);
    REQUIRE(one.values.size() == four.values.size());
    for (std::size_t i = 0; i < one.values.size(); ++i)
        CHECK(std::bit_cast<std::uint64_t>(one.values[i]) ==
              std::bit_cast<std::uint64_t>(four.values[i]));
    CHECK(one.row_ids == four.row_ids);
}

TEST_CASE("spec names select and order the emitted columns") {
    auto g = static_graph({1, 2}, {{1, 2}});
    DescriptorSpec spec;
    spec.names = {"kcore", "log1p_in_degree", "pagerank"};
    auto m = extract_full(g, spec);
    CHECK(m.columns == std::vector<std::string>{"kcore", "log1p_in_degree", "pagerank"});
    CHECK(cell(m, 2, "log1p_in_degree") == std::log1p(1.0));
}

TEST_CASE("apply_log1p appends variants and rejects negatives") {
    FeatureMatrix m;
    m.columns = {"in_degree", "kcore"};
    m.row_ids = {1, 2};
    m.row_times = {1, 1};
    m.values = {3.0, 2.0, 0.0, 1.0};
    auto out = apply_log1p(m, DescriptorSpec::all());
    CHECK(out.columns ==
          std::vector<std::string>{"in_degree", "kcore", "log1p_in_degree"});
    CHECK(out.at(0, 2) == std::log1p(3.0));
    CHECK(out.at(1, 2) == std::log1p(0.0));

    m.values[0] = -0.5;
    CHECK_THROWS_WITH_AS(apply_log1p(m, DescriptorSpec::all()),
                         doctest::Contains("in_degree"), DataError);
}

TEST_CASE("leakage audit: single-timestep graphs show zero difference") {
    Rng rng(13);
    auto raw = support::random_raw_graph(rng, 40, 1);
    auto g = support::build_graph(raw, rng);
    auto causal = extract_causal(g, DescriptorSpec::all(), 1);
    auto full = extract_full(g, DescriptorSpec::all());
    auto report = leakage_audit(causal, full, 1e-9);
    for (const auto& col : report.columns) {
        CHECK(col.differing_fraction == 0.0);
        CHECK(col.mean_abs_diff == 0.0);
    }
    REQUIRE(report.timesteps.size() == 1);
    CHECK(report.timesteps[0].differing_row_fraction == 0.0);
}

TEST_CASE("leakage audit: constructed future edges flag exactly the touched rows") {
    // Ten nodes at t=1, five nodes at t=2; each t=2 node links to a distinct
    // t=1 node. Those five t=1 rows differ in degree columns between causal
    // and full; the other five are identical. Final-timestep rows never
    // differ (their snapshot IS the full graph).
    TemporalGraph g;
    for (NodeId id = 1; id <= 10; ++id) g.add_node(id, 1);
    for (NodeId id = 11; id <= 15; ++id) g.add_node(id, 2);
    for (NodeId id = 11; id <= 15; ++id) g.add_edge(id, id - 10);
    g.finalize();

    DescriptorSpec spec;
    spec.names = {"in_degree", "out_degree"};
    auto causal = extract_causal(g, spec, 1);
    auto full = extract_full(g, spec);
    auto report = leakage_audit(causal, full, 1e-9);

    REQUIRE(report.columns.size() == 2);
    CHECK(report.columns[0].column == "in_degree");
    CHECK_NEAR(report.columns[0].differing_fraction, 5.0 / 15.0, 1e-12);
    CHECK(report.columns[1].differing_fraction == 0.0);  // out-degrees unchanged
    CHECK_NEAR(report.columns[0].mean_abs_diff, 5.0 / 15.0, 1e-12);

    REQUIRE(report.timesteps.size() == 2);
    CHECK(report.timesteps[0].t == 1);
    CHECK_NEAR(report.timesteps[0].differing_row_fraction, 0.5, 1e-12);
    CHECK(report.timesteps[1].t == 2);
    CHECK(report.timesteps[1].differing_row_fraction == 0.0);
}

TEST_CASE("leakage audit rejects mismatched inputs") {
    auto g = static_graph({1, 2}, {{1, 2}});
    auto a = extract_full(g, DescriptorSpec::all());
    auto b = a;
    b.columns[0] = "renamed";
    CHECK_THROWS_AS(leakage_audit(a, b, 1e-9), ContractError);
    auto c = a;
    c.row_ids.pop_back();
    c.row_times.pop_back();
    c.values.resize(c.row_ids.size() * c.columns.size());
    CHECK_THROWS_AS(leakage_audit(a, c, 1e-9), ContractError);
    CHECK_THROWS_AS(leakage_audit(a, a, -1.0), ContractError);
}

TEST_CASE("two-hop workspace reuse matches the one-shot overload") {
    Rng rng(606);
    auto raw = support::random_raw_graph(rng, 40, 3);
    auto g = support::build_graph(raw, rng);
    auto und = g.full_view().undirected();
    TwoHopWorkspace ws;
    ws.reset(g.node_count());
    for (NodeIndex v : g.full_view().nodes())
        CHECK(two_hop_reach(und, v, ws) == two_hop_reach(und, v));
}
