#include "fraudkit/graph_features.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "fraudkit/errors.hpp"
#include "fraudkit/parallel.hpp"
#include "fraudkit/vecops.hpp"

namespace fraudkit {

namespace {

constexpr std::string_view kLog1pPrefix = "log1p_";

bool is_base_descriptor(std::string_view name) {
    for (const char* base : kBaseDescriptors)
        if (name == base) return true;
    return false;
}

// Returns the base descriptor a column is derived from, or empty if the name
// is not a valid descriptor column.
std::string_view base_of(std::string_view name) {
    if (is_base_descriptor(name)) return name;
    if (name.substr(0, kLog1pPrefix.size()) == kLog1pPrefix) {
        std::string_view base = name.substr(kLog1pPrefix.size());
        if (is_base_descriptor(base) && DescriptorSpec::log1p_eligible(base)) return base;
    }
    return {};
}

}  // namespace

bool DescriptorSpec::log1p_eligible(std::string_view base_name) {
    return base_name == "in_degree" || base_name == "out_degree" ||
           base_name == "total_degree" || base_name == "nbr_deg_mean" ||
           base_name == "nbr_deg_max" || base_name == "two_hop_reach";
}

DescriptorSpec DescriptorSpec::all() {
    DescriptorSpec spec;
    for (const char* base : kBaseDescriptors) spec.names.emplace_back(base);
    for (const char* base : kBaseDescriptors)
        if (log1p_eligible(base)) spec.names.push_back(std::string(kLog1pPrefix) + base);
    return spec;
}

void DescriptorSpec::validate() const {
    if (names.empty()) throw ContractError("descriptor spec: names must be non-empty");
    std::unordered_set<std::string_view> seen;
    for (const std::string& name : names) {
        if (base_of(name).empty())
            throw ContractError("descriptor spec: unknown descriptor \"" + name + "\"");
        if (!seen.insert(name).second)
            throw ContractError("descriptor spec: duplicate descriptor \"" + name + "\"");
    }
    if (!(pagerank_damping > 0.0 && pagerank_damping < 1.0))
        throw ContractError("descriptor spec: pagerank_damping must lie in (0,1)");
    if (!(pagerank_tol > 0.0) || !(hits_tol > 0.0))
        throw ContractError("descriptor spec: tolerances must be positive");
    if (pagerank_max_iter < 1 || hits_max_iter < 1)
        throw ContractError("descriptor spec: max_iter must be >= 1");
}

DegreeTriple degrees(const SnapshotView& view, NodeIndex v) {
    DegreeTriple d;
    d.in = static_cast<std::uint32_t>(view.in_degree(v));
    d.out = static_cast<std::uint32_t>(view.out_degree(v));
    d.total = static_cast<std::uint32_t>(view.undirected().degree(v));
    return d;
}

DegreeTriple degrees(const UndirectedView& view, NodeIndex v) {
    return degrees(view.snapshot(), v);
}

PageRankResult pagerank(const SnapshotView& view, const DescriptorSpec& spec) {
    const std::size_t n = view.node_count();
    if (n == 0) throw ContractError("pagerank requires a non-empty view");

    // Per-position in-neighbor slices and out-degree reciprocals, resolved
    // once so the iteration loop is pure array walking.
    std::vector<std::span<const AdjEntry>> in_slices(n);
    std::vector<double> inv_out(n, 0.0);
    std::vector<std::uint8_t> dangling(n, 0);
    const TemporalGraph& g = view.base();
    for (std::size_t p = 0; p < n; ++p) {
        NodeIndex v = view.node_at(p);
        in_slices[p] = view.in_neighbors(v);
        std::size_t od = view.out_degree(v);
        if (od == 0)
            dangling[p] = 1;
        else
            inv_out[p] = 1.0 / static_cast<double>(od);
    }

    const double d = spec.pagerank_damping;
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> r(n, inv_n), next(n, 0.0);

    PageRankResult result;
    for (int iter = 0; iter < spec.pagerank_max_iter; ++iter) {
        double dangling_mass = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            if (dangling[p]) dangling_mass += r[p];
        const double base = (1.0 - d) * inv_n + d * dangling_mass * inv_n;

        for (std::size_t p = 0; p < n; ++p) {
            double acc = 0.0;
            for (const AdjEntry& e : in_slices[p]) {
                std::uint32_t q = g.time_position(e.nbr);
                acc += r[q] * inv_out[q];
            }
            next[p] = acc;
        }
        vecops::axpb(next, next, d, base);

        double delta = vecops::l1_distance(next, r);
        std::swap(next, r);
        result.iterations = iter + 1;
        if (delta < spec.pagerank_tol) {
            result.converged = true;
            break;
        }
    }
    result.scores = std::move(r);
    return result;
}

HitsResult hits(const SnapshotView& view, const DescriptorSpec& spec) {
    const std::size_t n = view.node_count();
    if (n == 0) throw ContractError("hits requires a non-empty view");

    HitsResult result;
    if (view.edge_count() == 0) {
        // Degenerate rule: no edges means no mutual reinforcement at all.
        result.hub.assign(n, 0.0);
        result.authority.assign(n, 0.0);
        result.converged = true;
        return result;
    }

    std::vector<std::span<const AdjEntry>> in_slices(n), out_slices(n);
    const TemporalGraph& g = view.base();
    for (std::size_t p = 0; p < n; ++p) {
        NodeIndex v = view.node_at(p);
        in_slices[p] = view.in_neighbors(v);
        out_slices[p] = view.out_neighbors(v);
    }

    std::vector<double> h(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> a(n, 0.0), ha(n, 0.0), aa(n, 0.0);

    for (int iter = 0; iter < spec.hits_max_iter; ++iter) {
        for (std::size_t p = 0; p < n; ++p) {
            double acc = 0.0;
            for (const AdjEntry& e : in_slices[p]) acc += h[g.time_position(e.nbr)];
            aa[p] = acc;
        }
        double na = std::sqrt(vecops::sum_squares(aa));
        if (na > 0.0) vecops::scale(aa, 1.0 / na);

        for (std::size_t p = 0; p < n; ++p) {
            double acc = 0.0;
            for (const AdjEntry& e : out_slices[p]) acc += aa[g.time_position(e.nbr)];
            ha[p] = acc;
        }
        double nh = std::sqrt(vecops::sum_squares(ha));
        if (nh > 0.0) vecops::scale(ha, 1.0 / nh);

        double delta = std::max(vecops::l1_distance(aa, a), vecops::l1_distance(ha, h));
        std::swap(aa, a);
        std::swap(ha, h);
        result.iterations = iter + 1;
        if (delta < spec.hits_tol) {
            result.converged = true;
            break;
        }
    }
    result.hub = std::move(h);
    result.authority = std::move(a);
    return result;
}

std::vector<std::uint32_t> kcore(const UndirectedView& view) {
    const std::size_t n = view.node_count();
    std::vector<std::uint32_t> deg(n);
    std::uint32_t max_deg = 0;
    for (std::size_t p = 0; p < n; ++p) {
        deg[p] = static_cast<std::uint32_t>(view.degree(view.node_at(p)));
        max_deg = std::max(max_deg, deg[p]);
    }

    // Batagelj-Zaversnik bucket peeling: process positions by ascending
    // current degree; each processed vertex's degree is its core number.
    std::vector<std::uint32_t> bin(max_deg + 1, 0);
    for (std::uint32_t d : deg) bin[d]++;
    std::uint32_t start = 0;
    for (std::uint32_t d = 0; d <= max_deg; ++d) {
        std::uint32_t count = bin[d];
        bin[d] = start;
        start += count;
    }
    std::vector<std::uint32_t> vert(n), pos(n);
    for (std::size_t p = 0; p < n; ++p) {
        pos[p] = bin[deg[p]];
        vert[pos[p]] = static_cast<std::uint32_t>(p);
        bin[deg[p]]++;
    }
    for (std::uint32_t d = max_deg; d > 0; --d) bin[d] = bin[d - 1];
    if (!bin.empty()) bin[0] = 0;

    const TemporalGraph& g = view.snapshot().base();
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t v = vert[i];
        for (const AdjEntry& e : view.neighbors(view.node_at(v))) {
            std::uint32_t u = g.time_position(e.nbr);
            if (deg[u] > deg[v]) {
                std::uint32_t du = deg[u], pu = pos[u];
                std::uint32_t pw = bin[du], w = vert[pw];
                if (u != w) {
                    pos[u] = pw;
                    vert[pu] = w;
                    pos[w] = pu;
                    vert[pw] = u;
                }
                bin[du]++;
                deg[u]--;
            }
        }
    }
    return deg;
}

NeighborDegreeStats neighbor_degree_stats(const UndirectedView& view, NodeIndex v) {
    NeighborDegreeStats stats;
    auto nbrs = view.neighbors(v);
    if (nbrs.empty()) return stats;
    double sum = 0.0;
    for (const AdjEntry& e : nbrs) {
        auto d = static_cast<std::uint32_t>(view.degree(e.nbr));
        sum += static_cast<double>(d);
        stats.max = std::max(stats.max, d);
    }
    stats.mean = sum / static_cast<double>(nbrs.size());
    return stats;
}

void TwoHopWorkspace::reset(std::size_t n) {
    stamp_.assign(n, 0);
    epoch_ = 0;
}

std::uint32_t two_hop_reach(const UndirectedView& view, NodeIndex v, TwoHopWorkspace& ws) {
    const TemporalGraph& g = view.snapshot().base();
    if (ws.stamp_.size() != g.node_count()) ws.reset(g.node_count());
    const std::uint32_t mark = ++ws.epoch_;

    std::uint32_t count = 0;
    ws.stamp_[v] = mark;  // exclude self
    auto nbrs = view.neighbors(v);
    for (const AdjEntry& e : nbrs) {
        if (ws.stamp_[e.nbr] != mark) {
            ws.stamp_[e.nbr] = mark;
            ++count;
        }
    }
    for (const AdjEntry& e : nbrs) {
        for (const AdjEntry& e2 : view.neighbors(e.nbr)) {
            if (ws.stamp_[e2.nbr] != mark) {
                ws.stamp_[e2.nbr] = mark;
                ++count;
            }
        }
    }
    return count;
}

std::uint32_t two_hop_reach(const UndirectedView& view, NodeIndex v) {
    TwoHopWorkspace ws;
    return two_hop_reach(view, v, ws);
}

FeatureMatrix apply_log1p(const FeatureMatrix& m, const DescriptorSpec&) {
    std::vector<std::size_t> targets;  // source column index per appended variant
    std::vector<std::string> variants;
    for (std::size_t c = 0; c < m.cols(); ++c) {
        const std::string& name = m.columns[c];
        if (!is_base_descriptor(name) || !DescriptorSpec::log1p_eligible(name)) continue;
        std::string variant = std::string(kLog1pPrefix) + name;
        if (m.column_index(variant)) continue;  // already present
        targets.push_back(c);
        variants.push_back(std::move(variant));
    }
    for (std::size_t k = 0; k < targets.size(); ++k) {
        for (std::size_t r = 0; r < m.rows(); ++r) {
            if (m.at(r, targets[k]) < 0.0)
                throw DataError("apply_log1p: negative value in column \"" +
                                m.columns[targets[k]] + "\" at row " + std::to_string(r) +
                                " (node " + std::to_string(m.row_ids[r]) + ")");
        }
    }

    FeatureMatrix out;
    out.row_ids = m.row_ids;
    out.row_times = m.row_times;
    out.provenance = m.provenance;
    out.columns = m.columns;
    out.columns.insert(out.columns.end(), variants.begin(), variants.end());
    out.values.resize(out.rows() * out.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) out.at(r, c) = m.at(r, c);
        for (std::size_t k = 0; k < targets.size(); ++k)
            out.at(r, m.cols() + k) = std::log1p(m.at(r, targets[k]));
    }
    return out;
}

namespace {

// One snapshot's worth of extraction: fills the matrix rows of the nodes in
// time-order positions [target_begin, target_end), all of which share the
// snapshot's horizon timestep under causal extraction (or span every node
// under full extraction).
void fill_rows(const SnapshotView& view, std::size_t target_begin,
               std::size_t target_end, const DescriptorSpec& spec, FeatureMatrix& out) {
    const UndirectedView und = view.undirected();

    bool need_pagerank = false, need_hits = false, need_kcore = false;
    for (const std::string& name : spec.names) {
        std::string_view base = base_of(name);
        need_pagerank |= base == "pagerank";
        need_hits |= base == "hub" || base == "authority";
        need_kcore |= base == "kcore";
    }

    PageRankResult pr;
    if (need_pagerank) pr = pagerank(view, spec);
    HitsResult ht;
    if (need_hits) ht = hits(view, spec);
    std::vector<std::uint32_t> cores;
    if (need_kcore) cores = kcore(und);

    TwoHopWorkspace ws;
    const std::size_t ncols = spec.names.size();
    for (std::size_t p = target_begin; p < target_end; ++p) {
        NodeIndex v = view.node_at(p);

        DegreeTriple deg;
        bool have_deg = false;
        NeighborDegreeStats nstats;
        bool have_nstats = false;
        double two_hop = 0.0;
        bool have_two_hop = false;

        double* row = out.values.data() + p * ncols;
        for (std::size_t c = 0; c < ncols; ++c) {
            std::string_view name = spec.names[c];
            bool log_it = name.substr(0, kLog1pPrefix.size()) == kLog1pPrefix;
            std::string_view base = base_of(name);

            double value = 0.0;
            if (base == "in_degree" || base == "out_degree" || base == "total_degree") {
                if (!have_deg) {
                    deg = degrees(view, v);
                    have_deg = true;
                }
                value = base == "in_degree"    ? deg.in
                        : base == "out_degree" ? deg.out
                                               : deg.total;
            } else if (base == "pagerank") {
                value = pr.scores[p];
            } else if (base == "hub") {
                value = ht.hub[p];
            } else if (base == "authority") {
                value = ht.authority[p];
            } else if (base == "kcore") {
                value = cores[p];
            } else if (base == "nbr_deg_mean" || base == "nbr_deg_max") {
                if (!have_nstats) {
                    nstats = neighbor_degree_stats(und, v);
                    have_nstats = true;
                }
                value = base == "nbr_deg_mean" ? nstats.mean
                                               : static_cast<double>(nstats.max);
            } else if (base == "two_hop_reach") {
                if (!have_two_hop) {
                    two_hop = two_hop_reach(und, v, ws);
                    have_two_hop = true;
                }
                value = two_hop;
            }
            row[c] = log_it ? std::log1p(value) : value;
        }
    }
}

FeatureMatrix make_skeleton(const TemporalGraph& g, const DescriptorSpec& spec,
                            std::string provenance) {
    FeatureMatrix m;
    m.provenance = std::move(provenance);
    m.columns = spec.names;
    const std::size_t n = g.node_count();
    m.row_ids.resize(n);
    m.row_times.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        NodeIndex v = g.time_order()[p];
        m.row_ids[p] = g.id_of(v);
        m.row_times[p] = g.timestep_of(v);
    }
    m.values.assign(n * spec.names.size(), 0.0);
    return m;
}

}  // namespace

FeatureMatrix extract_causal(const TemporalGraph& g, const DescriptorSpec& spec,
                             int threads) {
    if (!g.finalized()) throw ContractError("extract_causal requires a finalized graph");
    spec.validate();
    FeatureMatrix m = make_skeleton(g, spec, "causal");
    if (g.node_count() == 0) return m;

    // One task per timestep that actually has nodes. Task t fills the
    // contiguous row range of the nodes born at t — disjoint slices, so the
    // merge is free and thread count cannot affect the result.
    std::span<const TimeStep> steps = g.timesteps_present();
    parallel_for(steps.size(), threads, [&](std::size_t i) {
        TimeStep t = steps[i];
        SnapshotView view = g.snapshot_at(t);
        std::size_t begin = g.nodes_at_or_before(t - 1);  // t >= 1 always
        std::size_t end = g.nodes_at_or_before(t);
        fill_rows(view, begin, end, spec, m);
    });
    return m;
}

FeatureMatrix extract_full(const TemporalGraph& g, const DescriptorSpec& spec) {
    if (!g.finalized()) throw ContractError("extract_full requires a finalized graph");
    spec.validate();
    FeatureMatrix m = make_skeleton(g, spec, "full");
    if (g.node_count() == 0) return m;
    fill_rows(g.full_view(), 0, g.node_count(), spec, m);
    return m;
}

LeakageAuditReport leakage_audit(const FeatureMatrix& causal, const FeatureMatrix& full,
                                 double tol) {
    if (tol < 0.0) throw ContractError("leakage_audit: tolerance must be >= 0");
    if (causal.columns != full.columns) {
        std::string msg = "leakage_audit: column mismatch; causal has [";
        for (std::size_t c = 0; c < causal.columns.size(); ++c)
            msg += (c ? "," : "") + causal.columns[c];
        msg += "] vs full [";
        for (std::size_t c = 0; c < full.columns.size(); ++c)
            msg += (c ? "," : "") + full.columns[c];
        msg += "]";
        throw ContractError(msg);
    }
    if (causal.row_ids != full.row_ids || causal.row_times != full.row_times)
        throw ContractError("leakage_audit: matrices cover different rows");

    LeakageAuditReport report;
    report.tolerance = tol;
    const std::size_t rows = causal.rows(), cols = causal.cols();

    report.columns.resize(cols);
    for (std::size_t c = 0; c < cols; ++c) report.columns[c].column = causal.columns[c];

    std::vector<std::size_t> col_diffs(cols, 0);
    std::vector<double> col_abs(cols, 0.0);

    // Rows arrive sorted by (timestep, id), so per-timestep groups are runs.
    std::size_t r = 0;
    while (r < rows) {
        std::size_t group_end = r;
        TimeStep t = causal.row_times[r];
        while (group_end < rows && causal.row_times[group_end] == t) ++group_end;

        LeakageAuditReport::TimestepStats ts;
        ts.t = t;
        ts.rows = group_end - r;
        std::size_t differing_rows = 0;
        double group_abs = 0.0;
        for (std::size_t i = r; i < group_end; ++i) {
            bool row_differs = false;
            for (std::size_t c = 0; c < cols; ++c) {
                double diff = std::fabs(causal.at(i, c) - full.at(i, c));
                col_abs[c] += diff;
                group_abs += diff;
                if (diff > tol) {
                    col_diffs[c]++;
                    row_differs = true;
                }
            }
            if (row_differs) ++differing_rows;
        }
        ts.differing_row_fraction =
            ts.rows == 0 ? 0.0 : static_cast<double>(differing_rows) / static_cast<double>(ts.rows);
        ts.mean_abs_diff =
            ts.rows == 0 || cols == 0 ? 0.0 : group_abs / static_cast<double>(ts.rows * cols);
        report.timesteps.push_back(ts);
        r = group_end;
    }

    for (std::size_t c = 0; c < cols; ++c) {
        report.columns[c].differing_fraction =
            rows == 0 ? 0.0 : static_cast<double>(col_diffs[c]) / static_cast<double>(rows);
        report.columns[c].mean_abs_diff = rows == 0 ? 0.0 : col_abs[c] / static_cast<double>(rows);
    }
    return report;
}

}  // namespace fraudkit
