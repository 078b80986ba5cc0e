#pragma once

// Shared fixtures for the test suites: scratch directories, random graph and
// metric-instance generators, and synthetic datasets on disk.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fraudkit/csv.hpp"
#include "fraudkit/feature_matrix.hpp"
#include "fraudkit/rng.hpp"
#include "fraudkit/temporal_graph.hpp"
#include "oracles.hpp"

#define CHECK_NEAR(a, b, tol) CHECK(std::abs((a) - (b)) <= (tol))

namespace support {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "fraudkit_test_XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (mkdtemp(buf.data()) == nullptr)
            throw std::runtime_error("mkdtemp failed for " + tmpl);
        path_ = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

inline std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Random graph with non-contiguous shuffled ids so external-id order never
// coincides with insertion or index order by accident.
inline oracle::RawGraph random_raw_graph(fraudkit::Rng& rng, std::size_t max_nodes = 60,
                                         std::uint32_t max_t = 6) {
    oracle::RawGraph g;
    const std::size_t n = 1 + rng.uniform_index(max_nodes);
    std::vector<std::uint64_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = 101 + 7 * i;
    rng.shuffle(std::span(ids));
    for (std::size_t i = 0; i < n; ++i)
        g.nodes.push_back({ids[i], 1 + static_cast<std::uint32_t>(rng.uniform_index(max_t))});

    const double p = rng.uniform_real() * 0.12;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && rng.uniform_real() < p)
                g.edges.push_back({g.nodes[i].id, g.nodes[j].id});
    return g;
}

// Assembles a TemporalGraph from the raw description in randomized insertion
// order, optionally re-adding duplicate edges and self loops (which must be
// dropped without changing any result).
inline fraudkit::TemporalGraph build_graph(const oracle::RawGraph& raw, fraudkit::Rng& rng,
                                           bool inject_noise = true) {
    auto nodes = raw.nodes;
    auto edges = raw.edges;
    rng.shuffle(std::span(nodes));
    rng.shuffle(std::span(edges));

    fraudkit::TemporalGraph g;
    for (const auto& node : nodes) g.add_node(node.id, node.t);
    for (const auto& e : edges) g.add_edge(e.src, e.dst);
    if (inject_noise) {
        for (int i = 0; i < 3 && !edges.empty(); ++i) {
            const auto& e = edges[rng.uniform_index(edges.size())];
            g.add_edge(e.src, e.dst);  // duplicate
        }
        for (int i = 0; i < 2 && !nodes.empty(); ++i) {
            const auto& node = nodes[rng.uniform_index(nodes.size())];
            g.add_edge(node.id, node.id);  // self loop
        }
    }
    g.finalize();
    return g;
}

struct MetricInstance {
    std::vector<double> scores;
    std::vector<int> labels;
};

// Scores are either continuous or drawn from a tiny value set (heavy ties);
// both classes always present.
inline MetricInstance random_metric_instance(fraudkit::Rng& rng, std::size_t max_n = 200) {
    MetricInstance inst;
    const std::size_t n = 2 + rng.uniform_index(max_n - 1);
    const bool coarse = rng.bernoulli(0.5);
    bool has_pos = false, has_neg = false;
    while (!(has_pos && has_neg)) {
        inst.scores.clear();
        inst.labels.clear();
        has_pos = has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            inst.scores.push_back(coarse ? static_cast<double>(rng.uniform_index(8)) / 8.0
                                         : rng.uniform_real());
            int y = rng.bernoulli(0.3) ? 1 : 0;
            inst.labels.push_back(y);
            (y == 1 ? has_pos : has_neg) = true;
        }
    }
    return inst;
}

// A feature matrix with one perfectly separating column plus pure noise,
// useful for forest sanity checks.
struct SeparableData {
    fraudkit::FeatureMatrix matrix;
    std::vector<int> labels;
};

inline SeparableData make_separable(std::size_t n, std::size_t n_noise, std::uint64_t seed,
                                    double margin = 2.0) {
    fraudkit::Rng rng(seed);
    SeparableData data;
    data.matrix.columns.push_back("signal");
    for (std::size_t c = 0; c < n_noise; ++c)
        data.matrix.columns.push_back("noise_" + std::to_string(c));
    data.matrix.provenance = "transaction";
    for (std::size_t i = 0; i < n; ++i) {
        int y = rng.bernoulli(0.3) ? 1 : 0;
        data.labels.push_back(y);
        data.matrix.row_ids.push_back(1000 + i);
        data.matrix.row_times.push_back(1);
        data.matrix.values.push_back(y == 1 ? margin + rng.uniform_real()
                                            : -margin - rng.uniform_real());
        for (std::size_t c = 0; c < n_noise; ++c)
            data.matrix.values.push_back(rng.normal() );
    }
    // Both classes are needed downstream; with n >= 16 the chance of a
    // single-class draw is negligible, but make it impossible anyway.
    data.labels[0] = 1;
    data.matrix.at(0, 0) = margin + 0.5;
    data.labels[n - 1] = 0;
    data.matrix.at(n - 1, 0) = -margin - 0.5;
    return data;
}

// On-disk synthetic transaction dataset in the ingestion format: an
// informative `amt` column, a noise `fee` column, ~15% unknown labels and a
// random edge set. Timesteps run 1..T with `per_t` nodes each.
struct DiskDataset {
    fs::path features, edges, classes;
};

inline DiskDataset write_synthetic_dataset(const fs::path& dir, std::uint64_t seed,
                                           std::size_t per_t = 30, std::uint32_t T = 6) {
    fraudkit::Rng rng(seed);
    DiskDataset paths{dir / "features.csv", dir / "edges.csv", dir / "classes.csv"};
    fs::create_directories(dir);

    struct Node {
        std::uint64_t id;
        std::uint32_t t;
        bool illicit;
        bool known;
    };
    std::vector<Node> nodes;
    std::uint64_t next_id = 5000;
    for (std::uint32_t t = 1; t <= T; ++t)
        for (std::size_t i = 0; i < per_t; ++i)
            nodes.push_back({next_id++, t, rng.bernoulli(0.25), !rng.bernoulli(0.15)});
    // Guarantee both classes among known labels in every timestep.
    for (std::uint32_t t = 1; t <= T; ++t) {
        auto base = static_cast<std::size_t>(t - 1) * per_t;
        nodes[base] = {nodes[base].id, t, true, true};
        nodes[base + 1] = {nodes[base + 1].id, t, false, true};
    }

    std::ofstream f(paths.features);
    f << "node_id,time_step,amt,fee\n";
    for (const auto& node : nodes) {
        double amt = (node.illicit ? 3.0 : 0.0) + rng.normal();
        f << node.id << ',' << node.t << ',' << fraudkit::csvio::format_double(amt) << ','
          << fraudkit::csvio::format_double(rng.normal()) << '\n';
    }
    f.close();

    std::ofstream e(paths.edges);
    e << "src_id,dst_id\n";
    for (std::size_t i = 0; i < nodes.size() * 2; ++i) {
        const auto& a = nodes[rng.uniform_index(nodes.size())];
        const auto& b = nodes[rng.uniform_index(nodes.size())];
        if (a.id != b.id) e << a.id << ',' << b.id << '\n';
    }
    e.close();

    std::ofstream c(paths.classes);
    c << "node_id,class\n";
    for (const auto& node : nodes) {
        if (!node.known)
            c << node.id << ",unknown\n";
        else
            c << node.id << ',' << (node.illicit ? '1' : '2') << '\n';
    }
    c.close();
    return paths;
}

}  // namespace support
