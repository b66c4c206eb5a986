#include "graphik/datagen.hpp"
#include "graphik/graph.hpp"
#include "graphik/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

using namespace graphik;

namespace {

Dataset small_dataset(int dof, std::size_t rows, std::uint64_t seed) {
    return generate_dataset(FamilySpec{dof, 1, static_cast<int>(rows), seed})[0];
}

double circular_gap(double a, double b) {
    const double d = std::fmod(std::abs(a - b), 360.0);
    return std::min(d, 360.0 - d);
}

}  // namespace

TEST_CASE("variant tokens") {
    CHECK(Variant::parse("rg-n").tag() == "RG-N");
    CHECK(Variant::parse("DE-F").tag() == "DE-F");
    CHECK(Variant::parse("de-f").connectivity == Connectivity::full);
    CHECK_THROWS_AS(Variant::parse("xx-n"), std::invalid_argument);
    CHECK_THROWS_AS(Variant::parse("rg-q"), std::invalid_argument);
    CHECK_THROWS_AS(Variant::parse("rg"), std::invalid_argument);
}

TEST_CASE("edge counts and canonical order") {
    for (int dof : {2, 3, 5, 6}) {
        const auto n = edge_topology(dof, Connectivity::neighbourly);
        const auto f = edge_topology(dof, Connectivity::full);
        CHECK(n.size() == static_cast<std::size_t>(2 * (dof - 1)));
        CHECK(f.size() == static_cast<std::size_t>(dof * (dof - 1)));
        for (const auto& [s, r] : n) CHECK(std::abs(s - r) == 1);
        std::set<std::pair<int, int>> unique(f.begin(), f.end());
        CHECK(unique.size() == f.size());
        for (std::size_t k = 0; k < f.size(); ++k) {
            CHECK(f[k].first != f[k].second);
            if (k > 0) CHECK(std::pair(f[k - 1].second, f[k - 1].first) < std::pair(f[k].second, f[k].first));
        }
    }
}

TEST_CASE("dof 5 graphs have 8 or 20 edges") {
    const auto d = small_dataset(5, 3, 1);
    const auto s = d.sample(0);
    CHECK(build_graph(s, Variant::parse("de-n")).edges.size() == 8);
    CHECK(build_graph(s, Variant::parse("de-f")).edges.size() == 20);
}

TEST_CASE("node features broadcast the pose") {
    const auto d = small_dataset(6, 5, 2);
    auto rng = CounterRng::substream(3, "test-ref", 0);
    for (std::size_t r = 0; r < d.rows(); ++r) {
        const auto s = d.sample(r);
        const auto de = build_graph(s, Variant::parse("de-f"));
        CHECK(de.node_dim == 7);
        CHECK(de.nodes.size() == 6 * 7);
        const auto rg = build_graph(s, Variant::parse("rg-n"), rng);
        CHECK(rg.node_dim == 8);
        for (const auto* g : {&de, &rg}) {
            for (int i = 0; i < g->dof; ++i) {
                const auto v = g->node(i);
                for (int c = 0; c < 6; ++c) CHECK(v[c] == s.pose.as_array()[c]);
                CHECK(v[6] == s.config.joints[i].theta_off);
            }
        }
        for (int i = 0; i < 6; ++i) {
            CHECK(rg.targets[i] == doctest::Approx(s.theta_deg[i] * std::numbers::pi / 180.0));
            const double ref = rg.node(i)[7];
            CHECK(ref >= 0.0);
            CHECK(ref < 360.0);
            CHECK(circular_gap(ref, s.theta_deg[i]) <= 10.0 + 1e-12);
        }
    }
}

TEST_CASE("reference angles wrap around zero") {
    auto rng = CounterRng::substream(4, "test-ref", 0);
    int below_zero = 0;
    for (int k = 0; k < 2000; ++k) {
        const double theta[] = {5.0};
        const double ref = draw_reference_angles(theta, rng)[0];
        const bool in_range = (ref >= 355.0 && ref < 360.0) || (ref >= 0.0 && ref < 15.0);
        REQUIRE(in_range);
        below_zero += ref >= 355.0;
    }
    // A quarter of the window lies across the wrap.
    CHECK(below_zero > 400);
    CHECK(below_zero < 600);
}

TEST_CASE("dataset reference angles are a fixed function of seed, config and row") {
    const double theta[] = {10, 20, 30};
    const auto a = dataset_reference_angles(9, 2, 17, theta);
    CHECK(a == dataset_reference_angles(9, 2, 17, theta));
    CHECK(a != dataset_reference_angles(9, 2, 18, theta));
    CHECK(a != dataset_reference_angles(9, 3, 17, theta));
    CHECK(a != dataset_reference_angles(10, 2, 17, theta));
}

TEST_CASE("RG graphs need reference angles") {
    const auto s = small_dataset(3, 1, 1).sample(0);
    CHECK_THROWS_AS(build_graph(s, Variant::parse("rg-n")), std::invalid_argument);
}

TEST_CASE("edge features follow the chain") {
    const double lengths[] = {50, 30, 18, 11, 6, 5};
    const auto c = make_config(6, lengths);
    // Adjacent: the later joint's twist and translational length.
    for (int i = 0; i + 1 < 6; ++i) {
        const auto f = edge_features(c, i, i + 1);
        CHECK(f[0] == c.joints[i + 1].alpha);
        CHECK(f[1] == lengths[i + 1]);
        CHECK(edge_features(c, i + 1, i) == f);
    }
    // Non-adjacent: no twist, length of everything in between.
    CHECK(edge_features(c, 0, 2) == std::array<double, 2>{0.0, 30.0 + 18.0});
    CHECK(edge_features(c, 5, 1) == std::array<double, 2>{0.0, 18.0 + 11.0 + 6.0 + 5.0});
    CHECK_THROWS_AS(edge_features(c, 2, 2), std::invalid_argument);
}

TEST_CASE("normalization") {
    const auto d = small_dataset(3, 400, 5);
    std::vector<JointGraph> graphs;
    for (std::size_t r = 0; r < d.rows(); ++r) {
        const auto ref = dataset_reference_angles(5, 0, r, d.theta_row(r));
        graphs.push_back(build_graph(d.sample(r), Variant::parse("rg-f"), ref));
    }
    const auto stats = FeatureStats::fit(graphs);

    SUBCASE("constant channels are clamped and map to zero") {
        Matrix nodes = Matrix::Random(50, 7);
        nodes.col(3).setConstant(4.0);
        Matrix edges = Matrix::Random(20, 2);
        const auto s = FeatureStats::fit(nodes, edges);
        CHECK(s.node_clamped[3]);
        CHECK(s.node_scale[3] == 1.0);
        CHECK_FALSE(s.node_clamped[0]);
        normalize_rows(nodes, edges, s);
        CHECK(nodes.col(3).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("round trip") {
        for (const auto& g : graphs) {
            const auto back = denormalize_features(normalize_features(g, stats), stats);
            for (std::size_t k = 0; k < g.nodes.size(); ++k) REQUIRE(std::abs(back.nodes[k] - g.nodes[k]) < 1e-12);
            for (std::size_t k = 0; k < g.edges.size(); ++k) {
                REQUIRE(std::abs(back.edges[k].features[0] - g.edges[k].features[0]) < 1e-12);
                REQUIRE(std::abs(back.edges[k].features[1] - g.edges[k].features[1]) < 1e-12);
            }
            CHECK(back.targets == g.targets);
        }
    }

    SUBCASE("normalized training features have zero mean") {
        std::vector<double> sum(8, 0.0), sumsq(8, 0.0);
        std::size_t n = 0;
        for (const auto& g : graphs) {
            const auto z = normalize_features(g, stats);
            for (int i = 0; i < z.dof; ++i) {
                for (int c = 0; c < 8; ++c) {
                    sum[c] += z.node(i)[c];
                    sumsq[c] += z.node(i)[c] * z.node(i)[c];
                }
                ++n;
            }
        }
        for (int c = 0; c < 8; ++c) {
            CHECK(std::abs(sum[c] / n) < 1e-10);
            if (!stats.node_clamped[c]) CHECK(sumsq[c] / n == doctest::Approx(1.0).epsilon(1e-9));
        }
    }

    SUBCASE("stats survive json") {
        const nlohmann::json j = stats;
        const auto back = j.get<FeatureStats>();
        CHECK(back.node_mean == stats.node_mean);
        CHECK(back.node_scale == stats.node_scale);
        CHECK(back.edge_mean == stats.edge_mean);
        CHECK(back.node_clamped == stats.node_clamped);
    }
}

TEST_CASE("graph tables agree with per-sample graphs") {
    const auto data = generate_dataset(FamilySpec{3, 2, 50, 8});
    const auto variant = Variant::parse("rg-n");
    const auto table = build_table(data, variant, 8);
    CHECK(table.graphs() == 100);
    CHECK(table.edges_per_graph() == 4);
    for (std::size_t g = 0; g < table.graphs(); g += 7) {
        const auto [set, row] = table.origin[g];
        const auto& d = data[set];
        const auto ref = dataset_reference_angles(8, d.config_id, row, d.theta_row(row));
        const auto graph = build_graph(d.sample(row), variant, ref);
        for (int i = 0; i < 3; ++i) {
            for (int c = 0; c < 8; ++c) CHECK(table.nodes(g * 3 + i, c) == graph.node(i)[c]);
            CHECK(table.targets[g * 3 + i] == graph.targets[i]);
        }
        for (std::size_t e = 0; e < 4; ++e) {
            CHECK(table.edges(g * 4 + e, 0) == graph.edges[e].features[0]);
            CHECK(table.edges(g * 4 + e, 1) == graph.edges[e].features[1]);
        }
    }
    const std::size_t ids[] = {5, 2};
    const auto batch = gather_batch(table, ids);
    CHECK(batch.graphs == 2);
    CHECK(batch.nodes.rows() == 6);
    CHECK(batch.senders.size() == 8);
    CHECK(batch.nodes.row(0) == table.nodes.row(15));
    CHECK(batch.nodes.row(3) == table.nodes.row(6));
    for (std::size_t k = 4; k < 8; ++k) CHECK(batch.senders[k] >= 3);
}
