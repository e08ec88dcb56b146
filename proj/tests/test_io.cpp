#include <sstream>

#include <gtest/gtest.h>

#include <ebgraph/io.hpp>

using namespace ebgraph;

TEST(EdgeList, ParsesCommentsLoopsAndDuplicates) {
    std::istringstream in("# comment\n\na b\nb a 3.5\nc c\nc d\n  # indented comment\n");
    const auto g = load_graph(in);
    EXPECT_EQ(g.graph.n(), 4);
    EXPECT_EQ(g.graph.num_edges(), 2u);
    EXPECT_EQ(g.cleanup.self_loops, 1u);
    EXPECT_EQ(g.cleanup.duplicates, 1u);
    EXPECT_EQ(g.nodes.names(), (std::vector<std::string>{"a", "b", "c", "d"}));
    EXPECT_FALSE(g.labels.has_value());
}

TEST(EdgeList, ParseErrorCarriesLineNumber) {
    std::istringstream in("1 2\n2 3\nlonely\n");
    try {
        load_graph(in);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(EdgeList, EmptyInputIsRejected) {
    std::istringstream in("# nothing here\n");
    EXPECT_THROW(load_graph(in), InputError);
}

TEST(Labels, BuildPartitionWithIsolatedNodes) {
    std::istringstream edges("10 20\n20 30\n");
    std::istringstream labels("10 x\n20 x\n30 y\n40 y\n");
    const auto g = load_graph(edges, &labels);
    EXPECT_EQ(g.graph.n(), 4);
    EXPECT_EQ(g.graph.degree(3), 0);
    ASSERT_TRUE(g.labels.has_value());
    EXPECT_EQ(g.labels->labels(), (std::vector<int>{0, 0, 1, 1}));
    EXPECT_EQ(g.label_names, (std::vector<std::string>{"x", "y"}));
}

TEST(Labels, MissingOrConflictingLabels) {
    std::istringstream e1("1 2\n2 3\n"), l1("1 a\n2 a\n");
    EXPECT_THROW(load_graph(e1, &l1), InputError);
    std::istringstream e2("1 2\n"), l2("1 a\n2 b\n1 c\n");
    EXPECT_THROW(load_graph(e2, &l2), ParseError);
}

TEST(Files, MissingFileIsIoError) {
    EXPECT_THROW(load_graph("/nonexistent/graph.txt"), IoError);
}

TEST(RoundTrip, EdgesAndPartition) {
    const Graph g(4, {{0, 1}, {2, 3}, {1, 3}});
    std::ostringstream out;
    write_edge_list(out, g);
    std::istringstream back(out.str());
    const auto loaded = load_graph(back);
    EXPECT_EQ(loaded.graph.num_edges(), 3u);

    const Partition z({1, 0, 1, 0}, 2);
    std::ostringstream pz;
    write_partition(pz, z, &loaded.nodes);
    EXPECT_NE(pz.str().find(" 2\n"), std::string::npos);
    std::istringstream pin(pz.str());
    const auto z2 = read_partition(pin, loaded.nodes);
    EXPECT_EQ(z2.K(), 2);
    // Same grouping, labels renumbered by first appearance.
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) EXPECT_EQ(z[i] == z[j], z2[i] == z2[j]);
}

TEST(RoundTrip, UnknownNodeInPartition) {
    std::istringstream e("a b\n");
    const auto g = load_graph(e);
    std::istringstream p("a 1\nb 1\nzz 2\n");
    EXPECT_THROW(read_partition(p, g.nodes), InputError);
}
