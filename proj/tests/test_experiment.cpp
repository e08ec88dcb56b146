#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include <ebgraph/experiment.hpp>

using namespace ebgraph;
namespace fs = std::filesystem;

namespace {

const std::string kData = EBGRAPH_TEST_DATA;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("ebgraph-test-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(const std::string& args, const fs::path& dir) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string("EBGRAPH_OUT='") + (dir / "root").string() + "' '" + EBGRAPH_CLI_PATH +
                            "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

int k_hat_line(const std::string& out) {
    const auto p = out.rfind("K_hat=");
    return p == std::string::npos ? -1 : std::stoi(out.substr(p + 6));
}

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.n = 60;
    c.k_star = 3;
    c.lambda = 0.6;
    c.epsilon = 0.1;
    c.k_range = {2, 3, 4};
    c.replicates = 3;
    c.seed = 11;
    return c;
}

std::string records_jsonl(const ExperimentResult& r) {
    std::ostringstream s;
    for (const auto& o : r.replicates)
        for (const auto& rec : o.records) s << rec.to_json().dump() << '\n';
    return s.str();
}

}  // namespace

TEST(Config, Validation) {
    auto c = small_config();
    EXPECT_NO_THROW(c.validate());
    c.k_range.clear();
    EXPECT_THROW(c.validate(), InputError);
    c = small_config();
    c.k_range = {61};
    EXPECT_THROW(c.validate(), InputError);
    c = small_config();
    c.replicates = 0;
    EXPECT_THROW(c.validate(), InputError);
    c = small_config();
    c.rho = 1.5;
    EXPECT_THROW(c.validate(), InputError);
    c = small_config();
    c.model = ModelKind::File;
    EXPECT_THROW(c.validate(), InputError);
    EXPECT_THROW(parse_model("model-9"), InputError);
}

TEST(Config, JsonRoundTrip) {
    auto c = small_config();
    c.cvrp_mode = CvrpMode::Literal;
    c.criterion = Criterion::CVRP;
    EXPECT_EQ(ExperimentConfig::from_json(c.to_json()).to_json(), c.to_json());
    ExperimentConfig g;
    g.model = ModelKind::GraphonPowerLaw;
    g.rho = 0.1;
    g.lambda = 2.0;
    g.k_range = {2, 5};
    EXPECT_EQ(ExperimentConfig::from_json(g.to_json()).to_json(), g.to_json());
    EXPECT_THROW(ExperimentConfig::from_json(json{{"model", "sbm"}}), InputError);
}

TEST(Median, EvenOddAndNonFinite) {
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
    EXPECT_EQ(median({1.0, std::nan(""), 5.0}), 3.0);
    EXPECT_TRUE(std::isnan(median({})));
}

TEST(Experiment, RecordsIndependentOfThreadCount) {
    auto c = small_config();
    c.threads = 1;
    const auto a = run_experiment(c);
    c.threads = 3;
    const auto b = run_experiment(c);
    EXPECT_EQ(a.summary.succeeded, 3);
    EXPECT_EQ(records_jsonl(a), records_jsonl(b));
}

TEST(Experiment, RerunWritesIdenticalFiles) {
    const auto dir = scratch("rerun");
    const auto c = small_config();
    write_experiment(dir / "a", run_experiment(c));
    write_experiment(dir / "b", run_experiment(c));
    for (const char* f : {"records.jsonl", "records.csv", "summary.csv", "deviations.csv", "manifest.json",
                          "replicates/rep-0002/graph.txt", "replicates/rep-0002/truth.txt"}) {
        const auto a = slurp(dir / "a" / f);
        EXPECT_FALSE(a.empty()) << f;
        EXPECT_EQ(a, slurp(dir / "b" / f)) << f;
    }
    // Per-replicate records concatenate to the top-level stream.
    std::string joined;
    for (int r = 0; r < c.replicates; ++r) joined += slurp(dir / "a" / "replicates" / detail::replicate_dir_name(r) / "records.jsonl");
    EXPECT_EQ(joined, slurp(dir / "a" / "records.jsonl"));
    const auto manifest = json::parse(slurp(dir / "a" / "manifest.json"));
    EXPECT_EQ(manifest["seeds"], json({11, 12, 13}));
    EXPECT_EQ(manifest["replicates_failed"], 0);
}

TEST(Experiment, RecordLayout) {
    auto c = small_config();
    c.replicates = 1;
    const auto r = run_experiment(c);
    ASSERT_EQ(r.replicates[0].records.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& rec = r.replicates[0].records[i];
        EXPECT_EQ(rec.k_input, c.k_range[i]);
        EXPECT_LE(rec.k_returned, rec.k_input);
        EXPECT_EQ(rec.score.K, rec.k_returned);
        EXPECT_GE(rec.mse_mle, 0.0);
        EXPECT_GE(rec.mse_eb, 0.0);
    }
    ASSERT_EQ(r.summary.deviations.size(), 3u);
    EXPECT_TRUE(r.summary.deviations[0].e_k_star.has_value());
}

TEST(Experiment, GraphonHasNoTrueK) {
    ExperimentConfig c;
    c.model = ModelKind::GraphonPowerLaw;
    c.n = 60;
    c.rho = 0.3;
    c.lambda = 1.5;
    c.k_range = {2, 3};
    c.replicates = 2;
    const auto r = run_experiment(c);
    EXPECT_EQ(r.summary.succeeded, 2);
    EXPECT_FALSE(r.k_star.has_value());
    EXPECT_FALSE(r.summary.deviations[0].e_k_star.has_value());
    for (const auto& row : r.summary.per_k) EXPECT_TRUE(std::isfinite(row.median_ratio_eb_mle));
}

TEST(Summary, FailedReplicatesAreCountedAndSkipped) {
    auto c = small_config();
    c.replicates = 2;
    auto outcomes = run_experiment(c).replicates;
    outcomes[1].ok = false;
    outcomes[1].error = "synthetic failure";
    const auto s = summarize(c, outcomes, 3);
    EXPECT_EQ(s.succeeded, 1);
    EXPECT_EQ(s.failed, 1);
    for (const auto& row : s.per_k) EXPECT_EQ(row.count, 1);
}

TEST(SplitProtocol, DeterministicAndThreadIndependent) {
    const auto g = load_graph(kData + "/synthetic_k11_edges.txt", kData + "/synthetic_k11_labels.txt");
    const auto a = run_split_protocol(g.graph, *g.labels, 6, 5, 0.7, 1);
    const auto b = run_split_protocol(g.graph, *g.labels, 6, 5, 0.7, 3);
    for (std::size_t s = 0; s < a.size(); ++s) {
        EXPECT_EQ(a[s].to_json().dump(), b[s].to_json().dump());
        EXPECT_EQ(a[s].train_size, 140);
        EXPECT_EQ(a[s].seed, 5u + s);
    }
}

// ---------------------------------------------------------------------------
// Command line

TEST(Cli, ExitCodes) {
    const auto dir = scratch("exit");
    EXPECT_EQ(cli("", dir).code, 1);
    EXPECT_EQ(cli("frobnicate", dir).code, 1);
    EXPECT_EQ(cli("estimate " + kData + "/two_cliques.txt", dir).code, 1);
    EXPECT_EQ(cli("experiment --k-range 5..2", dir).code, 1);
    EXPECT_EQ(cli("simulate --rho 0", dir).code, 1);
    EXPECT_EQ(cli("--help", dir).code, 0);

    const auto missing = cli("estimate /nonexistent/graph.txt --k 2", dir);
    EXPECT_EQ(missing.code, 2);
    EXPECT_NE(missing.err.find("/nonexistent/graph.txt"), std::string::npos);

    std::ofstream(dir / "bad.txt") << "1 2\n2 3\nlonely\n";
    const auto bad = cli("estimate " + (dir / "bad.txt").string() + " --k 1", dir);
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.err.find("line 3"), std::string::npos);
}

TEST(Cli, EstimateTwoCliques) {
    const auto dir = scratch("estimate");
    const auto r = cli("estimate " + kData + "/two_cliques.txt --k-range 1..3 --out " + (dir / "o").string(), dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    ASSERT_EQ(j["estimates"].size(), 3u);
    const auto eb = matrix_from_json(j["estimates"][1]["eb"]["theta"]);
    EXPECT_GT(eb(0, 0), 0.9);
    EXPECT_GT(eb(1, 1), 0.9);
    EXPECT_LT(eb(0, 1), 0.1);
    EXPECT_EQ(j["estimates"][1]["step_graphon"]["boundaries"], json({0.0, 0.5, 1.0}));
    EXPECT_EQ(slurp(dir / "o" / "estimates.json"), r.out);
}

TEST(Cli, SelectTwoCliques) {
    const auto dir = scratch("select");
    const auto r = cli("select " + kData + "/two_cliques.txt --k-range 1..4", dir);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(k_hat_line(r.out), 2);
    EXPECT_EQ(r.out.rfind(score_csv_header(), 0), 0u);
    const auto one = cli("select " + kData + "/two_cliques.txt --k-range 3", dir);
    EXPECT_EQ(k_hat_line(one.out), 2);  // detection returns two non-empty clusters
    const auto cvrp = cli("select " + kData + "/two_cliques.txt --k-range 1,2 --criterion cvrp", dir);
    EXPECT_EQ(cvrp.code, 0);
}

TEST(Cli, Ingest) {
    const auto dir = scratch("ingest");
    const auto r = cli("ingest " + kData + "/synthetic_k11_edges.txt --labels " + kData +
                           "/synthetic_k11_labels.txt --out " + (dir / "o").string(),
                       dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["n"], 200);
    EXPECT_EQ(j["edges"], 1430);
    EXPECT_EQ(j["K"], 11);
    const auto back = load_graph((dir / "o" / "graph.txt").string(), (dir / "o" / "labels.txt").string(),
                                 (dir / "o" / "nodes.txt").string());
    EXPECT_EQ(back.graph.num_edges(), 1430u);
    EXPECT_EQ(back.labels->K(), 11);
}

TEST(Cli, SimulateIsReproducibleAndUsesEnvRoot) {
    const auto dir = scratch("simulate");
    ASSERT_EQ(cli("simulate --replicates 1 --n 50 --k-star 3 --seed 4", dir).code, 0);
    const auto first = dir / "root" / "simulate-sbm-affiliation-s4";
    const auto graph = slurp(first / "replicates" / "rep-0000" / "graph.txt");
    EXPECT_FALSE(graph.empty());
    const auto manifest = json::parse(slurp(first / "manifest.json"));
    EXPECT_EQ(manifest["seeds"], json({4}));
    ASSERT_EQ(cli("simulate --replicates 1 --n 50 --k-star 3 --seed 4 --out " + (dir / "again").string(), dir).code,
              0);
    EXPECT_EQ(slurp(dir / "again" / "replicates" / "rep-0000" / "graph.txt"), graph);
}

TEST(Cli, GraphonDensityNearRho) {
    const auto dir = scratch("graphon");
    ASSERT_EQ(cli("simulate --model graphon-powerlaw --n 316 --rho 0.1 --lambda 2 --replicates 3 --out " +
                      (dir / "o").string(),
                  dir)
                  .code,
              0);
    const auto manifest = json::parse(slurp(dir / "o" / "manifest.json"));
    for (const auto& g : manifest["graphs"]) EXPECT_NEAR(g["density"].get<double>(), 0.1, 0.02);
}

TEST(Cli, ExperimentRerunFromManifest) {
    const auto dir = scratch("manifest");
    const auto a = cli("experiment --n 60 --k-star 3 --k-range 2..4 --replicates 2 --seed 3 --out " +
                           (dir / "a").string(),
                       dir);
    ASSERT_EQ(a.code, 0) << a.err;
    const auto b = cli("experiment --manifest " + (dir / "a" / "manifest.json").string() + " --out " +
                           (dir / "b").string(),
                       dir);
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(slurp(dir / "a" / "records.jsonl"), slurp(dir / "b" / "records.jsonl"));
    EXPECT_EQ(slurp(dir / "a" / "manifest.json"), slurp(dir / "b" / "manifest.json"));
}

// A one-replicate experiment equals simulate, then estimate and select on the
// written graph with the replicate seed.
TEST(Cli, ExperimentComposesFromSubcommands) {
    const auto dir = scratch("compose");
    const std::string model = " --n 80 --k-star 4 --lambda 0.5 --epsilon 0.05 --seed 21 --replicates 1";
    ASSERT_EQ(cli("simulate" + model + " --out " + (dir / "sim").string(), dir).code, 0);
    const auto exp = cli("experiment" + model + " --k-range 3..5 --out " + (dir / "exp").string(), dir);
    ASSERT_EQ(exp.code, 0) << exp.err;
    const auto rep = dir / "sim" / "replicates" / "rep-0000";
    EXPECT_EQ(slurp(rep / "graph.txt"), slurp(dir / "exp" / "replicates" / "rep-0000" / "graph.txt"));

    const std::string input = (rep / "graph.txt").string() + " --nodes " + (rep / "nodes.txt").string() + " --seed 21";
    const auto sel = cli("select " + input + " --k-range 3..5", dir);
    ASSERT_EQ(sel.code, 0) << sel.err;
    const auto est = cli("estimate " + input + " --k-range 3..5", dir);
    ASSERT_EQ(est.code, 0) << est.err;

    std::vector<json> records;
    std::istringstream lines(slurp(dir / "exp" / "records.jsonl"));
    for (std::string line; std::getline(lines, line);) records.push_back(json::parse(line));
    ASSERT_EQ(records.size(), 3u);

    // Score rows match.
    std::istringstream csv(sel.out);
    std::string row;
    std::getline(csv, row);
    for (const auto& rec : records) {
        std::getline(csv, row);
        const auto& s = rec["score"];
        EXPECT_EQ(row.substr(0, row.find(',')), std::to_string(s["K"].get<int>()));
        EXPECT_NE(row.find(format_double(s["total"].get<double>())), std::string::npos) << row;
    }
    // selections.csv: replicate,seed,K_eb,...
    std::istringstream sel_csv(slurp(dir / "exp" / "selections.csv"));
    std::string header, first;
    std::getline(sel_csv, header);
    std::getline(sel_csv, first);
    std::vector<std::string> fields;
    std::istringstream cells(first);
    for (std::string c; std::getline(cells, c, ',');) fields.push_back(c);
    ASSERT_GE(fields.size(), 3u);
    EXPECT_EQ(k_hat_line(sel.out), std::stoi(fields[2]));

    // EB error recomputed from the estimate output against the sampled truth,
    // whose grouping the truth sidecar must reproduce.
    const auto sim = sample_sbm(affiliation_theta(4, 0.5, 0.05, 1.0), 80, 21);
    const auto loaded = load_graph((rep / "graph.txt").string(), (rep / "truth.txt").string(),
                                   (rep / "nodes.txt").string());
    for (int v = 0; v < 80; ++v)
        for (int w = v + 1; w < 80; ++w)
            ASSERT_EQ((*loaded.labels)[v] == (*loaded.labels)[w], sim.partition[v] == sim.partition[w]);
    const auto j = json::parse(est.out);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& e = j["estimates"][i];
        std::vector<int> labels;
        for (int v : e["partition"]) labels.push_back(v - 1);
        const Partition z(labels, e["K_returned"].get<int>());
        const double mse = mse_sbm(matrix_from_json(e["eb"]["theta"]), z, sim.theta, sim.partition);
        EXPECT_EQ(format_double(mse), format_double(records[i]["mse_eb"].get<double>()));
    }
}
