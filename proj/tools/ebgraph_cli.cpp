// ebgraph: simulate block-model and graphon networks, estimate connectivity
// with MLE / empirical Bayes / variational baselines, select K, and run the
// simulation and held-out likelihood studies.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <ebgraph/experiment.hpp>

namespace fs = std::filesystem;
using namespace ebgraph;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

/// Raised for flag combinations CLI11 cannot check on its own.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int parse_int(const std::string& s) {
    std::size_t pos = 0;
    int v = 0;
    try {
        v = std::stoi(s, &pos);
    } catch (const std::exception&) {
        throw UsageError("not an integer: '" + s + "'");
    }
    if (pos != s.size()) throw UsageError("not an integer: '" + s + "'");
    return v;
}

/// "a..b", "a-b", "a,b,c" or a single K.
std::vector<int> parse_k_range(const std::string& text) {
    std::vector<int> out;
    auto range = [&](std::size_t at, std::size_t width) {
        const int lo = parse_int(text.substr(0, at)), hi = parse_int(text.substr(at + width));
        if (lo > hi) throw UsageError("K range '" + text + "' is empty");
        for (int k = lo; k <= hi; ++k) out.push_back(k);
    };
    if (auto p = text.find(".."); p != std::string::npos) {
        range(p, 2);
    } else if (auto d = text.find('-', 1); d != std::string::npos) {
        range(d, 1);
    } else {
        std::stringstream ss(text);
        for (std::string part; std::getline(ss, part, ',');) out.push_back(parse_int(part));
    }
    if (out.empty()) throw UsageError("K range is empty");
    return out;
}

fs::path output_root() {
    if (const char* env = std::getenv("EBGRAPH_OUT"); env && *env) return env;
    return "ebgraph-out";
}

fs::path resolve_out(const std::string& flag, const std::string& default_name) {
    return flag.empty() ? output_root() / default_name : fs::path(flag);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Criterion parse_criterion(const std::string& s) {
    if (s == "eb") return Criterion::EB;
    if (s == "cvrp") return Criterion::CVRP;
    throw UsageError("unknown criterion '" + s + "'");
}

CvrpMode parse_cvrp_mode(const std::string& s) {
    if (s == "squared") return CvrpMode::Squared;
    if (s == "literal") return CvrpMode::Literal;
    throw UsageError("unknown CVRP mode '" + s + "'");
}

struct Flags {
    std::string model = "sbm-affiliation";
    int n = 200;
    int k_star = 10;
    std::string k_range;
    double rho = 1.0;
    double lambda = 0.9;
    double epsilon = 0.1;
    int replicates = 20;
    std::uint64_t seed = 1;
    std::string criterion = "eb";
    std::string cvrp_mode = "squared";
    std::string out;
    int threads = 0;
    std::string graph;
    std::string labels;
    std::string nodes;
    int splits = 100;
    double train_fraction = 0.7;
    bool no_replicate_files = false;
    std::string manifest;
};

ExperimentConfig make_config(const Flags& f) {
    ExperimentConfig c;
    try {
        c.model = parse_model(f.model);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    c.n = f.n;
    c.k_star = f.k_star;
    c.rho = f.rho;
    c.lambda = f.lambda;
    c.epsilon = f.epsilon;
    c.replicates = f.replicates;
    c.seed = f.seed;
    c.criterion = parse_criterion(f.criterion);
    c.cvrp_mode = parse_cvrp_mode(f.cvrp_mode);
    c.graph_path = f.graph;
    c.label_path = f.labels;
    c.threads = f.threads;
    c.write_replicates = !f.no_replicate_files;
    if (!f.k_range.empty()) c.k_range = parse_k_range(f.k_range);
    return c;
}

/// Config checks are usage errors: the user asked for something impossible.
void validate_usage(const ExperimentConfig& c) {
    try {
        c.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

LoadedGraph load_input(const Flags& f, bool with_labels) {
    std::optional<std::string> labels, nodes;
    if (with_labels) labels = f.labels;
    if (!f.nodes.empty()) nodes = f.nodes;
    return load_graph(f.graph, labels, nodes);
}

std::string default_name(const char* command, const ExperimentConfig& c) {
    return std::string(command) + "-" + model_name(c.model) + "-s" + std::to_string(c.seed);
}

std::string stem_name(const char* command, const std::string& path, std::uint64_t seed) {
    return std::string(command) + "-" + fs::path(path).stem().string() + "-s" + std::to_string(seed);
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Flags& f) {
    auto config = make_config(f);
    if (config.model == ModelKind::File) throw UsageError("simulate needs a generative model");
    if (config.k_range.empty()) config.k_range = {1};  // unused by simulation
    validate_usage(config);
    const auto dir = resolve_out(f.out, default_name("simulate", config));
    create_output_dir(dir / "replicates");

    std::vector<SimulatedGraph> sims(static_cast<std::size_t>(config.replicates));
    parallel_for(config.replicates, config.threads,
                 [&](int r) { sims[static_cast<std::size_t>(r)] = simulate_replicate(config, r); });
    json graphs = json::array();
    for (int r = 0; r < config.replicates; ++r) {
        const auto& s = sims[static_cast<std::size_t>(r)];
        write_replicate_dir(dir / "replicates" / detail::replicate_dir_name(r), s);
        graphs.push_back({{"replicate", r},
                          {"seed", replicate_seed(config, r)},
                          {"edges", s.graph.num_edges()},
                          {"density", s.graph.density()}});
    }
    auto manifest = manifest_json(config, "simulate");
    manifest["config"].erase("k_range");
    manifest["config"].erase("criterion");
    manifest["config"].erase("cvrp_mode");
    manifest["graphs"] = graphs;
    write_json_file(dir / "manifest.json", manifest);
    std::cout << dir.string() << '\n';
    return 0;
}

json estimate_entry(const Graph& graph, const Detection& det, int k_input) {
    const auto stats = block_stats(graph, det.partition);
    const auto fit = fit_hyperparams(stats);
    const auto eb = eb_estimate(stats, fit.hyper);
    json partition = json::array();
    for (int i = 0; i < det.partition.n(); ++i) partition.push_back(det.partition[i] + 1);
    ConnectivityEstimate vbem;
    vbem.theta = det.theta_vb;
    vbem.method = Method::VBEM;
    return json{{"K_input", k_input},
                {"K_returned", det.partition.K()},
                {"partition", partition},
                {"lower_bound", det.lower_bound},
                {"vb_converged", det.converged},
                {"hyper_fit",
                 {{"diagonal_loglik", fit.diagonal.loglik},
                  {"offdiagonal_loglik", fit.offdiagonal.loglik},
                  {"diagonal_fitted", fit.diagonal.fitted},
                  {"offdiagonal_fitted", fit.offdiagonal.fitted}}},
                {"mle", to_json(mle_estimate(stats))},
                {"eb", to_json(eb)},
                {"vbem", to_json(vbem)},
                {"fixed_prior", to_json(fixed_prior_estimate(stats))},
                {"step_graphon", to_json(build_step_graphon(det.partition, eb.theta))}};
}

int cmd_estimate(const Flags& f) {
    if (f.k_range.empty()) throw UsageError("estimate needs --k-range");
    const auto ks = parse_k_range(f.k_range);
    const auto loaded = load_input(f, false);
    const auto& g = loaded.graph;
    for (int k : ks)
        if (k < 1 || k > g.n()) throw UsageError("K = " + std::to_string(k) + " outside 1.." + std::to_string(g.n()));
    const SpectralEmbedding emb(g);
    json entries = json::array();
    for (int k : ks) entries.push_back(estimate_entry(g, detect_communities(g, emb, k, f.seed), k));
    json out{{"tool", "ebgraph"},          {"version", kVersion},        {"command", "estimate"},
             {"graph", f.graph},           {"n", g.n()},                 {"edges", g.num_edges()},
             {"seed", f.seed},             {"k_range", ks},              {"nodes", loaded.nodes.names()},
             {"estimates", entries}};
    const std::string text = out.dump(2) + "\n";
    if (!f.out.empty()) {
        create_output_dir(f.out);
        write_text(fs::path(f.out) / "estimates.json", text);
    }
    std::cout << text;
    return 0;
}

int cmd_select(const Flags& f) {
    if (f.k_range.empty()) throw UsageError("select needs --k-range");
    const auto ks = parse_k_range(f.k_range);
    const auto criterion = parse_criterion(f.criterion);
    const auto mode = parse_cvrp_mode(f.cvrp_mode);
    const auto loaded = load_input(f, false);
    const auto& g = loaded.graph;
    for (int k : ks)
        if (k < 1 || k > g.n()) throw UsageError("K = " + std::to_string(k) + " outside 1.." + std::to_string(g.n()));
    const SpectralEmbedding emb(g);
    std::vector<SelectionScore> scores;
    std::vector<Partition> partitions;
    for (int k : ks) {
        auto det = detect_communities(g, emb, k, f.seed);
        scores.push_back(score_partition(block_stats(g, det.partition), det.partition.sizes(), g.n(), mode));
        partitions.push_back(std::move(det.partition));
    }
    const auto best = select_best(scores, criterion);
    std::ostringstream csv;
    write_score_csv(csv, scores);
    if (!f.out.empty()) {
        const fs::path dir(f.out);
        create_output_dir(dir);
        write_text(dir / "scores.csv", csv.str());
        std::ostringstream part;
        write_partition(part, partitions[best], &loaded.nodes);
        write_text(dir / "partition.txt", part.str());
        json manifest{{"tool", "ebgraph"},
                      {"version", kVersion},
                      {"command", "select"},
                      {"graph", f.graph},
                      {"seed", f.seed},
                      {"k_range", ks},
                      {"criterion", criterion_name(criterion)},
                      {"cvrp_mode", cvrp_mode_name(mode)},
                      {"k_hat", scores[best].K}};
        write_json_file(dir / "manifest.json", manifest);
    }
    std::cout << csv.str() << "K_hat=" << scores[best].K << '\n';
    return 0;
}

int cmd_evaluate(const Flags& f) {
    if (f.graph.empty() || f.labels.empty()) throw UsageError("evaluate needs --graph and --labels");
    if (f.splits < 1) throw UsageError("--splits must be >= 1");
    if (!(f.train_fraction > 0.0 && f.train_fraction < 1.0)) throw UsageError("--train-fraction must lie in (0, 1)");
    const auto loaded = load_input(f, true);
    const auto& g = loaded.graph;
    const auto& labels = *loaded.labels;
    const auto dir = resolve_out(f.out, stem_name("evaluate", f.graph, f.seed));
    create_output_dir(dir);

    const auto splits = run_split_protocol(g, labels, f.splits, f.seed, f.train_fraction, f.threads);
    {
        std::ostringstream csv, jsonl;
        csv << "split,seed,train_size,ll_mle,ll_eb,ll_fixed\n";
        for (const auto& s : splits) {
            csv << s.split << ',' << s.seed << ',' << s.train_size << ',' << format_double(s.ll_mle) << ','
                << format_double(s.ll_eb) << ',' << format_double(s.ll_fixed) << '\n';
            jsonl << s.to_json().dump() << '\n';
        }
        write_text(dir / "splits.csv", csv.str());
        write_text(dir / "splits.jsonl", jsonl.str());
    }
    std::vector<double> mle, eb, fixed;
    for (const auto& s : splits) {
        mle.push_back(s.ll_mle);
        eb.push_back(s.ll_eb);
        fixed.push_back(s.ll_fixed);
    }
    json report{{"tool", "ebgraph"},
                {"version", kVersion},
                {"command", "evaluate"},
                {"graph", f.graph},
                {"labels", f.labels},
                {"seed", f.seed},
                {"splits", f.splits},
                {"train_fraction", f.train_fraction},
                {"n", g.n()},
                {"edges", g.num_edges()},
                {"self_loops", loaded.cleanup.self_loops},
                {"duplicates", loaded.cleanup.duplicates},
                {"K_star", labels.K()},
                {"median_ll_mle", median(mle)},
                {"median_ll_eb", median(eb)},
                {"median_ll_fixed", median(fixed)}};

    // Optional: detection over a K range scored against the label-based Θ*.
    if (!f.k_range.empty()) {
        const auto ks = parse_k_range(f.k_range);
        for (int k : ks)
            if (k < 1 || k > g.n()) throw UsageError("K = " + std::to_string(k) + " outside 1.." + std::to_string(g.n()));
        Truth truth;
        truth.partition = labels;
        truth.theta = theta_star(g, labels).theta;
        const auto records = analyse_graph(g, truth, ks, f.seed, 0, parse_cvrp_mode(f.cvrp_mode));
        std::ostringstream jsonl;
        for (const auto& r : records) jsonl << r.to_json().dump() << '\n';
        write_text(dir / "records.jsonl", jsonl.str());
        const auto sel = select_within(records);
        report["k_range"] = ks;
        report["K_eb"] = sel.k_eb;
        report["K_cvrp"] = sel.k_cvrp;
        report["K_vbem"] = sel.k_vbem;
        report["K_tilde"] = sel.k_tilde;
    }
    write_json_file(dir / "manifest.json", report);
    std::cout << report.dump(2) << '\n';
    return 0;
}

ExperimentConfig config_from_manifest(const Flags& f) {
    std::ifstream in(f.manifest);
    if (!in) throw IoError("cannot open '" + f.manifest + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("manifest is not valid JSON: " + std::string(e.what()));
    }
    if (!j.contains("config")) throw InputError("manifest has no config");
    auto c = ExperimentConfig::from_json(j["config"]);
    c.threads = f.threads;
    c.write_replicates = !f.no_replicate_files;
    return c;
}

int cmd_experiment(const Flags& f) {
    auto config = f.manifest.empty() ? make_config(f) : config_from_manifest(f);
    validate_usage(config);
    const std::string name = config.model == ModelKind::File ? stem_name("experiment", config.graph_path, config.seed)
                                                             : default_name("experiment", config);
    const auto dir = resolve_out(f.out, name);
    const auto result = run_experiment(config);
    write_experiment(dir, result);
    std::cerr << "replicates ok: " << result.summary.succeeded << ", failed: " << result.summary.failed << '\n';
    for (const auto& o : result.replicates)
        if (!o.ok) std::cerr << "replicate " << o.replicate << " (seed " << o.seed << "): " << o.error << '\n';
    write_summary_csv(std::cout, result.summary);
    write_deviations_csv(std::cout, result.summary);
    // Headline for the requested criterion; every criterion is in deviations.csv.
    for (const auto& d : result.summary.deviations)
        if (d.criterion == criterion_name(config.criterion))
            std::cout << "criterion=" << d.criterion << " mean_K_hat=" << format_double(d.mean_k_hat) << '\n';
    std::cout << dir.string() << '\n';
    if (result.summary.succeeded == 0) return kExitNumerical;
    return 0;
}

int cmd_ingest(const Flags& f) {
    const auto loaded = load_input(f, !f.labels.empty());
    const auto dir = resolve_out(f.out, "ingest-" + fs::path(f.graph).stem().string());
    create_output_dir(dir);
    {
        std::ostringstream s;
        write_edge_list(s, loaded.graph);
        write_text(dir / "graph.txt", s.str());
    }
    {
        // Index first so the file also works as a node list; original name second.
        std::ostringstream s;
        for (int i = 0; i < loaded.nodes.size(); ++i) s << i << ' ' << loaded.nodes.names()[i] << '\n';
        write_text(dir / "nodes.txt", s.str());
    }
    json counts{{"source", f.graph},
                {"n", loaded.graph.n()},
                {"edges", loaded.graph.num_edges()},
                {"self_loops", loaded.cleanup.self_loops},
                {"duplicates", loaded.cleanup.duplicates}};
    if (loaded.labels) {
        std::ostringstream s;
        write_partition(s, *loaded.labels);
        write_text(dir / "labels.txt", s.str());
        std::ostringstream names;
        for (std::size_t k = 0; k < loaded.label_names.size(); ++k)
            names << k + 1 << ' ' << loaded.label_names[k] << '\n';
        write_text(dir / "label_names.txt", names.str());
        counts["labels"] = f.labels;
        counts["K"] = loaded.labels->K();
    }
    write_json_file(dir / "ingest.json", counts);
    std::cout << counts.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Empirical-Bayes estimation for stochastic block models and graphons"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Flags f;

    auto add_model = [&](CLI::App* c) {
        c->add_option("--model", f.model, "sbm-affiliation, graphon-powerlaw or file")->capture_default_str();
        c->add_option("--n", f.n, "number of nodes")->capture_default_str();
        c->add_option("--k-star", f.k_star, "true number of blocks (sbm-affiliation)")->capture_default_str();
        c->add_option("--rho", f.rho, "sparsity scale")->capture_default_str();
        c->add_option("--lambda", f.lambda, "within-block level (sbm) or power-law exponent (graphon)")
            ->capture_default_str();
        c->add_option("--epsilon", f.epsilon, "between-block level (sbm)")->capture_default_str();
        c->add_option("--replicates", f.replicates, "number of replicates M")->capture_default_str();
    };
    auto add_common = [&](CLI::App* c) {
        c->add_option("--seed", f.seed, "base seed")->capture_default_str();
        c->add_option("--out", f.out, "output directory (default under $EBGRAPH_OUT)");
        c->add_option("--threads", f.threads, "worker threads, 0 = all cores")->capture_default_str();
    };
    auto add_graph = [&](CLI::App* c, bool required) {
        auto* opt = c->add_option("--graph,graph", f.graph, "edge list file");
        if (required) opt->required();
        c->add_option("--nodes", f.nodes, "node list fixing the node order");
    };
    auto add_selection = [&](CLI::App* c) {
        c->add_option("--k-range", f.k_range, "K values: a..b, a-b, a,b,c or K");
        c->add_option("--criterion", f.criterion, "eb or cvrp")->capture_default_str();
        c->add_option("--cvrp-mode", f.cvrp_mode, "squared or literal")->capture_default_str();
    };

    auto* sim = app.add_subcommand("simulate", "sample graphs and write them with their truth");
    add_model(sim);
    add_common(sim);

    auto* est = app.add_subcommand("estimate", "detect communities and estimate connectivity per K");
    add_graph(est, true);
    est->add_option("--k-range,--k", f.k_range, "K values: a..b, a-b, a,b,c or K");
    add_common(est);

    auto* sel = app.add_subcommand("select", "score candidate K and pick one");
    add_graph(sel, true);
    add_selection(sel);
    add_common(sel);

    auto* ev = app.add_subcommand("evaluate", "held-out likelihood on an annotated graph");
    add_graph(ev, true);
    ev->add_option("--labels", f.labels, "node label file")->required();
    ev->add_option("--splits", f.splits, "number of random splits")->capture_default_str();
    ev->add_option("--train-fraction", f.train_fraction, "share of nodes used for fitting")->capture_default_str();
    add_selection(ev);
    add_common(ev);

    auto* exp = app.add_subcommand("experiment", "full simulation study over a K range");
    add_model(exp);
    add_selection(exp);
    add_common(exp);
    exp->add_option("--graph", f.graph, "edge list (model file)");
    exp->add_option("--labels", f.labels, "label file (model file)");
    exp->add_option("--manifest", f.manifest, "rerun the configuration stored in a manifest.json");
    exp->add_flag("--no-replicate-files", f.no_replicate_files, "skip per-replicate folders");

    auto* ing = app.add_subcommand("ingest", "convert an edge list and labels to indexed files");
    add_graph(ing, true);
    ing->add_option("--labels", f.labels, "node label file");
    add_common(ing);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (sim->parsed()) return cmd_simulate(f);
        if (est->parsed()) return cmd_estimate(f);
        if (sel->parsed()) return cmd_select(f);
        if (ev->parsed()) return cmd_evaluate(f);
        if (exp->parsed()) return cmd_experiment(f);
        if (ing->parsed()) return cmd_ingest(f);
    } catch (const UsageError& e) {
        std::cerr << "ebgraph: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericalError& e) {
        std::cerr << "ebgraph: numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const DomainError& e) {
        std::cerr << "ebgraph: numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "ebgraph: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
