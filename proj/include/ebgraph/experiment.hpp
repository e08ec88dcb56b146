#pragma once

// End-to-end simulation studies and the held-out likelihood protocol.
//
// A replicate r uses seed base + r for both graph sampling and community
// detection, so a single replicate can be reproduced by hand with the
// simulate/estimate/select commands. Replicates run on a worker pool; every
// result lands in its own slot and files are written in replicate order, so
// outputs do not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "community.hpp"
#include "eb_estimator.hpp"
#include "eval.hpp"
#include "graphon.hpp"
#include "io.hpp"
#include "model_select.hpp"
#include "samplers.hpp"
#include "serialize.hpp"

namespace ebgraph {

inline constexpr const char* kVersion = "0.1.0";

enum class ModelKind { SbmAffiliation, GraphonPowerLaw, File };

inline const char* model_name(ModelKind m) {
    switch (m) {
        case ModelKind::SbmAffiliation: return "sbm-affiliation";
        case ModelKind::GraphonPowerLaw: return "graphon-powerlaw";
        case ModelKind::File: return "file";
    }
    return "?";
}

inline ModelKind parse_model(const std::string& s) {
    if (s == "sbm-affiliation" || s == "sbm") return ModelKind::SbmAffiliation;
    if (s == "graphon-powerlaw" || s == "graphon") return ModelKind::GraphonPowerLaw;
    if (s == "file") return ModelKind::File;
    throw InputError("unknown model '" + s + "' (expected sbm-affiliation, graphon-powerlaw or file)");
}

inline const char* criterion_name(Criterion c) { return c == Criterion::EB ? "eb" : "cvrp"; }
inline const char* cvrp_mode_name(CvrpMode m) { return m == CvrpMode::Literal ? "literal" : "squared"; }

struct ExperimentConfig {
    ModelKind model = ModelKind::SbmAffiliation;
    int n = 200;
    int k_star = 10;
    double lambda = 0.9;
    double epsilon = 0.1;
    double rho = 1.0;
    std::vector<int> k_range;
    int replicates = 20;
    std::uint64_t seed = 1;
    Criterion criterion = Criterion::EB;
    CvrpMode cvrp_mode = CvrpMode::Squared;
    std::string graph_path;  // model = file
    std::string label_path;
    int threads = 0;         // 0: one per available core
    bool write_replicates = true;

    void validate() const {
        if (k_range.empty()) throw InputError("K range is empty");
        if (replicates < 1) throw InputError("replicates must be >= 1");
        for (int k : k_range)
            if (k < 1) throw InputError("K values must be >= 1");
        switch (model) {
            case ModelKind::SbmAffiliation:
                if (n < 2) throw InputError("n must be >= 2");
                affiliation_theta(k_star, lambda, epsilon, rho);
                break;
            case ModelKind::GraphonPowerLaw:
                if (n < 2) throw InputError("n must be >= 2");
                GraphonSpec::make_power_law(rho, lambda);
                break;
            case ModelKind::File:
                if (graph_path.empty() || label_path.empty())
                    throw InputError("model 'file' needs a graph file and a label file");
                break;
        }
        if (model != ModelKind::File)
            for (int k : k_range)
                if (k > n) throw InputError("K = " + std::to_string(k) + " exceeds n = " + std::to_string(n));
    }

    json to_json() const {
        json j{{"model", model_name(model)},
               {"n", n},
               {"k_range", k_range},
               {"replicates", replicates},
               {"seed", seed},
               {"criterion", criterion_name(criterion)},
               {"cvrp_mode", cvrp_mode_name(cvrp_mode)}};
        if (model == ModelKind::SbmAffiliation) {
            j["k_star"] = k_star;
            j["lambda"] = lambda;
            j["epsilon"] = epsilon;
            j["rho"] = rho;
        } else if (model == ModelKind::GraphonPowerLaw) {
            j["lambda"] = lambda;
            j["rho"] = rho;
        } else {
            j["graph"] = graph_path;
            j["labels"] = label_path;
        }
        return j;
    }

    /// Inverse of to_json; missing keys keep their defaults.
    static ExperimentConfig from_json(const json& j) {
        ExperimentConfig c;
        try {
            c.model = parse_model(j.at("model").get<std::string>());
            c.n = j.value("n", c.n);
            c.k_range = j.at("k_range").get<std::vector<int>>();
            c.replicates = j.value("replicates", c.replicates);
            c.seed = j.value("seed", c.seed);
            const auto crit = j.value("criterion", std::string("eb"));
            if (crit != "eb" && crit != "cvrp") throw InputError("unknown criterion '" + crit + "'");
            c.criterion = crit == "eb" ? Criterion::EB : Criterion::CVRP;
            const auto mode = j.value("cvrp_mode", std::string("squared"));
            if (mode != "squared" && mode != "literal") throw InputError("unknown CVRP mode '" + mode + "'");
            c.cvrp_mode = mode == "squared" ? CvrpMode::Squared : CvrpMode::Literal;
            c.k_star = j.value("k_star", c.k_star);
            c.lambda = j.value("lambda", c.lambda);
            c.epsilon = j.value("epsilon", c.epsilon);
            c.rho = j.value("rho", c.rho);
            c.graph_path = j.value("graph", std::string());
            c.label_path = j.value("labels", std::string());
        } catch (const json::exception& e) {
            throw InputError(std::string("bad experiment config: ") + e.what());
        }
        return c;
    }
};

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
    int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

inline double median(std::vector<double> v) {
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// ---------------------------------------------------------------------------
// Simulation

/// Ground truth of one replicate: a block model (simulated or annotated) or a graphon.
struct Truth {
    std::optional<Partition> partition;
    Eigen::MatrixXd theta;
    std::optional<GraphonSpec> graphon;
    std::vector<double> latent;
};

struct SimulatedGraph {
    Graph graph;
    Truth truth;
};

/// Annotated graph for model = file, with Θ* from the true labels.
struct FileData {
    LoadedGraph loaded;
    ConnectivityEstimate theta_star;
};

inline FileData load_file_data(const ExperimentConfig& config) {
    FileData d{load_graph(config.graph_path, config.label_path), {}};
    d.theta_star = theta_star(d.loaded.graph, *d.loaded.labels);
    return d;
}

inline std::uint64_t replicate_seed(const ExperimentConfig& config, int r) {
    return config.seed + static_cast<std::uint64_t>(r);
}

inline SimulatedGraph simulate_replicate(const ExperimentConfig& config, int r, const FileData* file = nullptr) {
    const auto seed = replicate_seed(config, r);
    SimulatedGraph out;
    switch (config.model) {
        case ModelKind::SbmAffiliation: {
            auto s = sample_sbm(affiliation_theta(config.k_star, config.lambda, config.epsilon, config.rho), config.n,
                                seed);
            out.graph = std::move(s.graph);
            out.truth.partition = std::move(s.partition);
            out.truth.theta = std::move(s.theta);
            break;
        }
        case ModelKind::GraphonPowerLaw: {
            auto spec = GraphonSpec::make_power_law(config.rho, config.lambda);
            auto s = sample_graphon(spec, config.n, seed);
            out.graph = std::move(s.graph);
            out.truth.graphon = std::move(spec);
            out.truth.latent = std::move(s.latent);
            break;
        }
        case ModelKind::File:
            if (!file) throw InputError("model 'file' needs loaded data");
            out.graph = file->loaded.graph;
            out.truth.partition = *file->loaded.labels;
            out.truth.theta = file->theta_star.theta;
            break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Per-replicate pipeline

struct ExperimentRecord {
    int replicate = 0;
    std::uint64_t seed = 0;
    int k_input = 0;
    int k_returned = 0;
    double mse_mle = 0.0;
    double mse_eb = 0.0;
    double mse_vbem = 0.0;
    double mse_fixed = 0.0;
    double lower_bound = 0.0;
    bool vb_converged = false;
    SelectionScore score;
    std::vector<std::string> flags;

    json to_json() const {
        return json{{"replicate", replicate},   {"seed", seed},         {"K_input", k_input},
                    {"K_returned", k_returned}, {"mse_mle", mse_mle},   {"mse_eb", mse_eb},
                    {"mse_vbem", mse_vbem},     {"mse_fixed", mse_fixed}, {"lower_bound", lower_bound},
                    {"vb_converged", vb_converged}, {"score", ebgraph::to_json(score)}, {"flags", flags}};
    }
};

/// K chosen by each rule within one replicate, plus the MLE-optimal K̃.
struct ReplicateSelection {
    int k_eb = 0;
    int k_cvrp = 0;
    int k_vbem = 0;
    int k_tilde = 0;
};

struct ReplicateOutcome {
    int replicate = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::vector<ExperimentRecord> records;
    ReplicateSelection selection;
    std::optional<SimulatedGraph> data;
};

/// Error of an estimate against the replicate's truth: node-level MSE for
/// block-model truths, integrated error after degree sorting for graphons.
inline double estimate_error(const Eigen::MatrixXd& theta_hat, const Partition& z, const Truth& truth) {
    if (truth.graphon) {
        const auto step = reorder_identifiable(build_step_graphon(z, theta_hat)).graphon;
        return mse_graphon(step, *truth.graphon);
    }
    return mse_sbm(theta_hat, z, truth.theta, *truth.partition);
}

/// Detection, the three estimators and all scores for every K in the range.
inline std::vector<ExperimentRecord> analyse_graph(const Graph& graph, const Truth& truth,
                                                   std::span<const int> k_range, std::uint64_t seed, int replicate,
                                                   CvrpMode mode) {
    const SpectralEmbedding embedding(graph);
    std::vector<ExperimentRecord> records;
    for (int K : k_range) {
        if (K > graph.n()) throw InputError("K = " + std::to_string(K) + " exceeds the node count");
        const auto det = detect_communities(graph, embedding, K, seed);
        const auto stats = block_stats(graph, det.partition);
        const auto fit = fit_hyperparams(stats);
        const auto mle = mle_estimate(stats);
        const auto eb = eb_estimate(stats, fit.hyper);
        const auto fixed = fixed_prior_estimate(stats);

        ExperimentRecord rec;
        rec.replicate = replicate;
        rec.seed = seed;
        rec.k_input = K;
        rec.k_returned = det.partition.K();
        rec.mse_mle = estimate_error(mle.theta, det.partition, truth);
        rec.mse_eb = estimate_error(eb.theta, det.partition, truth);
        rec.mse_vbem = estimate_error(det.theta_vb, det.partition, truth);
        rec.mse_fixed = estimate_error(fixed.theta, det.partition, truth);
        rec.lower_bound = det.lower_bound;
        rec.vb_converged = det.converged;
        rec.score = score_from_fit(fit, det.partition.sizes(), graph.n(), mode);
        rec.flags = mle.flags;
        if (!fit.diagonal.fitted) rec.flags.emplace_back("diagonal-prior-unfitted");
        if (!fit.offdiagonal.fitted) rec.flags.emplace_back("offdiagonal-prior-unfitted");
        if (!fit.diagonal.converged || !fit.offdiagonal.converged) rec.flags.emplace_back("optimizer-not-converged");
        if (!det.converged) rec.flags.emplace_back("vbem-not-converged");
        records.push_back(std::move(rec));
    }
    return records;
}

inline ReplicateSelection select_within(const std::vector<ExperimentRecord>& records) {
    std::vector<SelectionScore> scores;
    std::vector<std::pair<int, double>> curve;
    for (const auto& r : records) {
        scores.push_back(r.score);
        curve.emplace_back(r.k_returned, r.mse_mle);
    }
    ReplicateSelection sel;
    sel.k_eb = scores[select_best(scores, Criterion::EB)].K;
    sel.k_cvrp = scores[select_best(scores, Criterion::CVRP)].K;
    std::size_t best = 0;
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& c = records[i];
        const auto& b = records[best];
        if (c.lower_bound > b.lower_bound || (c.lower_bound == b.lower_bound && c.k_returned < b.k_returned)) best = i;
    }
    sel.k_vbem = records[best].k_returned;
    sel.k_tilde = k_tilde(curve);
    return sel;
}

inline ReplicateOutcome run_replicate(const ExperimentConfig& config, int r, const FileData* file = nullptr) {
    ReplicateOutcome out;
    out.replicate = r;
    out.seed = replicate_seed(config, r);
    try {
        auto sim = simulate_replicate(config, r, file);
        out.records = analyse_graph(sim.graph, sim.truth, config.k_range, out.seed, r, config.cvrp_mode);
        out.selection = select_within(out.records);
        if (config.write_replicates && config.model != ModelKind::File) out.data = std::move(sim);
        out.ok = true;
    } catch (const InputError& e) {
        out.error = e.what();
    } catch (const NumericalError& e) {
        out.error = e.what();
    } catch (const DomainError& e) {
        out.error = e.what();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Summary

struct KSummary {
    int k_input = 0;
    int count = 0;
    double median_ratio_eb_mle = 0.0;
    double median_ratio_eb_vbem = 0.0;
    double median_ratio_eb_fixed = 0.0;
    double median_mse_mle = 0.0;
    double median_mse_eb = 0.0;
    double median_mse_vbem = 0.0;
    double median_mse_fixed = 0.0;
    double mean_k_returned = 0.0;
};

struct DeviationRow {
    std::string criterion;
    std::optional<double> e_k_star;  // undefined for graphon truths
    double e_k_tilde = 0.0;
    double mean_k_hat = 0.0;
};

struct ExperimentSummary {
    std::vector<KSummary> per_k;
    std::vector<DeviationRow> deviations;
    int succeeded = 0;
    int failed = 0;
};

inline std::optional<int> true_k(const ExperimentConfig& config, const FileData* file) {
    if (config.model == ModelKind::SbmAffiliation) return config.k_star;
    if (config.model == ModelKind::File && file) return file->loaded.labels->K();
    return std::nullopt;
}

inline ExperimentSummary summarize(const ExperimentConfig& config, const std::vector<ReplicateOutcome>& outcomes,
                                   std::optional<int> k_star) {
    ExperimentSummary s;
    for (const auto& o : outcomes) (o.ok ? s.succeeded : s.failed)++;
    for (std::size_t idx = 0; idx < config.k_range.size(); ++idx) {
        KSummary row;
        row.k_input = config.k_range[idx];
        std::vector<double> r_mle, r_vbem, r_fixed, m_mle, m_eb, m_vbem, m_fixed;
        double k_sum = 0.0;
        for (const auto& o : outcomes) {
            if (!o.ok) continue;
            const auto& rec = o.records[idx];
            ++row.count;
            k_sum += rec.k_returned;
            auto ratio = [](double a, double b) { return b > 0.0 ? a / b : std::numeric_limits<double>::quiet_NaN(); };
            r_mle.push_back(ratio(rec.mse_eb, rec.mse_mle));
            r_vbem.push_back(ratio(rec.mse_eb, rec.mse_vbem));
            r_fixed.push_back(ratio(rec.mse_eb, rec.mse_fixed));
            m_mle.push_back(rec.mse_mle);
            m_eb.push_back(rec.mse_eb);
            m_vbem.push_back(rec.mse_vbem);
            m_fixed.push_back(rec.mse_fixed);
        }
        row.median_ratio_eb_mle = median(r_mle);
        row.median_ratio_eb_vbem = median(r_vbem);
        row.median_ratio_eb_fixed = median(r_fixed);
        row.median_mse_mle = median(m_mle);
        row.median_mse_eb = median(m_eb);
        row.median_mse_vbem = median(m_vbem);
        row.median_mse_fixed = median(m_fixed);
        row.mean_k_returned = row.count ? k_sum / row.count : std::numeric_limits<double>::quiet_NaN();
        s.per_k.push_back(row);
    }

    std::vector<int> tildes;
    std::vector<std::pair<std::string, std::vector<int>>> picks{{"eb", {}}, {"cvrp", {}}, {"vbem", {}}};
    for (const auto& o : outcomes) {
        if (!o.ok) continue;
        tildes.push_back(o.selection.k_tilde);
        picks[0].second.push_back(o.selection.k_eb);
        picks[1].second.push_back(o.selection.k_cvrp);
        picks[2].second.push_back(o.selection.k_vbem);
    }
    if (!tildes.empty()) {
        for (const auto& [name, hats] : picks) {
            DeviationRow d;
            d.criterion = name;
            const auto dev = deviation_metrics(hats, k_star.value_or(0), tildes);
            if (k_star) d.e_k_star = dev.from_k_star;
            d.e_k_tilde = dev.from_k_tilde;
            double sum = 0.0;
            for (int k : hats) sum += k;
            d.mean_k_hat = sum / static_cast<double>(hats.size());
            s.deviations.push_back(d);
        }
    }
    return s;
}

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<ReplicateOutcome> replicates;
    ExperimentSummary summary;
    std::optional<int> k_star;
};

inline ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    std::optional<FileData> file;
    if (config.model == ModelKind::File) file = load_file_data(config);
    ExperimentResult result;
    result.config = config;
    result.replicates.resize(static_cast<std::size_t>(config.replicates));
    const FileData* fp = file ? &*file : nullptr;
    parallel_for(config.replicates, config.threads,
                 [&](int r) { result.replicates[static_cast<std::size_t>(r)] = run_replicate(config, r, fp); });
    result.k_star = true_k(config, fp);
    result.summary = summarize(config, result.replicates, result.k_star);
    return result;
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

inline void close_output(std::ofstream& out, const std::filesystem::path& path) {
    out.close();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string replicate_dir_name(int r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "rep-%04d", r);
    return buf;
}

inline std::string optional_double(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace detail

inline void create_output_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

/// Writes a simulated graph and its truth sidecar into `dir` via a temporary
/// sibling directory renamed into place.
inline void write_replicate_dir(const std::filesystem::path& dir, const SimulatedGraph& sim,
                                const std::vector<ExperimentRecord>* records = nullptr) {
    namespace fs = std::filesystem;
    const fs::path tmp = dir.parent_path() / ("." + dir.filename().string() + ".tmp");
    std::error_code ec;
    fs::remove_all(tmp, ec);
    create_output_dir(tmp);
    {
        auto out = detail::open_output(tmp / "graph.txt");
        out << "# n=" << sim.graph.n() << " edges=" << sim.graph.num_edges() << '\n';
        write_edge_list(out, sim.graph);
        detail::close_output(out, tmp / "graph.txt");
    }
    {
        // Pins node order (and isolated nodes) when the edge list is reloaded.
        auto out = detail::open_output(tmp / "nodes.txt");
        write_node_list(out, NodeIndex::sequential(sim.graph.n()));
        detail::close_output(out, tmp / "nodes.txt");
    }
    if (sim.truth.partition) {
        auto out = detail::open_output(tmp / "truth.txt");
        write_partition(out, *sim.truth.partition);
        detail::close_output(out, tmp / "truth.txt");
    }
    if (!sim.truth.latent.empty()) {
        auto out = detail::open_output(tmp / "latent.txt");
        for (std::size_t i = 0; i < sim.truth.latent.size(); ++i)
            out << i << ' ' << format_double(sim.truth.latent[i]) << '\n';
        detail::close_output(out, tmp / "latent.txt");
    }
    if (records) {
        auto out = detail::open_output(tmp / "records.jsonl");
        for (const auto& r : *records) out << r.to_json().dump() << '\n';
        detail::close_output(out, tmp / "records.jsonl");
    }
    fs::remove_all(dir, ec);
    fs::rename(tmp, dir, ec);
    if (ec) throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

inline json manifest_json(const ExperimentConfig& config, const std::string& command) {
    json seeds = json::array();
    for (int r = 0; r < config.replicates; ++r) seeds.push_back(replicate_seed(config, r));
    return json{{"tool", "ebgraph"}, {"version", kVersion}, {"command", command}, {"config", config.to_json()},
                {"seeds", seeds}};
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
    auto out = detail::open_output(path);
    out << j.dump(2) << '\n';
    detail::close_output(out, path);
}

inline void write_summary_csv(std::ostream& out, const ExperimentSummary& s) {
    out << "K,replicates,median_ratio_eb_mle,median_ratio_eb_vbem,median_ratio_eb_fixed,median_mse_mle,"
           "median_mse_eb,median_mse_vbem,median_mse_fixed,mean_k_returned\n";
    for (const auto& r : s.per_k)
        out << r.k_input << ',' << r.count << ',' << format_double(r.median_ratio_eb_mle) << ','
            << format_double(r.median_ratio_eb_vbem) << ',' << format_double(r.median_ratio_eb_fixed) << ','
            << format_double(r.median_mse_mle) << ',' << format_double(r.median_mse_eb) << ','
            << format_double(r.median_mse_vbem) << ',' << format_double(r.median_mse_fixed) << ','
            << format_double(r.mean_k_returned) << '\n';
}

inline void write_deviations_csv(std::ostream& out, const ExperimentSummary& s) {
    out << "criterion,E_Kstar,E_Ktilde,mean_K_hat\n";
    for (const auto& d : s.deviations)
        out << d.criterion << ',' << detail::optional_double(d.e_k_star) << ',' << format_double(d.e_k_tilde) << ','
            << format_double(d.mean_k_hat) << '\n';
}

/// manifest.json, records.jsonl, records.csv, selections.csv, summary.csv,
/// deviations.csv and (for simulated models) replicates/rep-NNNN/.
inline void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result) {
    create_output_dir(dir);
    const auto& config = result.config;

    {
        const auto path = dir / "records.jsonl";
        auto out = detail::open_output(path);
        for (const auto& o : result.replicates)
            for (const auto& r : o.records) out << r.to_json().dump() << '\n';
        detail::close_output(out, path);
    }
    {
        const auto path = dir / "records.csv";
        auto out = detail::open_output(path);
        out << "replicate,seed,K_input,K_returned,mse_mle,mse_eb,mse_vbem,mse_fixed,lower_bound," << score_csv_header()
            << '\n';
        for (const auto& o : result.replicates)
            for (const auto& r : o.records) {
                out << r.replicate << ',' << r.seed << ',' << r.k_input << ',' << r.k_returned << ','
                    << format_double(r.mse_mle) << ',' << format_double(r.mse_eb) << ','
                    << format_double(r.mse_vbem) << ',' << format_double(r.mse_fixed) << ','
                    << format_double(r.lower_bound) << ',';
                write_score_row(out, r.score);
            }
        detail::close_output(out, path);
    }
    {
        const auto path = dir / "selections.csv";
        auto out = detail::open_output(path);
        out << "replicate,seed,K_eb,K_cvrp,K_vbem,K_tilde\n";
        for (const auto& o : result.replicates)
            if (o.ok)
                out << o.replicate << ',' << o.seed << ',' << o.selection.k_eb << ',' << o.selection.k_cvrp << ','
                    << o.selection.k_vbem << ',' << o.selection.k_tilde << '\n';
        detail::close_output(out, path);
    }
    {
        const auto path = dir / "summary.csv";
        auto out = detail::open_output(path);
        write_summary_csv(out, result.summary);
        detail::close_output(out, path);
    }
    {
        const auto path = dir / "deviations.csv";
        auto out = detail::open_output(path);
        write_deviations_csv(out, result.summary);
        detail::close_output(out, path);
    }
    if (config.write_replicates) {
        create_output_dir(dir / "replicates");
        for (const auto& o : result.replicates)
            if (o.ok && o.data) write_replicate_dir(dir / "replicates" / detail::replicate_dir_name(o.replicate), *o.data, &o.records);
    }

    auto manifest = manifest_json(config, "experiment");
    manifest["replicates_ok"] = result.summary.succeeded;
    manifest["replicates_failed"] = result.summary.failed;
    json failures = json::array();
    for (const auto& o : result.replicates)
        if (!o.ok) failures.push_back({{"replicate", o.replicate}, {"seed", o.seed}, {"error", o.error}});
    manifest["failures"] = failures;
    if (result.k_star) manifest["k_star"] = *result.k_star;
    write_json_file(dir / "manifest.json", manifest);
}

// ---------------------------------------------------------------------------
// Held-out likelihood protocol

struct SplitRecord {
    int split = 0;
    std::uint64_t seed = 0;
    int train_size = 0;
    double ll_mle = 0.0;
    double ll_eb = 0.0;
    double ll_fixed = 0.0;
    HyperParams hyper;

    json to_json() const {
        return json{{"split", split},   {"seed", seed},   {"train_size", train_size}, {"ll_mle", ll_mle},
                    {"ll_eb", ll_eb},   {"ll_fixed", ll_fixed}, {"hyper", ebgraph::to_json(hyper)}};
    }
};

/// Fits each estimator on the nodes of one random split, using the annotated
/// labels of the training nodes, and scores the held-out pairs.
inline SplitRecord run_split(const Graph& graph, const Partition& labels, int index, std::uint64_t seed,
                             double fraction = 0.7) {
    const auto split = split_nodes(graph.n(), fraction, seed);
    const auto stats = subset_block_stats(graph, labels, split.train);
    SplitRecord rec;
    rec.split = index;
    rec.seed = seed;
    rec.train_size = static_cast<int>(split.train.size());
    const auto fit = fit_hyperparams(stats);
    rec.hyper = fit.hyper;
    rec.ll_mle = test_loglik(graph, labels, mle_estimate(stats).theta, split.train, split.test);
    rec.ll_eb = test_loglik(graph, labels, eb_estimate(stats, fit.hyper).theta, split.train, split.test);
    rec.ll_fixed = test_loglik(graph, labels, fixed_prior_estimate(stats).theta, split.train, split.test);
    return rec;
}

inline std::vector<SplitRecord> run_split_protocol(const Graph& graph, const Partition& labels, int splits,
                                                   std::uint64_t base_seed, double fraction = 0.7, int threads = 0) {
    if (splits < 1) throw InputError("need at least one split");
    std::vector<SplitRecord> out(static_cast<std::size_t>(splits));
    parallel_for(splits, threads, [&](int s) {
        out[static_cast<std::size_t>(s)] =
            run_split(graph, labels, s, base_seed + static_cast<std::uint64_t>(s), fraction);
    });
    return out;
}

}  // namespace ebgraph
