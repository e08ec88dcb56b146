#pragma once

// JSON and CSV encodings of estimates, step graphons and selection scores.
// Doubles are written in shortest round-trip form so reruns are byte-identical.

#include <charconv>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eb_estimator.hpp"
#include "graphon.hpp"
#include "model_select.hpp"

namespace ebgraph {

using json = nlohmann::json;

/// Shortest decimal string that reads back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, end);
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index a = 0; a < m.rows(); ++a) {
        json row = json::array();
        for (Eigen::Index b = 0; b < m.cols(); ++b) row.push_back(m(a, b));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::MatrixXd m(rows, rows);
    for (Eigen::Index a = 0; a < rows; ++a) {
        if (j[a].size() != j.size()) throw InputError("matrix must be square");
        for (Eigen::Index b = 0; b < rows; ++b) m(a, b) = j[a][b].get<double>();
    }
    return m;
}

inline json to_json(const HyperParams& h) {
    return json{{"alpha0", h.alpha0}, {"beta0", h.beta0}, {"alpha1", h.alpha1}, {"beta1", h.beta1}};
}

inline json to_json(const ConnectivityEstimate& e) {
    json j{{"K", e.K()}, {"method", method_name(e.method)}, {"theta", matrix_to_json(e.theta)}};
    j["hyper"] = e.hyper ? to_json(*e.hyper) : json(nullptr);
    j["shrinkage"] = e.shrinkage ? matrix_to_json(*e.shrinkage) : json(nullptr);
    j["flags"] = e.flags;
    return j;
}

inline json to_json(const StepGraphon& g) {
    return json{{"boundaries", g.boundaries}, {"theta", matrix_to_json(g.theta)}};
}

inline StepGraphon step_graphon_from_json(const json& j) {
    StepGraphon g{j.at("boundaries").get<std::vector<double>>(), matrix_from_json(j.at("theta"))};
    g.validate();
    return g;
}

inline json to_json(const SelectionScore& s) {
    return json{{"K", s.K},         {"j_z", s.j_z},   {"penalty", s.penalty},
                {"total", s.total}, {"cvrp", s.cvrp}, {"hyper", to_json(s.hyper)}};
}

inline const char* score_csv_header() { return "K,j_z,penalty,total,cvrp,alpha0,beta0,alpha1,beta1"; }

inline void write_score_row(std::ostream& out, const SelectionScore& s) {
    out << s.K << ',' << format_double(s.j_z) << ',' << format_double(s.penalty) << ',' << format_double(s.total)
        << ',' << format_double(s.cvrp) << ',' << format_double(s.hyper.alpha0) << ','
        << format_double(s.hyper.beta0) << ',' << format_double(s.hyper.alpha1) << ','
        << format_double(s.hyper.beta1) << '\n';
}

inline void write_score_csv(std::ostream& out, std::span<const SelectionScore> scores) {
    out << score_csv_header() << '\n';
    for (const auto& s : scores) write_score_row(out, s);
}

/// G×G midpoint evaluations, one CSV row per x.
inline void write_graphon_grid(std::ostream& out, const StepGraphon& g, int G) {
    if (G < 1) throw InputError("grid size must be positive");
    for (int i = 0; i < G; ++i) {
        const double x = (i + 0.5) / G;
        for (int j = 0; j < G; ++j) {
            if (j) out << ',';
            out << format_double(evaluate(g, x, (j + 0.5) / G));
        }
        out << '\n';
    }
}

}  // namespace ebgraph
