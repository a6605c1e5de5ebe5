#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mblingam/msboot.hpp"
#include "mblingam/psifit.hpp"
#include "mblingam/simulate.hpp"
#include "mblingam/types.hpp"

namespace mblingam::io {

using ordered_json = nlohmann::ordered_json;

class csv_error : public std::runtime_error {
public:
    csv_error(std::size_t line, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Shortest round-trip decimal form; locale-independent and stable, so equal
// inputs always serialize to equal bytes.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::string quote_if_needed(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted) throw csv_error(line_no, "unterminated quoted field");
    fields.push_back(cur);
    return fields;
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    std::size_t b = s.find_last_not_of(" \t");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& raw, std::size_t line_no, const std::string& what) {
    const std::string s = trim(raw);
    double value = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw csv_error(line_no, "cannot parse " + what + " from '" + raw + "'");
    }
    if (!std::isfinite(value)) {
        throw csv_error(line_no, what + " must be finite, got '" + raw + "'");
    }
    return value;
}

inline long parse_long(const std::string& raw, std::size_t line_no, const std::string& what) {
    const std::string s = trim(raw);
    long value = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw csv_error(line_no, "cannot parse " + what + " from '" + raw + "'");
    }
    return value;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open input file: " + path);
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    return out;
}

inline int variable_index(const std::vector<std::string>& names, const std::string& name,
                          std::size_t line_no) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    throw csv_error(line_no, "unknown variable name '" + name + "'");
}

inline Sign parse_sign(const std::string& raw, std::size_t line_no) {
    const std::string s = trim(raw);
    if (s == "+") return Sign::positive;
    if (s == "-") return Sign::negative;
    throw csv_error(line_no, "sign must be '+' or '-', got '" + raw + "'");
}

}  // namespace detail

// ---- Dataset CSV: header of variable names, one sample per row ----------

inline DataMatrix read_data_csv(const std::string& path) {
    std::ifstream in = detail::open_input(path);
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) throw csv_error(1, "empty file");
    ++line_no;
    std::vector<std::string> names = detail::split_csv_line(line, line_no);
    for (auto& n : names) n = detail::trim(n);
    const std::size_t m = names.size();
    if (m < 2) throw csv_error(line_no, "need at least 2 variable columns");

    std::vector<double> flat;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const std::vector<std::string> fields = detail::split_csv_line(line, line_no);
        if (fields.size() != m) {
            throw csv_error(line_no, "expected " + std::to_string(m) + " fields, got " +
                                         std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < m; ++c) {
            flat.push_back(detail::parse_double(fields[c], line_no, "value"));
        }
        ++rows;
    }
    if (rows < m) throw csv_error(line_no, "need at least as many samples as variables");

    DataMatrix data;
    data.variable_names = names;
    data.values.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < m; ++c) {
            data.values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) =
                flat[r * m + c];
        }
    }
    validate(data);
    return data;
}

inline void write_data_csv(const DataMatrix& data, const std::string& path) {
    std::ofstream out = detail::open_output(path);
    const std::vector<std::string> names = data.variable_names.empty()
                                               ? default_variable_names(data.num_variables())
                                               : data.variable_names;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out << ',';
        out << detail::quote_if_needed(names[i]);
    }
    out << '\n';
    for (Eigen::Index t = 0; t < data.num_samples(); ++t) {
        for (Eigen::Index i = 0; i < data.num_variables(); ++i) {
            if (i) out << ',';
            out << format_double(data.values(i, t));
        }
        out << '\n';
    }
}

// ---- Count table: the msboot -> psifit contract --------------------------

inline void write_counts_csv(const BpCountTable& table, const std::string& path) {
    std::ofstream out = detail::open_output(path);
    out << "effect,cause,sign,scale_index,sigma_sq,n_star,count,q_effective\n";
    for (std::size_t hidx = 0; hidx < table.hypotheses.size(); ++hidx) {
        const HypothesisId& h = table.hypotheses[hidx];
        for (int d = 0; d < table.plan.num_scales(); ++d) {
            const ScaleEntry& e = table.plan.entries[static_cast<std::size_t>(d)];
            out << detail::quote_if_needed(table.variable_names[static_cast<std::size_t>(h.effect)]) << ','
                << detail::quote_if_needed(table.variable_names[static_cast<std::size_t>(h.cause)]) << ','
                << sign_char(h.sign) << ',' << (d + 1) << ',' << format_double(e.sigma_sq) << ','
                << e.n_star << ',' << table.counts[static_cast<std::size_t>(d)][hidx] << ','
                << table.q_effective[static_cast<std::size_t>(d)] << '\n';
        }
    }
}

inline BpCountTable read_counts_csv(const std::string& path) {
    std::ifstream in = detail::open_input(path);
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) throw csv_error(1, "empty file");
    ++line_no;
    const std::vector<std::string> header = detail::split_csv_line(line, line_no);
    const std::vector<std::string> expected = {"effect", "cause",  "sign",  "scale_index",
                                               "sigma_sq", "n_star", "count", "q_effective"};
    if (header.size() != expected.size()) throw csv_error(line_no, "unexpected column count");
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (detail::trim(header[i]) != expected[i]) {
            throw csv_error(line_no, "expected column '" + expected[i] + "', got '" + header[i] + "'");
        }
    }

    struct Row {
        std::string effect, cause;
        Sign sign;
        int scale_index;
        double sigma_sq;
        long n_star, count, q_effective;
        std::size_t line_no;
    };
    std::vector<Row> rows;
    std::vector<std::string> names;  // in order of first appearance
    auto intern = [&](const std::string& name) {
        for (const std::string& n : names) {
            if (n == name) return;
        }
        names.push_back(name);
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const std::vector<std::string> f = detail::split_csv_line(line, line_no);
        if (f.size() != expected.size()) throw csv_error(line_no, "unexpected field count");
        Row row;
        row.effect = detail::trim(f[0]);
        row.cause = detail::trim(f[1]);
        row.sign = detail::parse_sign(f[2], line_no);
        row.scale_index = static_cast<int>(detail::parse_long(f[3], line_no, "scale_index"));
        row.sigma_sq = detail::parse_double(f[4], line_no, "sigma_sq");
        row.n_star = detail::parse_long(f[5], line_no, "n_star");
        row.count = detail::parse_long(f[6], line_no, "count");
        row.q_effective = detail::parse_long(f[7], line_no, "q_effective");
        row.line_no = line_no;
        if (row.scale_index < 1) throw csv_error(line_no, "scale_index must be >= 1");
        if (!(row.sigma_sq > 0.0)) throw csv_error(line_no, "sigma_sq must be > 0");
        if (row.count < 0 || row.q_effective < 0 || row.count > row.q_effective) {
            throw csv_error(line_no, "need 0 <= count <= q_effective");
        }
        intern(row.effect);
        intern(row.cause);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw csv_error(line_no, "no data rows");

    int num_scales = 0;
    for (const Row& r : rows) num_scales = std::max(num_scales, r.scale_index);
    if (num_scales < 2) throw csv_error(rows.front().line_no, "need at least 2 scales");

    const int m = static_cast<int>(names.size());
    if (m < 2) throw csv_error(rows.front().line_no, "need at least 2 distinct variables");

    BpCountTable table;
    table.m = m;
    table.variable_names = names;
    table.hypotheses = enumerate_hypotheses(m);
    table.counts.assign(static_cast<std::size_t>(num_scales),
                        std::vector<long>(table.hypotheses.size(), -1));
    table.q_effective.assign(static_cast<std::size_t>(num_scales), -1);
    table.plan.entries.assign(static_cast<std::size_t>(num_scales), ScaleEntry{0, 0.0});
    table.plan.replicates = 0;

    for (const Row& r : rows) {
        const int e = detail::variable_index(names, r.effect, r.line_no);
        const int c = detail::variable_index(names, r.cause, r.line_no);
        if (e == c) throw csv_error(r.line_no, "effect and cause must differ");
        const auto d = static_cast<std::size_t>(r.scale_index - 1);
        ScaleEntry& entry = table.plan.entries[d];
        if (entry.n_star == 0) {
            entry.n_star = r.n_star;
            entry.sigma_sq = r.sigma_sq;
        } else if (entry.n_star != r.n_star || entry.sigma_sq != r.sigma_sq) {
            throw csv_error(r.line_no, "inconsistent scale definition for scale_index " +
                                           std::to_string(r.scale_index));
        }
        long& q_eff = table.q_effective[d];
        if (q_eff < 0) {
            q_eff = r.q_effective;
        } else if (q_eff != r.q_effective) {
            throw csv_error(r.line_no, "inconsistent q_effective for scale_index " +
                                           std::to_string(r.scale_index));
        }
        const auto hidx =
            static_cast<std::size_t>(hypothesis_index(m, HypothesisId{e, c, r.sign}));
        if (table.counts[d][hidx] >= 0) throw csv_error(r.line_no, "duplicate row");
        table.counts[d][hidx] = r.count;
    }

    for (std::size_t d = 0; d < table.counts.size(); ++d) {
        if (table.plan.entries[d].n_star == 0) {
            throw csv_error(rows.back().line_no,
                            "missing rows for scale_index " + std::to_string(d + 1));
        }
        for (std::size_t hidx = 0; hidx < table.hypotheses.size(); ++hidx) {
            if (table.counts[d][hidx] < 0) {
                throw csv_error(rows.back().line_no, "missing rows for some hypothesis");
            }
        }
        table.plan.replicates = std::max(table.plan.replicates, table.q_effective[d]);
    }
    table.plan.n = std::llround(table.plan.entries.front().sigma_sq *
                                static_cast<double>(table.plan.entries.front().n_star));
    return table;
}

inline ordered_json counts_to_json(const BpCountTable& table) {
    ordered_json j;
    j["variable_names"] = table.variable_names;
    j["n"] = table.plan.n;
    j["replicates"] = table.plan.replicates;
    ordered_json scales = ordered_json::array();
    for (int d = 0; d < table.plan.num_scales(); ++d) {
        const ScaleEntry& e = table.plan.entries[static_cast<std::size_t>(d)];
        scales.push_back({{"index", d + 1},
                          {"n_star", e.n_star},
                          {"sigma_sq", e.sigma_sq},
                          {"q_effective", table.q_effective[static_cast<std::size_t>(d)]}});
    }
    j["scales"] = std::move(scales);
    ordered_json hyps = ordered_json::array();
    for (std::size_t hidx = 0; hidx < table.hypotheses.size(); ++hidx) {
        const HypothesisId& h = table.hypotheses[hidx];
        ordered_json counts = ordered_json::array();
        for (int d = 0; d < table.plan.num_scales(); ++d) {
            counts.push_back(table.counts[static_cast<std::size_t>(d)][hidx]);
        }
        hyps.push_back({{"effect", table.variable_names[static_cast<std::size_t>(h.effect)]},
                        {"cause", table.variable_names[static_cast<std::size_t>(h.cause)]},
                        {"sign", std::string(1, sign_char(h.sign))},
                        {"counts", std::move(counts)}});
    }
    j["hypotheses"] = std::move(hyps);
    return j;
}

inline void write_counts_json(const BpCountTable& table, const std::string& path) {
    std::ofstream out = detail::open_output(path);
    out << counts_to_json(table).dump(2) << '\n';
}

// ---- P-value report ------------------------------------------------------

inline std::string model_label(const PsiFitResult& fit) {
    if (fit.saturation != Saturation::none) return "saturated";
    return std::string(psi_kind_name(fit.model.kind)) + std::to_string(fit.model.h());
}

inline void write_pvalues_csv(const PvalueReport& report, const std::string& path) {
    std::ofstream out = detail::open_output(path);
    out << "effect,cause,sign,p_bp,p_mb,model_kind,aic\n";
    for (const HypothesisResult& r : report.results) {
        out << detail::quote_if_needed(report.variable_names[static_cast<std::size_t>(r.id.effect)])
            << ','
            << detail::quote_if_needed(report.variable_names[static_cast<std::size_t>(r.id.cause)])
            << ',' << sign_char(r.id.sign) << ',' << format_double(r.p_bp) << ','
            << format_double(r.p_mb) << ',' << model_label(r.best) << ','
            << format_double(r.best.aic) << '\n';
    }
}

namespace detail {

inline ordered_json fit_to_json(const PsiFitResult& fit) {
    ordered_json j;
    j["kind"] = psi_kind_name(fit.model.kind);
    j["h"] = fit.model.h();
    j["beta"] = fit.model.beta;
    j["nll"] = fit.nll;
    j["aic"] = fit.aic;
    j["converged"] = fit.converged;
    j["saturation"] = fit.saturation == Saturation::none
                          ? "none"
                          : (fit.saturation == Saturation::all_zero ? "all_zero" : "all_q");
    return j;
}

}  // namespace detail

inline ordered_json pvalues_to_json(const PvalueReport& report) {
    ordered_json j;
    j["variable_names"] = report.variable_names;
    j["h"] = report.h;
    ordered_json results = ordered_json::array();
    for (const HypothesisResult& r : report.results) {
        ordered_json entry;
        entry["effect"] = report.variable_names[static_cast<std::size_t>(r.id.effect)];
        entry["cause"] = report.variable_names[static_cast<std::size_t>(r.id.cause)];
        entry["sign"] = std::string(1, sign_char(r.id.sign));
        entry["p_bp"] = r.p_bp;
        entry["p_mb"] = r.p_mb;
        entry["bp_scale_index"] = r.bp_scale_index + 1;
        entry["best"] = detail::fit_to_json(r.best);
        ordered_json cands = ordered_json::array();
        for (const PsiFitResult& fit : r.candidates) cands.push_back(detail::fit_to_json(fit));
        entry["candidates"] = std::move(cands);
        ordered_json zs = ordered_json::array();
        for (const auto& [sigma, sz] : r.best.z_values) zs.push_back({sigma, sz});
        entry["normalized_z"] = std::move(zs);
        entry["warnings"] = r.warnings;
        results.push_back(std::move(entry));
    }
    j["results"] = std::move(results);
    return j;
}

inline void write_pvalues_json(const PvalueReport& report, const std::string& path) {
    std::ofstream out = detail::open_output(path);
    out << pvalues_to_json(report).dump(2) << '\n';
}

// ---- Calibration report ---------------------------------------------------

inline void write_raw_pvalues_csv(const CalibrationReport& report, const std::string& path) {
    std::ofstream out = detail::open_output(path);
    out << "dataset,effect,cause,sign,p_bp,p_mb\n";
    for (const HypothesisCalibration& cal : report.hypotheses) {
        for (std::size_t i = 0; i < cal.dataset_index.size(); ++i) {
            out << cal.dataset_index[i] << ','
                << detail::quote_if_needed(
                       report.variable_names[static_cast<std::size_t>(cal.id.effect)])
                << ','
                << detail::quote_if_needed(
                       report.variable_names[static_cast<std::size_t>(cal.id.cause)])
                << ',' << sign_char(cal.id.sign) << ',' << format_double(cal.p_bp[i]) << ','
                << format_double(cal.p_mb[i]) << '\n';
        }
    }
}

inline void write_rejection_csv(const CalibrationReport& report, const std::string& path) {
    std::ofstream out = detail::open_output(path);
    out << "effect,cause,sign,alpha,prob_bp,prob_mb\n";
    for (const HypothesisCalibration& cal : report.hypotheses) {
        for (std::size_t a = 0; a < report.alpha_grid.size(); ++a) {
            out << detail::quote_if_needed(
                       report.variable_names[static_cast<std::size_t>(cal.id.effect)])
                << ','
                << detail::quote_if_needed(
                       report.variable_names[static_cast<std::size_t>(cal.id.cause)])
                << ',' << sign_char(cal.id.sign) << ',' << format_double(report.alpha_grid[a])
                << ',' << format_double(cal.reject_bp[a]) << ',' << format_double(cal.reject_mb[a])
                << '\n';
        }
    }
}

inline ordered_json calibration_to_json(const CalibrationReport& report) {
    ordered_json j;
    j["variable_names"] = report.variable_names;
    j["alpha_grid"] = report.alpha_grid;
    j["datasets_requested"] = report.datasets_requested;
    j["datasets_failed"] = report.datasets_failed;
    ordered_json hyps = ordered_json::array();
    for (const HypothesisCalibration& cal : report.hypotheses) {
        ordered_json entry;
        entry["effect"] = report.variable_names[static_cast<std::size_t>(cal.id.effect)];
        entry["cause"] = report.variable_names[static_cast<std::size_t>(cal.id.cause)];
        entry["sign"] = std::string(1, sign_char(cal.id.sign));
        entry["ks_bp"] = cal.ks_bp;
        entry["ks_mb"] = cal.ks_mb;
        entry["dataset_index"] = cal.dataset_index;
        entry["p_bp"] = cal.p_bp;
        entry["p_mb"] = cal.p_mb;
        entry["reject_bp"] = cal.reject_bp;
        entry["reject_mb"] = cal.reject_mb;
        hyps.push_back(std::move(entry));
    }
    j["hypotheses"] = std::move(hyps);
    return j;
}

inline void write_calibration_json(const CalibrationReport& report, const std::string& path) {
    std::ofstream out = detail::open_output(path);
    out << calibration_to_json(report).dump(2) << '\n';
}

// ---- SimConfig JSON -------------------------------------------------------

inline SimConfig sim_config_from_json(const ordered_json& j) {
    SimConfig cfg;
    if (!j.contains("b")) throw std::invalid_argument("config: missing field 'b'");
    const auto& rows = j.at("b");
    const auto m = static_cast<Eigen::Index>(rows.size());
    if (m < 2) throw std::invalid_argument("config: 'b' must be at least 2x2");
    Eigen::MatrixXd b(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& row = rows.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != m) {
            throw std::invalid_argument("config: 'b' must be square");
        }
        for (Eigen::Index k = 0; k < m; ++k) b(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    cfg.model = make_connection_matrix(std::move(b));

    cfg.noise.variance = j.value("noise_variance", 2.0);
    cfg.n = j.value("n", 1000L);
    cfg.datasets = j.value("datasets", 1280);
    if (j.contains("plan")) {
        const auto& p = j.at("plan");
        cfg.plan.sigma_sq_min = p.value("sigma_sq_min", cfg.plan.sigma_sq_min);
        cfg.plan.sigma_sq_max = p.value("sigma_sq_max", cfg.plan.sigma_sq_max);
        cfg.plan.num_scales = p.value("num_scales", cfg.plan.num_scales);
        cfg.plan.replicates = p.value("replicates", cfg.plan.replicates);
    }
    if (j.contains("ica")) {
        const auto& p = j.at("ica");
        cfg.ica.restarts = p.value("restarts", cfg.ica.restarts);
        cfg.ica.max_iterations = p.value("max_iterations", cfg.ica.max_iterations);
        cfg.ica.convergence_tol = p.value("convergence_tol", cfg.ica.convergence_tol);
        const std::string nl = p.value("nonlinearity", std::string("tanh"));
        if (nl == "tanh") cfg.ica.nonlinearity = IcaNonlinearity::tanh;
        else if (nl == "cube") cfg.ica.nonlinearity = IcaNonlinearity::cube;
        else throw std::invalid_argument("config: nonlinearity must be 'tanh' or 'cube'");
    }
    cfg.h = j.value("h", 3);
    if (j.contains("alpha_grid")) cfg.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
    else cfg.alpha_grid = default_alpha_grid();
    cfg.master_seed = j.value("seed", static_cast<std::uint64_t>(1));
    return cfg;
}

inline SimConfig read_sim_config(const std::string& path) {
    std::ifstream in = detail::open_input(path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    return sim_config_from_json(j);
}

}  // namespace mblingam::io
