#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mblingam {

class singular_matrix_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class rank_deficiency_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class degenerate_assignment_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class pipeline_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// m variables by n samples; one column per observation.
struct DataMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> variable_names;

    Eigen::Index num_variables() const { return values.rows(); }
    Eigen::Index num_samples() const { return values.cols(); }
};

inline std::vector<std::string> default_variable_names(Eigen::Index m) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) names.push_back("x" + std::to_string(i + 1));
    return names;
}

inline void validate(const DataMatrix& data) {
    const Eigen::Index m = data.num_variables();
    const Eigen::Index n = data.num_samples();
    if (m < 2) throw std::invalid_argument("DataMatrix: need at least 2 variables");
    if (n < m) throw std::invalid_argument("DataMatrix: need at least as many samples as variables");
    if (!data.values.allFinite()) throw std::invalid_argument("DataMatrix: non-finite entry");
    if (!data.variable_names.empty() &&
        data.variable_names.size() != static_cast<std::size_t>(m)) {
        throw std::invalid_argument("DataMatrix: variable_names size mismatch");
    }
}

// Direct-effect matrix; b(i,j) is the effect of variable j on variable i.
struct ConnectionMatrix {
    Eigen::MatrixXd b;

    Eigen::Index size() const { return b.rows(); }
};

inline ConnectionMatrix make_connection_matrix(Eigen::MatrixXd b) {
    if (b.rows() != b.cols()) throw std::invalid_argument("ConnectionMatrix: must be square");
    if (!b.allFinite()) throw std::invalid_argument("ConnectionMatrix: non-finite entry");
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
        if (b(i, i) != 0.0) throw std::invalid_argument("ConnectionMatrix: diagonal must be zero");
    }
    return ConnectionMatrix{std::move(b)};
}

// True iff some permutation makes b strictly lower triangular. Decided on the
// exact zero pattern by repeatedly peeling variables with no remaining parents.
inline bool is_acyclic(const ConnectionMatrix& cm) {
    const Eigen::Index m = cm.size();
    std::vector<bool> removed(static_cast<std::size_t>(m), false);
    for (Eigen::Index step = 0; step < m; ++step) {
        Eigen::Index found = -1;
        for (Eigen::Index i = 0; i < m && found < 0; ++i) {
            if (removed[static_cast<std::size_t>(i)]) continue;
            bool source = true;
            for (Eigen::Index j = 0; j < m; ++j) {
                if (j == i || removed[static_cast<std::size_t>(j)]) continue;
                if (cm.b(i, j) != 0.0) {
                    source = false;
                    break;
                }
            }
            if (source) found = i;
        }
        if (found < 0) return false;
        removed[static_cast<std::size_t>(found)] = true;
    }
    return true;
}

struct TotalEffectMatrix {
    Eigen::MatrixXd a;
};

// Permutation of variables; order[p] is the variable at position p.
struct CausalOrder {
    std::vector<int> order;

    int size() const { return static_cast<int>(order.size()); }

    // k(i): position of variable i within the order.
    std::vector<int> positions() const {
        std::vector<int> k(order.size(), -1);
        for (std::size_t p = 0; p < order.size(); ++p) {
            k[static_cast<std::size_t>(order[p])] = static_cast<int>(p);
        }
        return k;
    }
};

inline void validate(const CausalOrder& co) {
    std::vector<bool> seen(co.order.size(), false);
    for (int v : co.order) {
        if (v < 0 || v >= co.size() || seen[static_cast<std::size_t>(v)]) {
            throw std::invalid_argument("CausalOrder: not a permutation");
        }
        seen[static_cast<std::size_t>(v)] = true;
    }
}

enum class Sign { positive, negative };

inline char sign_char(Sign s) { return s == Sign::positive ? '+' : '-'; }

// Signed directed hypothesis: variable `cause` directly causes variable
// `effect` with the stated coefficient sign.
struct HypothesisId {
    int effect = 0;
    int cause = 0;
    Sign sign = Sign::positive;

    friend bool operator==(const HypothesisId&, const HypothesisId&) = default;
};

inline HypothesisId make_hypothesis(int effect, int cause, Sign sign) {
    if (effect == cause) throw std::invalid_argument("HypothesisId: effect == cause");
    if (effect < 0 || cause < 0) throw std::invalid_argument("HypothesisId: negative index");
    return HypothesisId{effect, cause, sign};
}

// Fixed enumeration of all 2*m*(m-1) signed pairwise hypotheses; the row
// order of every count table and p-value report.
inline std::vector<HypothesisId> enumerate_hypotheses(int m) {
    std::vector<HypothesisId> out;
    out.reserve(static_cast<std::size_t>(2 * m * (m - 1)));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            out.push_back(HypothesisId{i, j, Sign::positive});
            out.push_back(HypothesisId{i, j, Sign::negative});
        }
    }
    return out;
}

inline int hypothesis_index(int m, const HypothesisId& h) {
    const int col = h.cause < h.effect ? h.cause : h.cause - 1;
    return (h.effect * (m - 1) + col) * 2 + (h.sign == Sign::negative ? 1 : 0);
}

}  // namespace mblingam
