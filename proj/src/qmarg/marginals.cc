#include "qmarg/marginals.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qmarg {

DensityMatrix::DensityMatrix(size_t n_qubits, HermitianMatrix matrix) : n_qubits_(n_qubits), matrix_(std::move(matrix)) {
    if (n_qubits == 0 || matrix_.dim() != (size_t{1} << n_qubits)) {
        throw std::invalid_argument(
            "density matrix on " + std::to_string(n_qubits) + " qubits needs dimension 2^n, got " +
            std::to_string(matrix_.dim()));
    }
}

DensityMatrix::DensityMatrix(const PureState &pure) : DensityMatrix(pure.n_qubits(), pure.projector()) {}

DensityMatrix DensityMatrix::checked(size_t n_qubits, HermitianMatrix matrix, double trace_tol, double psd_tol) {
    DensityMatrix out(n_qubits, std::move(matrix));
    if (auto problem = out.problems(trace_tol, psd_tol)) {
        throw std::invalid_argument(*problem);
    }
    return out;
}

std::optional<std::string> DensityMatrix::problems(double trace_tol, double psd_tol) const {
    double tr = matrix_.trace();
    if (std::abs(tr - 1) > trace_tol) {
        return "trace is " + std::to_string(tr) + ", expected 1";
    }
    double lambda = min_eigenvalue(matrix_);
    if (lambda < -psd_tol) {
        std::ostringstream msg;
        msg << "not positive semidefinite (minimum eigenvalue " << lambda << ")";
        return msg.str();
    }
    return std::nullopt;
}

double trace_distance(const DensityMatrix &a, const DensityMatrix &b) {
    return trace_distance(a.matrix(), b.matrix());
}

HermitianMatrix partial_transpose(const DensityMatrix &m, std::span<const size_t> qubits) {
    return partial_transpose(m.matrix(), m.n_qubits(), qubits);
}

namespace {

std::vector<size_t> parse_labels(const std::string &text) {
    std::vector<size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
        if (item.empty()) {
            throw std::invalid_argument("empty qubit label in subset \"" + text + "\"");
        }
        size_t used = 0;
        long value = std::stol(item, &used);
        if (used != item.size() || value < 1) {
            throw std::invalid_argument("bad qubit label \"" + item + "\" (labels are 1-based integers)");
        }
        out.push_back(static_cast<size_t>(value));
    }
    return out;
}

void normalize_subset(QubitSet &s) {
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
        throw std::invalid_argument("subset lists a qubit twice");
    }
}

void combinations(size_t first, size_t n, size_t k, QubitSet &prefix, std::vector<QubitSet> &out) {
    if (prefix.size() == k) {
        out.push_back(prefix);
        return;
    }
    for (size_t q = first; q <= n; q++) {
        prefix.push_back(q);
        combinations(q + 1, n, k, prefix, out);
        prefix.pop_back();
    }
}

size_t parse_k(const std::string &text, const std::string &prefix) {
    std::string rest = text.substr(prefix.size());
    size_t used = 0;
    long value = std::stol(rest, &used);
    if (used != rest.size() || value < 1) {
        throw std::invalid_argument("bad subset size in descriptor \"" + text + "\"");
    }
    return static_cast<size_t>(value);
}

}  // namespace

SubsetSpec SubsetSpec::of(std::vector<QubitSet> subsets) {
    for (auto &s : subsets) {
        normalize_subset(s);
    }
    return SubsetSpec{Kind::Explicit, 0, std::move(subsets)};
}

SubsetSpec SubsetSpec::parse(const std::string &text) {
    if (text == "star") {
        return star();
    }
    if (text == "chain") {
        return chain();
    }
    try {
        if (text.rfind("all-k:", 0) == 0) {
            return all_k(parse_k(text, "all-k:"));
        }
        if (text.rfind("star-k:", 0) == 0) {
            return star_k(parse_k(text, "star-k:"));
        }
        std::vector<QubitSet> subsets;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ';')) {
            subsets.push_back(parse_labels(item));
        }
        if (subsets.empty()) {
            throw std::invalid_argument("empty descriptor");
        }
        return of(std::move(subsets));
    } catch (const std::logic_error &e) {
        throw std::invalid_argument(
            "malformed marginal descriptor \"" + text +
            "\" (expected star | chain | all-k:K | star-k:K | i,j,...;k,l,...): " + e.what());
    }
}

std::string SubsetSpec::name() const {
    switch (kind) {
        case Kind::Star:
            return "star";
        case Kind::Chain:
            return "chain";
        case Kind::AllK:
            return "all-k";
        case Kind::StarK:
            return "star-k";
        case Kind::Explicit:
            return "explicit";
    }
    return "explicit";
}

std::string SubsetSpec::to_string() const {
    switch (kind) {
        case Kind::Star:
        case Kind::Chain:
            return name();
        case Kind::AllK:
        case Kind::StarK:
            return name() + ":" + std::to_string(k);
        case Kind::Explicit:
            break;
    }
    std::string out;
    for (size_t i = 0; i < explicit_subsets.size(); i++) {
        if (i) {
            out += ';';
        }
        for (size_t j = 0; j < explicit_subsets[i].size(); j++) {
            if (j) {
                out += ',';
            }
            out += std::to_string(explicit_subsets[i][j]);
        }
    }
    return out;
}

std::vector<QubitSet> SubsetSpec::subsets(size_t n) const {
    std::vector<QubitSet> out;
    switch (kind) {
        case Kind::Star:
            if (n < 2) {
                throw std::invalid_argument("star marginals need at least 2 qubits");
            }
            for (size_t q = 2; q <= n; q++) {
                out.push_back({1, q});
            }
            break;
        case Kind::Chain:
            if (n < 2) {
                throw std::invalid_argument("chain marginals need at least 2 qubits");
            }
            for (size_t q = 1; q < n; q++) {
                out.push_back({q, q + 1});
            }
            break;
        case Kind::AllK: {
            if (k < 1 || k > n) {
                throw std::invalid_argument("all-k:" + std::to_string(k) + " does not fit " + std::to_string(n) + " qubits");
            }
            QubitSet prefix;
            combinations(1, n, k, prefix, out);
            break;
        }
        case Kind::StarK: {
            if (k < 1 || k > n) {
                throw std::invalid_argument("star-k:" + std::to_string(k) + " does not fit " + std::to_string(n) + " qubits");
            }
            QubitSet prefix{1};
            combinations(2, n, k, prefix, out);
            break;
        }
        case Kind::Explicit:
            for (const auto &s : explicit_subsets) {
                if (s.empty()) {
                    throw std::invalid_argument("empty subset in marginal descriptor");
                }
                if (s.back() > n) {
                    throw std::invalid_argument(
                        "qubit " + std::to_string(s.back()) + " out of range for " + std::to_string(n) + " qubits");
                }
            }
            out = explicit_subsets;
            break;
    }
    return out;
}

SubsetEmbedding::SubsetEmbedding(size_t n, const QubitSet &keep_) : n_qubits(n), keep(keep_) {
    if (keep.empty()) {
        throw std::invalid_argument("partial trace needs a nonempty keep set");
    }
    normalize_subset(keep);
    if (keep.front() < 1 || keep.back() > n) {
        throw std::out_of_range("keep set has a qubit outside 1.." + std::to_string(n));
    }
    QubitSet traced;
    for (size_t q = 1; q <= n; q++) {
        if (!std::binary_search(keep.begin(), keep.end(), q)) {
            traced.push_back(q);
        }
    }
    auto scatter = [n](const QubitSet &qubits) {
        size_t m = qubits.size();
        std::vector<size_t> parts(size_t{1} << m);
        for (size_t local = 0; local < parts.size(); local++) {
            size_t global = 0;
            for (size_t j = 0; j < m; j++) {
                // Bit j of `local` counted from the most significant end belongs to qubits[j].
                if (local & (size_t{1} << (m - 1 - j))) {
                    global |= excitation_index(n, qubits[j]);
                }
            }
            parts[local] = global;
        }
        return parts;
    };
    kept_part = scatter(keep);
    traced_part = scatter(traced);
}

DensityMatrix partial_trace(const DensityMatrix &rho, const QubitSet &keep) {
    SubsetEmbedding emb(rho.n_qubits(), keep);
    size_t dk = emb.kept_part.size();
    ComplexMatrix out(dk);
    for (size_t a = 0; a < dk; a++) {
        for (size_t b = 0; b < dk; b++) {
            cd total = 0;
            for (size_t t : emb.traced_part) {
                total += rho(emb.kept_part[a] | t, emb.kept_part[b] | t);
            }
            out(a, b) = total;
        }
    }
    return DensityMatrix(emb.keep.size(), HermitianMatrix(std::move(out)));
}

bool MarginalSet::covers_all_qubits() const {
    std::vector<bool> seen(n_qubits + 1, false);
    for (const auto &s : subsets) {
        for (size_t q : s) {
            seen[q] = true;
        }
    }
    return std::all_of(seen.begin() + 1, seen.end(), [](bool b) { return b; });
}

MarginalSet marginal_set(const DensityMatrix &rho, const SubsetSpec &spec) {
    MarginalSet out;
    out.name = spec.name();
    out.n_qubits = rho.n_qubits();
    out.subsets = spec.subsets(rho.n_qubits());
    for (const auto &s : out.subsets) {
        out.reduced.push_back(partial_trace(rho, s));
    }
    return out;
}

MatchReport marginals_match(const DensityMatrix &rho, const MarginalSet &target, double tol) {
    if (rho.n_qubits() != target.n_qubits) {
        throw std::invalid_argument("marginal comparison between different qubit counts");
    }
    MatchReport report;
    for (size_t i = 0; i < target.subsets.size(); i++) {
        auto mine = partial_trace(rho, target.subsets[i]);
        double dev = max_abs_diff(mine.matrix().matrix(), target.reduced[i].matrix().matrix());
        if (dev > report.max_deviation || report.worst_subset.empty()) {
            report.max_deviation = std::max(report.max_deviation, dev);
            report.worst_subset = target.subsets[i];
        }
    }
    report.match = report.max_deviation <= tol;
    return report;
}

MatchReport marginals_match(const DensityMatrix &a, const DensityMatrix &b, const SubsetSpec &spec, double tol) {
    if (a.n_qubits() != b.n_qubits()) {
        throw std::invalid_argument("marginal comparison between different qubit counts");
    }
    return marginals_match(a, marginal_set(b, spec), tol);
}

nlohmann::json density_to_json(const DensityMatrix &rho) {
    return nlohmann::json{{"n_qubits", rho.n_qubits()}, {"kind", "mixed"}, {"matrix", matrix_to_json(rho.matrix().matrix())}};
}

DensityMatrix density_from_json(const nlohmann::json &j) {
    std::string kind = j.value("kind", "pure");
    if (kind == "pure") {
        return DensityMatrix(state_from_json(j));
    }
    if (kind != "mixed") {
        throw std::invalid_argument("state JSON: unknown kind \"" + kind + "\"");
    }
    return DensityMatrix(j.at("n_qubits").get<size_t>(), HermitianMatrix(matrix_from_json(j.at("matrix"))));
}

nlohmann::json marginal_set_to_json(const MarginalSet &ms) {
    nlohmann::json reduced = nlohmann::json::array();
    for (const auto &r : ms.reduced) {
        reduced.push_back(matrix_to_json(r.matrix().matrix()));
    }
    return nlohmann::json{{"n_qubits", ms.n_qubits}, {"name", ms.name}, {"subsets", ms.subsets}, {"reduced", reduced}};
}

MarginalSet marginal_set_from_json(const nlohmann::json &j) {
    MarginalSet ms;
    ms.n_qubits = j.at("n_qubits").get<size_t>();
    ms.name = j.value("name", "explicit");
    ms.subsets = j.at("subsets").get<std::vector<QubitSet>>();
    const auto &reduced = j.at("reduced");
    if (reduced.size() != ms.subsets.size()) {
        throw std::invalid_argument("marginal set JSON: subsets and reduced have different lengths");
    }
    for (size_t i = 0; i < ms.subsets.size(); i++) {
        normalize_subset(ms.subsets[i]);
        if (ms.subsets[i].empty() || ms.subsets[i].back() > ms.n_qubits) {
            throw std::invalid_argument("marginal set JSON: subset out of range");
        }
        ms.reduced.emplace_back(ms.subsets[i].size(), HermitianMatrix(matrix_from_json(reduced[i])));
    }
    return ms;
}

}  // namespace qmarg
