#include "qmarg/forcing.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace qmarg {

std::string rule_name(Rule r) {
    return "R" + std::to_string(static_cast<int>(r));
}

Rule rule_from_name(const std::string &name) {
    if (name.size() == 2 && name[0] == 'R' && name[1] >= '1' && name[1] <= '8') {
        return static_cast<Rule>(name[1] - '0');
    }
    throw std::invalid_argument("unknown rule \"" + name + "\"");
}

bool RuleSet::enabled(Rule r) const {
    switch (r) {
        case Rule::R1:
            return r1;
        case Rule::R2:
            return r2;
        case Rule::R3:
            return r3;
        case Rule::R4:
            return r4;
        case Rule::R5:
            return r5;
        case Rule::R6:
            return r6;
        case Rule::R7:
            return r7;
        case Rule::R8:
            return r8;
    }
    return false;
}

std::string status_name(ForcingStatus s) {
    switch (s) {
        case ForcingStatus::FullyForced:
            return "FullyForced";
        case ForcingStatus::Underdetermined:
            return "Underdetermined";
        case ForcingStatus::Contradiction:
            return "Contradiction";
    }
    return "Underdetermined";
}

std::vector<LinearConstraint> build_constraints(const MarginalSet &ms) {
    std::vector<LinearConstraint> out;
    size_t dim = size_t{1} << ms.n_qubits;
    LinearConstraint trace;
    trace.diagonal = true;
    trace.target = 1.0;
    for (size_t x = 0; x < dim; x++) {
        trace.terms.emplace_back(x, x);
    }
    out.push_back(std::move(trace));

    for (size_t m = 0; m < ms.subsets.size(); m++) {
        SubsetEmbedding emb(ms.n_qubits, ms.subsets[m]);
        size_t dk = emb.kept_part.size();
        for (size_t a = 0; a < dk; a++) {
            for (size_t b = a; b < dk; b++) {
                LinearConstraint c;
                c.diagonal = a == b;
                c.marginal = static_cast<int>(m);
                c.row = static_cast<uint32_t>(a);
                c.col = static_cast<uint32_t>(b);
                c.target = ms.reduced[m](a, b);
                for (size_t t : emb.traced_part) {
                    c.terms.emplace_back(emb.kept_part[a] | t, emb.kept_part[b] | t);
                }
                out.push_back(std::move(c));
            }
        }
    }
    return out;
}

CompletionState::CompletionState(size_t n_qubits, std::vector<LinearConstraint> constraints)
    : n_qubits_(n_qubits),
      dim_(size_t{1} << n_qubits),
      value_(dim_ * dim_),
      known_(dim_ * dim_, 0),
      unknown_upper_(dim_ * (dim_ + 1) / 2),
      constraints_(std::move(constraints)) {}

void CompletionState::set(size_t i, size_t j, cd v) {
    if (i == j) {
        v = v.real();
    }
    if (!known_[i * dim_ + j]) {
        unknown_upper_--;
    }
    value_[i * dim_ + j] = v;
    value_[j * dim_ + i] = std::conj(v);
    known_[i * dim_ + j] = 1;
    known_[j * dim_ + i] = 1;
}

std::vector<std::pair<uint32_t, uint32_t>> CompletionState::unknown_entries() const {
    std::vector<std::pair<uint32_t, uint32_t>> out;
    for (size_t i = 0; i < dim_; i++) {
        for (size_t j = i; j < dim_; j++) {
            if (!known(i, j)) {
                out.emplace_back(i, j);
            }
        }
    }
    return out;
}

HermitianMatrix CompletionState::to_matrix() const {
    return HermitianMatrix(ComplexMatrix(dim_, value_));
}

namespace {

constexpr Rule kRuleOrder[] = {Rule::R1, Rule::R2, Rule::R3, Rule::R4, Rule::R5, Rule::R6, Rule::R7, Rule::R8};

bool is_tight(double dpp, double dss, cd ps, double tol) {
    return dpp * dss - std::norm(ps) <= tol * dpp * dss;
}

cd det3(const CompletionState &st, size_t p, size_t q, size_t s, cd pq) {
    ComplexMatrix m(3);
    size_t idx[3] = {p, q, s};
    for (size_t r = 0; r < 3; r++) {
        for (size_t c = 0; c < 3; c++) {
            m(r, c) = st.value(idx[r], idx[c]);
        }
    }
    m(0, 1) = pq;
    m(1, 0) = std::conj(pq);
    return determinant(m);
}

class Engine {
   public:
    Engine(CompletionState state, const ForcingOptions &options, const MarginalSet *ms)
        : ms_(ms), opt_(options), tol_(options.policy.equality), st_(std::move(state)) {
        const auto &cs = st_.constraints();
        for (size_t c = 0; c < cs.size(); c++) {
            if (cs[c].marginal >= 0) {
                index_[{cs[c].marginal, cs[c].row, cs[c].col}] = c;
            }
        }
    }

    ForcingOutcome run() {
        ForcingOutcome out;
        size_t iter = 0;
        bool exhausted = false;
        while (!contradiction_ && st_.unknown_count() > 0) {
            if (iter == opt_.budget) {
                exhausted = true;
                break;
            }
            iter++;
            bool progress = false;
            for (Rule r : kRuleOrder) {
                if (opt_.rules.enabled(r) && apply(r)) {
                    progress = true;
                    break;
                }
                if (contradiction_) {
                    break;
                }
            }
            if (!progress) {
                break;
            }
        }
        if (!contradiction_) {
            check_all_constraints();
        }
        out.iterations = iter;
        out.log = std::move(log_);
        if (contradiction_) {
            out.status = ForcingStatus::Contradiction;
            out.message = message_;
            return out;
        }
        if (st_.unknown_count() > 0) {
            out.status = ForcingStatus::Underdetermined;
            out.free_entries = st_.unknown_entries();
            out.message = exhausted ? "iteration budget exhausted" : "no rule applies";
            return out;
        }
        DensityMatrix rho(st_.n_qubits(), st_.to_matrix());
        MatchReport match;
        double trace_dev = 0;
        if (ms_ != nullptr) {
            match = marginals_match(rho, *ms_, tol_);
            trace_dev = std::abs(rho.matrix().trace() - 1);
        }
        double lambda = min_eigenvalue(rho.matrix());
        if (!match.match || trace_dev > tol_ || lambda < -opt_.policy.psd_slack) {
            std::ostringstream msg;
            msg << "completed matrix fails the re-check (marginal deviation " << match.max_deviation
                << ", trace deviation " << trace_dev << ", minimum eigenvalue " << lambda << ")";
            out.status = ForcingStatus::Contradiction;
            out.message = msg.str();
            return out;
        }
        out.status = ForcingStatus::FullyForced;
        out.matrix = std::move(rho);
        out.message = "all entries forced";
        return out;
    }

   private:
    const MarginalSet *ms_;
    ForcingOptions opt_;
    double tol_;
    CompletionState st_;
    std::map<std::tuple<int, uint32_t, uint32_t>, size_t> index_;
    std::vector<LogEntry> log_;
    bool contradiction_ = false;
    std::string message_;

    size_t dim() const { return st_.dim(); }
    bool known(size_t i, size_t j) const { return st_.known(i, j); }
    cd val(size_t i, size_t j) const { return st_.value(i, j); }
    double diag(size_t i) const { return st_.value(i, i).real(); }

    void fail(std::string why) {
        if (!contradiction_) {
            contradiction_ = true;
            message_ = std::move(why);
        }
    }

    void force(size_t i, size_t j, cd v, Rule rule, std::vector<uint32_t> rows, int constraint) {
        if (std::abs(v) <= tol_) {
            v = 0;
        }
        if (i == j) {
            v = v.real();
            if (v.real() < -tol_) {
                fail("diagonal " + std::to_string(i) + " forced negative by " + rule_name(rule));
            } else if (v.real() < 0) {
                v = 0;
            }
        }
        if (i > j) {
            std::swap(i, j);
            v = std::conj(v);
        }
        st_.set(i, j, v);
        log_.push_back(LogEntry{rule, {static_cast<uint32_t>(i), static_cast<uint32_t>(j)}, std::move(rows), v, constraint});
        // Property (iii): every known 2x2 principal minor must stay non-negative.
        if (i != j && known(i, i) && known(j, j)) {
            if (std::norm(v) > diag(i) * diag(j) + tol_) {
                fail("entry (" + std::to_string(i) + "," + std::to_string(j) + ") violates a 2x2 principal minor");
            }
        } else if (i == j) {
            for (size_t k = 0; k < dim(); k++) {
                if (k != i && known(i, k) && known(k, k) && std::norm(val(i, k)) > diag(i) * diag(k) + tol_) {
                    fail("diagonal " + std::to_string(i) + " violates a 2x2 principal minor with " + std::to_string(k));
                    break;
                }
            }
        }
    }

    bool apply(Rule r) {
        switch (r) {
            case Rule::R1:
                return rule_zero_budget();
            case Rule::R2:
                return rule_zero_rows();
            case Rule::R3:
                return rule_single_unknown();
            case Rule::R4:
                return rule_squeeze();
            case Rule::R5:
                return rule_minor3();
            case Rule::R6:
                return rule_minor4();
            case Rule::R7:
                return rule_summed_schwarz();
            case Rule::R8:
                return rule_proportional_rows();
        }
        return false;
    }

    void check_all_constraints() {
        const auto &cs = st_.constraints();
        for (size_t c = 0; c < cs.size() && !contradiction_; c++) {
            cd total = 0;
            bool complete = true;
            for (auto [i, j] : cs[c].terms) {
                if (!known(i, j)) {
                    complete = false;
                    break;
                }
                total += val(i, j);
            }
            if (complete && std::abs(total - cs[c].target) > tol_) {
                fail("constraint " + std::to_string(c) + " cannot be met by the forced entries");
            }
        }
    }

    bool rule_zero_budget() {
        bool progress = false;
        const auto &cs = st_.constraints();
        for (size_t c = 0; c < cs.size() && !contradiction_; c++) {
            if (!cs[c].diagonal) {
                continue;
            }
            double remaining = cs[c].target.real();
            std::vector<uint32_t> unknown;
            for (auto [x, _] : cs[c].terms) {
                if (known(x, x)) {
                    remaining -= diag(x);
                } else {
                    unknown.push_back(x);
                }
            }
            if (remaining < -tol_) {
                fail("diagonal constraint " + std::to_string(c) + " is exceeded by forced non-negative entries");
                return progress;
            }
            if (unknown.empty() || remaining > tol_) {
                continue;
            }
            for (uint32_t x : unknown) {
                force(x, x, 0, Rule::R1, {}, static_cast<int>(c));
            }
            progress = true;
        }
        return progress;
    }

    bool rule_zero_rows() {
        bool progress = false;
        for (size_t k = 0; k < dim() && !contradiction_; k++) {
            if (!known(k, k) || diag(k) != 0) {
                continue;
            }
            bool any_unknown = false;
            for (size_t j = 0; j < dim(); j++) {
                if (!known(k, j)) {
                    any_unknown = true;
                } else if (std::abs(val(k, j)) > tol_) {
                    fail("row " + std::to_string(k) + " has a zero diagonal but a nonzero entry");
                    return progress;
                }
            }
            if (!any_unknown) {
                continue;
            }
            for (size_t j = 0; j < dim(); j++) {
                if (!known(k, j)) {
                    st_.set(k, j, 0);
                }
            }
            log_.push_back(LogEntry{Rule::R2, {static_cast<uint32_t>(k), static_cast<uint32_t>(k)}, {static_cast<uint32_t>(k)}, 0, -1});
            progress = true;
        }
        return progress;
    }

    bool rule_single_unknown() {
        bool progress = false;
        const auto &cs = st_.constraints();
        for (size_t c = 0; c < cs.size() && !contradiction_; c++) {
            cd rest = cs[c].target;
            int unknown_at = -1;
            bool several = false;
            for (size_t t = 0; t < cs[c].terms.size(); t++) {
                auto [i, j] = cs[c].terms[t];
                if (known(i, j)) {
                    rest -= val(i, j);
                } else if (unknown_at < 0) {
                    unknown_at = static_cast<int>(t);
                } else {
                    several = true;
                    break;
                }
            }
            if (several) {
                continue;
            }
            if (unknown_at < 0) {
                if (std::abs(rest) > tol_) {
                    fail("constraint " + std::to_string(c) + " cannot be met by the forced entries");
                    return progress;
                }
                continue;
            }
            auto [i, j] = cs[c].terms[unknown_at];
            force(i, j, rest, Rule::R3, {}, static_cast<int>(c));
            progress = true;
        }
        return progress;
    }

    // Best Cauchy-Schwarz lower bound for every unknown diagonal, with the partner that attains it.
    void lower_bounds(std::vector<double> &lb, std::vector<int> &witness) const {
        size_t n = dim();
        lb.assign(n, 0.0);
        witness.assign(n, -1);
        std::vector<size_t> positive;
        for (size_t y = 0; y < n; y++) {
            if (known(y, y) && diag(y) > tol_) {
                positive.push_back(y);
            }
        }
        for (size_t x = 0; x < n; x++) {
            if (known(x, x)) {
                continue;
            }
            for (size_t y : positive) {
                if (known(x, y)) {
                    double bound = std::norm(val(x, y)) / diag(y);
                    if (bound > lb[x]) {
                        lb[x] = bound;
                        witness[x] = static_cast<int>(y);
                    }
                }
            }
        }
    }

    bool rule_squeeze() {
        std::vector<double> lb;
        std::vector<int> witness;
        lower_bounds(lb, witness);
        bool progress = false;
        const auto &cs = st_.constraints();
        for (size_t c = 0; c < cs.size() && !contradiction_; c++) {
            if (!cs[c].diagonal) {
                continue;
            }
            double total = 0;
            bool any_unknown = false;
            for (auto [x, _] : cs[c].terms) {
                if (known(x, x)) {
                    total += diag(x);
                } else {
                    total += lb[x];
                    any_unknown = true;
                }
            }
            if (!any_unknown) {
                continue;
            }
            double target = cs[c].target.real();
            if (total > target + tol_) {
                fail("Cauchy-Schwarz lower bounds exceed diagonal constraint " + std::to_string(c));
                return progress;
            }
            if (total < target - tol_) {
                continue;
            }
            for (auto [x, _] : cs[c].terms) {
                if (known(x, x)) {
                    continue;
                }
                std::vector<uint32_t> rows{x};
                if (witness[x] >= 0) {
                    rows.push_back(static_cast<uint32_t>(witness[x]));
                }
                force(x, x, lb[x], Rule::R4, std::move(rows), static_cast<int>(c));
            }
            progress = true;
        }
        return progress;
    }

    std::vector<size_t> positive_rows() const {
        std::vector<size_t> out;
        for (size_t x = 0; x < dim(); x++) {
            if (known(x, x) && diag(x) > tol_) {
                out.push_back(x);
            }
        }
        return out;
    }

    bool tight(size_t p, size_t s) const {
        return known(p, s) && is_tight(diag(p), diag(s), val(p, s), tol_);
    }

    bool rule_minor3() {
        auto rows = positive_rows();
        bool progress = false;
        for (size_t a = 0; a < rows.size() && !contradiction_; a++) {
            for (size_t b = a + 1; b < rows.size() && !contradiction_; b++) {
                size_t p = rows[a];
                size_t q = rows[b];
                if (known(p, q)) {
                    continue;
                }
                for (size_t s : rows) {
                    if (s == p || s == q || !known(p, s) || !known(q, s)) {
                        continue;
                    }
                    if (!tight(p, s) && !tight(q, s)) {
                        continue;
                    }
                    cd v = val(p, s) * val(s, q) / diag(s);
                    force(p, q, v, Rule::R5, {static_cast<uint32_t>(p), static_cast<uint32_t>(q), static_cast<uint32_t>(s)}, -1);
                    progress = true;
                    break;
                }
            }
        }
        return progress;
    }

    bool rule_minor4() {
        auto rows = positive_rows();
        auto edge = [&](size_t x, size_t y) { return x != y && tight(x, y) && val(x, y) != cd{}; };
        for (size_t i2 : rows) {
            for (size_t i3 : rows) {
                if (!edge(i2, i3)) {
                    continue;
                }
                for (size_t i1 : rows) {
                    if (i1 == i3 || !edge(i1, i2) || known(i1, i3)) {
                        continue;
                    }
                    for (size_t i4 : rows) {
                        if (i4 == i1 || i4 == i2 || !edge(i3, i4) || known(i2, i4) || known(i1, i4)) {
                            continue;
                        }
                        // Rescaled by the diagonal and rephased so the path entries are 1, the block is the pattern
                        // [[1,1,a,b],[1,1,1,c],[a*,1,1,1],[b*,c*,1,1]], PSD only for a = b = c = 1. Undoing the
                        // scaling gives the values below.
                        cd v13 = val(i1, i2) * val(i2, i3) / diag(i2);
                        cd v24 = val(i2, i3) * val(i3, i4) / diag(i3);
                        cd v14 = val(i1, i2) * val(i2, i3) * val(i3, i4) / (diag(i2) * diag(i3));
                        std::vector<uint32_t> quad{static_cast<uint32_t>(i1), static_cast<uint32_t>(i2),
                                                   static_cast<uint32_t>(i3), static_cast<uint32_t>(i4)};
                        force(i1, i3, v13, Rule::R6, quad, -1);
                        force(i2, i4, v24, Rule::R6, quad, -1);
                        force(i1, i4, v14, Rule::R6, quad, -1);
                        return true;
                    }
                }
            }
        }
        return false;
    }

    // Equality in |s_ab| <= sum_t |r(X_t, Y_t)| <= sum_t sqrt(x_t y_t) <= sqrt(s_aa s_bb) pins every term:
    // y_t = x_t s_bb / s_aa and r(X_t, Y_t) = x_t s_ab / s_aa.
    bool rule_summed_schwarz() {
        bool progress = false;
        const auto &cs = st_.constraints();
        for (size_t c = 0; c < cs.size() && !contradiction_; c++) {
            const auto &off = cs[c];
            if (off.diagonal || off.marginal < 0) {
                continue;
            }
            auto ia = index_.find({off.marginal, off.row, off.row});
            auto ib = index_.find({off.marginal, off.col, off.col});
            if (ia == index_.end() || ib == index_.end()) {
                continue;
            }
            double saa = cs[ia->second].target.real();
            double sbb = cs[ib->second].target.real();
            if (saa <= tol_ || sbb <= tol_ || !is_tight(saa, sbb, off.target, tol_)) {
                continue;
            }
            for (size_t t = 0; t < off.terms.size() && !contradiction_; t++) {
                auto [x, y] = off.terms[t];
                auto share = proportional_share(x, y, saa, sbb, off.target);
                if (!share) {
                    continue;
                }
                std::vector<uint32_t> rows{x, y};
                if (!known(x, x)) {
                    force(x, x, *share * saa, Rule::R7, rows, static_cast<int>(c));
                    progress = true;
                }
                if (!known(y, y)) {
                    force(y, y, *share * sbb, Rule::R7, rows, static_cast<int>(c));
                    progress = true;
                }
                if (!known(x, y) && !contradiction_) {
                    force(x, y, *share * off.target, Rule::R7, rows, static_cast<int>(c));
                    progress = true;
                }
            }
        }
        return progress;
    }

    // Fraction x_t / s_aa of a tight marginal entry carried by the term (x, y), if some part of the term is fixed
    // and another part is not.
    std::optional<double> proportional_share(size_t x, size_t y, double saa, double sbb, cd sab) const {
        if (known(x, x) && known(y, y) && known(x, y)) {
            return std::nullopt;
        }
        if (known(x, x)) {
            return diag(x) / saa;
        }
        if (known(y, y)) {
            return diag(y) / sbb;
        }
        if (known(x, y)) {
            return std::abs(val(x, y)) / std::abs(sab);
        }
        return std::nullopt;
    }

    // Row of the smallest positive diagonal that row i is proportional to (a singular 2x2 minor), or -1.
    int anchor(size_t i) const {
        if (!known(i, i) || diag(i) <= tol_) {
            return -1;
        }
        for (size_t s = 0; s <= i; s++) {
            if (s == i || (known(s, s) && diag(s) > tol_ && known(i, s) && val(i, s) != cd{} && tight(i, s))) {
                return static_cast<int>(s);
            }
        }
        return -1;
    }

    // A constraint whose unknown summands all reduce through proportional rows to one unknown entry (P, Q):
    // r_ij = (r_iP / r_PP) conj(r_jQ / r_QQ) r_PQ.
    bool rule_proportional_rows() {
        const auto &cs = st_.constraints();
        std::vector<int> anchors(dim(), -2);
        auto anchor_of = [&](size_t i) {
            if (anchors[i] == -2) {
                anchors[i] = anchor(i);
            }
            return anchors[i];
        };
        for (size_t c = 0; c < cs.size(); c++) {
            if (cs[c].diagonal) {
                continue;
            }
            cd rest = cs[c].target;
            cd kappa = 0;
            double scale = 0;
            int P = -1, Q = -1;
            size_t unknown = 0;
            bool usable = true;
            for (auto [i, j] : cs[c].terms) {
                if (known(i, j)) {
                    rest -= val(i, j);
                    continue;
                }
                int ai = anchor_of(i), aj = anchor_of(j);
                if (ai < 0 || aj < 0 || (unknown > 0 && (ai != P || aj != Q))) {
                    usable = false;
                    break;
                }
                P = ai;
                Q = aj;
                cd f = val(i, P) / diag(P) * std::conj(val(j, Q) / diag(Q));
                kappa += f;
                scale += std::abs(f);
                unknown++;
            }
            if (!usable || unknown < 2 || known(P, Q) || std::abs(kappa) <= 1e-6 * scale) {
                continue;
            }
            force(P, Q, rest / kappa, Rule::R8, {static_cast<uint32_t>(P), static_cast<uint32_t>(Q)}, static_cast<int>(c));
            return true;
        }
        return false;
    }
};

std::optional<std::string> input_problem(const MarginalSet &ms, const NumericPolicy &policy) {
    if (ms.subsets.size() != ms.reduced.size()) {
        return std::string("marginal set has mismatched subsets and matrices");
    }
    for (size_t m = 0; m < ms.subsets.size(); m++) {
        const auto &s = ms.subsets[m];
        bool sorted = std::adjacent_find(s.begin(), s.end(), std::greater_equal<>()) == s.end();
        if (s.empty() || !sorted || s.front() < 1 || s.back() > ms.n_qubits ||
            ms.reduced[m].dim() != (size_t{1} << s.size())) {
            return "marginal " + std::to_string(m) + " has an invalid subset or dimension";
        }
        if (auto problem = ms.reduced[m].problems(policy.equality, policy.psd_slack)) {
            return "marginal " + std::to_string(m) + " is not a state: " + *problem;
        }
    }
    return std::nullopt;
}

void require_chain(const MarginalSet &ms) {
    if (ms.n_qubits < 3) {
        throw std::invalid_argument("chain forcing needs at least 3 qubits");
    }
    if (ms.subsets != SubsetSpec::chain().subsets(ms.n_qubits)) {
        throw std::invalid_argument("chain forcing needs exactly the marginals {K, K+1}, K = 1..N-1");
    }
}

}  // namespace

ForcingOutcome force(const MarginalSet &ms, const ForcingOptions &options) {
    if (ms.n_qubits == 0 || ms.n_qubits > 8) {
        throw std::invalid_argument("forcing supports 1 to 8 qubits");
    }
    if (auto problem = input_problem(ms, options.policy)) {
        ForcingOutcome out;
        out.status = ForcingStatus::Contradiction;
        out.message = *problem;
        return out;
    }
    return Engine(CompletionState(ms.n_qubits, build_constraints(ms)), options, &ms).run();
}

ForcingOutcome complete(CompletionState state, const ForcingOptions &options) {
    return Engine(std::move(state), options, nullptr).run();
}

ForcingOutcome force_chain(const MarginalSet &ms, const ForcingOptions &options) {
    require_chain(ms);
    ForcingOptions chain_options = options;
    chain_options.rules.r7 = true;
    return force(ms, chain_options);
}

namespace {

class Replayer {
   public:
    Replayer(const MarginalSet &ms, const NumericPolicy &policy)
        : tol_(policy.equality), st_(ms.n_qubits, build_constraints(ms)) {}

    ReplayReport run(const ForcingOutcome &outcome) {
        ReplayReport report;
        const auto &log = outcome.log;
        for (size_t k = 0; k < log.size(); k++) {
            const LogEntry &e = log[k];
            std::string problem = check(e, k > 0 ? &log[k - 1] : nullptr);
            if (!problem.empty()) {
                report.failures.push_back({k, e.rule, false, problem});
            }
            apply(e);
            report.steps_checked++;
        }
        if (outcome.status == ForcingStatus::FullyForced) {
            if (st_.unknown_count() > 0) {
                report.failures.push_back({log.size(), Rule::R1, false, "log leaves entries unforced"});
            } else if (!outcome.matrix ||
                       max_abs_diff(st_.to_matrix().matrix(), outcome.matrix->matrix().matrix()) > tol_) {
                report.failures.push_back({log.size(), Rule::R1, false, "replayed matrix differs from the reported one"});
            }
        }
        report.free_entries = st_.unknown_entries();
        report.all_passed = report.failures.empty();
        return report;
    }

   private:
    double tol_;
    CompletionState st_;

    bool known(size_t i, size_t j) const { return st_.known(i, j); }
    cd val(size_t i, size_t j) const { return st_.value(i, j); }
    double diag(size_t i) const { return st_.value(i, i).real(); }

    const LinearConstraint *constraint(const LogEntry &e) const {
        if (e.constraint < 0 || static_cast<size_t>(e.constraint) >= st_.constraints().size()) {
            return nullptr;
        }
        return &st_.constraints()[e.constraint];
    }

    void apply(const LogEntry &e) {
        auto [i, j] = e.entry;
        if (i >= st_.dim() || j >= st_.dim()) {
            return;
        }
        if (e.rule == Rule::R2) {
            for (size_t c = 0; c < st_.dim(); c++) {
                if (!known(i, c)) {
                    st_.set(i, c, 0);
                }
            }
            return;
        }
        st_.set(i, j, e.value);
    }

    std::string check(const LogEntry &e, const LogEntry *previous) const {
        auto [i, j] = e.entry;
        if (i >= st_.dim() || j >= st_.dim()) {
            return "entry out of range";
        }
        for (uint32_t r : e.rows) {
            if (r >= st_.dim()) {
                return "justifying row out of range";
            }
        }
        if (e.rule != Rule::R2 && known(i, j)) {
            return "entry was already fixed";
        }
        if (i == j && e.value.real() < -tol_) {
            return "negative diagonal";
        }
        switch (e.rule) {
            case Rule::R1:
                return check_zero_budget(e);
            case Rule::R2:
                return check_zero_row(e);
            case Rule::R3:
                return check_single_unknown(e);
            case Rule::R4:
                return check_squeeze(e, previous);
            case Rule::R5:
                return check_minor3(e);
            case Rule::R6:
                return check_minor4(e);
            case Rule::R7:
                return check_summed_schwarz(e);
            case Rule::R8:
                return check_proportional_rows(e);
        }
        return "unknown rule";
    }

    std::string check_zero_budget(const LogEntry &e) const {
        const auto *c = constraint(e);
        if (c == nullptr || !c->diagonal || e.entry.first != e.entry.second) {
            return "R1 needs a diagonal entry of a diagonal constraint";
        }
        if (std::abs(e.value) > tol_) {
            return "R1 forces zero only";
        }
        double remaining = c->target.real();
        bool member = false;
        for (auto [x, _] : c->terms) {
            member |= x == e.entry.first;
            if (known(x, x)) {
                remaining -= diag(x);
            }
        }
        if (!member) {
            return "entry is not a summand of the constraint";
        }
        if (remaining > tol_) {
            return "constraint still has budget " + std::to_string(remaining);
        }
        return {};
    }

    std::string check_zero_row(const LogEntry &e) const {
        size_t k = e.entry.first;
        if (!known(k, k) || std::abs(diag(k)) > tol_) {
            return "R2 row does not have a zero diagonal";
        }
        for (size_t c = 0; c < st_.dim(); c++) {
            if (known(k, c) && std::abs(val(k, c)) > tol_) {
                return "row with zero diagonal has a nonzero entry";
            }
        }
        return {};
    }

    std::string check_single_unknown(const LogEntry &e) const {
        const auto *c = constraint(e);
        if (c == nullptr) {
            return "R3 needs a constraint";
        }
        cd rest = c->target;
        bool found = false;
        bool flipped = false;
        for (auto [x, y] : c->terms) {
            bool is_entry = (x == e.entry.first && y == e.entry.second);
            bool is_mirror = (y == e.entry.first && x == e.entry.second);
            if (is_entry || is_mirror) {
                found = true;
                flipped = is_mirror && !is_entry;
                continue;
            }
            if (!known(x, y)) {
                return "constraint has another unknown summand";
            }
            rest -= val(x, y);
        }
        if (!found) {
            return "entry is not a summand of the constraint";
        }
        cd expected = flipped ? std::conj(rest) : rest;
        if (std::abs(expected - e.value) > tol_) {
            return "value differs from the constraint remainder by " + std::to_string(std::abs(expected - e.value));
        }
        return {};
    }

    double lower_bound(size_t x) const {
        double lb = 0;
        for (size_t y = 0; y < st_.dim(); y++) {
            if (y != x && known(y, y) && diag(y) > tol_ && known(x, y)) {
                lb = std::max(lb, std::norm(val(x, y)) / diag(y));
            }
        }
        return lb;
    }

    std::string check_squeeze(const LogEntry &e, const LogEntry *previous) const {
        const auto *c = constraint(e);
        size_t x = e.entry.first;
        if (c == nullptr || !c->diagonal || x != e.entry.second) {
            return "R4 needs a diagonal entry of a diagonal constraint";
        }
        if (e.rows.size() >= 2) {
            size_t y = e.rows[1];
            if (!known(y, y) || diag(y) <= tol_ || !known(x, y)) {
                return "Cauchy-Schwarz partner is not fixed";
            }
            double lb = std::norm(val(x, y)) / diag(y);
            if (std::abs(lb - e.value.real()) > tol_) {
                return "value differs from the Cauchy-Schwarz bound";
            }
        } else if (std::abs(e.value) > tol_) {
            return "unbounded diagonal must be squeezed to zero";
        }
        bool continues_group = previous != nullptr && previous->rule == Rule::R4 && previous->constraint == e.constraint;
        if (continues_group) {
            return {};
        }
        double total = 0;
        for (auto [z, _] : c->terms) {
            total += known(z, z) ? diag(z) : lower_bound(z);
        }
        if (total < c->target.real() - tol_) {
            return "lower bounds do not exhaust the constraint";
        }
        return {};
    }

    std::string check_minor3(const LogEntry &e) const {
        if (e.rows.size() != 3) {
            return "R5 needs three rows";
        }
        size_t p = e.rows[0], q = e.rows[1], s = e.rows[2];
        if (std::minmax(p, q) != std::minmax<size_t>(e.entry.first, e.entry.second)) {
            return "R5 rows do not match the entry";
        }
        for (size_t x : {p, q, s}) {
            if (!known(x, x) || diag(x) <= tol_) {
                return "R5 needs positive fixed diagonals";
            }
        }
        if (!known(p, s) || !known(q, s)) {
            return "R5 needs the entries to the third row";
        }
        bool pt = is_tight(diag(p), diag(s), val(p, s), tol_);
        bool qt = is_tight(diag(q), diag(s), val(q, s), tol_);
        if (!pt && !qt) {
            return "no singular 2x2 minor";
        }
        cd v = (p == e.entry.first) ? e.value : std::conj(e.value);
        cd expected = val(p, s) * val(s, q) / diag(s);
        double scale = std::sqrt(diag(p) * diag(q));
        double det = det3(st_, p, q, s, v).real();
        double det_scale = diag(p) * diag(q) * diag(s);
        if (det < -tol_ * det_scale) {
            return "3x3 principal minor is negative (" + std::to_string(det) + ")";
        }
        if (std::abs(v - expected) > tol_ * std::max(1.0, scale)) {
            return "value differs from the minor completion";
        }
        return {};
    }

    std::string check_minor4(const LogEntry &e) const {
        if (e.rows.size() != 4) {
            return "R6 needs four rows";
        }
        size_t r[4] = {e.rows[0], e.rows[1], e.rows[2], e.rows[3]};
        for (size_t x : r) {
            if (!known(x, x) || diag(x) <= tol_) {
                return "R6 needs positive fixed diagonals";
            }
        }
        for (int k = 0; k < 3; k++) {
            if (!known(r[k], r[k + 1]) || !is_tight(diag(r[k]), diag(r[k + 1]), val(r[k], r[k + 1]), tol_)) {
                return "R6 path entry is missing or not tight";
            }
        }
        auto [i, j] = e.entry;
        cd expected;
        auto is = [&](size_t a, size_t b) { return std::minmax<size_t>(i, j) == std::minmax(a, b); };
        if (is(r[0], r[2])) {
            expected = val(r[0], r[1]) * val(r[1], r[2]) / diag(r[1]);
            if (i != r[0]) expected = std::conj(expected);
        } else if (is(r[1], r[3])) {
            expected = val(r[1], r[2]) * val(r[2], r[3]) / diag(r[2]);
            if (i != r[1]) expected = std::conj(expected);
        } else if (is(r[0], r[3])) {
            expected = val(r[0], r[1]) * val(r[1], r[2]) * val(r[2], r[3]) / (diag(r[1]) * diag(r[2]));
            if (i != r[0]) expected = std::conj(expected);
        } else {
            return "R6 entry is not a chord of the path";
        }
        if (std::abs(expected - e.value) > tol_) {
            return "value differs from the 4x4 completion";
        }
        return {};
    }

    std::string check_summed_schwarz(const LogEntry &e) const {
        const auto *c = constraint(e);
        if (c == nullptr || c->diagonal || c->marginal < 0 || e.rows.size() != 2) {
            return "R7 needs an off-diagonal marginal constraint and a term";
        }
        size_t x = e.rows[0], y = e.rows[1];
        bool term = std::find(c->terms.begin(), c->terms.end(), std::pair<uint32_t, uint32_t>(x, y)) != c->terms.end();
        auto [i, j] = e.entry;
        bool on_term = (i == x && j == x) || (i == y && j == y) || (i == x && j == y);
        if (!term || !on_term) {
            return "R7 entry is not part of the referenced term";
        }
        double saa = 0, sbb = 0;
        for (const auto &other : st_.constraints()) {
            if (other.marginal == c->marginal && other.diagonal) {
                if (other.row == c->row) saa = other.target.real();
                if (other.row == c->col) sbb = other.target.real();
            }
        }
        if (saa <= tol_ || sbb <= tol_ || !is_tight(saa, sbb, c->target, tol_)) {
            return "marginal 2x2 minor is not singular";
        }
        std::vector<double> shares;
        if (known(x, x)) shares.push_back(diag(x) / saa);
        if (known(y, y)) shares.push_back(diag(y) / sbb);
        if (known(x, y)) shares.push_back(std::abs(val(x, y)) / std::abs(c->target));
        for (double share : shares) {
            cd expected = (i != j) ? share * c->target : cd{share * (i == x ? saa : sbb)};
            if (std::abs(expected - e.value) <= tol_) {
                return {};
            }
        }
        return shares.empty() ? "no part of the term was fixed" : "value differs from the proportional split";
    }

    std::string check_proportional_rows(const LogEntry &e) const {
        const auto *c = constraint(e);
        if (c == nullptr || c->diagonal || e.rows.size() != 2) {
            return "R8 needs an off-diagonal constraint and two anchor rows";
        }
        size_t P = e.rows[0], Q = e.rows[1];
        if (std::pair<uint32_t, uint32_t>(P, Q) != e.entry) {
            return "R8 entry is not the anchor pair";
        }
        for (size_t x : {P, Q}) {
            if (!known(x, x) || diag(x) <= tol_) {
                return "R8 anchors need positive fixed diagonals";
            }
        }
        auto proportional = [&](size_t i, size_t s) {
            return i == s || (known(i, s) && is_tight(diag(i), diag(s), val(i, s), tol_));
        };
        cd rest = c->target;
        cd kappa = 0;
        size_t unknown = 0;
        for (auto [i, j] : c->terms) {
            if (known(i, j)) {
                rest -= val(i, j);
                continue;
            }
            if (!known(i, i) || !known(j, j) || !proportional(i, P) || !proportional(j, Q)) {
                return "unknown summand is not proportional to the anchor rows";
            }
            kappa += val(i, P) / diag(P) * std::conj(val(j, Q) / diag(Q));
            unknown++;
        }
        if (unknown == 0 || kappa == cd{}) {
            return "constraint has no reducible unknown summand";
        }
        if (std::abs(rest / kappa - e.value) > tol_ * std::max(1.0, std::abs(e.value))) {
            return "value differs from the reduced constraint";
        }
        return {};
    }
};

nlohmann::json pairs_to_json(const std::vector<std::pair<uint32_t, uint32_t>> &pairs) {
    nlohmann::json out = nlohmann::json::array();
    for (auto [i, j] : pairs) {
        out.push_back({i, j});
    }
    return out;
}

}  // namespace

ReplayReport replay_log(const ForcingOutcome &outcome, const MarginalSet &ms, const NumericPolicy &policy) {
    return Replayer(ms, policy).run(outcome);
}

nlohmann::json outcome_to_json(const ForcingOutcome &outcome) {
    nlohmann::json log = nlohmann::json::array();
    for (const auto &e : outcome.log) {
        nlohmann::json item{
            {"rule", rule_name(e.rule)},
            {"entry", {e.entry.first, e.entry.second}},
            {"rows", e.rows},
            {"value", {e.value.real(), e.value.imag()}},
        };
        if (e.constraint >= 0) {
            item["constraint"] = e.constraint;
        }
        log.push_back(std::move(item));
    }
    return nlohmann::json{
        {"status", status_name(outcome.status)},
        {"message", outcome.message},
        {"iterations", outcome.iterations},
        {"free_entries", pairs_to_json(outcome.free_entries)},
        {"log", log},
        {"matrix", outcome.matrix ? matrix_to_json(outcome.matrix->matrix().matrix()) : nlohmann::json(nullptr)},
    };
}

nlohmann::json replay_to_json(const ReplayReport &report) {
    nlohmann::json failures = nlohmann::json::array();
    for (const auto &f : report.failures) {
        failures.push_back({{"step", f.index}, {"rule", rule_name(f.rule)}, {"detail", f.detail}});
    }
    return nlohmann::json{
        {"all_passed", report.all_passed},
        {"steps_checked", report.steps_checked},
        {"failures", failures},
        {"free_entries", pairs_to_json(report.free_entries)},
    };
}

}  // namespace qmarg
