// qmarg: build states, take marginals, run the forcing engine and the feasibility search, verify the theorems.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "qmarg/feasibility.h"
#include "qmarg/forcing.h"
#include "qmarg/marginals.h"
#include "qmarg/states.h"
#include "qmarg/verify.h"

using namespace qmarg;
using nlohmann::json;

namespace {

const char *kDescriptorHelp =
    "Marginal descriptor: star ({1,K} for all K) | chain ({K,K+1}) | all-k:K (every K-subset) | "
    "star-k:K (every K-subset containing qubit 1) | explicit list \"i,j,...;k,l,...\" of 1-based qubits";

json read_json(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error &e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

void write_json(const json &j, const std::string &path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << std::endl;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed for " + path);
}

// Accepts "a", "bi", "a+bi", "a-bi" (also with j for the imaginary unit).
cd parse_complex(std::string s) {
    std::erase_if(s, [](char ch) { return std::isspace(static_cast<unsigned char>(ch)); });
    if (s.empty()) throw std::invalid_argument("empty coefficient");
    char last = s.back();
    if (last != 'i' && last != 'j') return {std::stod(s), 0.0};
    s.pop_back();
    size_t split = std::string::npos;
    for (size_t k = s.size(); k-- > 1;) {
        if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
            split = k;
            break;
        }
    }
    auto imag = [](const std::string &t) {
        if (t.empty() || t == "+") return 1.0;
        if (t == "-") return -1.0;
        return std::stod(t);
    };
    if (split == std::string::npos) return {0.0, imag(s)};
    return {std::stod(s.substr(0, split)), imag(s.substr(split))};
}

std::vector<cd> parse_coefficients(const std::string &text) {
    std::vector<cd> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(parse_complex(item));
        } catch (const std::logic_error &) {
            throw std::invalid_argument("bad coefficient \"" + item + "\"");
        }
    }
    double norm2 = 0;
    for (const auto &c : out) norm2 += std::norm(c);
    if (norm2 == 0) throw std::invalid_argument("coefficients are all zero");
    for (auto &c : out) c /= std::sqrt(norm2);
    return out;
}

void expect_count(const std::vector<cd> &c, size_t count, const std::string &family) {
    if (c.size() != count)
        throw std::invalid_argument(family + " needs " + std::to_string(count) + " coefficients, got " +
                                    std::to_string(c.size()));
}

struct MakeArgs {
    std::string family = "gw";
    size_t n = 3;
    size_t l = 1;
    std::string coeffs = "random";
    uint64_t seed = 0;
    std::string out;
};

json cmd_make(const MakeArgs &a) {
    bool random = a.coeffs == "random";
    CoefficientSampler sampler(a.seed);
    std::vector<cd> given = random ? std::vector<cd>{} : parse_coefficients(a.coeffs);
    std::vector<std::string> warnings;
    std::optional<PureState> state;
    if (a.family == "w") {
        state = make_w(a.n);
    } else if (a.family == "g") {
        state = make_g(a.n);
    } else if (a.family == "gw") {
        GWCoefficients c = random ? sampler.gw(a.n) : GWCoefficients{given};
        if (!random) expect_count(given, a.n + 1, "gw");
        warnings = c.warnings();
        state = make_gw(c);
    } else if (a.family == "gghz") {
        cd x, y;
        if (random) {
            std::tie(x, y) = sampler.gghz();
        } else {
            expect_count(given, 2, "gghz");
            x = given[0];
            y = given[1];
        }
        state = make_gghz(a.n, x, y);
    } else if (a.family == "dicke") {
        DickeCoefficients d;
        if (random) {
            d = sampler.dicke(a.n, a.l);
        } else {
            expect_count(given, weight_strings(a.n, a.l).size(), "dicke");
            d = {a.n, a.l, given};
        }
        state = make_dicke(d);
    } else if (a.family == "gg") {
        GGCoefficients g;
        if (random) {
            g = sampler.gg(a.n);
        } else {
            expect_count(given, 2 * a.n, "gg");
            g.a.assign(given.begin(), given.begin() + a.n);
            g.b.assign(given.begin() + a.n, given.end());
        }
        state = make_gg(g);
    } else {
        throw std::invalid_argument("unknown family \"" + a.family + "\" (w, gw, gghz, dicke, g, gg)");
    }
    json j = state_to_json(*state);
    j["family"] = a.family;
    j["coefficients"] = random ? "random" : "explicit";
    if (random) j["seed"] = a.seed;
    if (!warnings.empty()) j["warnings"] = warnings;
    return j;
}

// A file holds either a state (pure or mixed) or a marginal set.
struct Input {
    std::optional<DensityMatrix> state;
    std::optional<MarginalSet> marginals;
};

Input read_input(const std::string &path) {
    json j = read_json(path);
    Input in;
    try {
        if (j.contains("reduced"))
            in.marginals = marginal_set_from_json(j);
        else
            in.state = density_from_json(j);
    } catch (const std::exception &e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    return in;
}

MarginalSet resolve_marginals(const Input &in, const std::string &descriptor) {
    if (in.marginals) return *in.marginals;
    if (descriptor.empty()) throw std::invalid_argument("--marginals is required for a state file");
    return marginal_set(*in.state, SubsetSpec::parse(descriptor));
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Marginal problems for W-type and related multiqubit states"};
    app.footer(kDescriptorHelp);
    app.require_subcommand(1);

    double tol = 0;
    app.add_option("--tol", tol, "Override every numeric tolerance (equality, PSD slack, feasibility)")
        ->check(CLI::PositiveNumber);

    MakeArgs make;
    auto *make_cmd = app.add_subcommand("make", "Write a state file");
    make_cmd->add_option("--family", make.family, "w | gw | gghz | dicke | g | gg")->required();
    make_cmd->add_option("--n", make.n, "Number of qubits")->required()->check(CLI::Range(1, 8));
    make_cmd->add_option("--l", make.l, "Excitation number (dicke)");
    make_cmd->add_option("--coeffs", make.coeffs,
                         "\"random\" or a comma list of complex numbers such as 0.5,0.5i,1-2i (normalized on read)");
    make_cmd->add_option("--seed", make.seed, "RNG seed for random coefficients");
    make_cmd->add_option("-o,--output", make.out, "Output file (default stdout)");

    std::string input, descriptor, out;
    auto *reduce_cmd = app.add_subcommand("reduce", "Write the marginal set of a state");
    reduce_cmd->add_option("input", input, "State file")->required();
    reduce_cmd->add_option("--marginals", descriptor, kDescriptorHelp)->required();
    reduce_cmd->add_option("-o,--output", out, "Output file (default stdout)");

    bool chain = false;
    size_t budget = 10000;
    auto *force_cmd = app.add_subcommand("force", "Run the forcing engine on a state or marginal-set file");
    force_cmd->add_option("input", input, "State or marginal-set file")->required();
    force_cmd->add_option("--marginals", descriptor, kDescriptorHelp);
    force_cmd->add_flag("--chain", chain, "Use the chain-marginal entry point");
    force_cmd->add_option("--budget", budget, "Maximum number of rule applications");
    force_cmd->add_option("-o,--output", out, "Output file (default stdout)");

    SearchOptions search;
    auto *search_cmd = app.add_subcommand("search", "Look for a distinct state with the same marginals");
    search_cmd->add_option("input", input, "State or marginal-set file")->required();
    search_cmd->add_option("--marginals", descriptor, kDescriptorHelp);
    search_cmd->add_option("--seeds", search.seeds, "Number of random starts")->check(CLI::PositiveNumber);
    search_cmd->add_option("--max-iters", search.max_iters, "Iterations per start");
    search_cmd->add_option("--epsilon", search.epsilon, "Size of the random start perturbation");
    search_cmd->add_option("--seed", search.seed, "RNG seed");
    search_cmd->add_option("-o,--output", out, "Output file (default stdout)");

    VerifyOptions verify;
    auto *verify_cmd = app.add_subcommand("verify", "Check a theorem on random instances");
    verify_cmd->add_option("--theorem", verify.theorem, "1 | 2 | 3 | 4 | facts")->required();
    verify_cmd->add_option("--n", verify.n, "Number of qubits");
    verify_cmd->add_option("--l", verify.l, "Excitation number for theorem 3 (default n/2)");
    verify_cmd->add_option("--trials", verify.trials, "Random instances per theorem");
    verify_cmd->add_option("--seed", verify.seed, "RNG seed");
    verify_cmd->add_option("--seeds", verify.search_seeds, "Random starts per witness search");
    verify_cmd->add_option("--max-iters", verify.max_iters, "Iterations per witness-search start");
    verify_cmd->add_option("-o,--output", out, "Output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    NumericPolicy policy = default_policy();
    if (tol > 0) policy = {tol, tol, tol};

    try {
        if (*make_cmd) {
            write_json(cmd_make(make), make.out);
        } else if (*reduce_cmd) {
            Input in = read_input(input);
            if (!in.state) throw std::invalid_argument(input + " is already a marginal set");
            write_json(marginal_set_to_json(marginal_set(*in.state, SubsetSpec::parse(descriptor))), out);
        } else if (*force_cmd) {
            Input in = read_input(input);
            MarginalSet ms = resolve_marginals(in, descriptor);
            ForcingOptions fo;
            fo.budget = budget;
            fo.policy = policy;
            ForcingOutcome outcome = chain ? force_chain(ms, fo) : force(ms, fo);
            json j = outcome_to_json(outcome);
            j["marginals"] = ms.name;
            j["replay"] = replay_to_json(replay_log(outcome, ms, policy));
            if (in.state && outcome.matrix) j["trace_distance_to_input"] = trace_distance(*outcome.matrix, *in.state);
            write_json(j, out);
        } else if (*search_cmd) {
            Input in = read_input(input);
            MarginalSet ms = resolve_marginals(in, descriptor);
            search.policy = policy;
            SearchResult r = search_witness(ms, in.state, search);
            json j = search_to_json(r);
            j["marginals"] = ms.name;
            write_json(j, out);
            if (r.status == SearchStatus::Inconsistent) return 3;
        } else if (*verify_cmd) {
            verify.policy = policy;
            VerificationReport report = run_verification(verify);
            write_json(report_to_json(report), out);
            for (const auto &name : report.failures()) std::cerr << "FAILED: " << name << std::endl;
            return report.passed() ? 0 : 1;
        }
    } catch (const std::exception &e) {
        std::cerr << "qmarg: " << e.what() << std::endl;
        return 2;
    }
    return 0;
}
