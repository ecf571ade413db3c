// Command-line surface: sparsify, resapx, diffapx, verify, calibrate.
// All commands are deterministic given --seed; human-readable summaries go
// to stderr, machine-readable artifacts to the requested output files.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "subsparse/subsparse.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace subsparse;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitParse = 3;
constexpr int kExitNumerical = 4;

WeightedGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open graph file: " + path);
    return read_graph(in);
}

std::vector<VertexId> load_terminals(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open terminals file: " + path);
    std::vector<VertexId> s;
    std::int64_t v;
    while (in >> v) {
        if (v < 0) throw ParseError("negative vertex id in terminals file");
        s.push_back(static_cast<VertexId>(v));
    }
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

std::vector<VertexPair> load_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open pairs file: " + path);
    std::vector<VertexPair> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ls(line);
        std::int64_t u, v;
        if (!(ls >> u >> v) || u < 0 || v < 0)
            throw ParseError("pairs file line " + std::to_string(lineno) + ": expected 'u v'");
        pairs.emplace_back(static_cast<VertexId>(u), static_cast<VertexId>(v));
    }
    return pairs;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct CommonFlags {
    std::uint64_t seed = 0;
    double eps = 0.5;
    std::string oracle = "slow";
    double cterm = 10.0;
    double beta = 0.0;
    double clocal = 1.0;
    std::uint32_t dense_cap = 500;
    bool audit = false;
    bool exact_sc = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--eps", f.eps, "target accuracy");
    cmd->add_option("--oracle", f.oracle, "steady oracle: slow or fast")
        ->check(CLI::IsMember({"slow", "fast"}));
    cmd->add_option("--cterm", f.cterm, "termination constant (paper value 10000)");
    cmd->add_option("--beta", f.beta, "batch size factor for K(z)");
    cmd->add_option("--clocal", f.clocal, "localization constant for the fast oracle");
    cmd->add_option("--dense-cap", f.dense_cap, "dense/exact path vertex cap");
    cmd->add_flag("--audit", f.audit, "record dense audit instrumentation");
    cmd->add_flag("--exact-sc", f.exact_sc, "use dense Schur complements instead of sparsifiers");
}

OracleSpec make_oracle(const CommonFlags& f) {
    OracleSpec spec = f.oracle == "fast" ? OracleSpec::fast(f.clocal) : OracleSpec::slow();
    if (f.beta > 0.0) spec.batch_beta = f.beta;
    return spec;
}

int cmd_sparsify(const std::string& graph_file, const std::string& terminals_file,
                 const std::string& out_prefix, const CommonFlags& f) {
    WeightedGraph g = load_graph(graph_file);
    std::vector<VertexId> terminals = load_terminals(terminals_file);
    if (terminals.size() < 2) throw ValidationError("need at least two terminals");
    for (VertexId v : terminals)
        if (v >= g.vertex_count()) throw ValidationError("terminal out of range");

    SparsifyConfig cfg;
    cfg.c_term = f.cterm;
    cfg.dense_cap = f.dense_cap;
    cfg.audit = f.audit;
    SparsifierResult res =
        subspace_sparsifier(g, terminals, f.eps, make_oracle(f), RngSeed{f.seed}, cfg);

    std::ofstream og(out_prefix + ".graph");
    write_graph(og, res.output);
    std::ofstream oc(out_prefix + ".cert");
    write_certificate(oc, res.output.certificate());
    std::ofstream ot(out_prefix + ".trace");
    for (const auto& it : res.trace.iterations) {
        json line{{"iteration", it.iteration},
                  {"edges_before", it.edges_before},
                  {"edges_after", it.edges_after},
                  {"split_edges", it.split_edges},
                  {"oracle_size", it.oracle_size},
                  {"batch_size", it.batch_size}};
        if (it.distortion_after >= 0.0) line["distortion"] = it.distortion_after;
        if (!it.steps.empty()) {
            std::size_t bad = 0;
            for (const auto& st : it.steps)
                if (!st.leverage_ok || !st.energy_ok) ++bad;
            line["audit_steps"] = it.steps.size();
            line["audit_violations"] = bad;
        }
        ot << line.dump() << '\n';
    }

    if (f.audit && res.output.vertex_count() <= f.dense_cap) {
        SubspaceBasis basis = make_coordinate_subspace(g, terminals);
        double distortion = audit_distortion(basis, res.output, f.dense_cap);
        std::cerr << "audit distortion " << format_double(distortion)
                  << (distortion <= f.eps ? " (within eps)" : " (EXCEEDS eps)") << '\n';
    }
    std::cerr << "sparsified " << g.edge_count() << " -> " << res.output.edge_count()
              << " edges in " << res.iterations << " iterations\n";
    return kExitOk;
}

int cmd_resapx(const std::string& graph_file, const std::string& pairs_file,
               const std::string& out_file, const CommonFlags& f) {
    WeightedGraph g = load_graph(graph_file);
    std::vector<VertexPair> pairs = load_pairs(pairs_file);
    ResApxConfig cfg;
    cfg.mode = f.exact_sc ? ScApproxMode::ExactSchur : ScApproxMode::Sparsify;
    cfg.oracle = make_oracle(f);
    cfg.sparsify.c_term = f.cterm;
    cfg.dense_cap = f.dense_cap;
    std::vector<double> est =
        pairs.empty() ? std::vector<double>{} : res_apx(g, pairs, f.eps, RngSeed{f.seed}, cfg);
    std::ofstream out(out_file);
    for (std::size_t i = 0; i < pairs.size(); ++i)
        out << pairs[i].first << ' ' << pairs[i].second << ' ' << format_double(est[i]) << '\n';
    std::cerr << "estimated " << pairs.size() << " pairs\n";
    return kExitOk;
}

int cmd_diffapx(const std::string& graph_file, const std::string& terminals_file,
                const std::string& out_file, double delta0, double delta1,
                const CommonFlags& f) {
    WeightedGraph g = load_graph(graph_file);
    std::vector<VertexId> s = load_terminals(terminals_file);
    EdgeEstimates nu = diff_apx(g, s, delta0, delta1, RngSeed{f.seed});
    std::ofstream out(out_file);
    for (const auto& [id, value] : nu.values) {
        const Edge& e = g.edge(id);
        out << e.u << ' ' << e.v << ' ' << format_double(value) << '\n';
    }
    std::cerr << "diffapx wrote " << nu.values.size() << " estimates (jl rows " << nu.jl_rows
              << ", symbolic solver eps " << format_double(nu.solver_eps_symbolic) << ")\n";
    return kExitOk;
}

int cmd_verify(const std::string& graph_file, const CommonFlags& f) {
    WeightedGraph g = load_graph(graph_file);
    if (!g.is_connected()) {
        std::cerr << "verify: graph is disconnected; spectral identities need a connected input\n";
        return kExitValidation;
    }
    if (g.vertex_count() > f.dense_cap) {
        std::cerr << "verify: graph exceeds the dense cap (" << f.dense_cap << ")\n";
        return kExitValidation;
    }

    // deterministic vertex subset for the identity checks
    Rng rng(RngSeed{f.seed});
    std::vector<VertexId> s;
    std::size_t want = std::min<std::size_t>(5, g.vertex_count());
    while (s.size() < want) {
        VertexId v = static_cast<VertexId>(rng.below(g.vertex_count()));
        if (std::find(s.begin(), s.end(), v) == s.end()) s.push_back(v);
    }
    std::sort(s.begin(), s.end());

    bool all_ok = true;
    if (s.size() >= 2) {
        SubspaceBasis basis = make_coordinate_subspace(g, s);
        IdentityReport report = verify_identities(g, s, basis, 1e-6, f.dense_cap, RngSeed{f.seed});
        for (const auto& check : report.checks) {
            std::cout << (check.pass ? "PASS " : "FAIL ") << check.name << " residual "
                      << format_double(check.residual) << '\n';
            all_ok = all_ok && check.pass;
        }
    }
    if (g.vertex_count() <= 7 && g.edge_count() <= 20) {
        DenseOracle oracle(g, f.dense_cap);
        auto trees = enumerate_spanning_trees(g);
        double worst = 0;
        for (const Edge& e : g.edges())
            worst = std::max(worst,
                             std::abs(oracle.leverage(e.id) - tree_inclusion_fraction(trees, e.id)));
        bool ok = worst <= 1e-9;
        std::cout << (ok ? "PASS " : "FAIL ") << "kirchhoff_tree_fraction residual "
                  << format_double(worst) << '\n';
        all_ok = all_ok && ok;
    }
    return all_ok ? kExitOk : kExitValidation;
}

int cmd_calibrate(const std::string& corpus_dir, const std::string& out_file,
                  const CommonFlags& f) {
    std::vector<fs::path> files;
    if (!fs::is_directory(corpus_dir)) throw ValidationError("not a directory: " + corpus_dir);
    for (const auto& entry : fs::directory_iterator(corpus_dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ValidationError("calibration corpus is empty: " + corpus_dir);

    std::vector<WeightedGraph> corpus;
    for (const auto& p : files) corpus.push_back(load_graph(p.string()));
    double c_local = calibrate_c_local(corpus, f.dense_cap);
    if (out_file.empty()) {
        std::cout << format_double(c_local) << '\n';
    } else {
        std::ofstream out(out_file);
        out << format_double(c_local) << '\n';
    }
    std::cerr << "calibrated c_local over " << corpus.size() << " graphs\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral subspace sparsification toolkit"};
    app.require_subcommand(1);

    CommonFlags flags;

    std::string graph_file, terminals_file, pairs_file, out_path, corpus_dir;
    double delta0 = 0.25, delta1 = 1e-5;

    CLI::App* sp = app.add_subcommand("sparsify", "sparsify onto a terminal set");
    sp->add_option("graph", graph_file, "input graph file")->required();
    sp->add_option("--terminals", terminals_file, "terminal vertex file")->required();
    sp->add_option("--out", out_path, "output prefix (.graph/.cert/.trace)")->required();
    add_common(sp, flags);

    CLI::App* ra = app.add_subcommand("resapx", "batch effective-resistance estimates");
    ra->add_option("graph", graph_file, "input graph file")->required();
    ra->add_option("pairs", pairs_file, "vertex pair file")->required();
    ra->add_option("--out", out_path, "output file")->required();
    add_common(ra, flags);

    CLI::App* da = app.add_subcommand("diffapx", "resistance-difference estimates for G/S");
    da->add_option("graph", graph_file, "input graph file")->required();
    da->add_option("--terminals", terminals_file, "identified vertex set")->required();
    da->add_option("--out", out_path, "output file")->required();
    da->add_option("--delta0", delta0, "multiplicative error");
    da->add_option("--delta1", delta1, "additive error");
    add_common(da, flags);

    CLI::App* ve = app.add_subcommand("verify", "dense identity and Kirchhoff checks");
    ve->add_option("graph", graph_file, "input graph file")->required();
    add_common(ve, flags);

    CLI::App* ca = app.add_subcommand("calibrate", "calibrate c_local over a graph corpus");
    ca->add_option("corpus", corpus_dir, "directory of graph files")->required();
    ca->add_option("--out", out_path, "output file (stdout if omitted)");
    add_common(ca, flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sp->parsed()) return cmd_sparsify(graph_file, terminals_file, out_path, flags);
        if (ra->parsed()) return cmd_resapx(graph_file, pairs_file, out_path, flags);
        if (da->parsed()) return cmd_diffapx(graph_file, terminals_file, out_path, delta0, delta1, flags);
        if (ve->parsed()) return cmd_verify(graph_file, flags);
        if (ca->parsed()) return cmd_calibrate(corpus_dir, out_path, flags);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitParse;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitOk;
}
