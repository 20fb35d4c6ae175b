// Command-line front end. Pipeline stages communicate only through files;
// every output file gets a .meta.json sidecar echoing the effective config,
// and re-running a subcommand with that sidecar as --config reproduces the
// output byte for byte.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric
// failure.

#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "patentkg/patentkg.hpp"

namespace {

using nlohmann::json;
using namespace patentkg;

// Effective configuration of one subcommand run, echoed into sidecars.
class ConfigEcho {
public:
    template <typename T>
    void put(const std::string& key, const T& value) {
        values_[key] = value;
    }

    json to_json() const {
        json j = json::object();
        for (const auto& [k, v] : values_) j[k] = v;
        return j;
    }

private:
    std::map<std::string, json> values_;
};

void write_sidecar(const std::string& output_path, const std::string& command,
                   const ConfigEcho& echo) {
    json j = {{"command", command},
              {"artifact_version", kArtifactVersion},
              {"config", echo.to_json()}};
    std::ofstream out(output_path + ".meta.json", std::ios::binary);
    if (!out) throw io_error("cannot write sidecar for " + output_path);
    out << j.dump(2) << "\n";
}

// Expands --config FILE into argv-style tokens so explicit flags override
// file values. Accepts either a plain {flag: value} object or a sidecar
// produced by a previous run.
std::vector<std::string> config_file_args(const std::string& path, const std::string& command) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw parse_error("config file " + path + ": " + e.what());
    }
    if (j.contains("command") && j.contains("config")) {
        std::string recorded = j.at("command").get<std::string>();
        if (recorded != command)
            throw config_error("config file " + path + " records command '" + recorded +
                               "', not '" + command + "'");
        j = j.at("config");
    }
    if (!j.is_object()) throw config_error("config file " + path + ": expected a JSON object");
    std::vector<std::string> args;
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::string value;
        if (it.value().is_string())
            value = it.value().get<std::string>();
        else
            value = it.value().dump();
        args.push_back("--" + it.key() + "=" + value);
    }
    return args;
}

DocFormat parse_format(const std::string& s) {
    if (s == "jsonl") return DocFormat::jsonl;
    if (s == "csv") return DocFormat::csv;
    throw config_error("unknown document format: " + s);
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    for (const std::string& part : split(s, ',')) {
        if (part.empty()) continue;
        try {
            out.push_back(std::stoi(part));
        } catch (const std::exception&) {
            throw config_error("bad integer in list: '" + part + "'");
        }
    }
    return out;
}

std::vector<Method> parse_methods(const std::string& s) {
    std::vector<Method> out;
    for (const std::string& part : split(s, ','))
        if (!part.empty()) out.push_back(method_from_string(part));
    return out;
}

struct CommonTrainFlags {
    std::size_t epochs = 200;
    double lr = 0.01;
    double margin = 1.0;
    std::size_t batch = 128;
    std::uint64_t seed = 0;
    std::size_t dim_f = 64, dim_fprime = 64, dim_d = 64;
    double leaky_slope = 0.2;

    void attach(CLI::App* cmd) {
        cmd->add_option("--epochs", epochs, "Training epochs");
        cmd->add_option("--lr", lr, "SGD learning rate");
        cmd->add_option("--margin", margin, "Hinge margin gamma");
        cmd->add_option("--batch", batch, "Mini-batch size");
        cmd->add_option("--seed", seed, "RNG seed");
        cmd->add_option("--dim-f", dim_f, "Entity embedding width F");
        cmd->add_option("--dim-fprime", dim_fprime, "Encoder output width F'");
        cmd->add_option("--dim-d", dim_d, "Token state width d");
        cmd->add_option("--leaky-slope", leaky_slope, "LeakyReLU negative slope");
    }

    TrainConfig to_config() const {
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.learning_rate = lr;
        cfg.margin = margin;
        cfg.batch_size = batch;
        cfg.seed = seed;
        cfg.model.dim_f = dim_f;
        cfg.model.dim_fprime = dim_fprime;
        cfg.model.dim_d = dim_d;
        cfg.model.leaky_slope = leaky_slope;
        cfg.model.seed = seed;
        return cfg;
    }

    void echo(ConfigEcho& e) const {
        e.put("epochs", epochs);
        e.put("lr", lr);
        e.put("margin", margin);
        e.put("batch", batch);
        e.put("seed", seed);
        e.put("dim-f", dim_f);
        e.put("dim-fprime", dim_fprime);
        e.put("dim-d", dim_d);
        e.put("leaky-slope", leaky_slope);
    }
};

struct SynthFlags {
    SynthConfig cfg;

    void attach(CLI::App* cmd, const std::string& prefix = "") {
        cmd->add_option("--" + prefix + "communities", cfg.num_communities, "Community count");
        cmd->add_option("--" + prefix + "community-size", cfg.community_size,
                        "Entities per community");
        cmd->add_option("--" + prefix + "docs-per-year", cfg.docs_per_year, "Documents per year");
        cmd->add_option("--" + prefix + "years", cfg.years, "Years spanned (1..N)");
        cmd->add_option("--" + prefix + "entities-per-doc", cfg.entities_per_doc,
                        "Entities per document");
        cmd->add_option("--" + prefix + "mixing", cfg.mixing,
                        "Cross-community mixing probability");
        cmd->add_option("--" + prefix + "fillers-per-doc", cfg.fillers_per_doc,
                        "Filler tokens per document");
    }

    void echo(ConfigEcho& e, const std::string& prefix = "") const {
        e.put(prefix + "communities", cfg.num_communities);
        e.put(prefix + "community-size", cfg.community_size);
        e.put(prefix + "docs-per-year", cfg.docs_per_year);
        e.put(prefix + "years", cfg.years);
        e.put(prefix + "entities-per-doc", cfg.entities_per_doc);
        e.put(prefix + "mixing", cfg.mixing);
        e.put(prefix + "fillers-per-doc", cfg.fillers_per_doc);
    }
};

void write_docs_jsonl(const std::vector<Document>& docs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    for (const Document& d : docs) {
        json j = {{"id", d.id}, {"year", d.year}, {"title", d.title}, {"abstract", d.abstract_text}};
        out << j.dump() << "\n";
    }
    if (!out) throw io_error("write failed: " + path);
}

void write_lexicon(const Lexicon& lex, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    for (const std::string& term : lex.terms()) out << term << "\n";
    if (!out) throw io_error("write failed: " + path);
}

int run(int argc, char** argv) {
    CLI::App app{"Year-accumulative patent knowledge graphs: co-occurrence construction, "
                 "link prediction, and clique-based patent prediction"};
    app.require_subcommand(1);
    app.set_version_flag("--version",
                         std::string("patentkg ") + kArtifactVersion +
                             " (graph format v" + std::to_string(kGraphFormatVersion) +
                             ", model format v" + std::to_string(kModelFormatVersion) + ")");

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic corpus");
    SynthFlags synth_flags;
    std::uint64_t synth_seed = 42;
    std::string synth_docs_out = "docs.jsonl", synth_lex_out = "lexicon.txt";
    std::string synth_config_path;
    synth_flags.attach(synth);
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--out-docs", synth_docs_out, "Output documents (JSONL)");
    synth->add_option("--out-lexicon", synth_lex_out, "Output lexicon (one term per line)");
    synth->add_option("--config", synth_config_path, "JSON config file or sidecar");

    // --- build-kg ---
    auto* build = app.add_subcommand("build-kg", "Build the co-occurrence graph at a cutoff year");
    std::string build_docs, build_lex, build_out = "graph.json", build_tsv, build_format = "jsonl";
    std::string build_config_path;
    int build_cutoff = 0;
    unsigned build_threads = 1;
    build->add_option("--docs", build_docs, "Input documents")->required();
    build->add_option("--lexicon", build_lex, "Domain lexicon")->required();
    build->add_option("--cutoff", build_cutoff, "Cutoff year (inclusive)")->required();
    build->add_option("--format", build_format, "Document format: jsonl or csv");
    build->add_option("--out", build_out, "Output graph file");
    build->add_option("--tsv", build_tsv, "Also export a TSV triple view");
    build->add_option("--threads", build_threads, "Extraction threads (merge stays deterministic)");
    build->add_option("--config", build_config_path, "JSON config file or sidecar");

    // --- train ---
    auto* train_cmd = app.add_subcommand("train", "Train a translation model on a graph");
    std::string train_graph, train_method = "transe", train_out = "model.json";
    std::string train_docs_path, train_lex_path, train_format = "jsonl";
    std::string train_config_path;
    CommonTrainFlags train_flags;
    train_cmd->add_option("--graph", train_graph, "Input graph file")->required();
    train_cmd->add_option("--method", train_method, "transe, gat, or cgat");
    train_cmd->add_option("--out", train_out, "Output model checkpoint");
    train_cmd->add_option("--docs", train_docs_path, "Documents for context sentences (cgat)");
    train_cmd->add_option("--lexicon", train_lex_path, "Lexicon for context sentences (cgat)");
    train_cmd->add_option("--format", train_format, "Document format: jsonl or csv");
    train_flags.attach(train_cmd);
    train_cmd->add_option("--config", train_config_path, "JSON config file or sidecar");

    // --- predict-links ---
    auto* plinks = app.add_subcommand("predict-links", "Predict missing links on a graph");
    std::string pl_graph, pl_model, pl_method = "cnm", pl_out = "links.json";
    std::string pl_config_path;
    double pl_rho = 0.1;
    int pl_zeta = -1;
    bool pl_all_pairs = false;
    plinks->add_option("--graph", pl_graph, "Input graph file")->required();
    plinks->add_option("--method", pl_method, "cnm, transe, gat, or cgat");
    plinks->add_option("--model", pl_model, "Model checkpoint (non-CNM methods)");
    plinks->add_option("--rho", pl_rho, "Top-K fraction of edge count (non-CNM)");
    plinks->add_option("--zeta", pl_zeta, "CNM threshold override (default ceil(M/2))");
    plinks->add_flag("--all-pairs", pl_all_pairs, "Score all non-adjacent pairs");
    plinks->add_option("--out", pl_out, "Output link file");
    plinks->add_option("--config", pl_config_path, "JSON config file or sidecar");

    // --- predict-patents ---
    auto* ppat = app.add_subcommand("predict-patents",
                                    "Enumerate candidate patents from predicted links");
    std::string pp_graph, pp_links, pp_out = "candidates.json";
    std::string pp_docs, pp_lex, pp_format = "jsonl";
    std::string pp_config_path;
    std::size_t pp_cap = 100000;
    int pp_horizon = 0;
    ppat->add_option("--graph", pp_graph, "Input graph file")->required();
    ppat->add_option("--links", pp_links, "Predicted link file")->required();
    ppat->add_option("--out", pp_out, "Output candidate file");
    ppat->add_option("--clique-cap", pp_cap, "Maximum cliques to emit");
    ppat->add_option("--docs", pp_docs, "Documents for validation (optional)");
    ppat->add_option("--lexicon", pp_lex, "Lexicon for validation (optional)");
    ppat->add_option("--format", pp_format, "Document format: jsonl or csv");
    ppat->add_option("--horizon", pp_horizon, "Validation horizon in years (0: all)");
    ppat->add_option("--config", pp_config_path, "JSON config file or sidecar");

    // --- evaluate ---
    auto* eval_cmd = app.add_subcommand("evaluate", "Run the temporal backtest protocol");
    std::string ev_docs, ev_lex, ev_format = "jsonl", ev_out = "report.csv";
    std::string ev_cutoffs = "3", ev_methods = "cnm,gat,cgat";
    std::string ev_config_path;
    SynthFlags ev_synth;
    std::int64_t ev_synth_seed = -1;
    CommonTrainFlags ev_train;
    double ev_rho = 0.1;
    int ev_zeta = -1;
    bool ev_all_pairs = false;
    std::size_t ev_cap = 100000;
    int ev_horizon = 0, ev_reference = 0;
    unsigned ev_threads = 1;
    eval_cmd->add_option("--docs", ev_docs, "Input documents (omit when using --synth-seed)");
    eval_cmd->add_option("--lexicon", ev_lex, "Domain lexicon");
    eval_cmd->add_option("--format", ev_format, "Document format: jsonl or csv");
    eval_cmd->add_option("--synth-seed", ev_synth_seed,
                         "Generate the corpus internally with this seed");
    ev_synth.attach(eval_cmd, "synth-");
    eval_cmd->add_option("--cutoffs", ev_cutoffs, "Comma-separated cutoff years");
    eval_cmd->add_option("--methods", ev_methods, "Comma-separated methods");
    ev_train.attach(eval_cmd);
    eval_cmd->add_option("--rho", ev_rho, "Top-K fraction of edge count");
    eval_cmd->add_option("--zeta", ev_zeta, "CNM threshold override");
    eval_cmd->add_flag("--all-pairs", ev_all_pairs, "Score all non-adjacent pairs");
    eval_cmd->add_option("--clique-cap", ev_cap, "Maximum cliques per cell");
    eval_cmd->add_option("--horizon", ev_horizon, "Validation horizon in years (0: all)");
    eval_cmd->add_option("--reference-year", ev_reference,
                         "Reference year for link accuracy (0: final corpus year)");
    eval_cmd->add_option("--threads", ev_threads, "Extraction threads");
    eval_cmd->add_option("--out", ev_out, "Output CSV report");
    eval_cmd->add_option("--config", ev_config_path, "JSON config file or sidecar");

    // First pass finds --config so file values can be injected before the
    // real parse; explicit command-line flags still win.
    std::vector<std::string> raw_args(argv + 1, argv + argc);
    if (!raw_args.empty()) {
        std::string command = raw_args[0];
        std::string config_path;
        for (std::size_t i = 1; i < raw_args.size(); ++i) {
            if (raw_args[i] == "--config" && i + 1 < raw_args.size())
                config_path = raw_args[i + 1];
            else if (raw_args[i].rfind("--config=", 0) == 0)
                config_path = raw_args[i].substr(9);
        }
        if (!config_path.empty()) {
            std::vector<std::string> injected = config_file_args(config_path, command);
            raw_args.insert(raw_args.begin() + 1, injected.begin(), injected.end());
        }
    }
    std::vector<const char*> parse_argv;
    parse_argv.push_back(argv[0]);
    for (const std::string& a : raw_args) parse_argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(parse_argv.size()), parse_argv.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (synth->parsed()) {
        synth_flags.cfg.seed = synth_seed;
        SynthCorpus corpus = generate_synthetic_corpus(synth_flags.cfg);
        write_docs_jsonl(corpus.docs, synth_docs_out);
        write_lexicon(corpus.lexicon, synth_lex_out);
        ConfigEcho echo;
        synth_flags.echo(echo);
        echo.put("seed", synth_seed);
        echo.put("out-docs", synth_docs_out);
        echo.put("out-lexicon", synth_lex_out);
        write_sidecar(synth_docs_out, "synth", echo);
        write_sidecar(synth_lex_out, "synth", echo);
        std::cerr << "synth: " << corpus.docs.size() << " documents, " << corpus.lexicon.size()
                  << " lexicon terms\n";
        return 0;
    }

    if (build->parsed()) {
        std::vector<Document> docs = load_documents(build_docs, parse_format(build_format));
        Lexicon lex = load_lexicon(build_lex);
        if (lex.duplicates_collapsed() > 0)
            std::cerr << "build-kg: lexicon collapsed " << lex.duplicates_collapsed()
                      << " duplicate terms\n";
        KnowledgeGraph kg = build_graph(docs, lex, build_cutoff, build_threads);
        if (kg.entity_count() == 0)
            std::cerr << "build-kg: warning: no documents at or before cutoff "
                      << build_cutoff << "; graph is empty\n";
        serialize_graph(kg, build_out);
        ConfigEcho echo;
        echo.put("docs", build_docs);
        echo.put("lexicon", build_lex);
        echo.put("cutoff", build_cutoff);
        echo.put("format", build_format);
        echo.put("out", build_out);
        echo.put("threads", build_threads);
        if (!build_tsv.empty()) {
            export_graph_tsv(kg, build_tsv);
            echo.put("tsv", build_tsv);
            write_sidecar(build_tsv, "build-kg", echo);
        }
        write_sidecar(build_out, "build-kg", echo);
        std::cerr << "build-kg: " << kg.entity_count() << " entities, " << kg.edge_count()
                  << " edges, " << kg.patents.size() << " patents\n";
        return 0;
    }

    if (train_cmd->parsed()) {
        Method method = method_from_string(train_method);
        if (method == Method::CNM) throw config_error("train: CNM has no trainable model");
        KnowledgeGraph kg = deserialize_graph(train_graph);
        TrainConfig cfg = train_flags.to_config();
        std::map<std::string, std::vector<std::string>> sentences;
        if (method == Method::CGAT) {
            if (train_docs_path.empty() || train_lex_path.empty())
                throw config_error("train: cgat requires --docs and --lexicon for context sentences");
            std::vector<Document> docs = load_documents(train_docs_path, parse_format(train_format));
            std::vector<Document> train_docs;
            for (const Document& d : docs)
                if (d.year <= kg.cutoff_year) train_docs.push_back(d);
            sentences = collect_context_sentences(train_docs, load_lexicon(train_lex_path));
        }
        TransEModel model = train(method, kg, cfg, sentences);
        save_model(model, train_out);
        ConfigEcho echo;
        echo.put("graph", train_graph);
        echo.put("method", train_method);
        echo.put("out", train_out);
        if (!train_docs_path.empty()) echo.put("docs", train_docs_path);
        if (!train_lex_path.empty()) echo.put("lexicon", train_lex_path);
        echo.put("format", train_format);
        train_flags.echo(echo);
        write_sidecar(train_out, "train", echo);
        std::cerr << "train: " << method_name(method) << ", " << cfg.epochs << " epochs, final loss "
                  << (model.loss_trace.empty() ? 0.0 : model.loss_trace.back()) << "\n";
        return 0;
    }

    if (plinks->parsed()) {
        Method method = method_from_string(pl_method);
        KnowledgeGraph kg = deserialize_graph(pl_graph);
        PredictedLinkSet links;
        if (method == Method::CNM) {
            std::optional<int> zeta;
            if (pl_zeta >= 0) zeta = pl_zeta;
            links = cnm_predict(kg, zeta);
        } else {
            if (pl_model.empty())
                throw config_error("predict-links: --model is required for " + pl_method);
            TransEModel model = load_model(pl_model, kg);
            PredictConfig cfg;
            cfg.rho = pl_rho;
            cfg.all_pairs = pl_all_pairs;
            links = predict_links(method, kg, model, cfg);
        }
        if (!links.warning.empty()) std::cerr << "predict-links: warning: " << links.warning << "\n";
        save_links(links, pl_out);
        ConfigEcho echo;
        echo.put("graph", pl_graph);
        echo.put("method", pl_method);
        if (!pl_model.empty()) echo.put("model", pl_model);
        echo.put("rho", pl_rho);
        if (pl_zeta >= 0) echo.put("zeta", pl_zeta);
        echo.put("all-pairs", pl_all_pairs);
        echo.put("out", pl_out);
        write_sidecar(pl_out, "predict-links", echo);
        std::cerr << "predict-links: " << links.links.size() << " links (" << links.method << ")\n";
        return 0;
    }

    if (ppat->parsed()) {
        KnowledgeGraph kg = deserialize_graph(pp_graph);
        PredictedLinkSet links = load_links(pp_links, kg);
        KnowledgeGraph augmented = augment_graph(kg, links);
        std::vector<PredictedPatent> candidates =
            enumerate_candidate_patents(augmented, pp_cap, links.method);
        std::map<std::string, std::set<int>> futures;
        bool validate = !pp_docs.empty() && !pp_lex.empty();
        if (validate) {
            std::vector<Document> docs = load_documents(pp_docs, parse_format(pp_format));
            futures = future_patent_sets(kg, docs, load_lexicon(pp_lex), kg.cutoff_year,
                                         pp_horizon);
        }
        save_candidates(candidates, augmented, pp_out, validate ? &futures : nullptr);
        ConfigEcho echo;
        echo.put("graph", pp_graph);
        echo.put("links", pp_links);
        echo.put("out", pp_out);
        echo.put("clique-cap", pp_cap);
        if (validate) {
            echo.put("docs", pp_docs);
            echo.put("lexicon", pp_lex);
            echo.put("format", pp_format);
            echo.put("horizon", pp_horizon);
        }
        write_sidecar(pp_out, "predict-patents", echo);
        std::cerr << "predict-patents: " << candidates.size() << " candidates\n";
        return 0;
    }

    if (eval_cmd->parsed()) {
        std::vector<Document> docs;
        Lexicon lex;
        if (ev_synth_seed >= 0) {
            ev_synth.cfg.seed = static_cast<std::uint64_t>(ev_synth_seed);
            SynthCorpus corpus = generate_synthetic_corpus(ev_synth.cfg);
            docs = std::move(corpus.docs);
            lex = std::move(corpus.lexicon);
        } else {
            if (ev_docs.empty() || ev_lex.empty())
                throw config_error("evaluate: provide --docs and --lexicon, or --synth-seed");
            docs = load_documents(ev_docs, parse_format(ev_format));
            lex = load_lexicon(ev_lex);
        }
        BacktestConfig cfg;
        cfg.train = ev_train.to_config();
        cfg.predict.rho = ev_rho;
        cfg.predict.all_pairs = ev_all_pairs;
        if (ev_zeta >= 0) cfg.zeta = ev_zeta;
        cfg.clique_cap = ev_cap;
        cfg.horizon_years = ev_horizon;
        cfg.reference_year = ev_reference;
        cfg.threads = ev_threads;

        std::vector<int> cutoffs = parse_int_list(ev_cutoffs);
        std::vector<Method> methods = parse_methods(ev_methods);
        BacktestReport report = backtest(docs, lex, cutoffs, methods, cfg);
        save_report(report, ev_out);

        ConfigEcho echo;
        if (ev_synth_seed >= 0) {
            echo.put("synth-seed", ev_synth_seed);
            ev_synth.echo(echo, "synth-");
        } else {
            echo.put("docs", ev_docs);
            echo.put("lexicon", ev_lex);
            echo.put("format", ev_format);
        }
        echo.put("cutoffs", ev_cutoffs);
        echo.put("methods", ev_methods);
        ev_train.echo(echo);
        echo.put("rho", ev_rho);
        if (ev_zeta >= 0) echo.put("zeta", ev_zeta);
        echo.put("all-pairs", ev_all_pairs);
        echo.put("clique-cap", ev_cap);
        echo.put("horizon", ev_horizon);
        echo.put("reference-year", ev_reference);
        echo.put("threads", ev_threads);
        echo.put("out", ev_out);

        json sidecar = report_sidecar_json(report);
        sidecar["command"] = "evaluate";
        sidecar["artifact_version"] = kArtifactVersion;
        sidecar["config"] = echo.to_json();
        std::ofstream side(ev_out + ".meta.json", std::ios::binary);
        if (!side) throw io_error("cannot write sidecar for " + ev_out);
        side << sidecar.dump(2) << "\n";

        std::cerr << "evaluate: " << report.rows.size() << " rows -> " << ev_out << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const patentkg::numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const patentkg::config_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const patentkg::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
