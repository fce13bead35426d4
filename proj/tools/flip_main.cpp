// flip: command-line front end for vocabulary building, synthetic data,
// training, sweeps, keyword extraction, evaluation and checkpoint inspection.
//
// Exit codes: 0 success, 1 usage error, 2 data or format error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "flip/flip.hpp"

namespace {

using namespace flip;
namespace fs = std::filesystem;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(IoErrc::open_failed, path);
    out << text;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_text(path, text);
}

void echo_config(const CLI::App& cmd) {
    std::cerr << "# effective config: " << cmd.get_parent()->get_name() << ' ' << cmd.get_name() << '\n'
              << cmd.config_to_str(true, false) << "# end config\n";
}

void echo_json(const nlohmann::ordered_json& j) { std::cerr << "# resolved: " << j.dump() << '\n'; }

ModelKind parse_kind(const std::string& s) {
    if (s == "factorized") return ModelKind::Factorized;
    if (s == "full") return ModelKind::Full;
    throw UsageError("--kind must be 'factorized' or 'full'");
}

Checkpoint load_checkpoint_for(const std::string& path, const Dataset& ds, bool strict) {
    auto ck = read_checkpoint(path);
    verify_vocabulary(ck, ds.vocab_hash, strict);
    if (ck.params.vocab_size() != ds.vocab.size())
        throw IoError(IoErrc::kind_dims_mismatch, path + ": checkpoint has " + std::to_string(ck.params.vocab_size()) +
                                                      " concepts, vocabulary has " + std::to_string(ds.vocab.size()));
    if (ck.params.dim() != ds.dim())
        throw IoError(IoErrc::kind_dims_mismatch, path + ": checkpoint expects dim " + std::to_string(ck.params.dim()) +
                                                      ", embeddings have " + std::to_string(ds.dim()));
    return ck;
}

const Matrix<float>& embeddings_of(const Dataset& ds, bool secondary) {
    if (!secondary) return ds.primary;
    if (!ds.secondary) throw UsageError("--secondary requested but the manifest has no secondary_embeddings");
    return *ds.secondary;
}

// ---- vocab -------------------------------------------------------------------------

struct VocabBuildArgs {
    std::string corpus, out;
    std::size_t size = 100000;
};

void run_vocab_build(const VocabBuildArgs& a) {
    const auto corpus = read_corpus(a.corpus);
    const auto vocab = build_vocabulary(corpus, a.size);
    write_vocabulary(vocab, a.out);
    std::cerr << "wrote " << vocab.size() << " concepts to " << a.out << '\n';
}

struct VocabConceptsArgs {
    std::string corpus, out;
    ConceptVocabularyParams params;
};

void run_vocab_concepts(const VocabConceptsArgs& a) {
    const auto corpus = read_corpus(a.corpus);
    const auto vocab = build_concept_vocabulary(corpus, a.params);
    write_vocabulary(vocab, a.out);
    std::size_t bigrams = 0;
    for (const auto& c : vocab.concepts()) bigrams += c.find(' ') != std::string::npos;
    std::cerr << "wrote " << vocab.size() - bigrams << " unigrams and " << bigrams << " bigrams to " << a.out << '\n';
}

// ---- synth -------------------------------------------------------------------------

struct SynthArgs {
    SynthConfig cfg;
    std::string out;
};

void run_synth(const SynthArgs& a) {
    const auto data = generate(a.cfg);
    const auto paths = write_synth(data, a.out);
    std::cerr << "wrote " << paths.train_manifest << ", " << paths.dev_manifest << ", " << paths.test_manifest << '\n';
}

// ---- train / sweep -----------------------------------------------------------------

struct TrainArgs {
    std::string manifest, dev, out;
    TrainConfig cfg;
    std::string kind = "factorized";
    std::string snapshot = "best_dev";
    std::optional<double> alpha;
    bool nondeterministic = false;
};

TrainConfig resolve(TrainArgs& a, const Dataset& train_set) {
    TrainConfig cfg = a.cfg;
    cfg.kind = parse_kind(a.kind);
    if (a.snapshot == "best_dev")
        cfg.snapshot = SnapshotPolicy::BestDev;
    else if (a.snapshot == "last")
        cfg.snapshot = SnapshotPolicy::Last;
    else
        throw UsageError("--snapshot must be 'best_dev' or 'last'");
    cfg.alpha = a.alpha.value_or(train_set.alpha);
    cfg.deterministic = !a.nondeterministic;
    try {
        cfg.validate();
    } catch (const TrainingError& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

void run_train(TrainArgs& a) {
    const auto train_set = load_dataset(a.manifest);
    const auto dev = load_dataset(a.dev);
    const auto cfg = resolve(a, train_set);
    echo_json(cfg.to_json());
    const auto res = train(train_set, dev, cfg);
    write_checkpoint(res.checkpoint, a.out);
    write_text(a.out + ".history.csv", res.history.to_csv());
    std::cerr << "best dev recall " << res.checkpoint.meta.dev_recall << " at epoch " << res.checkpoint.meta.epoch
              << "; checkpoint " << a.out << '\n';
}

struct SweepArgs {
    TrainArgs base;
    std::vector<std::size_t> ranks;
    std::vector<double> lambda1s, lambda2s, alphas;
    std::string report, checkpoint_dir;
};

void run_sweep(SweepArgs& a) {
    const auto train_set = load_dataset(a.base.manifest);
    const auto dev = load_dataset(a.base.dev);
    const auto cfg = resolve(a.base, train_set);
    echo_json(cfg.to_json());
    const auto cells = sweep(SweepGrid{a.ranks, a.lambda1s, a.lambda2s, a.alphas}, train_set, dev, cfg);
    emit(a.report, sweep_report_csv(cells));
    if (!a.checkpoint_dir.empty()) {
        fs::create_directories(a.checkpoint_dir);
        for (const auto& c : cells) {
            if (!c.checkpoint) continue;
            std::ostringstream name;
            name << (c.config.kind == ModelKind::Full ? std::string("full") : "r" + std::to_string(c.config.rank))
                 << "_l1-" << c.config.lambda1 << "_l2-" << c.config.lambda2 << "_a-" << c.config.alpha << ".ckpt";
            write_checkpoint(*c.checkpoint, (fs::path(a.checkpoint_dir) / name.str()).string());
        }
    }
    std::size_t failed = 0;
    for (const auto& c : cells)
        if (!c.error.empty()) {
            ++failed;
            std::cerr << "cell failed (rank " << c.config.rank << "): " << c.error << '\n';
        }
    if (failed == cells.size()) throw TrainingError("every sweep cell failed");
}

// ---- extract -----------------------------------------------------------------------

struct ExtractArgs {
    std::string checkpoint, manifest, embeddings, vocabulary, out;
    std::size_t k = 10;
    bool k_from_reference = false;
    bool no_bias = false;
    bool secondary = false;
    bool strict = false;
};

void run_extract(const ExtractArgs& a) {
    std::optional<Dataset> ds;
    Matrix<float> emb;
    if (!a.manifest.empty()) {
        ds = load_dataset(a.manifest);
        emb = embeddings_of(*ds, a.secondary);
    } else {
        if (a.embeddings.empty() || a.vocabulary.empty())
            throw UsageError("extract needs --manifest, or both --embeddings and --vocabulary");
        if (a.k_from_reference) throw UsageError("--k_from_reference requires --manifest");
        ds = make_dataset(read_vocabulary(a.vocabulary), {}, Matrix<float>(0, 0));
        ds->vocab_hash = hash_file(a.vocabulary);
        emb = read_embeddings(a.embeddings).matrix();
        ds->primary = Matrix<float>(0, emb.cols());
    }
    const auto ck = load_checkpoint_for(a.checkpoint, *ds, a.strict);
    const auto policy = a.k_from_reference ? KPolicy::reference_counts(ds->references()) : KPolicy::fixed(a.k);
    const auto ex = batch_extract(ck.params, ds->vocab, emb, policy, !a.no_bias);

    std::string text;
    char score[32];
    for (std::size_t i = 0; i < ex.size(); ++i) {
        text += std::to_string(i);
        for (const auto& kw : ex[i].keywords) {
            std::snprintf(score, sizeof score, "%.6g", kw.score);
            text += '\t' + kw.text + ':' + score;
        }
        text += '\n';
    }
    emit(a.out, text);
}

// ---- eval --------------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint, manifest, out;
    bool no_bias = false;
    bool secondary = false;
    bool strict = false;
    bool dump_values = false;
};

void publish(const EvalArgs& a, const std::vector<EvalReport>& reports) {
    std::cout << reports_table(reports);
    if (!a.out.empty()) write_text(a.out, reports_csv(reports));
    if (a.dump_values && !a.out.empty()) {
        std::string dump = "metric,k,index,value\n";
        for (const auto& r : reports)
            for (std::size_t i = 0; i < r.values.size(); ++i)
                dump += r.metric + "," + (r.k ? std::to_string(*r.k) : "") + "," + std::to_string(i) + "," +
                        format_number(r.values[i]) + "\n";
        write_text(a.out + ".values.csv", dump);
    }
}

std::vector<Extraction> reference_k_extractions(const Checkpoint& ck, const Dataset& ds, bool secondary, bool bias,
                                                const std::vector<std::size_t>& ks) {
    return batch_extract(ck.params, ds.vocab, embeddings_of(ds, secondary), KPolicy::per_row(ks), bias);
}

void run_eval_accuracy(const EvalArgs& a) {
    const auto ds = load_dataset(a.manifest);
    const auto ck = load_checkpoint_for(a.checkpoint, ds, a.strict);
    const auto refs = ds.references();
    const auto ex = batch_extract(ck.params, ds.vocab, embeddings_of(ds, a.secondary), KPolicy::reference_counts(refs),
                                  !a.no_bias);
    publish(a, {accuracy(ex, refs)});
}

void run_eval_span(const EvalArgs& a) {
    const auto ds = load_dataset(a.manifest);
    const auto ck = load_checkpoint_for(a.checkpoint, ds, a.strict);
    std::vector<std::vector<SpanUnit>> spans;
    std::vector<std::size_t> ks;
    for (const auto& s : ds.sentences) {
        spans.push_back(greedy_spans(s, ds.vocab));
        ks.push_back(spans.back().size());
    }
    const auto ex = reference_k_extractions(ck, ds, a.secondary, !a.no_bias, ks);
    publish(a, {span_accuracy(ex, spans)});
}

struct JaccardArgs {
    EvalArgs common;
    std::string checkpoint_b, manifest_b;
    bool secondary_b = false;
};

void run_eval_jaccard(const JaccardArgs& a) {
    const auto ds_a = load_dataset(a.common.manifest);
    const auto ds_b = a.manifest_b.empty() ? ds_a : load_dataset(a.manifest_b);
    if (ds_a.sentences != ds_b.sentences) throw EvalError("jaccard requires both manifests to cover the same test rows");
    const auto ck_a = load_checkpoint_for(a.common.checkpoint, ds_a, a.common.strict);
    const auto ck_b = load_checkpoint_for(a.checkpoint_b, ds_b, a.common.strict);
    const auto refs = ds_a.references();
    const auto policy = KPolicy::reference_counts(refs);
    const auto ex_a = batch_extract(ck_a.params, ds_a.vocab, embeddings_of(ds_a, a.common.secondary), policy, !a.common.no_bias);
    const auto ex_b = batch_extract(ck_b.params, ds_b.vocab, embeddings_of(ds_b, a.secondary_b), policy, !a.common.no_bias);
    const auto hits_a = hit_sets(ex_a, refs);
    const auto hits_b = hit_sets(ex_b, ds_b.references());
    const auto j = jaccard_hits(hits_a, hits_b);
    auto pooled = summarize("jaccard_pooled", {j.pooled});
    pooled.n = j.per_utterance.n;
    publish(a.common, {j.per_utterance, pooled});
}

struct NerArgs {
    EvalArgs common;
    std::string entities;
    std::vector<std::size_t> ks{1, 2, 5, 10, 20, 50};
};

void run_eval_ner(const NerArgs& a) {
    const auto ds = load_dataset(a.common.manifest);
    const auto ck = load_checkpoint_for(a.common.checkpoint, ds, a.common.strict);
    const auto entities = read_entities(a.entities);
    std::size_t kmax = 1;
    for (auto k : a.ks) {
        if (k == 0) throw UsageError("--k values must be >= 1");
        kmax = std::max(kmax, k);
    }
    const auto ex = batch_extract(ck.params, ds.vocab, embeddings_of(ds, a.common.secondary),
                                  KPolicy::fixed(std::min(kmax, ds.vocab.size())), !a.common.no_bias);
    auto reports = ne_recall(ex, entities, a.ks, NeMode::Strict);
    for (auto& r : ne_recall(ex, entities, a.ks, NeMode::Partial)) reports.push_back(std::move(r));
    const std::string tag = a.common.no_bias ? "_nobias" : "_bias";
    for (auto& r : reports) r.metric += tag;
    publish(a.common, reports);
}

// ---- inspect -----------------------------------------------------------------------

void run_inspect(const std::string& path) {
    const auto ck = read_checkpoint(path);
    nlohmann::ordered_json j;
    j["kind"] = to_string(ck.params.kind);
    j["vocab_size"] = ck.params.vocab_size();
    j["dim"] = ck.params.dim();
    j["rank"] = ck.params.rank();
    char hash[24];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(ck.vocab_hash));
    j["vocab_hash"] = hash;
    j["epoch"] = ck.meta.epoch;
    j["dev_recall"] = ck.meta.dev_recall;
    j["sparsity"] = sparsity(ck.params);
    j["config"] = nlohmann::ordered_json::parse(ck.meta.config.empty() ? "null" : ck.meta.config, nullptr, false);
    std::cout << j.dump(2) << '\n';
}

// ---- option wiring -----------------------------------------------------------------

void add_train_options(CLI::App* cmd, TrainArgs& a) {
    cmd->add_option("--manifest", a.manifest, "training manifest")->required();
    cmd->add_option("--dev", a.dev, "development manifest")->required();
    cmd->add_option("--eta", a.cfg.eta, "initial learning rate")->capture_default_str();
    cmd->add_option("--max_epochs", a.cfg.max_epochs)->capture_default_str();
    cmd->add_option("--batch_size", a.cfg.batch_size)->capture_default_str();
    cmd->add_option("--alpha", a.alpha, "mixing coefficient (default: the manifest's alpha)");
    cmd->add_option("--lambda1", a.cfg.lambda1, "L1 strength on A (or W)")->capture_default_str();
    cmd->add_option("--lambda2", a.cfg.lambda2, "weight decay on B")->capture_default_str();
    cmd->add_option("--kind", a.kind, "factorized or full")->capture_default_str();
    cmd->add_option("--rank", a.cfg.rank, "factorization rank r")->capture_default_str();
    cmd->add_option("--plateau_patience", a.cfg.plateau_patience)->capture_default_str();
    cmd->add_option("--stop_patience", a.cfg.stop_patience)->capture_default_str();
    cmd->add_option("--improvement_eps", a.cfg.improvement_eps)->capture_default_str();
    cmd->add_option("--seed", a.cfg.seed)->capture_default_str();
    cmd->add_option("--beta1", a.cfg.beta1)->capture_default_str();
    cmd->add_option("--beta2", a.cfg.beta2)->capture_default_str();
    cmd->add_option("--epsilon", a.cfg.epsilon)->capture_default_str();
    cmd->add_flag("--nondeterministic", a.nondeterministic, "allow thread-count dependent reduction order");
    cmd->add_flag("--dev_on_secondary", a.cfg.dev_on_secondary, "early-stop on secondary dev embeddings");
    cmd->add_option("--snapshot", a.snapshot, "best_dev or last")->capture_default_str();
    a.cfg.threads = worker_threads();
    cmd->add_option("--threads", a.cfg.threads, "worker threads (default: FLIP_THREADS or all cores)")->capture_default_str();
}

void add_eval_options(CLI::App* cmd, EvalArgs& a) {
    cmd->add_option("--checkpoint", a.checkpoint)->required();
    cmd->add_option("--manifest", a.manifest)->required();
    cmd->add_option("--out", a.out, "CSV report path");
    cmd->add_flag("--no-bias,--no_bias", a.no_bias, "rank by logits without the bias vector");
    cmd->add_flag("--secondary", a.secondary, "use the manifest's secondary embeddings");
    cmd->add_flag("--strict", a.strict, "vocabulary hash mismatch is an error");
    cmd->add_flag("--dump_values", a.dump_values, "also write per-row values to <out>.values.csv");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flip: linear probes that recover keywords from sentence embeddings"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "show help for every subcommand");

    auto* vocab = app.add_subcommand("vocab", "build vocabularies")->require_subcommand(1);
    VocabBuildArgs vb;
    auto* vocab_build = vocab->add_subcommand("build", "frequency-ranked unigram vocabulary");
    vocab_build->add_option("--corpus", vb.corpus, "raw text, one sentence per line")->required();
    vocab_build->add_option("--size", vb.size, "number of concepts")->capture_default_str();
    vocab_build->add_option("--out", vb.out)->required();

    VocabConceptsArgs vc;
    auto* vocab_concepts = vocab->add_subcommand("concepts", "unigram + PMI-filtered bigram concept vocabulary");
    vocab_concepts->add_option("--corpus", vc.corpus)->required();
    vocab_concepts->add_option("--f_min", vc.params.f_min)->capture_default_str();
    vocab_concepts->add_option("--pmi_min", vc.params.pmi_min)->capture_default_str();
    vocab_concepts->add_option("--n_uni", vc.params.n_uni)->capture_default_str();
    vocab_concepts->add_option("--n_bi", vc.params.n_bi)->capture_default_str();
    vocab_concepts->add_option("--out", vc.out)->required();

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with planted linear structure");
    synth->add_option("--out", sa.out, "output directory")->required();
    synth->add_option("--vocab_size", sa.cfg.vocab_size)->capture_default_str();
    synth->add_option("--dim", sa.cfg.dim)->capture_default_str();
    synth->add_option("--min_len", sa.cfg.min_len)->capture_default_str();
    synth->add_option("--max_len", sa.cfg.max_len)->capture_default_str();
    synth->add_option("--n_train", sa.cfg.n_train)->capture_default_str();
    synth->add_option("--n_dev", sa.cfg.n_dev)->capture_default_str();
    synth->add_option("--n_test", sa.cfg.n_test)->capture_default_str();
    synth->add_option("--noise_sigma", sa.cfg.noise_sigma)->capture_default_str();
    synth->add_option("--zipf_exponent", sa.cfg.zipf_exponent)->capture_default_str();
    synth->add_option("--planted_rank", sa.cfg.planted_rank)->capture_default_str();
    synth->add_option("--pair_noise_sigma", sa.cfg.pair_noise_sigma)->capture_default_str();
    synth->add_option("--seed", sa.cfg.seed)->capture_default_str();
    synth->add_option("--alpha", sa.cfg.alpha, "alpha written into the manifests")->capture_default_str();
    synth->add_option("--n_entities", sa.cfg.n_entities)->capture_default_str();
    synth->add_option("--entity_rate", sa.cfg.entity_rate)->capture_default_str();

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "train a probe; writes <out> and <out>.history.csv");
    add_train_options(train_cmd, ta);
    train_cmd->add_option("--out", ta.out, "checkpoint path")->required();

    SweepArgs sw;
    auto* sweep_cmd = app.add_subcommand("sweep", "grid sweep over rank / lambda1 / lambda2 / alpha");
    add_train_options(sweep_cmd, sw.base);
    sweep_cmd->add_option("--ranks", sw.ranks, "comma list; 0 selects the full model")->delimiter(',');
    sweep_cmd->add_option("--lambda1s", sw.lambda1s)->delimiter(',');
    sweep_cmd->add_option("--lambda2s", sw.lambda2s)->delimiter(',');
    sweep_cmd->add_option("--alphas", sw.alphas)->delimiter(',');
    sweep_cmd->add_option("--out", sw.report, "CSV report path (default: stdout)");
    sweep_cmd->add_option("--checkpoint_dir", sw.checkpoint_dir, "write each cell's checkpoint here");

    ExtractArgs ea;
    auto* extract = app.add_subcommand("extract", "top-k keywords per embedding row");
    extract->add_option("--checkpoint", ea.checkpoint)->required();
    extract->add_option("--manifest", ea.manifest);
    extract->add_option("--embeddings", ea.embeddings, "embedding file (with --vocabulary, instead of --manifest)")
        ;
    extract->add_option("--vocabulary", ea.vocabulary);
    extract->add_option("--k", ea.k)->capture_default_str()->check(CLI::PositiveNumber);
    extract->add_flag("--k_from_reference", ea.k_from_reference, "k per row = in-vocabulary reference token count");
    extract->add_flag("--no-bias,--no_bias", ea.no_bias);
    extract->add_flag("--secondary", ea.secondary);
    extract->add_flag("--strict", ea.strict);
    extract->add_option("--out", ea.out, "TSV output (default: stdout)");

    auto* eval = app.add_subcommand("eval", "evaluation metrics")->require_subcommand(1);
    EvalArgs acc_args, span_args;
    auto* eval_acc = eval->add_subcommand("accuracy", "keyword accuracy with k = reference count");
    add_eval_options(eval_acc, acc_args);
    auto* eval_span = eval->add_subcommand("span", "span-aware accuracy over greedy concept spans");
    add_eval_options(eval_span, span_args);
    JaccardArgs ja;
    auto* eval_jac = eval->add_subcommand("jaccard", "Jaccard index between two models' hit sets");
    add_eval_options(eval_jac, ja.common);
    eval_jac->add_option("--checkpoint_b", ja.checkpoint_b)->required();
    eval_jac->add_option("--manifest_b", ja.manifest_b, "embeddings for model b (default: --manifest)");
    eval_jac->add_flag("--secondary_b", ja.secondary_b, "model b reads secondary embeddings");
    NerArgs na;
    auto* eval_ner = eval->add_subcommand("ner", "named-entity recall@k, strict and partial");
    add_eval_options(eval_ner, na.common);
    eval_ner->add_option("--entities", na.entities, "TSV: utterance_index<TAB>entity")->required();
    eval_ner->add_option("--k", na.ks, "comma list of k")->delimiter(',')->capture_default_str();

    std::string inspect_path;
    auto* inspect = app.add_subcommand("inspect", "inspect artifacts")->require_subcommand(1);
    auto* inspect_ck = inspect->add_subcommand("checkpoint", "print checkpoint header as JSON");
    inspect_ck->add_option("path", inspect_path)->required();

    if (argc <= 1) {
        std::cerr << app.help();
        return kExitUsage;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    auto run = [&](CLI::App* cmd, auto&& fn) {
        if (!cmd->parsed()) return false;
        echo_config(*cmd);
        fn();
        return true;
    };
    try {
        run(vocab_build, [&] { run_vocab_build(vb); }) || run(vocab_concepts, [&] { run_vocab_concepts(vc); }) ||
            run(synth, [&] { run_synth(sa); }) || run(train_cmd, [&] { run_train(ta); }) ||
            run(sweep_cmd, [&] { run_sweep(sw); }) || run(extract, [&] { run_extract(ea); }) ||
            run(eval_acc, [&] { run_eval_accuracy(acc_args); }) || run(eval_span, [&] { run_eval_span(span_args); }) ||
            run(eval_jac, [&] { run_eval_jaccard(ja); }) || run(eval_ner, [&] { run_eval_ner(na); }) ||
            run(inspect_ck, [&] { run_inspect(inspect_path); });
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return 0;
}
