// Command-line front end: train, eval, pack, quantize-vq, classify, size,
// and bench subcommands over the dataset and model-file conventions shared
// with the library. Exit codes: 0 success, 1 usage or input error, 2
// internal error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <streambuf>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "bcp/bcp.hpp"

namespace {

namespace fs = std::filesystem;

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string fmt_fixed(double v, int places) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", places, v);
    return buf;
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

void echo_config(const std::string& command, const KeyValues& kv) {
    std::cout << "# " << command << " configuration\n";
    for (const auto& [k, v] : kv) std::cout << "#   " << k << " = " << v << '\n';
}

void write_manifest(const std::string& path, const KeyValues& kv) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw bcp::io_error(path + ": cannot open for writing");
    for (const auto& [k, v] : kv) os << k << '\t' << v << '\n';
    if (!os.good()) throw bcp::io_error(path + ": write failed");
}

// Duplicates train progress onto the console and the log file.
class TeeBuf : public std::streambuf {
public:
    TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

protected:
    int overflow(int ch) override {
        if (ch == traits_type::eof()) return traits_type::not_eof(ch);
        const bool ok_a = a_->sputc(static_cast<char>(ch)) != traits_type::eof();
        const bool ok_b = b_->sputc(static_cast<char>(ch)) != traits_type::eof();
        return ok_a && ok_b ? ch : traits_type::eof();
    }
    int sync() override {
        const int ra = a_->pubsync();
        const int rb = b_->pubsync();
        return ra == 0 && rb == 0 ? 0 : -1;
    }

private:
    std::streambuf* a_;
    std::streambuf* b_;
};

std::vector<bcp::StringTriple> read_triple_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw bcp::io_error(path + ": cannot open");
    try {
        return bcp::parse_triples(is);
    } catch (const bcp::parse_error& e) {
        throw bcp::io_error(path + ": " + e.what());
    }
}

// Loads the train/valid/test convention from a dataset directory and builds
// the inverse-augmented graph, echoing data-quality warnings.
bcp::KnowledgeGraph load_dataset(const std::string& dir) {
    if (!fs::is_directory(dir))
        throw bcp::io_error(dir + ": not a directory");
    auto train = read_triple_file((fs::path(dir) / "train.txt").string());
    auto valid = read_triple_file((fs::path(dir) / "valid.txt").string());
    auto test = read_triple_file((fs::path(dir) / "test.txt").string());
    bcp::KnowledgeGraph g = bcp::build_graph(train, valid, test, true);
    if (g.duplicates_dropped() > 0)
        std::cerr << "warning: dropped " << g.duplicates_dropped()
                  << " duplicate triples\n";
    if (g.unseen_in_train() > 0)
        std::cerr << "warning: " << g.unseen_in_train()
                  << " vocabulary entries first appear outside train\n";
    return g;
}

// A loaded model file of any kind, plus a scorer-compatible reference.
struct AnyModel {
    bcp::ModelKind kind = bcp::ModelKind::dense;
    std::optional<bcp::DenseFactors> dense;
    std::optional<bcp::PackedFactors> packed;
    std::optional<bcp::VqFactors> vq;

    bcp::Scorer::ModelRef ref() const {
        if (dense) return bcp::Scorer::ModelRef(&*dense);
        if (packed) return bcp::Scorer::ModelRef(&*packed);
        return bcp::Scorer::ModelRef(&*vq);
    }
    std::size_t num_entities() const {
        if (dense) return dense->num_entities();
        if (packed) return packed->num_entities();
        return vq->num_entities();
    }
    std::size_t num_relation_rows() const {
        if (dense) return dense->num_relation_rows();
        if (packed) return packed->num_relation_rows();
        return vq->num_relation_rows();
    }
    std::size_t dim() const {
        if (dense) return dense->dim;
        if (packed) return packed->dim;
        return vq->dim;
    }
};

const char* kind_name(bcp::ModelKind k) {
    switch (k) {
        case bcp::ModelKind::dense: return "dense";
        case bcp::ModelKind::packed: return "packed";
        case bcp::ModelKind::vq: return "vq";
    }
    return "?";
}

AnyModel load_any_model(const std::string& path) {
    AnyModel m;
    m.kind = bcp::sniff_model_kind(path);
    switch (m.kind) {
        case bcp::ModelKind::dense: m.dense = bcp::load_dense(path); break;
        case bcp::ModelKind::packed: m.packed = bcp::load_packed(path); break;
        case bcp::ModelKind::vq: m.vq = bcp::load_vq(path); break;
    }
    return m;
}

void write_vocab_sidecars(const bcp::KnowledgeGraph& g, const std::string& model_path) {
    {
        std::ofstream os(model_path + ".entities.tsv", std::ios::trunc);
        if (!os) throw bcp::io_error(model_path + ".entities.tsv: cannot open");
        g.write_entity_vocab(os);
    }
    {
        std::ofstream os(model_path + ".relations.tsv", std::ios::trunc);
        if (!os) throw bcp::io_error(model_path + ".relations.tsv: cannot open");
        g.write_relation_vocab(os);
    }
}

// Copies the "<model>.entities.tsv"/"<model>.relations.tsv" sidecars, when
// present, to the names matching a derived model file.
void copy_vocab_sidecars(const std::string& from_model, const std::string& to_model) {
    for (const char* suffix : {".entities.tsv", ".relations.tsv"}) {
        const fs::path src = from_model + suffix;
        if (fs::exists(src))
            fs::copy_file(src, fs::path(to_model + suffix),
                          fs::copy_options::overwrite_existing);
    }
}

std::unordered_map<std::string, std::int32_t> load_vocab(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw bcp::io_error(path + ": cannot open (vocabulary sidecar missing?)");
    std::unordered_map<std::string, std::int32_t> vocab;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw bcp::io_error(path + ": malformed vocabulary line " +
                                std::to_string(line_no));
        vocab.emplace(line.substr(tab + 1),
                      static_cast<std::int32_t>(std::stol(line.substr(0, tab))));
    }
    return vocab;
}

std::vector<bcp::Triple> map_triples(const std::vector<bcp::StringTriple>& in,
                                     const std::unordered_map<std::string, std::int32_t>& entities,
                                     const std::unordered_map<std::string, std::int32_t>& relations,
                                     const std::string& context) {
    std::vector<bcp::Triple> out;
    out.reserve(in.size());
    for (const bcp::StringTriple& s : in) {
        const auto se = entities.find(s.subject);
        const auto oe = entities.find(s.object);
        const auto re = relations.find(s.relation);
        if (se == entities.end())
            throw std::invalid_argument(context + ": unknown entity '" + s.subject + "'");
        if (oe == entities.end())
            throw std::invalid_argument(context + ": unknown entity '" + s.object + "'");
        if (re == relations.end())
            throw std::invalid_argument(context + ": unknown relation '" + s.relation + "'");
        out.push_back(bcp::Triple{se->second, re->second, oe->second});
    }
    return out;
}

struct TrainOptions {
    std::string data;
    std::string out;
    std::string mode = "bcp";
    bcp::Hyperparams hyper;
    std::size_t threads = 1;
};

void run_train(const TrainOptions& opt) {
    const bcp::KnowledgeGraph graph = load_dataset(opt.data);

    KeyValues kv{
        {"command", "train"},
        {"data", opt.data},
        {"mode", opt.mode},
        {"dim", std::to_string(opt.hyper.dim)},
        {"learning_rate", fmt_g(opt.hyper.learning_rate)},
        {"l2", fmt_g(opt.hyper.l2_subject)},
        {"delta", fmt_g(opt.hyper.delta)},
        {"negatives_per_positive", std::to_string(opt.hyper.negatives_per_positive)},
        {"max_epochs", std::to_string(opt.hyper.max_epochs)},
        {"seed", std::to_string(opt.hyper.seed)},
        {"eval_every", std::to_string(opt.hyper.eval_every)},
        {"threads", std::to_string(opt.threads)},
        {"entities", std::to_string(graph.num_entities())},
        {"relations", std::to_string(graph.num_relations())},
        {"train_triples", std::to_string(graph.train.size())},
        {"valid_triples", std::to_string(graph.valid.size())},
        {"test_triples", std::to_string(graph.test.size())},
        {"duplicates_dropped", std::to_string(graph.duplicates_dropped())},
        {"unseen_in_train", std::to_string(graph.unseen_in_train())},
    };
    echo_config("train", kv);

    std::ofstream log_file(opt.out + ".log", std::ios::trunc);
    if (!log_file) throw bcp::io_error(opt.out + ".log: cannot open for writing");
    TeeBuf tee(log_file.rdbuf(), std::cout.rdbuf());
    std::ostream progress(&tee);

    bcp::TrainConfig config;
    config.hyper = opt.hyper;
    config.mode = opt.mode == "bcp" ? bcp::TrainMode::binarized : bcp::TrainMode::dense;
    config.eval_threads = opt.threads;
    config.progress = &progress;

    const bcp::TrainResult result = bcp::train(config, graph);

    std::string latent_path;
    if (result.packed) {
        bcp::save_packed(*result.packed, opt.out);
        latent_path = opt.out + ".latent.cpkg";
        bcp::save_dense(result.factors, latent_path);
    } else {
        bcp::save_dense(result.factors, opt.out);
    }
    write_vocab_sidecars(graph, opt.out);

    kv.emplace_back("best_epoch", std::to_string(result.log.best_epoch));
    if (result.log.validated)
        kv.emplace_back("best_validation_mrr", fmt_g(result.log.best_validation_mrr));
    kv.emplace_back("wall_seconds", fmt_g(result.log.wall_seconds));
    kv.emplace_back("model_file", opt.out);
    if (!latent_path.empty()) kv.emplace_back("latent_file", latent_path);
    write_manifest(opt.out + ".manifest", kv);

    std::cout << "wrote " << opt.out;
    if (result.log.validated)
        std::cout << " (best epoch " << result.log.best_epoch << ", validation MRR "
                  << fmt_fixed(result.log.best_validation_mrr, 4) << ")";
    std::cout << '\n';
}

struct EvalOptions {
    std::vector<std::string> models;
    std::string data;
    std::string split = "test";
    std::size_t threads = 1;
};

void run_eval(const EvalOptions& opt) {
    const bcp::KnowledgeGraph graph = load_dataset(opt.data);
    const std::vector<bcp::Triple>& triples =
        opt.split == "valid" ? graph.valid : graph.test;

    std::vector<AnyModel> models;
    models.reserve(opt.models.size());
    std::vector<bcp::Scorer::ModelRef> refs;
    for (const std::string& path : opt.models) {
        models.push_back(load_any_model(path));
        const AnyModel& m = models.back();
        if (m.num_entities() != static_cast<std::size_t>(graph.num_entities()) ||
            m.num_relation_rows() != static_cast<std::size_t>(graph.num_relation_rows()))
            throw std::invalid_argument(path + ": model shape does not match dataset (" +
                                        std::to_string(m.num_entities()) + " entities, " +
                                        std::to_string(m.num_relation_rows() / 2) +
                                        " relations)");
    }
    for (const AnyModel& m : models) refs.push_back(m.ref());

    KeyValues kv{{"command", "eval"}, {"data", opt.data}, {"split", opt.split},
                 {"threads", std::to_string(opt.threads)}};
    for (std::size_t i = 0; i < opt.models.size(); ++i)
        kv.emplace_back("model" + std::to_string(i),
                        opt.models[i] + " (" + kind_name(models[i].kind) + ", dim " +
                            std::to_string(models[i].dim()) + ")");
    echo_config("eval", kv);

    const bcp::EvalReport report =
        bcp::evaluate_ensemble(refs, triples, graph, opt.threads);

    std::cout << "\n  split        " << opt.split
              << "\n  queries      " << report.queries
              << "\n  MRR          " << fmt_fixed(report.mrr, 4)
              << "\n  Hits@1  (%)  " << fmt_fixed(report.hits1, 2)
              << "\n  Hits@3  (%)  " << fmt_fixed(report.hits3, 2)
              << "\n  Hits@10 (%)  " << fmt_fixed(report.hits10, 2) << "\n\n";
    std::cout << "queries\t" << report.queries << "\nmrr\t" << fmt_g(report.mrr)
              << "\nhits1\t" << fmt_g(report.hits1) << "\nhits3\t" << fmt_g(report.hits3)
              << "\nhits10\t" << fmt_g(report.hits10) << '\n';
}

struct PackOptions {
    std::string model;
    std::string out;
    double delta = 0.5;
};

void run_pack(const PackOptions& opt) {
    echo_config("pack", {{"command", "pack"}, {"model", opt.model},
                         {"delta", fmt_g(opt.delta)}, {"out", opt.out}});
    const AnyModel m = load_any_model(opt.model);
    if (m.kind != bcp::ModelKind::dense)
        throw std::invalid_argument(opt.model + ": pack expects a dense model file");
    const bcp::PackedFactors packed = bcp::binarize_factors(*m.dense, opt.delta);
    bcp::save_packed(packed, opt.out);
    copy_vocab_sidecars(opt.model, opt.out);
    write_manifest(opt.out + ".manifest",
                   {{"command", "pack"}, {"model", opt.model},
                    {"delta", fmt_g(opt.delta)}, {"out", opt.out},
                    {"file_bytes", std::to_string(bcp::size_report(packed).file_bytes)}});
    std::cout << "wrote " << opt.out << " (" << bcp::size_report(packed).file_bytes
              << " bytes)\n";
}

struct QuantizeVqOptions {
    std::string model;
    std::string out;
};

void run_quantize_vq(const QuantizeVqOptions& opt) {
    echo_config("quantize-vq",
                {{"command", "quantize-vq"}, {"model", opt.model}, {"out", opt.out}});
    const AnyModel m = load_any_model(opt.model);
    if (m.kind != bcp::ModelKind::dense)
        throw std::invalid_argument(opt.model + ": quantize-vq expects a dense model file");
    const bcp::VqFactors vq = bcp::vq_quantize_model(*m.dense);
    bcp::save_vq(vq, opt.out);
    copy_vocab_sidecars(opt.model, opt.out);
    write_manifest(opt.out + ".manifest",
                   {{"command", "quantize-vq"}, {"model", opt.model}, {"out", opt.out},
                    {"alpha_subject", fmt_g(vq.alpha_subject)},
                    {"alpha_object", fmt_g(vq.alpha_object)},
                    {"alpha_relation", fmt_g(vq.alpha_relation)}});
    std::cout << "wrote " << opt.out << " (alpha_subject " << fmt_g(vq.alpha_subject)
              << ", alpha_object " << fmt_g(vq.alpha_object) << ", alpha_relation "
              << fmt_g(vq.alpha_relation) << ")\n";
}

struct ClassifyOptions {
    std::string model;
    std::string pos;
    std::string neg;
    std::optional<double> threshold;
    std::string tune_pos;
    std::string tune_neg;
};

void run_classify(const ClassifyOptions& opt) {
    const bool tuning = !opt.tune_pos.empty() || !opt.tune_neg.empty();
    if (opt.threshold && tuning)
        throw std::invalid_argument("give either --threshold or --tune-pos/--tune-neg, not both");
    if (!opt.threshold && (opt.tune_pos.empty() || opt.tune_neg.empty()))
        throw std::invalid_argument("need --threshold, or both --tune-pos and --tune-neg");

    KeyValues kv{{"command", "classify"}, {"model", opt.model},
                 {"pos", opt.pos}, {"neg", opt.neg}};
    if (opt.threshold) kv.emplace_back("threshold", fmt_g(*opt.threshold));
    if (tuning) {
        kv.emplace_back("tune_pos", opt.tune_pos);
        kv.emplace_back("tune_neg", opt.tune_neg);
    }
    echo_config("classify", kv);

    const AnyModel m = load_any_model(opt.model);
    const bcp::Scorer scorer(std::vector<bcp::Scorer::ModelRef>{m.ref()});
    const auto entities = load_vocab(opt.model + ".entities.tsv");
    const auto relations = load_vocab(opt.model + ".relations.tsv");

    auto load_mapped = [&](const std::string& path) {
        return map_triples(read_triple_file(path), entities, relations, path);
    };
    const std::vector<bcp::Triple> pos = load_mapped(opt.pos);
    const std::vector<bcp::Triple> neg = load_mapped(opt.neg);

    double threshold;
    if (opt.threshold) {
        threshold = *opt.threshold;
    } else {
        threshold = bcp::tune_threshold(scorer, load_mapped(opt.tune_pos),
                                        load_mapped(opt.tune_neg));
    }
    const double accuracy = bcp::classify(scorer, pos, neg, threshold);

    std::cout << "threshold\t" << fmt_g(threshold) << "\naccuracy\t"
              << fmt_g(accuracy) << '\n';
}

void run_size(const std::string& path) {
    const AnyModel m = load_any_model(path);
    bcp::SizeReport s;
    switch (m.kind) {
        case bcp::ModelKind::dense: s = bcp::size_report(*m.dense); break;
        case bcp::ModelKind::packed: s = bcp::size_report(*m.packed); break;
        case bcp::ModelKind::vq: s = bcp::size_report(*m.vq); break;
    }
    std::cout << "model\t" << path
              << "\nkind\t" << kind_name(s.kind)
              << "\nentities\t" << s.num_entities
              << "\nrelations\t" << s.num_original_relations
              << "\ndim\t" << s.dim
              << "\nbits_per_entity\t" << s.bits_per_entity
              << "\nbits_per_relation_vector\t" << s.bits_per_relation_vector
              << "\nbits_per_original_relation\t" << s.bits_per_original_relation
              << "\nbits_per_entity_64bit\t" << s.bits_per_entity_wide
              << "\nbits_per_relation_vector_64bit\t" << s.bits_per_relation_vector_wide
              << "\nrow_bytes\t" << s.row_bytes
              << "\nfile_bytes\t" << s.file_bytes << '\n';
}

struct BenchOptions {
    std::vector<std::size_t> dims{100, 200, 300, 400, 500};
    std::size_t scores = 100000;
    std::size_t trials = 5;
    std::uint64_t seed = 1;
    bool no_pin = false;
    std::string out;
};

void run_bench(const BenchOptions& opt) {
    const bcp::BenchResult result =
        bcp::bench_scores(opt.dims, opt.scores, opt.trials, opt.seed, !opt.no_pin);

    std::ostringstream os;
    os << "# scores_per_trial\t" << result.scores_per_trial
       << "\n# trials\t" << result.trials
       << "\n# pinned\t" << (result.pinned ? "yes" : "no")
       << "\n# overhead_ns_per_score\t" << fmt_g(result.overhead_ns_per_score)
       << "\n# dim\tdense_ns\tpacked_ns\tspeedup\n";
    for (const bcp::BenchPoint& p : result.points)
        os << p.dim << '\t' << fmt_g(p.dense_ns_per_score) << '\t'
           << fmt_g(p.packed_ns_per_score) << '\t' << fmt_g(p.speedup) << '\n';
    for (const bcp::BenchPoint& p : result.points)
        os << "# checksum\t" << p.dim << '\t' << fmt_g(p.dense_checksum) << '\t'
           << fmt_g(p.packed_checksum) << '\n';

    if (opt.out.empty()) {
        std::cout << os.str();
    } else {
        std::ofstream f(opt.out, std::ios::trunc);
        if (!f) throw bcp::io_error(opt.out + ": cannot open for writing");
        f << os.str();
        if (!f.good()) throw bcp::io_error(opt.out + ": write failed");
        std::cout << "wrote " << opt.out << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CP knowledge-graph embeddings with binarized (XNOR/popcount) scoring"};
    app.require_subcommand(1);

    TrainOptions train_opt;
    CLI::App* train = app.add_subcommand(
        "train", "Train a model on a dataset directory (train/valid/test.txt)");
    train->add_option("--data", train_opt.data, "Dataset directory")->required();
    train->add_option("--out", train_opt.out, "Output model file")->required();
    train->add_option("--mode", train_opt.mode, "Model kind: bcp (binarized) or cp (dense)")
        ->check(CLI::IsMember({"bcp", "cp"}));
    train->add_option("--dim", train_opt.hyper.dim, "Embedding width (default 400)");
    train->add_option("--lr", train_opt.hyper.learning_rate,
                      "SGD learning rate, constant (default 0.05)");
    CLI::Option* l2 = train->add_option(
        "--l2", "L2 penalty weight for all three factor matrices (default 0.0001)");
    train->add_option("--delta", train_opt.hyper.delta,
                      "Quantization step for bcp mode (default 0.5)");
    train->add_option("--neg", train_opt.hyper.negatives_per_positive,
                      "Negative samples per positive (default 5)");
    train->add_option("--epochs", train_opt.hyper.max_epochs, "Training epochs (default 1000)");
    train->add_option("--seed", train_opt.hyper.seed, "RNG seed; fixes the run (default 1)");
    train->add_option("--eval-every", train_opt.hyper.eval_every,
                      "Validation cadence in epochs (default 50)");
    train->add_option("--threads", train_opt.threads, "Threads for validation scoring");
    train->callback([&] {
        if (l2->count()) {
            const double v = l2->as<double>();
            train_opt.hyper.l2_subject = v;
            train_opt.hyper.l2_object = v;
            train_opt.hyper.l2_relation = v;
        }
        run_train(train_opt);
    });

    EvalOptions eval_opt;
    CLI::App* eval = app.add_subcommand(
        "eval", "Filtered ranking metrics on a dataset split; multiple models ensemble");
    eval->add_option("--model", eval_opt.models,
                     "Model file(s); comma-separate or repeat to ensemble")
        ->required()
        ->delimiter(',');
    eval->add_option("--data", eval_opt.data, "Dataset directory")->required();
    eval->add_option("--split", eval_opt.split, "Split to rank: test or valid")
        ->check(CLI::IsMember({"test", "valid"}));
    eval->add_option("--threads", eval_opt.threads, "Evaluation threads");
    eval->callback([&] { run_eval(eval_opt); });

    PackOptions pack_opt;
    CLI::App* pack = app.add_subcommand(
        "pack", "Binarize a dense model into sign planes with a shared step size");
    pack->add_option("--model", pack_opt.model, "Dense model file")->required();
    pack->add_option("--delta", pack_opt.delta, "Quantization step")->required();
    pack->add_option("--out", pack_opt.out, "Output packed model file")->required();
    pack->callback([&] { run_pack(pack_opt); });

    QuantizeVqOptions vq_opt;
    CLI::App* vq = app.add_subcommand(
        "quantize-vq", "Quantize a dense model to sign planes with per-matrix scales");
    vq->add_option("--model", vq_opt.model, "Dense model file")->required();
    vq->add_option("--out", vq_opt.out, "Output vq model file")->required();
    vq->callback([&] { run_quantize_vq(vq_opt); });

    ClassifyOptions cls_opt;
    CLI::App* cls = app.add_subcommand(
        "classify", "Threshold triple scores into true/false and report accuracy");
    cls->add_option("--model", cls_opt.model, "Model file (vocabulary sidecars required)")
        ->required();
    cls->add_option("--pos", cls_opt.pos, "Positive triples (TSV)")->required();
    cls->add_option("--neg", cls_opt.neg, "Negative triples (TSV)")->required();
    CLI::Option* thr = cls->add_option("--threshold", "Decision threshold (score >= t is true)");
    cls->add_option("--tune-pos", cls_opt.tune_pos, "Positive triples for threshold tuning");
    cls->add_option("--tune-neg", cls_opt.tune_neg, "Negative triples for threshold tuning");
    cls->callback([&] {
        if (thr->count()) cls_opt.threshold = thr->as<double>();
        run_classify(cls_opt);
    });

    std::string size_model;
    CLI::App* size = app.add_subcommand("size", "Storage accounting for a model file");
    size->add_option("--model", size_model, "Model file")->required();
    size->callback([&] { run_size(size_model); });

    BenchOptions bench_opt;
    CLI::App* bench = app.add_subcommand(
        "bench", "Single-thread scoring throughput, dense vs packed");
    bench->add_option("--dims", bench_opt.dims, "Embedding widths to measure")->delimiter(',');
    bench->add_option("--scores", bench_opt.scores,
                      "Score computations per trial (min 100000)");
    bench->add_option("--trials", bench_opt.trials, "Trials per kernel; median is reported");
    bench->add_option("--seed", bench_opt.seed, "RNG seed for models and triples");
    bench->add_flag("--no-pin", bench_opt.no_pin, "Skip pinning to one CPU");
    bench->add_option("--out", bench_opt.out, "Write the TSV here instead of stdout");
    bench->callback([&] { run_bench(bench_opt); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const bcp::parse_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const bcp::io_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
