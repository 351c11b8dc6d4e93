// regscore_cli: enrich / train / eval / score / serve / synth.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 model error.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>

#include "regscore/bundle.hpp"
#include "regscore/dataset.hpp"
#include "regscore/error.hpp"
#include "regscore/service.hpp"
#include "regscore/synthetic.hpp"
#include "regscore/train.hpp"

using namespace regscore;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitModel = 3;

/// Failure while loading or producing a model, as opposed to bad input data.
struct ModelFailure {
    Error error;
};

int exit_code_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::InvalidConfig: return kExitUsage;
        case ErrorCode::CorruptBundle:
        case ErrorCode::VersionMismatch:
        case ErrorCode::Diverged:
        case ErrorCode::DimMismatch:
        case ErrorCode::StaleActivations:
        case ErrorCode::BatchTooSmall: return kExitModel;
        default: return kExitData;
    }
}

ModelBundle load_bundle(const std::string& path) {
    try {
        return load_model(path);
    } catch (const Error& e) {
        throw ModelFailure{e};
    }
}

void print_metrics(const std::string& partition, std::size_t rows, const Metrics& m) {
    std::printf("%-5s rows=%zu F1=%.6f Acc=%.6f Prec=%.6f Rec=%.6f%s\n", partition.c_str(), rows, m.f1, m.accuracy,
                m.precision, m.recall, m.precision_degenerate || m.recall_degenerate ? " (degenerate)" : "");
}

// ---- enrich -------------------------------------------------------------

struct EnrichArgs {
    std::string dataset, registrants, mode = "paper", out;
    bool strip_tld = false;
};

int run_enrich(const EnrichArgs& a) {
    const RegistrantIndex index(load_registrant_file(a.registrants, a.strip_tld));
    LoadResult loaded = load_dataset(a.dataset, &index, a.strip_tld);
    enrich(loaded.dataset, index, parse_similarity_mode(a.mode));
    write_enriched_csv(loaded.dataset, a.out);
    const LoadReport& r = loaded.report;
    std::printf("registrants=%zu read=%zu kept=%zu dropped_duplicates=%zu dropped_in_registrants=%zu\n", index.size(),
                r.read, r.kept, r.duplicates, r.in_registrants);
    std::printf("labels benign=%zu malicious=%zu\n", loaded.dataset.count_label(kBenign),
                loaded.dataset.count_label(kSuspicious));
    std::printf("wrote %s\n", a.out.c_str());
    return 0;
}

// ---- train / eval -------------------------------------------------------

struct TrainArgs {
    std::string enriched, mode = "fused", out, history, similarity = "paper";
    std::uint64_t seed = 0;
    Hyperparams hp;
    double threshold = 0.5;
    bool no_standardize = false;
    bool quiet = false;
};

Split load_split(const std::string& path, std::uint64_t seed) {
    LoadResult loaded = load_dataset(path);
    if (!loaded.report.enriched) {
        throw Error(ErrorCode::ParseError, path + ": expected an enriched CSV (run `enrich` first)");
    }
    return split_dataset(loaded.dataset, SplitSpec{0.70, 0.15, 0.15, seed});
}

int run_train(TrainArgs a) {
    a.hp.seed = a.seed;
    Split split = load_split(a.enriched, a.seed);
    standardize(split, !a.no_standardize);

    std::ofstream history;
    if (!a.history.empty()) {
        history.open(a.history, std::ios::binary | std::ios::trunc);
        if (!history) throw Error(ErrorCode::IoError, "cannot write history file " + a.history);
    }
    TrainOptions opt;
    opt.similarity = parse_similarity_mode(a.similarity);
    opt.threshold = a.threshold;
    opt.on_epoch = [&](const EpochRecord& r) {
        const std::string line = to_json_line(r);
        if (history.is_open()) history << line << '\n';
        if (!a.quiet) std::fprintf(stderr, "%s\n", line.c_str());
    };

    TrainResult result;
    try {
        result = train_model(parse_model_mode(a.mode), split.train, split.val, a.hp, opt);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidConfig) throw;
        throw ModelFailure{e};
    }
    ModelBundle bundle;
    bundle.model = std::move(result.model);
    bundle.hyperparams = a.hp;
    bundle.best_epoch = result.best_epoch;
    save_model(bundle, a.out);

    std::printf("mode=%s seed=%llu train=%zu val=%zu test=%zu epochs_run=%zu best_epoch=%zu\n",
                std::string(to_string(bundle.model.mode)).c_str(), static_cast<unsigned long long>(a.seed),
                split.train.size(), split.val.size(), split.test.size(), result.history.size(), result.best_epoch);
    print_metrics("val", split.val.size(), evaluate(bundle.model, split.val));
    print_metrics("test", split.test.size(), evaluate(bundle.model, split.test));
    std::printf("wrote %s\n", a.out.c_str());
    return 0;
}

struct EvalArgs {
    std::string model, enriched, partition = "test";
};

int run_eval(const EvalArgs& a) {
    const ModelBundle bundle = load_bundle(a.model);
    const Split split = load_split(a.enriched, bundle.hyperparams.seed);
    const Dataset& part = a.partition == "val" ? split.val : split.test;
    print_metrics(a.partition, part.size(), evaluate(bundle.model, part));
    return 0;
}

// ---- score / serve ------------------------------------------------------

struct ScoreArgs {
    std::string model, registrants, domain;
    bool strip_tld = false;
};

int run_score(const ScoreArgs& a) {
    ScoringService svc(a.model, a.registrants, a.strip_tld);
    ModelBundle bundle = load_bundle(a.model);
    svc.publish(std::move(bundle), RegistrantIndex(load_registrant_file(a.registrants, a.strip_tld)));
    std::printf("%s\n", svc.score(a.domain).to_json().dump().c_str());
    return 0;
}

struct ServeArgs {
    std::string model, registrants, listen = "127.0.0.1:8080";
    bool strip_tld = false;
};

int run_serve(ServeArgs a) {
    if (const char* env = std::getenv("REGSCORE_LISTEN"); env && *env) a.listen = env;
    const auto [host, port] = parse_listen_address(a.listen);

    // Signals go to a dedicated thread; every other thread inherits the block.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGHUP);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    ScoringService svc(a.model, a.registrants, a.strip_tld);
    HttpFrontend http(svc);
    const int bound = http.bind(host, port);
    std::fprintf(stderr, "listening on %s:%d (503 until the model and index are loaded)\n", host.c_str(), bound);

    const auto reload = [&svc] {
        try {
            svc.reload();
            std::fprintf(stderr, "snapshot %llu published\n", static_cast<unsigned long long>(svc.generation()));
        } catch (const std::exception& e) {
            std::fprintf(stderr, "reload failed, keeping previous snapshot: %s\n", e.what());
        }
    };
    std::thread loader(reload);
    std::thread signal_thread([&] {
        for (;;) {
            int sig = 0;
            if (sigwait(&signals, &sig) != 0) continue;
            if (sig == SIGHUP) {
                std::fprintf(stderr, "SIGHUP: reloading model and registrants\n");
                reload();
            } else {
                http.stop();
                return;
            }
        }
    });
    http.listen();
    loader.join();
    signal_thread.join();
    return svc.ready() ? 0 : kExitModel;
}

// ---- synth --------------------------------------------------------------

struct SynthArgs {
    std::string kind = "text-pattern", out;
    std::size_t rows = 2000;
    std::uint64_t seed = 1;
};

int run_synth(const SynthArgs& a) {
    const Dataset ds =
        a.kind == "separable" ? make_separable_dataset(a.rows, a.seed) : make_text_pattern_dataset(a.rows, a.seed);
    write_enriched_csv(ds, a.out);
    std::printf("wrote %zu rows (%zu malicious) to %s\n", ds.size(), ds.count_label(kSuspicious), a.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Registration-time domain risk scoring"};
    app.require_subcommand(1);
    const auto modes = CLI::IsMember({"paper", "symmetric"});

    EnrichArgs enrich_args;
    auto* enrich_cmd = app.add_subcommand("enrich", "Attach similarity and count features to a labeled CSV");
    enrich_cmd->add_option("--dataset", enrich_args.dataset, "CSV with header domain_name,label")->required();
    enrich_cmd->add_option("--registrants", enrich_args.registrants, "one registered domain per line")->required();
    enrich_cmd->add_option("--mode", enrich_args.mode, "similarity ratio")->check(modes)->capture_default_str();
    enrich_cmd->add_option("--out", enrich_args.out, "enriched CSV to write")->required();
    enrich_cmd->add_flag("--strip-tld", enrich_args.strip_tld, "drop the last dot-separated label of every name");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train a model on an enriched CSV (70/15/15 split)");
    train_cmd->add_option("--enriched", train_args.enriched)->required();
    train_cmd->add_option("--mode", train_args.mode)->check(CLI::IsMember({"mlp", "nlp", "fused"}))->capture_default_str();
    train_cmd->add_option("--seed", train_args.seed, "seeds split, init, shuffling and dropout")->capture_default_str();
    train_cmd->add_option("--out", train_args.out, "model bundle to write")->required();
    train_cmd->add_option("--epochs", train_args.hp.max_epochs)->capture_default_str();
    train_cmd->add_option("--batch-size", train_args.hp.batch_size)->capture_default_str();
    train_cmd->add_option("--lr", train_args.hp.learning_rate)->capture_default_str();
    train_cmd->add_option("--patience", train_args.hp.early_stop_patience)->capture_default_str();
    train_cmd->add_option("--threshold", train_args.threshold, "decision threshold on p_suspicious")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    train_cmd->add_option("--similarity-mode", train_args.similarity, "ratio used when scoring")
        ->check(modes)
        ->capture_default_str();
    train_cmd->add_option("--history", train_args.history, "write per-epoch JSON lines here");
    train_cmd->add_flag("--no-standardize", train_args.no_standardize, "feed raw numeric features to the MLP");
    train_cmd->add_flag("--quiet", train_args.quiet, "do not echo epoch records to stderr");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model on the val or test partition");
    eval_cmd->add_option("--model", eval_args.model)->required();
    eval_cmd->add_option("--enriched", eval_args.enriched)->required();
    eval_cmd->add_option("--partition", eval_args.partition)->check(CLI::IsMember({"val", "test"}))->capture_default_str();

    ScoreArgs score_args;
    auto* score_cmd = app.add_subcommand("score", "Score one domain and print the response record");
    score_cmd->add_option("--model", score_args.model)->required();
    score_cmd->add_option("--registrants", score_args.registrants)->required();
    score_cmd->add_option("--domain", score_args.domain)->required();
    score_cmd->add_flag("--strip-tld", score_args.strip_tld);

    ServeArgs serve_args;
    auto* serve_cmd = app.add_subcommand("serve", "HTTP scoring service (POST /score); SIGHUP reloads");
    serve_cmd->add_option("--model", serve_args.model)->required();
    serve_cmd->add_option("--registrants", serve_args.registrants)->required();
    serve_cmd->add_option("--listen", serve_args.listen, "host:port (REGSCORE_LISTEN overrides)")->capture_default_str();
    serve_cmd->add_flag("--strip-tld", serve_args.strip_tld);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic enriched dataset");
    synth_cmd->add_option("--kind", synth_args.kind)
        ->check(CLI::IsMember({"separable", "text-pattern"}))
        ->capture_default_str();
    synth_cmd->add_option("--rows", synth_args.rows)->capture_default_str();
    synth_cmd->add_option("--seed", synth_args.seed)->capture_default_str();
    synth_cmd->add_option("--out", synth_args.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*enrich_cmd) return run_enrich(enrich_args);
        if (*train_cmd) return run_train(train_args);
        if (*eval_cmd) return run_eval(eval_args);
        if (*score_cmd) return run_score(score_args);
        if (*serve_cmd) return run_serve(serve_args);
        if (*synth_cmd) return run_synth(synth_args);
    } catch (const ModelFailure& f) {
        std::fprintf(stderr, "error: %s\n", f.error.what());
        return kExitModel;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    }
    return kExitUsage;
}
