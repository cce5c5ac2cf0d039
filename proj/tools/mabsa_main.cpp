// Command-line driver for the full lifecycle: synthesize a corpus, fill weak
// labels, pre-train, fine-tune, and evaluate. Every command is reproducible
// from (config, seed); resolved configs are echoed into the output directory.

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mabsa/corpus.hpp"
#include "mabsa/error.hpp"
#include "mabsa/metrics.hpp"
#include "mabsa/model.hpp"
#include "mabsa/trainer.hpp"
#include "mabsa/vocab.hpp"
#include "mabsa/weak_label.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mabsa;

namespace {

// Flat dotted-key configuration: file values first, flag overrides on top.
class RunConfig {
public:
    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config file: ") + e.what());
        }
        if (!j.is_object()) throw ConfigError("config file must be a JSON object of dotted keys");
        for (auto& [k, v] : j.items()) values_[k] = v;
    }

    void set(const std::string& key, json v) { values_[key] = std::move(v); }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    template <typename T>
    T get(const std::string& key, T fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            return it->second.get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key '" + key + "' has the wrong type");
        }
    }

    json resolved() const {
        json j = json::object();
        for (const auto& [k, v] : values_) j[k] = v;
        return j;
    }

private:
    std::map<std::string, json> values_;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write " + path.string());
    out << text;
}

void echo_resolved(const RunConfig& cfg, const fs::path& out_dir, const json& effective) {
    json j;
    j["flat"] = cfg.resolved();
    j["effective"] = effective;
    write_text(out_dir / "resolved_config.json", j.dump(2) + "\n");
}

SyntheticConfig synth_config(const RunConfig& rc) {
    SyntheticConfig sc;
    sc.vocab_size = rc.get<std::size_t>("synth.vocab_size", sc.vocab_size);
    sc.class_count = rc.get<std::size_t>("synth.class_count", sc.class_count);
    sc.anp_count = rc.get<std::size_t>("synth.anp_count", sc.anp_count);
    sc.sent_len_min = rc.get<std::size_t>("synth.sent_len_min", sc.sent_len_min);
    sc.sent_len_max = rc.get<std::size_t>("synth.sent_len_max", sc.sent_len_max);
    sc.aspects_min = rc.get<std::size_t>("synth.aspects_min", sc.aspects_min);
    sc.aspects_max = rc.get<std::size_t>("synth.aspects_max", sc.aspects_max);
    sc.opinions_min = rc.get<std::size_t>("synth.opinions_min", sc.opinions_min);
    sc.opinions_max = rc.get<std::size_t>("synth.opinions_max", sc.opinions_max);
    sc.region_count = rc.get<std::size_t>("synth.region_count", sc.region_count);
    sc.feature_dim = rc.get<std::size_t>("synth.feature_dim", sc.feature_dim);
    sc.example_count = rc.get<std::size_t>("synth.example_count", sc.example_count);
    sc.gazetteer_size = rc.get<std::size_t>("synth.gazetteer_size", sc.gazetteer_size);
    sc.lexicon_per_polarity =
        rc.get<std::size_t>("synth.lexicon_per_polarity", sc.lexicon_per_polarity);
    sc.sentiment_mix[0] = rc.get<double>("synth.mix_pos", sc.sentiment_mix[0]);
    sc.sentiment_mix[1] = rc.get<double>("synth.mix_neu", sc.sentiment_mix[1]);
    sc.sentiment_mix[2] = rc.get<double>("synth.mix_neg", sc.sentiment_mix[2]);
    sc.explicit_regions = rc.get<bool>("synth.explicit_regions", sc.explicit_regions);
    sc.seed = rc.get<std::uint64_t>("seed", sc.seed);
    return sc;
}

json synth_effective(const SyntheticConfig& sc) {
    json j;
    j["vocab_size"] = sc.vocab_size;
    j["class_count"] = sc.class_count;
    j["anp_count"] = sc.anp_count;
    j["sent_len_min"] = sc.sent_len_min;
    j["sent_len_max"] = sc.sent_len_max;
    j["aspects_min"] = sc.aspects_min;
    j["aspects_max"] = sc.aspects_max;
    j["opinions_min"] = sc.opinions_min;
    j["opinions_max"] = sc.opinions_max;
    j["region_count"] = sc.region_count;
    j["feature_dim"] = sc.feature_dim;
    j["example_count"] = sc.example_count;
    j["gazetteer_size"] = sc.gazetteer_size;
    j["lexicon_per_polarity"] = sc.lexicon_per_polarity;
    j["sentiment_mix"] = {sc.sentiment_mix[0], sc.sentiment_mix[1], sc.sentiment_mix[2]};
    j["explicit_regions"] = sc.explicit_regions;
    j["seed"] = sc.seed;
    return j;
}

// Desk-scale model defaults for the CLI; the corpus supplies the data dims.
ModelConfig model_config(const RunConfig& rc, const Corpus& corpus, std::size_t vocab_size) {
    ModelConfig mc;
    mc.hidden = rc.get<std::size_t>("model.hidden", 32);
    mc.enc_layers = rc.get<std::size_t>("model.enc_layers", 2);
    mc.dec_layers = rc.get<std::size_t>("model.dec_layers", 2);
    mc.heads = rc.get<std::size_t>("model.heads", 4);
    mc.ffn = rc.get<std::size_t>("model.ffn", 64);
    mc.max_seq_len = rc.get<std::size_t>("model.max_seq_len", 96);
    mc.max_gen_len = rc.get<std::size_t>("model.max_gen_len", 32);
    mc.region_positions = rc.get<bool>("model.region_positions", true);
    mc.ln_eps = rc.get<double>("model.ln_eps", 1e-5);
    mc.region_count = corpus.region_count;
    mc.class_count = corpus.class_count;
    mc.feature_dim = corpus.feature_dim;
    mc.vocab_size = vocab_size;
    mc.validate();
    return mc;
}

TrainConfig train_config(const RunConfig& rc) {
    TrainConfig tc;
    tc.lr = rc.get<double>("train.lr", tc.lr);
    tc.pretrain_epochs = rc.get<std::size_t>("train.pretrain_epochs", tc.pretrain_epochs);
    tc.finetune_epochs = rc.get<std::size_t>("train.finetune_epochs", tc.finetune_epochs);
    tc.pretrain_batch = rc.get<std::size_t>("train.pretrain_batch", tc.pretrain_batch);
    tc.finetune_batch = rc.get<std::size_t>("train.finetune_batch", tc.finetune_batch);
    tc.clip_norm = rc.get<double>("train.clip_norm", tc.clip_norm);
    tc.mask_rate = rc.get<double>("train.mask_rate", tc.mask_rate);
    tc.mlm_masked_only = rc.get<bool>("train.mlm_masked_only", tc.mlm_masked_only);
    tc.lambdas[0] = rc.get<double>("train.lambda_mlm", 1.0);
    tc.lambdas[1] = rc.get<double>("train.lambda_aoe", 1.0);
    tc.lambdas[2] = rc.get<double>("train.lambda_mrm", 1.0);
    tc.lambdas[3] = rc.get<double>("train.lambda_aog", 1.0);
    tc.lambdas[4] = rc.get<double>("train.lambda_msp", 1.0);
    tc.seed = rc.get<std::uint64_t>("seed", 0);
    std::string tasks = rc.get<std::string>("train.tasks", "mlm,aoe,mrm,aog,msp");
    tc.task_order.clear();
    std::size_t pos = 0;
    while (pos <= tasks.size()) {
        std::size_t comma = tasks.find(',', pos);
        std::string name = tasks.substr(pos, comma == std::string::npos ? comma : comma - pos);
        if (!name.empty()) tc.task_order.push_back(task_from_name(name));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    tc.validate();
    return tc;
}

json train_effective(const TrainConfig& tc) {
    json j;
    j["lr"] = tc.lr;
    j["pretrain_epochs"] = tc.pretrain_epochs;
    j["finetune_epochs"] = tc.finetune_epochs;
    j["pretrain_batch"] = tc.pretrain_batch;
    j["finetune_batch"] = tc.finetune_batch;
    j["clip_norm"] = tc.clip_norm;
    j["mask_rate"] = tc.mask_rate;
    j["mlm_masked_only"] = tc.mlm_masked_only;
    j["lambdas"] = {tc.lambdas[0], tc.lambdas[1], tc.lambdas[2], tc.lambdas[3], tc.lambdas[4]};
    json order = json::array();
    for (Task t : tc.task_order) order.push_back(task_name(t));
    j["task_order"] = order;
    j["seed"] = tc.seed;
    return j;
}

Vocabulary vocab_from_corpus(const Corpus& corpus, std::size_t min_freq) {
    std::vector<std::vector<std::string>> token_corpus;
    token_corpus.reserve(corpus.size());
    for (const auto& ex : corpus.examples) token_corpus.push_back(tokenize(ex.text));
    return Vocabulary::build(token_corpus, min_freq);
}

// ---------------------------------------------------------------------------
// commands

int cmd_synth(const RunConfig& rc, const std::string& out_dir) {
    fs::create_directories(out_dir);
    SyntheticConfig sc = synth_config(rc);
    SynthResult r = synth_generate(sc);

    double f_train = rc.get<double>("synth.frac_train", 0.7);
    double f_dev = rc.get<double>("synth.frac_dev", 0.15);
    double f_test = rc.get<double>("synth.frac_test", 0.15);
    SplitResult sp = split(r.corpus, {f_train, f_dev, f_test}, sc.seed);

    fs::path out(out_dir);
    save_jsonl(sp.train, (out / "train.jsonl").string());
    save_jsonl(sp.dev, (out / "dev.jsonl").string());
    save_jsonl(sp.test, (out / "test.jsonl").string());
    r.lexicon.save((out / "lexicon.tsv").string());
    r.gazetteer.save((out / "gazetteer.txt").string());
    r.anps.save((out / "anps.txt").string());

    json eff = synth_effective(sc);
    eff["frac_train"] = f_train;
    eff["frac_dev"] = f_dev;
    eff["frac_test"] = f_test;
    echo_resolved(rc, out, eff);
    std::cout << "wrote " << sp.train.size() << "/" << sp.dev.size() << "/" << sp.test.size()
              << " train/dev/test examples to " << out_dir << "\n";
    return 0;
}

int cmd_label(const std::string& corpus_path, const std::string& lexicon_path,
              const std::string& gazetteer_path, const std::string& out_path) {
    Corpus corpus = load_jsonl(corpus_path);
    OpinionLexicon lexicon = OpinionLexicon::load(lexicon_path);
    AspectGazetteer gazetteer = AspectGazetteer::load(gazetteer_path);
    std::size_t filled_aspects = 0, filled_opinions = 0;
    for (auto& ex : corpus.examples) {
        auto toks = tokenize(ex.text);
        if (!ex.aspects) {
            ex.aspects = extract_aspects(toks, gazetteer);
            ++filled_aspects;
        }
        if (!ex.opinions) {
            auto spans = extract_opinions(toks, lexicon);
            for (auto& s : spans) s.sentiment.reset();  // opinion labels carry no polarity
            ex.opinions = std::move(spans);
            ++filled_opinions;
        }
    }
    save_jsonl(corpus, out_path);
    std::cout << "labeled " << corpus.size() << " examples (" << filled_aspects << " aspect lists, "
              << filled_opinions << " opinion lists filled) -> " << out_path << "\n";
    return 0;
}

int cmd_pretrain(const RunConfig& rc, const std::string& corpus_path, const std::string& anps_path,
                 const std::string& out_dir) {
    fs::create_directories(out_dir);
    Corpus corpus = load_jsonl(corpus_path);
    if (corpus.size() == 0) throw ConfigError("pretrain: corpus is empty");
    TrainResources res;
    res.anps = AnpVocabulary::load(anps_path);

    Vocabulary vocab = vocab_from_corpus(corpus, rc.get<std::size_t>("vocab.min_freq", 1));
    ModelConfig mc = model_config(rc, corpus, vocab.size());
    TrainConfig tc = train_config(rc);
    ModelParams params = init_params(mc, tc.seed);

    fs::path out(out_dir);
    vocab.save((out / "vocab.txt").string());
    PretrainResult result = pretrain(corpus, std::move(params), tc, res, vocab, out_dir);
    save_checkpoint((out / "pretrained.ckpt").string(), result.params, vocab);
    write_history_csv((out / "history.csv").string(), result.history);

    json eff;
    eff["model"] = json::parse(mc.to_json());
    eff["train"] = train_effective(tc);
    echo_resolved(rc, out, eff);
    std::cout << "pretrained on " << corpus.size() << " examples for " << tc.pretrain_epochs
              << " epochs -> " << (out / "pretrained.ckpt").string() << "\n";
    return 0;
}

int cmd_finetune(const RunConfig& rc, Task task, const std::string& corpus_path,
                 const std::string& dev_path, const std::string& init_path,
                 const std::string& vocab_path, const std::string& out_dir,
                 std::size_t train_size) {
    fs::create_directories(out_dir);
    Corpus train = load_jsonl(corpus_path);
    TrainConfig tc = train_config(rc);
    if (train_size > 0) train = subsample(train, train_size, tc.seed);
    if (train.size() == 0) throw ConfigError("finetune: training corpus is empty");
    Corpus dev;
    if (!dev_path.empty()) dev = load_jsonl(dev_path);

    Vocabulary vocab;
    ModelParams params;
    if (!init_path.empty()) {
        Checkpoint ck = load_checkpoint(init_path);
        vocab = std::move(ck.vocab);
        params = std::move(ck.params);
        if (params.config.feature_dim != train.feature_dim ||
            params.config.region_count != train.region_count) {
            throw ConfigError("finetune: checkpoint dims do not match the corpus");
        }
    } else {
        vocab = vocab_path.empty() ? vocab_from_corpus(train, 1) : Vocabulary::load(vocab_path);
        params = init_params(model_config(rc, train, vocab.size()), tc.seed);
    }

    FinetuneResult result = finetune(task, train, dev, std::move(params), tc, vocab);
    fs::path out(out_dir);
    save_checkpoint((out / "finetuned.ckpt").string(), result.best_params, vocab);
    write_history_csv((out / "history.csv").string(), result.history);

    json eff;
    eff["model"] = json::parse(result.best_params.config.to_json());
    eff["train"] = train_effective(tc);
    eff["task"] = task_name(task);
    eff["train_size"] = train.size();
    echo_resolved(rc, out, eff);
    std::cout << "finetuned " << task_name(task) << " on " << train.size() << " examples; best "
              << (task == Task::MASC ? "Acc" : "F1") << " " << result.best_metric << " at epoch "
              << result.best_epoch << " -> " << (out / "finetuned.ckpt").string() << "\n";
    return 0;
}

int cmd_eval(Task task, const std::string& corpus_path, const std::string& checkpoint_path,
             bool restricted_masc) {
    Corpus corpus = load_jsonl(corpus_path);
    Checkpoint ck = load_checkpoint(checkpoint_path);
    if (ck.params.config.feature_dim != corpus.feature_dim ||
        ck.params.config.region_count != corpus.region_count) {
        throw ConfigError("eval: checkpoint dims do not match the corpus");
    }
    MetricReport report = evaluate(task, corpus, ck.params, ck.vocab, restricted_masc);
    std::cout << report.to_json() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generative multimodal aspect-sentiment toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, corpus_path, dev_path, init_path, vocab_path;
    std::string lexicon_path, gazetteer_path, anps_path, checkpoint_path, task_name_arg;
    std::uint64_t seed = 0;
    bool seed_set = false;
    long long examples = -1;
    std::size_t train_size = 0;
    bool restricted_masc = false;

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file of dotted keys");
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t v) { seed = v; seed_set = true; }, "seed override");
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus and resources");
    add_config(synth);
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--examples", examples, "example count override");

    CLI::App* label = app.add_subcommand("label", "fill weak labels where gold ones are absent");
    label->add_option("--corpus", corpus_path, "input JSONL corpus")->required();
    label->add_option("--lexicon", lexicon_path, "opinion lexicon TSV")->required();
    label->add_option("--gazetteer", gazetteer_path, "entity gazetteer")->required();
    label->add_option("--out", out_dir, "output JSONL path")->required();

    CLI::App* pre = app.add_subcommand("pretrain", "run the alternating pre-training loop");
    add_config(pre);
    pre->add_option("--corpus", corpus_path, "training JSONL corpus")->required();
    pre->add_option("--anps", anps_path, "ANP vocabulary file")->required();
    pre->add_option("--out", out_dir, "output directory")->required();

    CLI::App* fine = app.add_subcommand("finetune", "fine-tune a downstream task");
    add_config(fine);
    fine->add_option("--task", task_name_arg, "jmasa | mate | masc")->required();
    fine->add_option("--corpus", corpus_path, "training JSONL corpus")->required();
    fine->add_option("--dev", dev_path, "dev JSONL corpus for best-epoch selection");
    fine->add_option("--init", init_path, "checkpoint to start from");
    fine->add_option("--vocab", vocab_path, "vocabulary file (random init only)");
    fine->add_option("--out", out_dir, "output directory")->required();
    fine->add_option("--train-size", train_size, "subsample the training set to this many");

    CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint and print a JSON report");
    ev->add_option("--task", task_name_arg, "jmasa | mate | masc")->required();
    ev->add_option("--corpus", corpus_path, "evaluation JSONL corpus")->required();
    ev->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    ev->add_flag("--restricted-masc", restricted_masc,
                 "score MASC only on spans present in the prediction");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        RunConfig rc;
        if (!config_path.empty()) rc.load_file(config_path);
        if (seed_set) rc.set("seed", seed);
        if (synth->parsed()) {
            if (examples == 0) throw ConfigError("synth: --examples must be >= 1");
            if (examples > 0) {
                rc.set("synth.example_count", static_cast<std::size_t>(examples));
            }
            return cmd_synth(rc, out_dir);
        }
        if (label->parsed()) {
            return cmd_label(corpus_path, lexicon_path, gazetteer_path, out_dir);
        }
        if (pre->parsed()) {
            return cmd_pretrain(rc, corpus_path, anps_path, out_dir);
        }
        if (fine->parsed()) {
            Task task = task_from_name(task_name_arg);
            if (!is_downstream_task(task)) {
                throw ConfigError("finetune: task must be jmasa, mate, or masc");
            }
            return cmd_finetune(rc, task, corpus_path, dev_path, init_path, vocab_path, out_dir,
                                train_size);
        }
        if (ev->parsed()) {
            Task task = task_from_name(task_name_arg);
            if (!is_downstream_task(task)) {
                throw ConfigError("eval: task must be jmasa, mate, or masc");
            }
            return cmd_eval(task, corpus_path, checkpoint_path, restricted_masc);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
