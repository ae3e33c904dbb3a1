// Command-line driver: reproducible train / eval / sweep / gen-planted / viz runs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "afa/afa.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct LoadedData {
    afa::Vocab vocab;
    std::vector<afa::Example> train;
    std::vector<afa::Example> val;
    std::vector<afa::Example> test;
};

LoadedData load_datasets(const afa::RunConfig& cfg) {
    if (cfg.train_path.empty()) throw afa::ConfigError("data.train: no dataset file given");
    LoadedData data;
    data.vocab = afa::Vocab::build(afa::load_jsonl_texts(cfg.train_path), cfg.min_count);
    data.train = afa::load_jsonl(cfg.train_path, data.vocab, cfg.max_len, cfg.num_classes);
    if (!cfg.val_path.empty()) {
        data.val = afa::load_jsonl(cfg.val_path, data.vocab, cfg.max_len, cfg.num_classes);
    }
    if (!cfg.test_path.empty()) {
        data.test = afa::load_jsonl(cfg.test_path, data.vocab, cfg.max_len, cfg.num_classes);
    }
    return data;
}

void save_vocab(const afa::Vocab& vocab, const std::string& path) {
    json j;
    j["tokens"] = vocab.stored_tokens();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw afa::IoError("cannot write " + path);
    out << j.dump(2) << "\n";
}

afa::Vocab load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw afa::IoError("cannot open vocabulary file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw afa::ParseError(path + ": " + e.what());
    }
    if (!j.contains("tokens") || !j["tokens"].is_array()) {
        throw afa::ParseError(path + ": missing \"tokens\" array");
    }
    return afa::Vocab::from_tokens(j["tokens"].get<std::vector<std::string>>());
}

json step_to_json(const afa::StepReport& r) {
    json j;
    j["step"] = r.step;
    j["l_cls"] = r.l_cls;
    j["l_adv"] = r.l_adv;
    j["l_d"] = r.l_d;
    j["mean_r"] = r.mean_reward;
    j["disc_acc"] = r.disc_accuracy;
    j["adv_sum_max"] = r.max_abs_advantage_sum;
    return j;
}

void write_history(const afa::TrainHistory& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw afa::IoError("cannot write " + path);
    const std::size_t epochs = history.epochs.size();
    const std::size_t per_epoch = epochs == 0 ? 0 : history.steps.size() / epochs;
    std::size_t cursor = 0;
    for (std::size_t e = 0; e < epochs; ++e) {
        for (std::size_t s = 0; s < per_epoch && cursor < history.steps.size(); ++s) {
            out << step_to_json(history.steps[cursor++]).dump() << "\n";
        }
        json j;
        j["epoch"] = history.epochs[e].epoch;
        if (history.epochs[e].has_val) {
            j["val_acc"] = history.epochs[e].val_accuracy;
        } else {
            j["val_acc"] = nullptr;
        }
        out << j.dump() << "\n";
    }
}

void print_metrics(const afa::Metrics& m) {
    std::printf("%-12s %8.4f\n", "accuracy", m.accuracy);
    std::printf("%-12s %8.4f\n", "macro_p", m.macro_p);
    std::printf("%-12s %8.4f\n", "macro_r", m.macro_r);
    std::printf("%-12s %8.4f\n", "macro_f1", m.macro_f1);
}

void echo_config(const afa::RunConfig& cfg) {
    for (const auto& [key, value] : cfg.effective()) {
        std::cout << "config " << key << " = " << value << "\n";
    }
}

std::string checkpoint_name(const char* stem, int epoch) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_epoch_%03d.afa1", stem, epoch);
    return buf;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_dir) {
    afa::RunConfig cfg = afa::parse_config_file(config_path);
    if (seed) cfg.train.seed = *seed;
    echo_config(cfg);

    LoadedData data = load_datasets(cfg);
    fs::create_directories(out_dir);
    fs::create_directories(out_dir + "/checkpoints");
    save_vocab(data.vocab, out_dir + "/vocab.json");

    afa::TrialSpec spec = cfg.trial_spec(data.vocab.size());
    afa::RngStream init_target(spec.train_cfg.seed, "init/target");
    afa::RngStream init_disc(spec.train_cfg.seed, "init/disc");
    afa::TargetModel target = afa::TargetModel::init(spec.target_cfg, init_target);
    afa::Discriminator disc = afa::Discriminator::init(spec.disc_cfg, init_disc);
    if (!cfg.embedding_file.empty()) {
        const std::size_t n = afa::load_embedding_file(cfg.embedding_file, data.vocab,
                                                       target.embedding);
        std::cout << "loaded " << n << " embedding rows from " << cfg.embedding_file << "\n";
    }

    int best_epoch = -1;
    double best_val = -1.0;
    afa::Trainer trainer(target, disc, spec.train_cfg);
    afa::TrainHistory history = trainer.fit(
        data.train, data.val.empty() ? nullptr : &data.val, [&](const afa::EpochRecord& rec) {
            afa::checkpoint::save_target(
                out_dir + "/checkpoints/" + checkpoint_name("target", rec.epoch), target);
            afa::checkpoint::save_discriminator(
                out_dir + "/checkpoints/" + checkpoint_name("disc", rec.epoch), disc);
            if (rec.has_val) {
                std::printf("epoch %3d  val_acc %.4f\n", rec.epoch, rec.val_accuracy);
                if (rec.val_accuracy > best_val) {
                    best_val = rec.val_accuracy;
                    best_epoch = rec.epoch;
                }
            } else {
                std::printf("epoch %3d\n", rec.epoch);
            }
        });

    write_history(history, out_dir + "/history.jsonl");
    afa::checkpoint::save_target(out_dir + "/target_last.afa1", target);
    afa::checkpoint::save_discriminator(out_dir + "/disc_last.afa1", disc);
    const int chosen = best_epoch > 0 ? best_epoch : cfg.train.epochs;
    fs::copy_file(out_dir + "/checkpoints/" + checkpoint_name("target", chosen),
                  out_dir + "/target_best.afa1", fs::copy_options::overwrite_existing);
    fs::copy_file(out_dir + "/checkpoints/" + checkpoint_name("disc", chosen),
                  out_dir + "/disc_best.afa1", fs::copy_options::overwrite_existing);

    const std::vector<afa::Example>& eval_set = !data.test.empty() ? data.test : data.train;
    const afa::Metrics metrics = afa::evaluate_model(target, eval_set);
    {
        std::ofstream out(out_dir + "/metrics.json", std::ios::binary);
        out << metrics.to_json().dump(2) << "\n";
    }
    std::cout << "final metrics (" << (!data.test.empty() ? "test" : "train") << "):\n";
    print_metrics(metrics);
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& vocab_path,
             const std::string& data_path, const std::string& out_dir, int deletion,
             bool rerank, int viz_count) {
    afa::TargetModel target = afa::checkpoint::load_target(checkpoint_path);
    afa::Vocab vocab = load_vocab(vocab_path);
    if (vocab.size() != target.cfg.vocab_size) {
        throw afa::ConfigError("vocabulary size " + std::to_string(vocab.size()) +
                               " does not match checkpoint vocab of " +
                               std::to_string(target.cfg.vocab_size));
    }
    std::vector<afa::Example> data =
        afa::load_jsonl(data_path, vocab, target.cfg.max_len, target.cfg.num_classes);
    fs::create_directories(out_dir);

    const afa::Metrics metrics = afa::evaluate_model(target, data);
    {
        std::ofstream out(out_dir + "/metrics.json", std::ios::binary);
        out << metrics.to_json().dump(2) << "\n";
    }
    print_metrics(metrics);

    if (deletion >= 0) {
        const afa::DeletionCurve curve = afa::deletion_curve(target, data, deletion, rerank);
        std::ofstream out(out_dir + "/deletion.json", std::ios::binary);
        out << curve.to_json().dump(2) << "\n";
        afa::viz::Series series;
        series.name = "accuracy";
        for (const auto& [n, acc] : curve.points) {
            series.x.push_back(n);
            series.y.push_back(acc);
        }
        afa::viz::render_curve_svg({series}, out_dir + "/deletion.svg");
        std::cout << "deletion curve written (N <= " << deletion << ", " << curve.skipped
                  << " sequences skipped)\n";
    }
    if (viz_count > 0) {
        const std::size_t count = std::min<std::size_t>(data.size(),
                                                        static_cast<std::size_t>(viz_count));
        const std::vector<afa::Example> head(data.begin(),
                                             data.begin() + static_cast<std::ptrdiff_t>(count));
        const auto rows = afa::attention_rows(target, head);
        for (std::size_t i = 0; i < head.size(); ++i) {
            const afa::Batch b = afa::Batch::from_examples({head[i]});
            const int pred = target.predict(b)[0];
            std::vector<std::string> tokens = vocab.decode(head[i].token_ids);
            std::vector<double> attn(rows[i].begin(),
                                     rows[i].begin() + static_cast<std::ptrdiff_t>(tokens.size()));
            char name[64];
            std::snprintf(name, sizeof(name), "/attention_%04zu.html", i);
            afa::viz::render_attention_html(tokens, attn, std::to_string(pred),
                                            std::to_string(head[i].label), out_dir + name);
        }
        std::cout << "wrote " << count << " attention pages\n";
    }
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_dir, const std::string& k_values_arg, int trials, int jobs) {
    afa::RunConfig cfg = afa::parse_config_file(config_path);
    if (seed) cfg.train.seed = *seed;
    echo_config(cfg);

    std::vector<int> k_values;
    {
        std::stringstream ss(k_values_arg);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                k_values.push_back(std::stoi(item));
            } catch (const std::exception&) {
                throw afa::ConfigError("--k-values: bad integer \"" + item + "\"");
            }
        }
        if (k_values.empty()) throw afa::ConfigError("--k-values: empty list");
    }

    LoadedData data = load_datasets(cfg);
    const std::vector<afa::Example>& test = !data.test.empty() ? data.test : data.train;
    fs::create_directories(out_dir);

    const afa::SweepResult result = afa::sweep_k(cfg.trial_spec(data.vocab.size()), data.train,
                                                 test, k_values, trials, jobs);
    {
        std::ofstream out(out_dir + "/sweep.json", std::ios::binary);
        out << result.to_json().dump(2) << "\n";
    }
    afa::viz::Series series;
    series.name = "accuracy";
    for (const afa::SweepPoint& p : result.points) {
        series.x.push_back(p.k);
        series.y.push_back(p.mean_accuracy);
        series.ci_half.push_back(p.ci_half_width);
    }
    afa::viz::render_curve_svg({series}, out_dir + "/sweep.svg");
    for (const afa::SweepPoint& p : result.points) {
        std::printf("k=%-3d acc %.4f +- %.4f (%d trials)\n", p.k, p.mean_accuracy,
                    p.ci_half_width, p.trials);
    }
    return kExitOk;
}

int cmd_gen_planted(const std::string& out_path, std::size_t num, std::size_t seq_len,
                    int classes, int signal_per_class, std::size_t vocab_words,
                    std::uint64_t seed) {
    afa::PlantedSpec spec;
    spec.num_examples = num;
    spec.seq_len = seq_len;
    spec.num_classes = classes;
    spec.signal_per_class = signal_per_class;
    spec.vocab_words = vocab_words;
    spec.seed = seed;
    const afa::PlantedDataset ds = afa::gen_planted(spec);
    const fs::path out(out_path);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    ds.write_jsonl(out_path);
    ds.write_sidecar(out_path + ".signals.json");
    std::cout << "wrote " << num << " examples to " << out_path << " (+ sidecar)\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarially supervised attention training for a small transformer classifier"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::optional<std::uint64_t> seed;

    auto* train = app.add_subcommand("train", "train a model from a config file");
    train->add_option("--config", config_path, "key=value config file")->required();
    train->add_option("--seed", seed, "override train.seed");
    train->add_option("--out-dir", out_dir, "output directory");

    std::string ckpt_path, vocab_path, data_path;
    int deletion = -1, viz_count = 0;
    bool rerank = false;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval->add_option("--checkpoint", ckpt_path, "target checkpoint (.afa1)")->required();
    eval->add_option("--vocab", vocab_path, "vocabulary json written by train")->required();
    eval->add_option("--data", data_path, "jsonl dataset")->required();
    eval->add_option("--out-dir", out_dir, "output directory");
    eval->add_option("--deletion", deletion, "emit a token-deletion curve up to N");
    eval->add_flag("--rerank", rerank, "re-rank attention after every deletion");
    eval->add_option("--viz", viz_count, "emit attention HTML for the first E examples");

    std::string k_values = "1,2,3";
    int trials = 5, jobs = 1;
    auto* sweep = app.add_subcommand("sweep", "K-sensitivity sweep with t-distribution CIs");
    sweep->add_option("--config", config_path, "key=value config file")->required();
    sweep->add_option("--k-values", k_values, "comma-separated mask sizes");
    sweep->add_option("--trials", trials, "independent trials per K");
    sweep->add_option("--jobs", jobs, "parallel trial workers");
    sweep->add_option("--seed", seed, "override train.seed");
    sweep->add_option("--out-dir", out_dir, "output directory");

    std::string gen_out = "planted.jsonl";
    std::size_t gen_num = 1000, gen_seq_len = 12, gen_vocab = 200;
    int gen_classes = 2, gen_signals = 1;
    std::uint64_t gen_seed = 1;
    auto* gen = app.add_subcommand("gen-planted", "generate a synthetic planted-token dataset");
    gen->add_option("--out", gen_out, "output jsonl path")->required();
    gen->add_option("--num", gen_num, "number of examples");
    gen->add_option("--seq-len", gen_seq_len, "tokens per example");
    gen->add_option("--classes", gen_classes, "number of classes");
    gen->add_option("--signal-per-class", gen_signals, "signal words per class");
    gen->add_option("--vocab-words", gen_vocab, "total distinct words");
    gen->add_option("--seed", gen_seed, "generator seed");

    int viz_n = 8;
    auto* viz = app.add_subcommand("viz", "render attention HTML for a checkpoint");
    viz->add_option("--checkpoint", ckpt_path, "target checkpoint (.afa1)")->required();
    viz->add_option("--vocab", vocab_path, "vocabulary json written by train")->required();
    viz->add_option("--data", data_path, "jsonl dataset")->required();
    viz->add_option("--count", viz_n, "examples to render");
    viz->add_option("--out-dir", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (train->parsed()) return cmd_train(config_path, seed, out_dir);
        if (eval->parsed()) {
            return cmd_eval(ckpt_path, vocab_path, data_path, out_dir, deletion, rerank,
                            viz_count);
        }
        if (sweep->parsed()) return cmd_sweep(config_path, seed, out_dir, k_values, trials, jobs);
        if (gen->parsed()) {
            return cmd_gen_planted(gen_out, gen_num, gen_seq_len, gen_classes, gen_signals,
                                   gen_vocab, gen_seed);
        }
        if (viz->parsed()) return cmd_eval(ckpt_path, vocab_path, data_path, out_dir, -1, false,
                                           viz_n);
    } catch (const afa::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
