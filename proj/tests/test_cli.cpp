#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "afa/planted.hpp"
#include "support/testutil.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using testsupport::read_file;
using testsupport::TempDir;
using testsupport::write_file;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(AFA_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string small_config(const TempDir& dir, const std::string& train_jsonl,
                         const std::string& test_jsonl, unsigned seed) {
    const std::string cfg_path = dir.file("run_" + std::to_string(seed) + ".cfg");
    write_file(cfg_path, "data.train = " + train_jsonl +
                             "\n"
                             "data.test = " + test_jsonl +
                             "\n"
                             "data.num_classes = 2\n"
                             "model.dim = 16\nmodel.heads = 2\nmodel.ff_dim = 32\n"
                             "disc.dim = 16\ndisc.heads = 2\ndisc.ff_dim = 32\n"
                             "train.k = 1\ntrain.batch_size = 16\ntrain.epochs = 2\n"
                             "train.lr_target = 0.001\ntrain.lr_disc = 0.001\n"
                             "train.seed = " + std::to_string(seed) + "\n");
    return cfg_path;
}

struct CliFixture {
    TempDir dir{"cli"};
    std::string train_jsonl;
    std::string test_jsonl;

    CliFixture() {
        afa::PlantedSpec spec;
        spec.num_examples = 64;
        spec.seq_len = 8;
        spec.vocab_words = 30;
        spec.seed = 40;
        afa::gen_planted(spec).write_jsonl(dir.file("train.jsonl"));
        spec.num_examples = 32;
        spec.seed = 41;
        afa::gen_planted(spec).write_jsonl(dir.file("test.jsonl"));
        train_jsonl = dir.file("train.jsonl");
        test_jsonl = dir.file("test.jsonl");
    }
};

} // namespace

TEST_CASE("cli gen-planted writes the dataset and its sidecar") {
    TempDir dir("cli_gen");
    const std::string out = dir.file("p.jsonl");
    REQUIRE(run_cli("gen-planted --out " + out +
                    " --num 40 --seq-len 8 --classes 2 --vocab-words 30 --seed 5") == 0);
    REQUIRE(fs::exists(out));
    REQUIRE(fs::exists(out + ".signals.json"));
    json side = json::parse(read_file(out + ".signals.json"));
    REQUIRE(side["signal_positions"].size() == 40);

    // identical seeds produce identical files
    const std::string out2 = dir.file("p2.jsonl");
    REQUIRE(run_cli("gen-planted --out " + out2 +
                    " --num 40 --seq-len 8 --classes 2 --vocab-words 30 --seed 5") == 0);
    REQUIRE(read_file(out) == read_file(out2));
}

TEST_CASE("cli train produces history, checkpoints, metrics and vocab") {
    CliFixture fx;
    const std::string cfg = small_config(fx.dir, fx.train_jsonl, fx.test_jsonl, 7);
    const std::string out = fx.dir.file("run_out");
    REQUIRE(run_cli("train --config " + cfg + " --out-dir " + out) == 0);
    REQUIRE(fs::exists(out + "/history.jsonl"));
    REQUIRE(fs::exists(out + "/target_last.afa1"));
    REQUIRE(fs::exists(out + "/target_best.afa1"));
    REQUIRE(fs::exists(out + "/disc_last.afa1"));
    REQUIRE(fs::exists(out + "/metrics.json"));
    REQUIRE(fs::exists(out + "/vocab.json"));
    REQUIRE(fs::exists(out + "/checkpoints/target_epoch_002.afa1"));

    // history is json-lines with step and epoch records
    std::istringstream lines(read_file(out + "/history.jsonl"));
    std::string line;
    std::size_t steps = 0, epochs = 0;
    while (std::getline(lines, line)) {
        json j = json::parse(line);
        if (j.contains("step")) ++steps;
        if (j.contains("epoch")) ++epochs;
    }
    REQUIRE(steps == 8);  // 64 examples / batch 16 * 2 epochs
    REQUIRE(epochs == 2);
}

TEST_CASE("cli train runs are byte-identical for a fixed seed") {
    CliFixture fx;
    const std::string cfg = small_config(fx.dir, fx.train_jsonl, fx.test_jsonl, 7);
    const std::string out1 = fx.dir.file("rep1");
    const std::string out2 = fx.dir.file("rep2");
    REQUIRE(run_cli("train --config " + cfg + " --out-dir " + out1) == 0);
    REQUIRE(run_cli("train --config " + cfg + " --out-dir " + out2) == 0);
    REQUIRE(read_file(out1 + "/history.jsonl") == read_file(out2 + "/history.jsonl"));
    REQUIRE(read_file(out1 + "/target_last.afa1") == read_file(out2 + "/target_last.afa1"));
    REQUIRE(read_file(out1 + "/disc_last.afa1") == read_file(out2 + "/disc_last.afa1"));
    REQUIRE(read_file(out1 + "/metrics.json") == read_file(out2 + "/metrics.json"));

    // a different seed diverges
    const std::string out3 = fx.dir.file("rep3");
    REQUIRE(run_cli("train --config " + cfg + " --seed 8 --out-dir " + out3) == 0);
    REQUIRE(read_file(out1 + "/history.jsonl") != read_file(out3 + "/history.jsonl"));
}

TEST_CASE("cli eval reproduces train metrics and deletion at zero") {
    CliFixture fx;
    const std::string cfg = small_config(fx.dir, fx.train_jsonl, fx.test_jsonl, 9);
    const std::string out = fx.dir.file("train_out");
    REQUIRE(run_cli("train --config " + cfg + " --out-dir " + out) == 0);

    const std::string eval_out = fx.dir.file("eval_out");
    REQUIRE(run_cli("eval --checkpoint " + out + "/target_last.afa1 --vocab " + out +
                    "/vocab.json --data " + fx.test_jsonl + " --deletion 0 --viz 3 --out-dir " +
                    eval_out) == 0);
    const json train_metrics = json::parse(read_file(out + "/metrics.json"));
    const json eval_metrics = json::parse(read_file(eval_out + "/metrics.json"));
    REQUIRE(train_metrics["accuracy"] == eval_metrics["accuracy"]);

    const json deletion = json::parse(read_file(eval_out + "/deletion.json"));
    REQUIRE(deletion["points"].size() == 1);
    REQUIRE(deletion["points"][0][0] == 0);
    REQUIRE(deletion["points"][0][1].get<double>() == eval_metrics["accuracy"].get<double>());
    REQUIRE(fs::exists(eval_out + "/attention_0000.html"));
    REQUIRE(fs::exists(eval_out + "/attention_0002.html"));
    REQUIRE(fs::exists(eval_out + "/deletion.svg"));
}

TEST_CASE("cli sweep emits one record per K with the requested trials") {
    CliFixture fx;
    const std::string cfg = small_config(fx.dir, fx.train_jsonl, fx.test_jsonl, 13);
    const std::string out = fx.dir.file("sweep_out");
    REQUIRE(run_cli("sweep --config " + cfg + " --k-values 1,2 --trials 2 --jobs 2 --out-dir " +
                    out) == 0);
    const json sweep = json::parse(read_file(out + "/sweep.json"));
    REQUIRE(sweep["sweep"].size() == 2);
    for (const auto& point : sweep["sweep"]) {
        REQUIRE(point["trials"] == 2);
        REQUIRE(point["accuracies"].size() == 2);
    }
    REQUIRE(fs::exists(out + "/sweep.svg"));
}

TEST_CASE("cli exits with code 2 on configuration problems") {
    TempDir dir("cli_err");
    write_file(dir.file("bad.cfg"), "train.epsilon = nope\n");
    REQUIRE(run_cli("train --config " + dir.file("bad.cfg")) == 2);
    REQUIRE(run_cli("train --config " + dir.file("missing.cfg")) == 2);
    REQUIRE(run_cli("train") == 2);          // missing required option
    REQUIRE(run_cli("no-such-command") == 2);
    write_file(dir.file("nodata.cfg"), "train.epochs = 1\n");
    REQUIRE(run_cli("train --config " + dir.file("nodata.cfg")) == 2);
}

TEST_CASE("cli exits with code 3 on runtime failures") {
    CliFixture fx;
    TempDir dir("cli_rt");
    // eval against a checkpoint that does not exist
    REQUIRE(run_cli("eval --checkpoint " + dir.file("no.afa1") + " --vocab " +
                    dir.file("no.json") + " --data " + fx.test_jsonl) == 3);
}
