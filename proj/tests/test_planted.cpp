#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "afa/corpus.hpp"
#include "afa/planted.hpp"
#include "support/testutil.hpp"

using namespace afa;
using testsupport::TempDir;

TEST_CASE("planted examples carry exactly one signal word of their class") {
    PlantedSpec spec;
    spec.num_examples = 400;
    spec.seq_len = 10;
    spec.num_classes = 2;
    spec.vocab_words = 50;
    spec.seed = 3;
    const PlantedDataset ds = gen_planted(spec);

    const std::set<std::string> sig0(ds.signal_words[0].begin(), ds.signal_words[0].end());
    const std::set<std::string> sig1(ds.signal_words[1].begin(), ds.signal_words[1].end());
    for (std::size_t i = 0; i < ds.texts.size(); ++i) {
        const auto words = tokenize(ds.texts[i]);
        REQUIRE(words.size() == spec.seq_len);
        std::size_t own = 0, other = 0;
        for (std::size_t j = 0; j < words.size(); ++j) {
            const bool in0 = sig0.count(words[j]) > 0;
            const bool in1 = sig1.count(words[j]) > 0;
            if ((ds.labels[i] == 0 && in0) || (ds.labels[i] == 1 && in1)) {
                ++own;
                REQUIRE(j == ds.signal_positions[i]);
            }
            if ((ds.labels[i] == 0 && in1) || (ds.labels[i] == 1 && in0)) ++other;
        }
        REQUIRE(own == 1);
        REQUIRE(other == 0);
    }
}

TEST_CASE("planted label is a function of the signal word alone") {
    PlantedSpec spec;
    spec.num_examples = 300;
    spec.vocab_words = 40;
    spec.seed = 12;
    const PlantedDataset ds = gen_planted(spec);
    std::map<std::string, int> word_to_label;
    for (std::size_t i = 0; i < ds.texts.size(); ++i) {
        const auto words = tokenize(ds.texts[i]);
        const std::string& sig = words[ds.signal_positions[i]];
        auto [it, inserted] = word_to_label.emplace(sig, ds.labels[i]);
        if (!inserted) REQUIRE(it->second == ds.labels[i]);
    }
}

TEST_CASE("planted signal positions are uniform (chi-squared)") {
    PlantedSpec spec;
    spec.num_examples = 10000;
    spec.seq_len = 8;
    spec.vocab_words = 64;
    spec.seed = 21;
    const PlantedDataset ds = gen_planted(spec);
    std::vector<long> counts(spec.seq_len, 0);
    for (std::size_t pos : ds.signal_positions) counts[pos] += 1;
    const double expected = static_cast<double>(spec.num_examples) /
                            static_cast<double>(spec.seq_len);
    const double stat = testsupport::chi_squared_statistic(counts, expected);
    // p > 0.01 <=> statistic below the 0.99 quantile at seq_len - 1 dof
    REQUIRE(stat < testsupport::chi_squared_quantile(0.99, static_cast<int>(spec.seq_len) - 1));
}

TEST_CASE("planted generation is deterministic per seed") {
    PlantedSpec spec;
    spec.num_examples = 50;
    spec.vocab_words = 30;
    spec.seed = 77;
    const PlantedDataset a = gen_planted(spec);
    const PlantedDataset b = gen_planted(spec);
    REQUIRE(a.texts == b.texts);
    REQUIRE(a.labels == b.labels);
    REQUIRE(a.signal_positions == b.signal_positions);
    spec.seed = 78;
    REQUIRE(gen_planted(spec).texts != a.texts);
}

TEST_CASE("planted generator rejects an exhausted vocabulary budget") {
    PlantedSpec spec;
    spec.num_classes = 4;
    spec.signal_per_class = 3;
    spec.vocab_words = 12;  // 12 signal words leave no distractors
    REQUIRE_THROWS_AS(gen_planted(spec), ConfigError);
    spec.signal_per_class = 0;
    REQUIRE_THROWS_AS(gen_planted(spec), ConfigError);
    spec.signal_per_class = 1;
    spec.seq_len = 3;
    REQUIRE_THROWS_AS(gen_planted(spec), ConfigError);
}

TEST_CASE("planted dataset round-trips through jsonl and sidecar") {
    TempDir dir("planted");
    PlantedSpec spec;
    spec.num_examples = 25;
    spec.vocab_words = 20;
    spec.seed = 5;
    const PlantedDataset ds = gen_planted(spec);
    ds.write_jsonl(dir.file("p.jsonl"));
    ds.write_sidecar(dir.file("p.signals.json"));

    Vocab vocab = Vocab::build(ds.texts, 1);
    const auto loaded = load_jsonl(dir.file("p.jsonl"), vocab, spec.seq_len, spec.num_classes);
    const auto direct = ds.to_examples(vocab);
    REQUIRE(loaded.size() == direct.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        REQUIRE(loaded[i].token_ids == direct[i].token_ids);
        REQUIRE(loaded[i].label == direct[i].label);
    }

    std::ifstream in(dir.file("p.signals.json"));
    nlohmann::json side;
    in >> side;
    REQUIRE(side["signal_positions"].size() == 25);
    REQUIRE(side["signal_tokens"].size() == 2);
}

TEST_CASE("examples built from planted data mark the signal position") {
    PlantedSpec spec;
    spec.num_examples = 30;
    spec.vocab_words = 25;
    spec.seed = 9;
    const PlantedDataset ds = gen_planted(spec);
    Vocab vocab = Vocab::build(ds.texts, 1);
    const auto examples = ds.to_examples(vocab);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        REQUIRE(examples[i].signal_positions == std::vector<std::size_t>{ds.signal_positions[i]});
        // signal id at the marked position decodes back to a signal word
        const int id = examples[i].token_ids[ds.signal_positions[i]];
        const std::string& word = vocab.token(id);
        const auto& sigs = ds.signal_words[static_cast<std::size_t>(examples[i].label)];
        REQUIRE(std::find(sigs.begin(), sigs.end(), word) != sigs.end());
    }
}
