#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "afa/corpus.hpp"
#include "afa/errors.hpp"
#include "afa/rng.hpp"
#include "afa/vocab.hpp"

namespace afa {

struct PlantedSpec {
    std::size_t num_examples = 1000;
    std::size_t seq_len = 12;
    int num_classes = 2;
    int signal_per_class = 1;
    // Total distinct words in the generated universe. Signal words are carved
    // from the front of it, the remainder serves as distractors.
    std::size_t vocab_words = 200;
    std::uint64_t seed = 1;
};

/// Synthetic corpus where the label is decided by a single planted signal
/// token: class c examples contain exactly one word from class c's signal set
/// at a uniform-random position, every other position is a uniform-random
/// distractor. The signal sets are disjoint across classes and disjoint from
/// the distractor pool, so a perfect classifier exists by construction and the
/// signal position is the ground-truth attention target.
struct PlantedDataset {
    PlantedSpec spec;
    std::vector<std::string> texts;
    std::vector<int> labels;
    std::vector<std::size_t> signal_positions;
    std::vector<std::vector<std::string>> signal_words;  // [class][j]
    std::vector<std::string> distractor_words;

    std::vector<Example> to_examples(const Vocab& vocab) const {
        std::vector<Example> out;
        out.reserve(texts.size());
        for (std::size_t i = 0; i < texts.size(); ++i) {
            Example ex;
            ex.token_ids = vocab.encode(texts[i]);
            ex.label = labels[i];
            ex.signal_positions = {signal_positions[i]};
            out.push_back(std::move(ex));
        }
        return out;
    }

    void write_jsonl(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("PlantedDataset: cannot write " + path);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            nlohmann::json record;
            record["text"] = texts[i];
            record["label"] = labels[i];
            out << record.dump() << "\n";
        }
    }

    void write_sidecar(const std::string& path) const {
        nlohmann::json side;
        side["num_classes"] = spec.num_classes;
        side["seq_len"] = spec.seq_len;
        side["signal_tokens"] = signal_words;
        side["signal_positions"] = signal_positions;
        side["labels"] = labels;
        std::ofstream out(path);
        if (!out) throw IoError("PlantedDataset: cannot write " + path);
        out << side.dump(2) << "\n";
    }
};

inline std::string planted_word(std::size_t index) {
    std::string s = std::to_string(index);
    return "w" + std::string(4 - std::min<std::size_t>(4, s.size()), '0') + s;
}

inline PlantedDataset gen_planted(const PlantedSpec& spec) {
    if (spec.signal_per_class < 1) {
        throw ConfigError("gen_planted: signal_per_class must be at least 1");
    }
    if (spec.seq_len < 4) throw ConfigError("gen_planted: seq_len must be at least 4");
    if (spec.num_classes < 2) throw ConfigError("gen_planted: need at least 2 classes");
    const std::size_t signals =
        static_cast<std::size_t>(spec.num_classes) * static_cast<std::size_t>(spec.signal_per_class);
    if (spec.vocab_words < signals + 1) {
        throw ConfigError("gen_planted: vocabulary budget of " + std::to_string(spec.vocab_words) +
                          " words cannot hold " + std::to_string(signals) +
                          " disjoint signal words plus distractors");
    }

    PlantedDataset ds;
    ds.spec = spec;
    ds.signal_words.resize(static_cast<std::size_t>(spec.num_classes));
    std::size_t next = 0;
    for (int c = 0; c < spec.num_classes; ++c) {
        for (int j = 0; j < spec.signal_per_class; ++j) {
            ds.signal_words[static_cast<std::size_t>(c)].push_back(planted_word(next++));
        }
    }
    for (std::size_t w = next; w < spec.vocab_words; ++w) {
        ds.distractor_words.push_back(planted_word(w));
    }

    RngStream rng(spec.seed, "planted");
    for (std::size_t i = 0; i < spec.num_examples; ++i) {
        const int label = static_cast<int>(rng.below(static_cast<std::size_t>(spec.num_classes)));
        const auto& class_signals = ds.signal_words[static_cast<std::size_t>(label)];
        const std::string& signal = class_signals[rng.below(class_signals.size())];
        const std::size_t pos = rng.below(spec.seq_len);
        std::string text;
        for (std::size_t t = 0; t < spec.seq_len; ++t) {
            if (t > 0) text += ' ';
            if (t == pos) {
                text += signal;
            } else {
                text += ds.distractor_words[rng.below(ds.distractor_words.size())];
            }
        }
        ds.texts.push_back(std::move(text));
        ds.labels.push_back(label);
        ds.signal_positions.push_back(pos);
    }
    return ds;
}

} // namespace afa
