#pragma once

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "afa/errors.hpp"
#include "afa/rng.hpp"
#include "afa/tensor.hpp"
#include "afa/vocab.hpp"

namespace afa {

/// One tokenized sequence with its class label. signal_positions is only
/// populated by the synthetic generator and marks the ground-truth important
/// token(s).
struct Example {
    std::vector<int> token_ids;
    int label = 0;
    std::vector<std::size_t> signal_positions;
};

/// A right-padded group of examples. pad_mask is true exactly at live tokens.
struct Batch {
    std::vector<std::vector<int>> token_ids;      // B rows, each padded to seq_len()
    std::vector<int> labels;
    std::vector<std::vector<std::uint8_t>> pad_mask;

    std::size_t size() const { return token_ids.size(); }
    std::size_t seq_len() const { return token_ids.empty() ? 0 : token_ids.front().size(); }

    std::size_t live_count(std::size_t row) const {
        std::size_t n = 0;
        for (std::uint8_t b : pad_mask[row]) n += b;
        return n;
    }

    std::vector<std::size_t> live_positions(std::size_t row) const {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < pad_mask[row].size(); ++j) {
            if (pad_mask[row][j]) out.push_back(j);
        }
        return out;
    }

    std::size_t last_live(std::size_t row) const {
        for (std::size_t j = pad_mask[row].size(); j > 0; --j) {
            if (pad_mask[row][j - 1]) return j - 1;
        }
        throw ContractError("Batch: row " + std::to_string(row) + " has no live tokens");
    }

    static Batch from_examples(const std::vector<Example>& examples,
                               const std::vector<std::size_t>& indices) {
        Batch b;
        std::size_t width = 0;
        for (std::size_t idx : indices) width = std::max(width, examples[idx].token_ids.size());
        for (std::size_t idx : indices) {
            const Example& ex = examples[idx];
            std::vector<int> ids(width, Vocab::kPad);
            std::vector<std::uint8_t> mask(width, 0);
            for (std::size_t j = 0; j < ex.token_ids.size(); ++j) {
                ids[j] = ex.token_ids[j];
                mask[j] = 1;
            }
            b.token_ids.push_back(std::move(ids));
            b.pad_mask.push_back(std::move(mask));
            b.labels.push_back(ex.label);
        }
        return b;
    }

    static Batch from_examples(const std::vector<Example>& examples) {
        std::vector<std::size_t> all(examples.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return from_examples(examples, all);
    }
};

/// Load a JSON-lines dataset: one {"text": ..., "label": ...} record per line.
inline std::vector<Example> load_jsonl(const std::string& path, const Vocab& vocab,
                                       std::size_t max_len, int num_classes) {
    std::ifstream in(path);
    if (!in) throw IoError("load_jsonl: cannot open " + path);
    std::vector<Example> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        if (!record.contains("text") || !record["text"].is_string() ||
            !record.contains("label") || !record["label"].is_number_integer()) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": record must have string \"text\" and integer \"label\"");
        }
        const int label = record["label"].get<int>();
        if (label < 0 || label >= num_classes) {
            throw IndexError(path + ":" + std::to_string(line_no) + ": label " +
                             std::to_string(label) + " outside [0, " +
                             std::to_string(num_classes) + ")");
        }
        Example ex;
        ex.token_ids = vocab.encode(record["text"].get<std::string>(), max_len);
        ex.label = label;
        if (ex.token_ids.empty()) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": text tokenizes to an empty sequence");
        }
        out.push_back(std::move(ex));
    }
    return out;
}

/// Raw texts of a JSONL file, for vocabulary building.
inline std::vector<std::string> load_jsonl_texts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_jsonl_texts: cannot open " + path);
    std::vector<std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        if (!record.contains("text") || !record["text"].is_string()) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": missing string \"text\"");
        }
        out.push_back(record["text"].get<std::string>());
    }
    return out;
}

/// One epoch of batches under a seeded shuffle. The final short batch is kept,
/// so the batches partition the dataset.
inline std::vector<Batch> make_epoch_batches(const std::vector<Example>& data,
                                             std::size_t batch_size, RngStream& shuffle_rng) {
    if (batch_size == 0) throw ContractError("make_epoch_batches: batch_size must be positive");
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_rng.shuffle(order);
    std::vector<Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(start + batch_size, order.size());
        batches.push_back(Batch::from_examples(
            data, {order.begin() + static_cast<std::ptrdiff_t>(start),
                   order.begin() + static_cast<std::ptrdiff_t>(end)}));
    }
    return batches;
}

/// Overlay pre-trained vectors onto an embedding table. File format: one token
/// per line, the token followed by `dim` tab-separated decimals. Tokens absent
/// from the vocabulary are ignored; vocabulary tokens absent from the file
/// keep their current (seeded random) rows. Returns the number of rows set.
inline std::size_t load_embedding_file(const std::string& path, const Vocab& vocab,
                                       Tensor& embedding) {
    std::ifstream in(path);
    if (!in) throw IoError("load_embedding_file: cannot open " + path);
    const std::size_t dim = embedding.cols();
    std::string line;
    std::size_t line_no = 0;
    std::size_t loaded = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string token;
        if (!std::getline(fields, token, '\t') || token.empty()) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": missing token field");
        }
        std::vector<double> row;
        std::string cell;
        while (std::getline(fields, cell, '\t')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ParseError(path + ":" + std::to_string(line_no) + ": bad decimal \"" +
                                 cell + "\"");
            }
        }
        if (row.size() != dim) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(dim) + " values, got " + std::to_string(row.size()));
        }
        if (!vocab.contains(token)) continue;
        const std::size_t id = static_cast<std::size_t>(vocab.id(token));
        for (std::size_t j = 0; j < dim; ++j) embedding.at(id, j) = row[j];
        ++loaded;
    }
    return loaded;
}

} // namespace afa
