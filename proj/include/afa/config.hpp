#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "afa/errors.hpp"
#include "afa/discriminator.hpp"
#include "afa/target_model.hpp"
#include "afa/trainer.hpp"

namespace afa {

/// Everything a run needs, filled from a flat key=value file. All keys have
/// defaults; unknown keys are rejected so typos cannot silently change a run.
struct RunConfig {
    // data
    std::string train_path;
    std::string val_path;
    std::string test_path;
    int num_classes = 2;
    std::size_t max_len = 64;
    int min_count = 1;
    std::string embedding_file;

    // target model
    std::size_t dim = 64;
    std::size_t heads = 4;
    std::size_t ff_dim = 128;
    bool positional_encoding = true;
    double dropout = 0.3;

    // discriminator
    std::size_t disc_dim = 64;
    std::size_t disc_heads = 4;
    std::size_t disc_ff_dim = 128;
    bool mask_as_unk = false;

    // training
    TrainConfig train;

    // evaluation
    bool deletion_rerank = false;

    void validate() const {
        if (num_classes < 2) throw ConfigError("data.num_classes: must be at least 2");
        if (max_len < 1) throw ConfigError("data.max_len: must be at least 1");
        if (min_count < 1) throw ConfigError("data.min_count: must be at least 1");
        if (dim == 0 || heads == 0 || dim % heads != 0) {
            throw ConfigError("model.dim: must be a positive multiple of model.heads");
        }
        if (disc_dim == 0 || disc_heads == 0 || disc_dim % disc_heads != 0) {
            throw ConfigError("disc.dim: must be a positive multiple of disc.heads");
        }
        if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("train.dropout: must lie in [0, 1)");
        train.validate();
    }

    TrialSpec trial_spec(std::size_t vocab_size) const {
        TrialSpec spec;
        spec.target_cfg.vocab_size = vocab_size;
        spec.target_cfg.dim = dim;
        spec.target_cfg.heads = heads;
        spec.target_cfg.ff_dim = ff_dim;
        spec.target_cfg.num_classes = num_classes;
        spec.target_cfg.max_len = max_len;
        spec.target_cfg.positional_encoding = positional_encoding;
        spec.target_cfg.dropout = dropout;
        spec.disc_cfg.vocab_size = vocab_size;
        spec.disc_cfg.dim = disc_dim;
        spec.disc_cfg.heads = disc_heads;
        spec.disc_cfg.ff_dim = disc_ff_dim;
        spec.disc_cfg.max_len = max_len;
        spec.disc_cfg.positional_encoding = positional_encoding;
        spec.disc_cfg.dropout = dropout;
        spec.disc_cfg.mask_as_unk = mask_as_unk;
        spec.train_cfg = train;
        return spec;
    }

    /// Sorted key=value lines with every default resolved, echoed at startup
    /// so a run's effective configuration is always on record.
    std::map<std::string, std::string> effective() const {
        std::map<std::string, std::string> kv;
        auto put_num = [&kv](const std::string& key, auto v) { kv[key] = std::to_string(v); };
        auto put_real = [&kv](const std::string& key, double v) {
            std::ostringstream s;
            s.precision(17);
            s << v;
            kv[key] = s.str();
        };
        auto put_bool = [&kv](const std::string& key, bool v) { kv[key] = v ? "true" : "false"; };
        kv["data.train"] = train_path;
        kv["data.val"] = val_path;
        kv["data.test"] = test_path;
        put_num("data.num_classes", num_classes);
        put_num("data.max_len", max_len);
        put_num("data.min_count", min_count);
        kv["data.embedding_file"] = embedding_file;
        put_num("model.dim", dim);
        put_num("model.heads", heads);
        put_num("model.ff_dim", ff_dim);
        put_bool("model.pos_enc", positional_encoding);
        put_num("disc.dim", disc_dim);
        put_num("disc.heads", disc_heads);
        put_num("disc.ff_dim", disc_ff_dim);
        put_bool("disc.mask_as_unk", mask_as_unk);
        put_num("train.k", train.k);
        put_real("train.epsilon", train.epsilon);
        put_real("train.lambda", train.lambda_adv);
        put_num("train.samples", train.num_samples);
        put_real("train.lr_target", train.lr_target);
        put_real("train.lr_disc", train.lr_disc);
        put_num("train.batch_size", train.batch_size);
        put_num("train.epochs", train.epochs);
        put_num("train.seed", train.seed);
        put_real("train.dropout", dropout);
        put_bool("train.no_adversary", train.no_adversary);
        put_bool("eval.deletion_rerank", deletion_rerank);
        return kv;
    }
};

namespace detail_config {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError(key + ": expected a boolean, got \"" + value + "\"");
}

inline long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got \"" + value + "\"");
    }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an unsigned integer, got \"" + value + "\"");
    }
}

inline double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got \"" + value + "\"");
    }
}

} // namespace detail_config

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    using namespace detail_config;
    if (key == "data.train") cfg.train_path = value;
    else if (key == "data.val") cfg.val_path = value;
    else if (key == "data.test") cfg.test_path = value;
    else if (key == "data.num_classes") cfg.num_classes = static_cast<int>(parse_int(key, value));
    else if (key == "data.max_len") cfg.max_len = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "data.min_count") cfg.min_count = static_cast<int>(parse_int(key, value));
    else if (key == "data.embedding_file") cfg.embedding_file = value;
    else if (key == "model.dim") cfg.dim = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "model.heads") cfg.heads = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "model.ff_dim") cfg.ff_dim = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "model.pos_enc") cfg.positional_encoding = parse_bool(key, value);
    else if (key == "disc.dim") cfg.disc_dim = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "disc.heads") cfg.disc_heads = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "disc.ff_dim") cfg.disc_ff_dim = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "disc.mask_as_unk") cfg.mask_as_unk = parse_bool(key, value);
    else if (key == "train.k") cfg.train.k = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "train.epsilon") cfg.train.epsilon = parse_real(key, value);
    else if (key == "train.lambda") cfg.train.lambda_adv = parse_real(key, value);
    else if (key == "train.samples") cfg.train.num_samples = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "train.lr_target") cfg.train.lr_target = parse_real(key, value);
    else if (key == "train.lr_disc") cfg.train.lr_disc = parse_real(key, value);
    else if (key == "train.batch_size") cfg.train.batch_size = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "train.epochs") cfg.train.epochs = static_cast<int>(parse_int(key, value));
    else if (key == "train.seed") cfg.train.seed = parse_u64(key, value);
    else if (key == "train.dropout") cfg.dropout = parse_real(key, value);
    else if (key == "train.no_adversary") cfg.train.no_adversary = parse_bool(key, value);
    else if (key == "eval.deletion_rerank") cfg.deletion_rerank = parse_bool(key, value);
    else throw ConfigError("unknown config key \"" + key + "\"");
}

/// Parse a flat key=value file. '#' starts a comment; blank lines are skipped.
inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string trimmed = detail_config::trim(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected key=value, got \"" + trimmed + "\"");
        }
        const std::string key = detail_config::trim(trimmed.substr(0, eq));
        const std::string value = detail_config::trim(trimmed.substr(eq + 1));
        try {
            apply_config_entry(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

} // namespace afa
