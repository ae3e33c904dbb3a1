#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "afa/corpus.hpp"
#include "afa/errors.hpp"
#include "afa/target_model.hpp"
#include "afa/trainer.hpp"

namespace afa {

// ---------------------------------------------------------------------------
// classification metrics
// ---------------------------------------------------------------------------

struct Metrics {
    double accuracy = 0.0;
    std::vector<double> precision;  // per class
    std::vector<double> recall;
    std::vector<double> f1;
    double macro_p = 0.0;
    double macro_r = 0.0;
    double macro_f1 = 0.0;
    std::vector<std::vector<long>> confusion;  // [actual][predicted]

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["accuracy"] = accuracy;
        j["precision"] = precision;
        j["recall"] = recall;
        j["f1"] = f1;
        j["macro_p"] = macro_p;
        j["macro_r"] = macro_r;
        j["macro_f1"] = macro_f1;
        j["confusion"] = confusion;
        return j;
    }
};

/// Standard confusion-matrix metrics. Division by zero yields 0, and classes
/// with neither predictions nor instances contribute 0 to the macro means.
inline Metrics compute_metrics(const std::vector<int>& predictions,
                               const std::vector<int>& labels, int num_classes) {
    if (predictions.size() != labels.size()) {
        throw ContractError("compute_metrics: " + std::to_string(predictions.size()) +
                            " predictions vs " + std::to_string(labels.size()) + " labels");
    }
    if (predictions.empty()) throw ContractError("compute_metrics: empty input");
    const std::size_t c = static_cast<std::size_t>(num_classes);
    Metrics m;
    m.confusion.assign(c, std::vector<long>(c, 0));
    long correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int p = predictions[i], y = labels[i];
        if (p < 0 || p >= num_classes || y < 0 || y >= num_classes) {
            throw IndexError("compute_metrics: class value outside [0, " +
                             std::to_string(num_classes) + ")");
        }
        m.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)] += 1;
        if (p == y) ++correct;
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());
    m.precision.assign(c, 0.0);
    m.recall.assign(c, 0.0);
    m.f1.assign(c, 0.0);
    for (std::size_t k = 0; k < c; ++k) {
        long tp = m.confusion[k][k];
        long predicted = 0, actual = 0;
        for (std::size_t j = 0; j < c; ++j) {
            predicted += m.confusion[j][k];
            actual += m.confusion[k][j];
        }
        m.precision[k] = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        m.recall[k] = actual > 0 ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
        const double pr = m.precision[k] + m.recall[k];
        m.f1[k] = pr > 0.0 ? 2.0 * m.precision[k] * m.recall[k] / pr : 0.0;
        m.macro_p += m.precision[k];
        m.macro_r += m.recall[k];
        m.macro_f1 += m.f1[k];
    }
    m.macro_p /= static_cast<double>(c);
    m.macro_r /= static_cast<double>(c);
    m.macro_f1 /= static_cast<double>(c);
    return m;
}

inline Metrics evaluate_model(const TargetModel& model, const std::vector<Example>& data) {
    std::vector<int> preds, labels;
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        const std::size_t end = std::min(start + chunk, data.size());
        std::vector<std::size_t> idx(end - start);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
        const Batch b = Batch::from_examples(data, idx);
        for (int p : model.predict(b)) preds.push_back(p);
        for (int y : b.labels) labels.push_back(y);
    }
    return compute_metrics(preds, labels, model.cfg.num_classes);
}

// ---------------------------------------------------------------------------
// attention diagnostics
// ---------------------------------------------------------------------------

/// Per-example attention rows in evaluation mode, chunked for memory.
inline std::vector<std::vector<double>> attention_rows(const TargetModel& model,
                                                       const std::vector<Example>& data) {
    std::vector<std::vector<double>> rows;
    rows.reserve(data.size());
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        const std::size_t end = std::min(start + chunk, data.size());
        std::vector<std::size_t> idx(end - start);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
        const Batch b = Batch::from_examples(data, idx);
        TargetOutput out = model.forward(b, /*training=*/false, nullptr);
        for (auto& r : out.attention_values()) rows.push_back(std::move(r));
    }
    return rows;
}

/// Mean over examples of the attention mass sitting on ground-truth signal
/// positions. Requires a dataset produced by the planted generator.
inline double signal_attention_mass(const TargetModel& model, const std::vector<Example>& data) {
    if (data.empty()) throw ContractError("signal_attention_mass: empty dataset");
    const auto rows = attention_rows(model, data);
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].signal_positions.empty()) {
            throw ContractError("signal_attention_mass: example " + std::to_string(i) +
                                " carries no signal positions");
        }
        for (std::size_t pos : data[i].signal_positions) total += rows[i][pos];
    }
    return total / static_cast<double>(data.size());
}

/// Fraction of examples whose highest-attention token is a signal token.
inline double top1_signal_rate(const TargetModel& model, const std::vector<Example>& data) {
    if (data.empty()) throw ContractError("top1_signal_rate: empty dataset");
    const auto rows = attention_rows(model, data);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < data[i].token_ids.size(); ++j) {
            if (rows[i][j] > rows[i][best]) best = j;
        }
        const auto& sig = data[i].signal_positions;
        if (std::find(sig.begin(), sig.end(), best) != sig.end()) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// token-deletion experiment
// ---------------------------------------------------------------------------

struct DeletionCurve {
    std::vector<std::pair<int, double>> points;  // (tokens removed, accuracy)
    std::size_t evaluated = 0;
    std::size_t skipped = 0;  // sequences shorter than n_max + 1

    double accuracy_at(int n) const {
        for (const auto& [removed, acc] : points) {
            if (removed == n) return acc;
        }
        throw ContractError("DeletionCurve: no point at N=" + std::to_string(n));
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& [n, acc] : points) pts.push_back({n, acc});
        j["points"] = pts;
        j["evaluated"] = evaluated;
        j["skipped"] = skipped;
        return j;
    }
};

/// Accuracy after physically deleting the N highest-attention tokens of each
/// sequence, N = 0..n_max. The ranking comes from the model's own attention
/// on the intact sequence and is computed once; `rerank` instead re-ranks
/// after every single deletion. Sequences too short for n_max deletions are
/// excluded from every point, so N=0 matches plain accuracy on the retained
/// set.
inline DeletionCurve deletion_curve(const TargetModel& model, const std::vector<Example>& data,
                                    int n_max, bool rerank = false) {
    if (n_max < 0) throw ContractError("deletion_curve: n_max must be nonnegative");
    DeletionCurve curve;
    std::vector<Example> retained;
    for (const Example& ex : data) {
        if (ex.token_ids.size() > static_cast<std::size_t>(n_max)) {
            retained.push_back(ex);
        } else {
            ++curve.skipped;
        }
    }
    curve.evaluated = retained.size();
    if (retained.empty()) throw ContractError("deletion_curve: every sequence is too short");

    std::vector<std::vector<std::size_t>> ranking(retained.size());
    if (!rerank) {
        const auto rows = attention_rows(model, retained);
        for (std::size_t i = 0; i < retained.size(); ++i) {
            std::vector<std::size_t> order(retained[i].token_ids.size());
            for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (rows[i][a] != rows[i][b]) return rows[i][a] > rows[i][b];
                return a < b;
            });
            ranking[i] = std::move(order);
        }
    }

    for (int n = 0; n <= n_max; ++n) {
        std::vector<Example> modified = retained;
        for (std::size_t i = 0; i < modified.size(); ++i) {
            if (!rerank) {
                std::vector<std::size_t> cut(ranking[i].begin(), ranking[i].begin() + n);
                std::sort(cut.begin(), cut.end());
                for (auto it = cut.rbegin(); it != cut.rend(); ++it) {
                    modified[i].token_ids.erase(modified[i].token_ids.begin() +
                                                static_cast<std::ptrdiff_t>(*it));
                }
            } else {
                for (int step = 0; step < n; ++step) {
                    const std::vector<Example> single{modified[i]};
                    const auto rows = attention_rows(model, single);
                    std::size_t best = 0;
                    for (std::size_t j = 1; j < modified[i].token_ids.size(); ++j) {
                        if (rows[0][j] > rows[0][best]) best = j;
                    }
                    modified[i].token_ids.erase(modified[i].token_ids.begin() +
                                                static_cast<std::ptrdiff_t>(best));
                }
            }
        }
        curve.points.emplace_back(n, Trainer::dataset_accuracy(model, modified));
    }
    return curve;
}

// ---------------------------------------------------------------------------
// K-sensitivity sweep
// ---------------------------------------------------------------------------

struct TInterval {
    double mean = 0.0;
    double sd = 0.0;
    double half_width = 0.0;
};

/// Two-sided t-distribution confidence interval for the mean of `values`.
inline TInterval t_confidence_interval(const std::vector<double>& values,
                                       double confidence = 0.95) {
    if (values.size() < 2) {
        throw ContractError("t_confidence_interval: need at least 2 values");
    }
    TInterval out;
    const double n = static_cast<double>(values.size());
    for (double v : values) out.mean += v;
    out.mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / (n - 1.0));
    const boost::math::students_t dist(n - 1.0);
    const double q = boost::math::quantile(dist, 1.0 - (1.0 - confidence) / 2.0);
    out.half_width = q * out.sd / std::sqrt(n);
    return out;
}

struct SweepPoint {
    int k = 0;
    double mean_accuracy = 0.0;
    double ci_half_width = 0.0;
    int trials = 0;
    std::vector<double> accuracies;
};

struct SweepResult {
    std::vector<SweepPoint> points;

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const SweepPoint& p : points) {
            nlohmann::json j;
            j["k"] = p.k;
            j["mean_accuracy"] = p.mean_accuracy;
            j["ci_half_width"] = p.ci_half_width;
            j["trials"] = p.trials;
            j["accuracies"] = p.accuracies;
            arr.push_back(j);
        }
        return nlohmann::json{{"sweep", arr}};
    }
};

inline std::uint64_t derive_trial_seed(std::uint64_t base, int k, int trial) {
    return detail::splitmix64(
        detail::splitmix64(base ^ (static_cast<std::uint64_t>(k) * 0x9e3779b97f4a7c15ull)) +
        static_cast<std::uint64_t>(trial));
}

/// Full training run per (k, trial seed); aggregates test accuracy with a
/// 95% t-interval across trials. Trials are independent and may run on up to
/// `jobs` threads.
inline SweepResult sweep_k(const TrialSpec& base, const std::vector<Example>& train,
                           const std::vector<Example>& test, const std::vector<int>& k_values,
                           int trials = 5, int jobs = 1) {
    if (trials < 2) throw ConfigError("sweep_k: trials must be at least 2");
    if (k_values.empty()) throw ConfigError("sweep_k: no k values given");

    struct Task {
        int k;
        int trial;
        double accuracy = 0.0;
    };
    std::vector<Task> tasks;
    for (int k : k_values) {
        for (int t = 0; t < trials; ++t) tasks.push_back(Task{k, t});
    }

    auto run_task = [&](Task& task) {
        TrialSpec spec = base;
        spec.train_cfg.k = static_cast<std::size_t>(task.k);
        spec.train_cfg.seed = derive_trial_seed(base.train_cfg.seed, task.k, task.trial);
        FitResult fit = train_run(spec, train);
        task.accuracy = Trainer::dataset_accuracy(fit.target, test);
    };

    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    if (workers == 1) {
        for (Task& t : tasks) run_task(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= tasks.size()) return;
                    run_task(tasks[i]);
                }
            });
        }
        for (std::thread& th : pool) th.join();
    }

    SweepResult result;
    std::size_t cursor = 0;
    for (int k : k_values) {
        SweepPoint point;
        point.k = k;
        point.trials = trials;
        for (int t = 0; t < trials; ++t) point.accuracies.push_back(tasks[cursor++].accuracy);
        const TInterval ci = t_confidence_interval(point.accuracies);
        point.mean_accuracy = ci.mean;
        point.ci_half_width = ci.half_width;
        result.points.push_back(std::move(point));
    }
    return result;
}

} // namespace afa
