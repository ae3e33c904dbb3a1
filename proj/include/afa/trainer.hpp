#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "afa/adam.hpp"
#include "afa/corpus.hpp"
#include "afa/discriminator.hpp"
#include "afa/errors.hpp"
#include "afa/masking.hpp"
#include "afa/ops.hpp"
#include "afa/rng.hpp"
#include "afa/target_model.hpp"
#include "afa/tensor.hpp"

namespace afa {

struct TrainConfig {
    std::size_t k = 2;          // tokens masked per perturbation
    double epsilon = 0.1;       // exploration rate of the selection policy
    double lambda_adv = 1.0;    // weight of the adversarial term in the target loss
    std::size_t num_samples = 4;  // M: masked samples per input for the baseline
    double lr_target = 1e-4;
    double lr_disc = 1e-4;
    std::size_t batch_size = 32;
    int epochs = 5;
    std::uint64_t seed = 42;
    // Plain supervised path: selections are still drawn and the discriminator
    // still trains (identical RNG discipline), but the target loss is built
    // without the adversarial term.
    bool no_adversary = false;

    void validate() const {
        if (k < 1) throw ConfigError("train.k: must be at least 1");
        if (epsilon < 0.0 || epsilon > 1.0) throw ConfigError("train.epsilon: must lie in [0, 1]");
        if (lambda_adv < 0.0) throw ConfigError("train.lambda: must be nonnegative");
        if (num_samples < 2) throw ConfigError("train.samples: baseline needs at least 2 samples");
        if (lr_target <= 0.0) throw ConfigError("train.lr_target: must be positive");
        if (lr_disc <= 0.0) throw ConfigError("train.lr_disc: must be positive");
        if (batch_size < 1) throw ConfigError("train.batch_size: must be at least 1");
        if (epochs < 1) throw ConfigError("train.epochs: must be at least 1");
    }
};

/// One masked sample's bookkeeping for the policy gradient.
struct RewardSample {
    MaskSelection selection;
    double raw_reward = 0.0;  // r = -log(1 - D(masked)), nonnegative, capped by the log floor
    double advantage = 0.0;   // r minus the M-sample mean
};

struct StepReport {
    long step = 0;
    double l_cls = 0.0;
    double l_adv = 0.0;
    double l_d = 0.0;
    double mean_reward = 0.0;
    double disc_accuracy = 0.0;
    // Largest |sum of advantages| across the step's inputs; identically ~0.
    double max_abs_advantage_sum = 0.0;

    bool all_finite() const {
        return std::isfinite(l_cls) && std::isfinite(l_adv) && std::isfinite(l_d) &&
               std::isfinite(mean_reward) && std::isfinite(disc_accuracy);
    }
};

struct EpochRecord {
    int epoch = 0;
    bool has_val = false;
    double val_accuracy = 0.0;
};

struct TrainHistory {
    std::vector<StepReport> steps;
    std::vector<EpochRecord> epochs;
};

/// r = -log(1 - p) with p clamped into [1e-12, 1 - 1e-12]; ranges over
/// [~0, -log(1e-12) ~= 27.63].
inline double reward_from_prob(double p_masked) {
    const double p = std::min(std::max(p_masked, ops::kLogFloor), 1.0 - ops::kLogFloor);
    return -std::log(1.0 - p);
}

/// Mean-subtracted rewards; sums to zero up to rounding.
inline std::vector<double> advantages(const std::vector<double>& rewards) {
    if (rewards.size() < 2) {
        throw ConfigError("advantages: baseline needs at least 2 samples, got " +
                          std::to_string(rewards.size()));
    }
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    std::vector<double> out;
    out.reserve(rewards.size());
    for (double r : rewards) out.push_back(r - mean);
    return out;
}

/// -(1/M) sum_m advantage_m * log pi(S_m | attention). Advantages enter as
/// constants; the gradient reaches only the attention row via log pi.
inline Tensor adversarial_loss(const Tensor& attention_row,
                               const std::vector<MaskSelection>& selections,
                               const std::vector<double>& advs) {
    if (selections.size() != advs.size()) {
        throw ContractError("adversarial_loss: " + std::to_string(selections.size()) +
                            " selections vs " + std::to_string(advs.size()) + " advantages");
    }
    const double m = static_cast<double>(selections.size());
    Tensor total;
    for (std::size_t i = 0; i < selections.size(); ++i) {
        Tensor log_prob = log_policy_prob(attention_row, selections[i].indices);
        Tensor term = ops::affine(log_prob, -advs[i] / m);
        total = i == 0 ? term : ops::add(total, term);
    }
    if (!total.defined()) total = Tensor::scalar_of(0.0);
    return total;
}

/// Runs the alternating 1:1 schedule: perturb with the current attention,
/// update the discriminator on an (original, masked) pair, then update the
/// target with classification loss plus reward-weighted policy gradient
/// computed against the freshly updated discriminator.
class Trainer {
public:
    Trainer(TargetModel& target, Discriminator& disc, const TrainConfig& cfg)
        : target_(target),
          disc_(disc),
          cfg_(cfg),
          dropout_target_(cfg.seed, "dropout/target"),
          dropout_disc_(cfg.seed, "dropout/disc"),
          policy_(cfg.seed, "policy/select"),
          disc_choice_(cfg.seed, "policy/disc_choice") {
        cfg_.validate();
    }

    StepReport train_step(const Batch& batch) {
        StepReport report;
        report.step = ++global_step_;
        const std::size_t bsize = batch.size();
        const std::size_t m_samples = cfg_.num_samples;

        // Step 1: forward the target and draw M selections per input.
        Tape target_tape;
        TargetOutput out;
        {
            TapeScope scope(target_tape);
            out = target_.forward(batch, /*training=*/true, &dropout_target_);
        }
        const std::vector<std::vector<double>> attn = out.attention_values();
        std::vector<std::vector<MaskSelection>> selections(bsize);
        for (std::size_t e = 0; e < bsize; ++e) {
            const auto live = batch.live_positions(e);
            for (std::size_t m = 0; m < m_samples; ++m) {
                selections[e].push_back(
                    select(attn[e], live, batch.token_ids[e], cfg_.k, cfg_.epsilon, policy_));
            }
        }

        // Step 2: discriminator update on the pair (original, one sampled masking).
        std::vector<MaskSelection> chosen;
        chosen.reserve(bsize);
        for (std::size_t e = 0; e < bsize; ++e) {
            chosen.push_back(selections[e][disc_choice_.below(m_samples)]);
        }
        const Batch masked_chosen = apply_mask(batch, chosen);
        Tape disc_tape;
        Tensor p_orig, p_masked, l_d;
        {
            TapeScope scope(disc_tape);
            p_orig = disc_.predict(batch, /*training=*/true, &dropout_disc_);
            p_masked = disc_.predict(masked_chosen, /*training=*/true, &dropout_disc_);
            l_d = disc_loss(p_orig, p_masked);
        }
        report.l_d = l_d.scalar();
        report.disc_accuracy = disc_pair_accuracy(p_orig.values(), p_masked.values());
        if (!std::isfinite(report.l_d)) abort_with_dump(batch, "discriminator loss", report.l_d);
        disc_tape.backward(l_d);
        auto disc_params = disc_.parameters();
        adam_step(disc_params, cfg_.lr_disc, adam_disc_);

        // Step 3: rewards against the updated discriminator, then the target update.
        std::vector<std::vector<RewardSample>> samples(bsize);
        if (!cfg_.no_adversary) {
            std::vector<std::vector<double>> rewards(bsize, std::vector<double>(m_samples));
            for (std::size_t m = 0; m < m_samples; ++m) {
                std::vector<MaskSelection> column;
                column.reserve(bsize);
                for (std::size_t e = 0; e < bsize; ++e) column.push_back(selections[e][m]);
                const std::vector<double> probs =
                    disc_.predict_values(apply_mask(batch, column));
                for (std::size_t e = 0; e < bsize; ++e) {
                    rewards[e][m] = reward_from_prob(probs[e]);
                }
            }
            double reward_sum = 0.0;
            for (std::size_t e = 0; e < bsize; ++e) {
                const std::vector<double> advs = advantages(rewards[e]);
                double adv_sum = 0.0;
                for (std::size_t m = 0; m < m_samples; ++m) {
                    samples[e].push_back(RewardSample{selections[e][m], rewards[e][m], advs[m]});
                    adv_sum += advs[m];
                    reward_sum += rewards[e][m];
                }
                report.max_abs_advantage_sum =
                    std::max(report.max_abs_advantage_sum, std::abs(adv_sum));
            }
            report.mean_reward = reward_sum / static_cast<double>(bsize * m_samples);
        }

        Tensor l_total;
        {
            TapeScope scope(target_tape);
            Tensor l_cls = target_.classification_loss(out, batch.labels);
            report.l_cls = l_cls.scalar();
            if (cfg_.no_adversary) {
                l_total = l_cls;
            } else {
                Tensor l_adv;
                for (std::size_t e = 0; e < bsize; ++e) {
                    std::vector<MaskSelection> sel;
                    std::vector<double> advs;
                    for (const RewardSample& s : samples[e]) {
                        sel.push_back(s.selection);
                        advs.push_back(s.advantage);
                    }
                    Tensor term = adversarial_loss(out.attention_rows[e], sel, advs);
                    l_adv = e == 0 ? term : ops::add(l_adv, term);
                }
                l_adv = ops::affine(l_adv, 1.0 / static_cast<double>(bsize));
                report.l_adv = l_adv.scalar();
                l_total = ops::add(l_cls, ops::affine(l_adv, cfg_.lambda_adv));
            }
        }
        if (!std::isfinite(l_total.scalar()) || !report.all_finite()) {
            abort_with_dump(batch, "target loss", l_total.scalar());
        }
        target_tape.backward(l_total);
        auto target_params = target_.parameters();
        adam_step(target_params, cfg_.lr_target, adam_target_);
        return report;
    }

    /// Epoch loop with seeded reshuffling; per-epoch hook receives the epoch
    /// record (for checkpointing / logging).
    TrainHistory fit(const std::vector<Example>& train, const std::vector<Example>* val,
                     const std::function<void(const EpochRecord&)>& on_epoch = nullptr) {
        TrainHistory history;
        for (int epoch = 1; epoch <= cfg_.epochs; ++epoch) {
            RngStream shuffle(cfg_.seed, "shuffle", static_cast<std::uint64_t>(epoch));
            for (const Batch& b : make_epoch_batches(train, cfg_.batch_size, shuffle)) {
                history.steps.push_back(train_step(b));
            }
            EpochRecord rec;
            rec.epoch = epoch;
            if (val != nullptr && !val->empty()) {
                rec.has_val = true;
                rec.val_accuracy = dataset_accuracy(target_, *val);
            }
            history.epochs.push_back(rec);
            if (on_epoch) on_epoch(rec);
        }
        return history;
    }

    /// Accuracy of a model over a dataset, evaluated in fixed-size chunks.
    static double dataset_accuracy(const TargetModel& model, const std::vector<Example>& data) {
        if (data.empty()) return 0.0;
        std::size_t correct = 0;
        const std::size_t chunk = 256;
        for (std::size_t start = 0; start < data.size(); start += chunk) {
            const std::size_t end = std::min(start + chunk, data.size());
            std::vector<std::size_t> idx(end - start);
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
            const Batch b = Batch::from_examples(data, idx);
            const std::vector<int> preds = model.predict(b);
            for (std::size_t i = 0; i < preds.size(); ++i) {
                if (preds[i] == b.labels[i]) ++correct;
            }
        }
        return static_cast<double>(correct) / static_cast<double>(data.size());
    }

    long step_count() const { return global_step_; }

private:
    [[noreturn]] void abort_with_dump(const Batch& batch, const char* what, double value) const {
        std::ostringstream msg;
        msg << "train_step " << global_step_ << ": non-finite " << what << " (" << value
            << "); offending batch:";
        for (std::size_t e = 0; e < batch.size(); ++e) {
            msg << "\n  row " << e << " label " << batch.labels[e] << " ids";
            for (int id : batch.token_ids[e]) msg << ' ' << id;
        }
        throw TrainAbortError(msg.str());
    }

    TargetModel& target_;
    Discriminator& disc_;
    TrainConfig cfg_;
    RngStream dropout_target_;
    RngStream dropout_disc_;
    RngStream policy_;
    RngStream disc_choice_;
    AdamState adam_target_;
    AdamState adam_disc_;
    long global_step_ = 0;
};

/// Bundle of everything needed to set up one training run.
struct TrialSpec {
    TargetConfig target_cfg;
    DiscConfig disc_cfg;
    TrainConfig train_cfg;
};

struct FitResult {
    TargetModel target;
    Discriminator disc;
    TrainHistory history;
};

/// Initialize both models from the run seed and train to completion.
inline FitResult train_run(const TrialSpec& spec, const std::vector<Example>& train,
                           const std::vector<Example>* val = nullptr,
                           const std::function<void(const EpochRecord&)>& on_epoch = nullptr) {
    RngStream init_target(spec.train_cfg.seed, "init/target");
    RngStream init_disc(spec.train_cfg.seed, "init/disc");
    FitResult result{TargetModel::init(spec.target_cfg, init_target),
                     Discriminator::init(spec.disc_cfg, init_disc), TrainHistory{}};
    Trainer trainer(result.target, result.disc, spec.train_cfg);
    result.history = trainer.fit(train, val, on_epoch);
    return result;
}

} // namespace afa
