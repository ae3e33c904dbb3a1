#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "afa/target_model.hpp"
#include "support/finite_diff.hpp"
#include "support/testutil.hpp"

using namespace afa;

namespace {

TargetModel toy_model(std::size_t vocab, int classes, std::size_t dim = 8, std::size_t heads = 2,
                      bool pos_enc = true, std::uint64_t seed = 42) {
    TargetConfig cfg;
    cfg.vocab_size = vocab;
    cfg.dim = dim;
    cfg.heads = heads;
    cfg.ff_dim = dim * 2;
    cfg.num_classes = classes;
    cfg.positional_encoding = pos_enc;
    RngStream rng(seed, "init/target");
    return TargetModel::init(cfg, rng);
}

Batch random_batch(std::size_t batch, std::size_t max_live, std::size_t vocab, RngStream& rng,
                   int classes = 2) {
    std::vector<Example> data;
    for (std::size_t e = 0; e < batch; ++e) {
        Example ex;
        const std::size_t live = 1 + rng.below(max_live);
        for (std::size_t j = 0; j < live; ++j) {
            ex.token_ids.push_back(Vocab::kReserved +
                                   static_cast<int>(rng.below(vocab - Vocab::kReserved)));
        }
        ex.label = static_cast<int>(rng.below(static_cast<std::size_t>(classes)));
        data.push_back(ex);
    }
    return Batch::from_examples(data);
}

} // namespace

TEST_CASE("single live token gets the whole attention row") {
    TargetModel model = toy_model(12, 2);
    Batch b = Batch::from_examples({{{5}, 0, {}}});
    TargetOutput out = model.forward(b, false, nullptr);
    REQUIRE(out.attention_rows[0].numel() == 1);
    REQUIRE(out.attention_rows[0].values()[0] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("identical sequences produce identical logits and attention") {
    TargetModel model = toy_model(20, 3);
    Batch b = Batch::from_examples({{{4, 7, 9}, 0, {}}, {{4, 7, 9}, 1, {}}});
    TargetOutput out = model.forward(b, false, nullptr);
    for (std::size_t c = 0; c < 3; ++c) REQUIRE(out.logits.at(0, c) == out.logits.at(1, c));
    REQUIRE(out.attention_rows[0].values() == out.attention_rows[1].values());
}

TEST_CASE("attention rows are distributions with zero PAD mass") {
    RngStream rng(404, "batches");
    TargetModel model = toy_model(30, 2);
    for (int trial = 0; trial < 20; ++trial) {
        Batch b = random_batch(6, 9, 30, rng);
        TargetOutput out = model.forward(b, false, nullptr);
        for (std::size_t e = 0; e < b.size(); ++e) {
            const auto& row = out.attention_rows[e].values();
            double sum = 0.0;
            for (std::size_t j = 0; j < row.size(); ++j) {
                REQUIRE(row[j] >= 0.0);
                REQUIRE(row[j] <= 1.0);
                if (!b.pad_mask[e][j]) REQUIRE(row[j] < 1e-12);
                sum += row[j];
            }
            REQUIRE(std::abs(sum - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("forward without dropout is bitwise deterministic") {
    TargetModel model = toy_model(25, 2);
    RngStream rng(7, "batch");
    Batch b = random_batch(4, 7, 25, rng);
    TargetOutput a = model.forward(b, false, nullptr);
    TargetOutput c = model.forward(b, false, nullptr);
    REQUIRE(a.logits.values() == c.logits.values());
    for (std::size_t e = 0; e < b.size(); ++e) {
        REQUIRE(a.attention_rows[e].values() == c.attention_rows[e].values());
    }
}

TEST_CASE("training dropout perturbs the forward pass") {
    TargetModel model = toy_model(25, 2);
    RngStream rng(7, "batch");
    Batch b = random_batch(4, 7, 25, rng);
    RngStream drop(3, "dropout");
    TargetOutput trained = model.forward(b, true, &drop);
    TargetOutput plain = model.forward(b, false, nullptr);
    REQUIRE(trained.logits.values() != plain.logits.values());
}

TEST_CASE("classification loss gradient passes finite differences for every parameter") {
    TargetModel model = toy_model(10, 2, 8, 2);
    Batch b = Batch::from_examples({{{3, 4, 5, 6, 7}, 1, {}}, {{4, 4, 8}, 0, {}}});
    auto check = testsupport::gradient_check(model.parameters(), [&] {
        TargetOutput out = model.forward(b, false, nullptr);
        return model.classification_loss(out, b.labels);
    });
    INFO("coords checked: " << check.checked);
    REQUIRE(check.max_rel_err < 1e-4);
}

TEST_CASE("attention-row gradient flows back to parameters") {
    TargetModel model = toy_model(10, 2, 8, 2);
    Batch b = Batch::from_examples({{{3, 4, 5, 6}, 0, {}}});
    Tensor weights = Tensor::from({0.3, -1.0, 0.55, 0.15}, 1, 4);
    auto check = testsupport::gradient_check(model.parameters(), [&] {
        TargetOutput out = model.forward(b, false, nullptr);
        return ops::sum_all(ops::mul(out.attention_rows[0], weights));
    });
    REQUIRE(check.max_rel_err < 1e-4);
}

TEST_CASE("permuting two distractor tokens permutes attention exactly") {
    TargetModel model = toy_model(30, 2, 8, 2, /*pos_enc=*/false);
    const std::vector<int> ids = {5, 9, 14, 22, 7, 11};
    Batch b1 = Batch::from_examples({{ids, 0, {}}});
    std::vector<int> swapped = ids;
    std::swap(swapped[1], swapped[3]);
    Batch b2 = Batch::from_examples({{swapped, 0, {}}});

    const auto row1 = model.forward(b1, false, nullptr).attention_rows[0].values();
    const auto row2 = model.forward(b2, false, nullptr).attention_rows[0].values();
    for (std::size_t j = 0; j < ids.size(); ++j) {
        const std::size_t src = j == 1 ? 3 : j == 3 ? 1 : j;
        REQUIRE(row2[j] == row1[src]);  // exact, not approximate
    }
}

TEST_CASE("with positional encoding the permutation symmetry breaks") {
    TargetModel model = toy_model(30, 2, 8, 2, /*pos_enc=*/true);
    const std::vector<int> ids = {5, 9, 14, 22, 7, 11};
    Batch b1 = Batch::from_examples({{ids, 0, {}}});
    std::vector<int> swapped = ids;
    std::swap(swapped[1], swapped[3]);
    Batch b2 = Batch::from_examples({{swapped, 0, {}}});
    const auto row1 = model.forward(b1, false, nullptr).attention_rows[0].values();
    const auto row2 = model.forward(b2, false, nullptr).attention_rows[0].values();
    REQUIRE(row1[1] != row2[3]);
}

TEST_CASE("token id beyond the vocabulary raises an index error") {
    TargetModel model = toy_model(10, 2);
    Batch b = Batch::from_examples({{{10}, 0, {}}});
    REQUIRE_THROWS_AS(model.forward(b, false, nullptr), IndexError);
}

TEST_CASE("predictions do not depend on padding width") {
    TargetModel model = toy_model(30, 2);
    const Example ex{{4, 9, 17}, 0, {}};
    const Example longer{{5, 6, 7, 8, 9, 10, 11}, 1, {}};
    Batch alone = Batch::from_examples({ex});
    Batch padded = Batch::from_examples({ex, longer});
    TargetOutput a = model.forward(alone, false, nullptr);
    TargetOutput c = model.forward(padded, false, nullptr);
    for (std::size_t j = 0; j < 2; ++j) {
        REQUIRE(a.logits.at(0, j) == c.logits.at(0, j));
    }
    for (std::size_t j = 0; j < 3; ++j) {
        REQUIRE(a.attention_rows[0].values()[j] == c.attention_rows[0].values()[j]);
    }
}

TEST_CASE("model dimensions must divide evenly") {
    TargetConfig cfg;
    cfg.vocab_size = 10;
    cfg.dim = 10;
    cfg.heads = 4;
    RngStream rng(1, "init");
    REQUIRE_THROWS_AS(TargetModel::init(cfg, rng), ConfigError);
}
