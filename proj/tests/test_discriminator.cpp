#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "afa/adam.hpp"
#include "afa/discriminator.hpp"
#include "afa/trainer.hpp"
#include "support/finite_diff.hpp"
#include "support/testutil.hpp"

using namespace afa;

namespace {

Discriminator toy_disc(std::size_t vocab, std::size_t dim = 8, bool mask_as_unk = false,
                       std::uint64_t seed = 7) {
    DiscConfig cfg;
    cfg.vocab_size = vocab;
    cfg.dim = dim;
    cfg.heads = 2;
    cfg.ff_dim = dim * 2;
    cfg.mask_as_unk = mask_as_unk;
    RngStream rng(seed, "init/disc");
    return Discriminator::init(cfg, rng);
}

} // namespace

TEST_CASE("zeroed head outputs exactly one half") {
    Discriminator d = toy_disc(16);
    for (double& v : d.w_head.mutable_values()) v = 0.0;
    d.b_head.mutable_values()[0] = 0.0;
    Batch b = Batch::from_examples({{{4, 5, 6}, 0, {}}, {{7}, 0, {}}});
    const auto p = d.predict_values(b);
    REQUIRE(p[0] == 0.5);
    REQUIRE(p[1] == 0.5);
}

TEST_CASE("identical rows give identical probabilities") {
    Discriminator d = toy_disc(16);
    Batch b = Batch::from_examples({{{4, 5, 6}, 0, {}}, {{4, 5, 6}, 0, {}}});
    const auto p = d.predict_values(b);
    REQUIRE(p[0] == p[1]);
    REQUIRE(p[0] > 0.0);
    REQUIRE(p[0] < 1.0);
}

TEST_CASE("outputs stay inside the clamped open interval") {
    Discriminator d = toy_disc(16);
    // saturate the head so the sigmoid would hit 1 without the clamp
    for (double& v : d.w_head.mutable_values()) v = 1e6;
    Batch b = Batch::from_examples({{{4, 5, 6}, 0, {}}});
    const auto p = d.predict_values(b);
    REQUIRE(p[0] <= 1.0 - ops::kLogFloor);
    REQUIRE(p[0] >= ops::kLogFloor);
}

TEST_CASE("mask_as_unk hides the mask symbol") {
    Discriminator d = toy_disc(16, 8, /*mask_as_unk=*/true);
    Batch with_mask = Batch::from_examples({{{4, Vocab::kMask, 6}, 0, {}}});
    Batch with_unk = Batch::from_examples({{{4, Vocab::kUnk, 6}, 0, {}}});
    REQUIRE(d.predict_values(with_mask)[0] == d.predict_values(with_unk)[0]);

    Discriminator visible = toy_disc(16, 8, /*mask_as_unk=*/false);
    REQUIRE(visible.predict_values(with_mask)[0] != visible.predict_values(with_unk)[0]);
}

TEST_CASE("disc_loss at the saturated perfect fixture is about zero") {
    Tensor p_orig = Tensor::from({ops::kLogFloor}, 1, 1);
    Tensor p_masked = Tensor::from({1.0 - ops::kLogFloor}, 1, 1);
    REQUIRE(disc_loss(p_orig, p_masked).scalar() == Catch::Approx(0.0).margin(1e-11));
}

TEST_CASE("disc_loss of a coin-flip discriminator is 2 ln 2") {
    Tensor p_orig = Tensor::from({0.5, 0.5}, 2, 1);
    Tensor p_masked = Tensor::from({0.5, 0.5}, 2, 1);
    REQUIRE(disc_loss(p_orig, p_masked).scalar() ==
            Catch::Approx(2.0 * std::log(2.0)).margin(1e-12));
}

TEST_CASE("disc_loss is nonnegative and decreasing in p_masked") {
    RngStream rng(3, "disc/loss");
    for (int trial = 0; trial < 200; ++trial) {
        const double po = 0.001 + 0.998 * rng.uniform01();
        const double pm = 0.001 + 0.998 * rng.uniform01();
        Tensor a = Tensor::from({po}, 1, 1, true);
        Tensor b = Tensor::from({pm}, 1, 1, true);
        Tape tape;
        {
            TapeScope scope(tape);
            Tensor loss = disc_loss(a, b);
            REQUIRE(loss.scalar() >= 0.0);
            tape.backward(loss);
        }
        REQUIRE(b.grad()[0] < 0.0);  // more confidence on the masked copy lowers the loss
        REQUIRE(a.grad()[0] > 0.0);
    }
}

TEST_CASE("disc_loss gradient passes finite differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        RngStream rng(seed, "fd/discloss");
        Tensor p_orig = testsupport::random_positive(3, 1, rng, 0.05, 0.95);
        Tensor p_masked = testsupport::random_positive(3, 1, rng, 0.05, 0.95);
        auto check = testsupport::gradient_check({p_orig, p_masked},
                                                 [&] { return disc_loss(p_orig, p_masked); });
        REQUIRE(check.max_rel_err < 1e-4);
    }
}

TEST_CASE("full discriminator pipeline gradient at toy dims") {
    Discriminator d = toy_disc(12, 8);
    Batch orig = Batch::from_examples({{{4, 5, 6, 7}, 0, {}}});
    Batch masked = Batch::from_examples({{{4, Vocab::kMask, 6, 7}, 0, {}}});
    auto check = testsupport::gradient_check(d.parameters(), [&] {
        Tensor p_orig = d.predict(orig, false, nullptr);
        Tensor p_masked = d.predict(masked, false, nullptr);
        return disc_loss(p_orig, p_masked);
    });
    REQUIRE(check.max_rel_err < 1e-4);
}

TEST_CASE("discriminator learns the contains-mask task quickly") {
    // light version of the sanity run: tiny dims, 300 steps, most of the
    // separability should already be there
    const std::size_t vocab = 40;
    Discriminator d = toy_disc(vocab, 16, false, 11);
    RngStream data_rng(5, "disc/data");
    RngStream dropout(6, "disc/dropout");
    AdamState adam;

    auto make_pair = [&](std::size_t count) {
        std::vector<Example> orig, masked;
        for (std::size_t i = 0; i < count; ++i) {
            Example ex;
            for (int j = 0; j < 8; ++j) {
                ex.token_ids.push_back(Vocab::kReserved +
                                       static_cast<int>(data_rng.below(vocab - Vocab::kReserved)));
            }
            Example mx = ex;
            mx.token_ids[data_rng.below(8)] = Vocab::kMask;
            orig.push_back(ex);
            masked.push_back(mx);
        }
        return std::pair(Batch::from_examples(orig), Batch::from_examples(masked));
    };

    for (int step = 0; step < 300; ++step) {
        auto [orig, masked] = make_pair(8);
        Tape tape;
        Tensor loss;
        {
            TapeScope scope(tape);
            loss = disc_loss(d.predict(orig, true, &dropout), d.predict(masked, true, &dropout));
        }
        tape.backward(loss);
        auto params = d.parameters();
        adam_step(params, 1e-3, adam);
    }

    auto [orig, masked] = make_pair(100);
    const double acc = disc_pair_accuracy(d.predict_values(orig), d.predict_values(masked));
    REQUIRE(acc >= 0.95);
}
