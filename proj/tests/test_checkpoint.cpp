#include <catch2/catch_amalgamated.hpp>

#include "afa/checkpoint.hpp"
#include "support/testutil.hpp"

using namespace afa;
using testsupport::TempDir;

TEST_CASE("target checkpoint round-trips bitwise") {
    TempDir dir("ckpt");
    TargetConfig cfg{23, 16, 2, 32, 3, 48, false, 0.3};
    RngStream rng(5, "init");
    TargetModel model = TargetModel::init(cfg, rng);
    checkpoint::save_target(dir.file("t.afa1"), model);
    TargetModel loaded = checkpoint::load_target(dir.file("t.afa1"));

    REQUIRE(loaded.cfg.vocab_size == cfg.vocab_size);
    REQUIRE(loaded.cfg.dim == cfg.dim);
    REQUIRE(loaded.cfg.heads == cfg.heads);
    REQUIRE(loaded.cfg.ff_dim == cfg.ff_dim);
    REQUIRE(loaded.cfg.num_classes == cfg.num_classes);
    REQUIRE(loaded.cfg.max_len == cfg.max_len);
    REQUIRE(loaded.cfg.positional_encoding == cfg.positional_encoding);

    const auto orig = model.parameters();
    const auto copy = loaded.parameters();
    REQUIRE(orig.size() == copy.size());
    for (std::size_t i = 0; i < orig.size(); ++i) {
        REQUIRE(orig[i].values() == copy[i].values());
    }

    Batch b = Batch::from_examples({{{4, 9, 11}, 0, {}}});
    REQUIRE(model.forward(b, false, nullptr).logits.values() ==
            loaded.forward(b, false, nullptr).logits.values());
}

TEST_CASE("discriminator checkpoint round-trips bitwise") {
    TempDir dir("ckpt");
    DiscConfig cfg{19, 8, 2, 16, 32, true, 0.3, true};
    RngStream rng(6, "init");
    Discriminator model = Discriminator::init(cfg, rng);
    checkpoint::save_discriminator(dir.file("d.afa1"), model);
    Discriminator loaded = checkpoint::load_discriminator(dir.file("d.afa1"));
    REQUIRE(loaded.cfg.mask_as_unk == cfg.mask_as_unk);
    Batch b = Batch::from_examples({{{4, Vocab::kMask}, 0, {}}});
    REQUIRE(model.predict_values(b) == loaded.predict_values(b));
}

TEST_CASE("checkpoint loader rejects foreign and damaged files") {
    TempDir dir("ckpt");
    testsupport::write_file(dir.file("junk.afa1"), "NOTA checkpoint at all");
    REQUIRE_THROWS_AS(checkpoint::load_target(dir.file("junk.afa1")), ParseError);

    TargetConfig cfg{10, 8, 2, 16, 2, 16, true, 0.3};
    RngStream rng(7, "init");
    TargetModel model = TargetModel::init(cfg, rng);
    checkpoint::save_target(dir.file("t.afa1"), model);

    // a target section is not a discriminator section
    REQUIRE_THROWS_AS(checkpoint::load_discriminator(dir.file("t.afa1")), ParseError);

    // truncation is detected
    const std::string full = testsupport::read_file(dir.file("t.afa1"));
    testsupport::write_file(dir.file("cut.afa1"), full.substr(0, full.size() / 2));
    REQUIRE_THROWS_AS(checkpoint::load_target(dir.file("cut.afa1")), ParseError);

    REQUIRE_THROWS_AS(checkpoint::load_target(dir.file("missing.afa1")), IoError);
}
