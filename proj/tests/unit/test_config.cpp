#include <doctest.h>

#include <fstream>

#include "hpt/config.hpp"
#include "hpt/error.hpp"
#include "support.hpp"

using namespace hpt;

TEST_SUITE("config") {

TEST_CASE("training defaults") {
  const RunConfig c;
  CHECK(c.batch_size == 16);
  CHECK(c.learning_rate == 3e-5);
  CHECK(c.patience == 5);
  CHECK(c.soft_template_length == 8);
  CHECK(c.structure_layers == 1);
  CHECK(c.variant == ModelVariant::kHpt);
  CHECK(c.macro_policy == MacroPolicy::kIncludeAll);
  CHECK(c.ablation.connection == ConnectionScheme::kSameDepth);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("every key round trips through text") {
  RunConfig c;
  c.learning_rate = 0.1 + 0.2;
  c.seed = 18446744073709551615ull;
  c.variant = ModelVariant::kSoft;
  c.ablation.connection = ConnectionScheme::kDepthIncreasing;
  c.ablation.no_mlm = true;
  c.macro_policy = MacroPolicy::kExcludeAbsent;
  c.hard_template = "this one is about";
  c.encoder.init_std = 1.0 / 3.0;
  const auto kv = to_key_values(c);
  CHECK(kv.size() == config_keys().size());
  RunConfig back;
  apply_key_values(back, kv);
  CHECK(to_key_values(back) == kv);
  CHECK(back.learning_rate == c.learning_rate);
  CHECK(back.seed == c.seed);
  CHECK(back.encoder.init_std == c.encoder.init_std);

  hpt::test::TempDir dir;
  save_key_values(dir.path() / "c.txt", kv);
  CHECK(load_key_values(dir.path() / "c.txt") == kv);
}

TEST_CASE("key-value text parsing") {
  const auto kv = parse_key_values("# comment\n\n train.batch_size = 4 \nmodel.variant=hard\n");
  REQUIRE(kv.size() == 2);
  CHECK(kv[0].first == "train.batch_size");
  CHECK(kv[0].second == "4");
  RunConfig c;
  apply_key_values(c, kv);
  CHECK(c.batch_size == 4);
  CHECK(c.variant == ModelVariant::kHard);
  CHECK_THROWS_AS(parse_key_values("no equals sign\n"), Error);
}

TEST_CASE("later values override earlier ones") {
  RunConfig c;
  apply_key_values(c, {{"train.patience", "2"}, {"train.patience", "9"}});
  CHECK(c.patience == 9);
}

TEST_CASE("invalid settings") {
  RunConfig c;
  auto kind = [&](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kIoError;
  };
  CHECK(kind([&] { set_config_value(c, "train.nope", "1"); }) == ErrorKind::kInvalidConfig);
  CHECK(kind([&] { set_config_value(c, "train.batch_size", "four"); }) == ErrorKind::kInvalidConfig);
  CHECK(kind([&] { set_config_value(c, "train.batch_size", "4x"); }) == ErrorKind::kInvalidConfig);
  CHECK(kind([&] { set_config_value(c, "model.variant", "gpt"); }) == ErrorKind::kInvalidConfig);
  CHECK(kind([&] { set_config_value(c, "ablation.connection", "star"); }) == ErrorKind::kUnknownScheme);
  CHECK(kind([&] { set_config_value(c, "eval.macro_policy", "weighted"); }) == ErrorKind::kInvalidConfig);
  CHECK(kind([&] { set_config_value(c, "encoder.positional", "maybe"); }) == ErrorKind::kInvalidConfig);

  auto invalid = [&](auto&& mutate) {
    RunConfig bad;
    mutate(bad);
    return kind([&] { bad.validate(); }) == ErrorKind::kInvalidConfig;
  };
  CHECK(invalid([](RunConfig& r) { r.batch_size = 0; }));
  CHECK(invalid([](RunConfig& r) { r.learning_rate = 0.0; }));
  CHECK(invalid([](RunConfig& r) { r.patience = -1; }));
  CHECK(invalid([](RunConfig& r) { r.mask_rate = 1.5; }));
  CHECK(invalid([](RunConfig& r) { r.encoder.heads = 3; }));
  CHECK(invalid([](RunConfig& r) { r.soft_template_length = 0; }));
  CHECK(invalid([](RunConfig& r) { r.mask_policy.mask_prob = 0.9; r.mask_policy.random_prob = 0.2; }));
}

TEST_CASE("ablation variants map onto the config") {
  CHECK(ablation_variant_names().size() == 6);
  for (const auto& name : ablation_variant_names()) {
    RunConfig c;
    c.variant = ModelVariant::kSoft;
    apply_ablation_variant(c, name);
    CHECK(c.variant == ModelVariant::kHpt);
    const int changed = int(c.ablation.flat_template) + int(c.ablation.no_injection) + int(c.ablation.bce_loss) +
                        int(c.ablation.no_mlm) + int(c.ablation.connection != ConnectionScheme::kSameDepth);
    CHECK(changed == 1);
  }
  RunConfig c;
  apply_ablation_variant(c, "random-connection");
  CHECK(c.ablation.connection == ConnectionScheme::kRandom);
  apply_ablation_variant(c, "bce-loss");
  CHECK(c.ablation.bce_loss);
  CHECK_THROWS_AS(apply_ablation_variant(c, "no-such-thing"), Error);
}

}  // TEST_SUITE
