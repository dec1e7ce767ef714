// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <sstream>
#include <vector>

#include "canrbm/can_codec.hpp"
#include "canrbm/generator.hpp"
#include "canrbm/model_io.hpp"
#include "canrbm/traffic_fixtures.hpp"
#include "canrbm/windows.hpp"

using namespace canrbm;

namespace {

RbmModel zero_model(std::size_t kv, std::size_t kh) {
  RbmModel m;
  m.kv = kv;
  m.kh = kh;
  m.a.assign(kv, 0.0);
  m.b.assign(kh, 0.0);
  m.w.assign(kv * kh, 0.0);
  return m;
}

// Visible biases pinned hard at the pattern, weights zero: the chain cannot
// leave the pattern no matter what the hidden layer does.
RbmModel saturated_model(const std::vector<std::uint8_t>& pattern, std::size_t kh) {
  auto m = zero_model(pattern.size(), kh);
  for (std::size_t i = 0; i < pattern.size(); ++i) m.a[i] = pattern[i] ? 20.0 : -20.0;
  return m;
}

std::vector<std::uint8_t> delta_pattern(std::uint16_t ticks) {
  std::vector<std::uint8_t> bits(16);
  for (std::size_t i = 0; i < 16; ++i) bits[i] = (ticks >> (15 - i)) & 1U;
  return bits;
}

}  // namespace

TEST_CASE("generation config validation") {
  GenerationConfig cfg;
  cfg.count = 0;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg.count = 1;
  cfg.gibbs_iters = 0;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
}

TEST_CASE("models must match one of the two encodings") {
  const auto odd = zero_model(8, 4);
  GenerationConfig cfg;
  CHECK_THROWS_AS(generate_bitvectors(odd, cfg), DimensionError);
}

TEST_CASE("an all-zero model generates unbiased bits") {
  const auto m = zero_model(96, 32);
  GenerationConfig cfg;
  cfg.count = 200;
  cfg.gibbs_iters = 3;
  cfg.seed = 5;
  const auto vectors = generate_bitvectors(m, cfg);
  REQUIRE(vectors.size() == 200);

  std::size_t ones = 0;
  for (const auto& v : vectors) {
    CHECK(v.mode() == BitMode::Full96);
    for (std::size_t i = 0; i < v.size(); ++i) ones += v[i];
  }
  const double mean = static_cast<double>(ones) / (200.0 * 96.0);
  CHECK(mean == Catch::Approx(0.5).margin(0.02));
}

TEST_CASE("a saturated model reproduces its pattern") {
  const auto pattern = delta_pattern(2500);
  const auto m = saturated_model(pattern, 8);

  GenerationConfig cfg;
  cfg.count = 20;
  cfg.gibbs_iters = 50;
  cfg.seed = 3;
  for (const auto mode : {OutputMode::Stochastic, OutputMode::Deterministic}) {
    cfg.output_mode = mode;
    const auto vectors = generate_bitvectors(m, cfg);
    for (const auto& v : vectors) {
      CHECK(v.mode() == BitMode::Dos16);
      CHECK(std::vector<std::uint8_t>(v.bits().begin(), v.bits().end()) == pattern);
    }
  }
}

TEST_CASE("samples are reproducible and shardable by index") {
  const auto m = zero_model(16, 8);
  GenerationConfig cfg;
  cfg.count = 5;
  cfg.seed = 11;
  const auto a = generate_bitvectors(m, cfg);
  const auto b = generate_bitvectors(m, cfg);
  CHECK(a == b);

  // Each sample's chain is seeded from (seed, index), so a shorter run is a
  // prefix of a longer one.
  cfg.count = 3;
  const auto prefix = generate_bitvectors(m, cfg);
  for (std::size_t i = 0; i < 3; ++i) CHECK(prefix[i] == a[i]);

  cfg.count = 5;
  cfg.seed = 12;
  CHECK(generate_bitvectors(m, cfg) != a);
}

TEST_CASE("generate_frames decodes samples and records provenance") {
  const auto pattern = delta_pattern(2500);
  const auto m = saturated_model(pattern, 8);
  const ModelMeta meta{AttackType::Dos, BitMode::Dos16, 1'000'000};

  GenerationConfig cfg;
  cfg.count = 4;
  cfg.seed = 21;
  const auto frames = generate_frames(m, meta, cfg);
  REQUIRE(frames.size() == 4);
  const auto id = model_id(m, meta);
  for (std::size_t s = 0; s < frames.size(); ++s) {
    CHECK(frames[s].mode == BitMode::Dos16);
    CHECK(frames[s].delta_ticks == 2500);
    CHECK(frames[s].delta_seconds == 0.0025);
    CHECK(frames[s].can_id == 0);
    CHECK(frames[s].model_id == id);
    CHECK(frames[s].seed == 21);
    CHECK(frames[s].sample_index == s);
  }

  SECTION("meta that disagrees with the model is rejected") {
    const ModelMeta wrong{AttackType::Gear, BitMode::Full96, 1'000'000};
    CHECK_THROWS_AS(generate_frames(m, wrong, cfg), DimensionError);
  }
}

TEST_CASE("generated frames re-encode losslessly") {
  const auto m = zero_model(96, 32);
  const ModelMeta meta{AttackType::Fuzzy, BitMode::Full96, 1'000'000};
  GenerationConfig cfg;
  cfg.count = 30;
  cfg.gibbs_iters = 2;
  cfg.seed = 8;
  const auto vectors = generate_bitvectors(m, cfg);
  const auto frames = generate_frames(m, meta, cfg);
  REQUIRE(frames.size() == vectors.size());
  for (std::size_t s = 0; s < frames.size(); ++s) {
    CHECK(generated_bitvector(frames[s]) == vectors[s]);
  }
}

TEST_CASE("dos samples expand to canonical flood rows in full96") {
  GeneratedFrame g;
  g.mode = BitMode::Dos16;
  g.delta_ticks = 0x09C4;
  const auto wide = full96_bitvector(g);
  CHECK(wide.mode() == BitMode::Full96);
  const auto narrow = generated_bitvector(g);
  for (std::size_t i = 0; i < 16; ++i) CHECK(wide[i] == narrow[i]);
  for (std::size_t i = 16; i < 96; ++i) CHECK(wide[i] == 0);
}

TEST_CASE("generated CSV round trip") {
  const auto m = zero_model(96, 32);
  const ModelMeta meta{AttackType::Gear, BitMode::Full96, 1'000'000};
  GenerationConfig cfg;
  cfg.count = 25;
  cfg.gibbs_iters = 2;
  cfg.seed = 14;
  const auto frames = generate_frames(m, meta, cfg);

  std::ostringstream out;
  write_generated_csv(frames, out);
  std::istringstream in(out.str());
  const auto back = read_generated_csv(in, BitMode::Full96);
  REQUIRE(back.size() == frames.size());
  for (std::size_t s = 0; s < frames.size(); ++s) {
    CHECK(back[s].delta_ticks == frames[s].delta_ticks);
    CHECK(back[s].can_id == frames[s].can_id);
    CHECK(back[s].data == frames[s].data);
  }

  SECTION("dos rows come back in flood shape") {
    GeneratedFrame g;
    g.mode = BitMode::Dos16;
    g.delta_ticks = 123;
    g.can_id = 0x7FF;       // ignored on write for dos16
    g.data = {1, 2, 3, 4, 5, 6, 7, 8};
    std::ostringstream os;
    const std::vector<GeneratedFrame> one = {g};
    write_generated_csv(one, os);
    std::istringstream is(os.str());
    const auto row = read_generated_csv(is, BitMode::Dos16);
    REQUIRE(row.size() == 1);
    CHECK(row[0].delta_ticks == 123);
    CHECK(row[0].can_id == 0);
    for (const auto b : row[0].data) CHECK(b == 0);
  }

  SECTION("fractional or oversized ticks are rejected") {
    std::istringstream frac("12.5,043f,8,00,00,00,00,00,00,00,00,T\n");
    CHECK_THROWS_AS(read_generated_csv(frac, BitMode::Full96), ValidationError);
    std::istringstream wide("70000,043f,8,00,00,00,00,00,00,00,00,T\n");
    CHECK_THROWS_AS(read_generated_csv(wide, BitMode::Full96), ValidationError);
  }
}

TEST_CASE("generation manifest lists the provenance fields") {
  const ModelMeta meta{AttackType::Rpm, BitMode::Full96, 250'000};
  GenerationConfig cfg;
  cfg.count = 100;
  cfg.gibbs_iters = 50;
  cfg.seed = 9;
  cfg.output_mode = OutputMode::Deterministic;
  std::ostringstream os;
  write_generation_manifest("deadbeef01234567", meta, cfg, os);
  const auto text = os.str();
  CHECK(text.find("model_id\tdeadbeef01234567\n") != std::string::npos);
  CHECK(text.find("attack_type\trpm\n") != std::string::npos);
  CHECK(text.find("bit_mode\tfull96\n") != std::string::npos);
  CHECK(text.find("scale_factor\t250000\n") != std::string::npos);
  CHECK(text.find("count\t100\n") != std::string::npos);
  CHECK(text.find("gibbs_iters\t50\n") != std::string::npos);
  CHECK(text.find("seed\t9\n") != std::string::npos);
  CHECK(text.find("output_mode\tdeterministic\n") != std::string::npos);
}

TEST_CASE("augmentation appends whole windows to train only") {
  DatasetSplit split;
  WindowSample normal;
  normal.bits.assign(kWindowBits, 0);
  normal.bits[0] = 1;
  normal.label = WindowLabel::Normal;
  split.train.push_back(normal);
  WindowSample val = normal;
  val.label = WindowLabel::Gear;
  split.val.push_back(val);
  split.test.push_back(val);
  const auto val_hash = windows_hash(split.val);
  const auto test_hash = windows_hash(split.test);

  const auto m = zero_model(96, 32);
  const ModelMeta meta{AttackType::Gear, BitMode::Full96, 1'000'000};
  GenerationConfig cfg;
  cfg.count = 54;  // exactly two windows
  cfg.gibbs_iters = 2;
  cfg.seed = 4;
  std::map<AttackType, std::vector<GeneratedFrame>> generated;
  generated[AttackType::Gear] = generate_frames(m, meta, cfg);

  const auto augmented = augment_dataset(split, generated);
  REQUIRE(augmented.train.size() == 3);
  CHECK(augmented.train[1].label == WindowLabel::Gear);
  CHECK(augmented.train[2].label == WindowLabel::Gear);
  CHECK(windows_hash(augmented.val) == val_hash);
  CHECK(windows_hash(augmented.test) == test_hash);

  // The first appended window is the first 27 generated rows, concatenated.
  const auto& bits = augmented.train[1].bits;
  REQUIRE(bits.size() == kWindowBits);
  for (std::size_t r = 0; r < kWindowWidth; ++r) {
    const auto row = full96_bitvector(generated[AttackType::Gear][r]);
    for (std::size_t i = 0; i < 96; ++i) {
      REQUIRE(bits[r * 96 + i] == row[i]);
    }
  }

  SECTION("a partial window adds nothing") {
    cfg.count = 26;
    std::map<AttackType, std::vector<GeneratedFrame>> partial;
    partial[AttackType::Gear] = generate_frames(m, meta, cfg);
    const auto same = augment_dataset(split, partial);
    CHECK(same.train.size() == split.train.size());
    CHECK(windows_hash(same.train) == windows_hash(split.train));
  }

  SECTION("training data without the normal class is refused") {
    DatasetSplit no_normal;
    no_normal.train.push_back(val);
    CHECK_THROWS_AS(augment_dataset(no_normal, generated), ValidationError);
  }
}

TEST_CASE("a model trained on spoofed traffic regenerates the target id") {
  // Train on the injected frames of a simulated gear-spoofing log, then check
  // that deterministic samples carry the spoofed id more than any other.
  const auto frames =
      simulate_traffic(4000, default_id_pool(), make_attack_spec(AttackType::Gear), 57);
  const auto ds = encode_dataset(frames, AttackType::Gear, 1'000'000);
  REQUIRE(ds.vectors.size() > 800);

  auto m = init_rbm(96, 32, 1, 0.01);
  TrainConfig tcfg;
  tcfg.epochs = 25;
  tcfg.eta = 0.1;
  tcfg.seed = 2;
  train_cd(m, ds, tcfg);

  const ModelMeta meta{AttackType::Gear, BitMode::Full96, 1'000'000};
  GenerationConfig gcfg;
  gcfg.count = 100;
  gcfg.seed = 6;
  gcfg.output_mode = OutputMode::Deterministic;
  const auto generated = generate_frames(m, meta, gcfg);

  std::map<std::uint16_t, std::size_t> id_counts;
  for (const auto& g : generated) ++id_counts[g.can_id];
  std::uint16_t modal_id = 0;
  std::size_t modal_count = 0;
  for (const auto& [id, count] : id_counts) {
    if (count > modal_count) {
      modal_count = count;
      modal_id = id;
    }
  }
  CHECK(modal_id == 0x43F);
  CHECK(modal_count >= 50);
}
