// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>
#include <vector>

#include "canrbm/can_codec.hpp"
#include "canrbm/rng.hpp"

using namespace canrbm;

namespace {

CanFrame make_frame(double ts, std::uint16_t id, std::uint8_t dlc,
                    std::initializer_list<std::uint8_t> bytes,
                    FrameLabel label = FrameLabel::Regular) {
  CanFrame f;
  f.timestamp = ts;
  f.can_id = id;
  f.dlc = dlc;
  std::size_t i = 0;
  for (const auto b : bytes) f.data[i++] = b;
  f.label = label;
  return f;
}

CanFrame random_standard_frame(SeededRng& rng, double ts) {
  CanFrame f;
  f.timestamp = ts;
  f.can_id = static_cast<std::uint16_t>(rng.uniform_index(kMaxStandardId + 1));
  f.dlc = kPayloadBytes;
  for (auto& b : f.data) b = static_cast<std::uint8_t>(rng.uniform_index(256));
  f.label = rng.bernoulli(0.5) ? FrameLabel::Injected : FrameLabel::Regular;
  return f;
}

}  // namespace

TEST_CASE("parses HCRL records, with and without a header line") {
  const std::string body =
      "1478198376.389427,0316,8,05,21,68,09,21,21,00,6f,R\n"
      "1478198376.389636,018f,8,fe,5b,00,00,00,3c,00,00,T\n"
      "1478198376.389864,0260,2,19,21,R\n";

  SECTION("raw records") {
    std::istringstream in(body);
    const auto result = parse_hcrl_csv(in);
    REQUIRE(result.frames.size() == 3);
    REQUIRE(result.issues.empty());

    const auto& f0 = result.frames[0];
    CHECK(f0.timestamp == Catch::Approx(1478198376.389427).epsilon(0));
    CHECK(f0.can_id == 0x316);
    CHECK(f0.dlc == 8);
    CHECK(f0.data[0] == 0x05);
    CHECK(f0.data[7] == 0x6F);
    CHECK(f0.label == FrameLabel::Regular);

    CHECK(result.frames[1].label == FrameLabel::Injected);
    CHECK(result.frames[2].dlc == 2);
    CHECK(result.frames[2].data[1] == 0x21);
    CHECK(result.frames[2].data[2] == 0);  // bytes past dlc stay zero
  }

  SECTION("a leading header line is skipped") {
    std::istringstream in("Timestamp,ID,DLC,Data,Flag\n" + body);
    const auto result = parse_hcrl_csv(in);
    REQUIRE(result.frames.size() == 3);
    REQUIRE(result.issues.empty());
  }

  SECTION("a non-numeric field later in the file is an error, not a header") {
    std::istringstream in(body + "oops,0316,8,00,00,00,00,00,00,00,00,R\n");
    const auto result = parse_hcrl_csv(in);
    REQUIRE(result.frames.size() == 3);
    REQUIRE(result.issues.size() == 1);
    CHECK(result.issues[0].line == 4);
  }
}

TEST_CASE("malformed records: lenient skips with an issue, strict throws") {
  const struct {
    const char* line;
    const char* why;
  } cases[] = {
      {"-1.0,0316,8,00,00,00,00,00,00,00,00,R", "negative timestamp"},
      {"1.0,08ff,8,00,00,00,00,00,00,00,00,R", "id above 0x7ff"},
      {"1.0,12345,8,00,00,00,00,00,00,00,00,R", "id wider than 4 hex digits"},
      {"1.0,0316,9,00,00,00,00,00,00,00,00,00,R", "dlc above 8"},
      {"1.0,0316,8,00,00,00,00,00,00,00,R", "field count below dlc"},
      {"1.0,0316,8,00,00,00,00,00,00,00,00,00,R", "field count above dlc"},
      {"1.0,0316,8,00,00,0x,00,00,00,00,00,R", "bad data byte"},
      {"1.0,0316,8,00,00,00,00,00,00,00,00,Q", "bad flag"},
  };
  for (const auto& c : cases) {
    INFO(c.why);
    std::istringstream lenient(std::string("1.0,0260,2,19,21,R\n") + c.line + "\n");
    const auto result = parse_hcrl_csv(lenient);
    CHECK(result.frames.size() == 1);
    REQUIRE(result.issues.size() == 1);
    CHECK(result.issues[0].line == 2);

    std::istringstream strict_in(std::string("1.0,0260,2,19,21,R\n") + c.line + "\n");
    ParseOptions strict;
    strict.strict = true;
    CHECK_THROWS_AS(parse_hcrl_csv(strict_in, strict), ParseError);
  }
}

TEST_CASE("strict parse error carries the 1-based line number") {
  std::istringstream in("1.0,0260,2,19,21,R\n2.0,0260,2,19,21,X\n");
  ParseOptions strict;
  strict.strict = true;
  try {
    parse_hcrl_csv(in, strict);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("write then parse reproduces the frame list exactly") {
  SeededRng rng(7);
  std::vector<CanFrame> frames;
  // Microsecond-grid timestamps in the HCRL era survive %.6f round trips.
  std::uint64_t us = 1'478'198'400'000'000ULL;
  for (int i = 0; i < 500; ++i) {
    us += 1 + rng.uniform_index(50'000);
    frames.push_back(random_standard_frame(rng, static_cast<double>(us) / 1e6));
  }
  frames.push_back(make_frame(static_cast<double>(us + 10) / 1e6, 0x260, 2, {0x19, 0x21}));

  std::ostringstream out;
  write_hcrl_csv(frames, out);
  std::istringstream in(out.str());
  const auto result = parse_hcrl_csv(in);
  REQUIRE(result.issues.empty());
  REQUIRE(result.frames.size() == frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(result.frames[i] == frames[i]);
  }
}

TEST_CASE("filter_standard_frames keeps dlc-8 frames in order") {
  const std::vector<CanFrame> frames = {
      make_frame(1.0, 0x100, 8, {1, 2, 3, 4, 5, 6, 7, 8}),
      make_frame(2.0, 0x200, 2, {1, 2}),
      make_frame(3.0, 0x300, 8, {0, 0, 0, 0, 0, 0, 0, 0}),
      make_frame(4.0, 0x400, 0, {}),
  };
  const auto kept = filter_standard_frames(frames);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].can_id == 0x100);
  CHECK(kept[1].can_id == 0x300);
}

TEST_CASE("normalize_timestamps differences, rounds half-up, and clamps") {
  SECTION("documented two-frame example") {
    const std::vector<CanFrame> frames = {
        make_frame(1478195721.913135, 0x316, 8, {0, 0, 0, 0, 0, 0, 0, 0}),
        make_frame(1478195721.913370, 0x316, 8, {0, 0, 0, 0, 0, 0, 0, 0}),
    };
    const auto deltas = normalize_timestamps(frames, 1'000'000);
    REQUIRE(deltas.size() == 2);
    CHECK(deltas[0] == 0);
    CHECK(deltas[1] == 235);
  }

  SECTION("first frame maps to zero even with a huge timestamp") {
    const std::vector<CanFrame> one = {make_frame(1.0e9, 1, 8, {0, 0, 0, 0, 0, 0, 0, 0})};
    CHECK(normalize_timestamps(one, 1'000'000) == std::vector<std::uint16_t>{0});
  }

  SECTION("fractional ticks round half-up") {
    const std::vector<CanFrame> frames = {
        make_frame(0.0, 1, 8, {0, 0, 0, 0, 0, 0, 0, 0}),
        make_frame(0.0000104, 1, 8, {0, 0, 0, 0, 0, 0, 0, 0}),  // 10.4 ticks
        make_frame(0.0000250, 1, 8, {0, 0, 0, 0, 0, 0, 0, 0}),  // +14.6 ticks
    };
    const auto deltas = normalize_timestamps(frames, 1'000'000);
    CHECK(deltas[1] == 10);
    CHECK(deltas[2] == 15);
  }

  SECTION("gaps beyond the representable range clamp to 65535") {
    const std::vector<CanFrame> frames = {
        make_frame(0.0, 1, 8, {0, 0, 0, 0, 0, 0, 0, 0}),
        make_frame(2.0, 1, 8, {0, 0, 0, 0, 0, 0, 0, 0}),
    };
    CHECK(normalize_timestamps(frames, 1'000'000)[1] == kMaxDeltaTicks);
  }

  SECTION("equal timestamps give delta zero") {
    const std::vector<CanFrame> frames = {
        make_frame(5.0, 1, 8, {0, 0, 0, 0, 0, 0, 0, 0}),
        make_frame(5.0, 1, 8, {0, 0, 0, 0, 0, 0, 0, 0}),
    };
    CHECK(normalize_timestamps(frames, 1'000'000)[1] == 0);
  }

  SECTION("decreasing timestamps and zero scale are rejected") {
    const std::vector<CanFrame> frames = {
        make_frame(2.0, 1, 8, {0, 0, 0, 0, 0, 0, 0, 0}),
        make_frame(1.0, 1, 8, {0, 0, 0, 0, 0, 0, 0, 0}),
    };
    CHECK_THROWS_AS(normalize_timestamps(frames, 1'000'000), ValidationError);
    CHECK_THROWS_AS(normalize_timestamps(frames, 0), ValidationError);
  }
}

TEST_CASE("encode_frame lays fields out big-endian") {
  const auto frame =
      make_frame(0.0, 0x316, 8, {0x05, 0x21, 0x68, 0x09, 0x21, 0x21, 0x00, 0x6F});
  const BitVector vec = encode_frame(frame, 235, BitMode::Full96);
  REQUIRE(vec.size() == 96);

  // Frozen expectation: 235, 0x0316, then the payload bytes, each big-endian.
  const std::string expected =
      "0000000011101011"
      "0000001100010110"
      "00000101" "00100001" "01101000" "00001001"
      "00100001" "00100001" "00000000" "01101111";
  std::string got;
  for (std::size_t i = 0; i < vec.size(); ++i) got.push_back(vec[i] ? '1' : '0');
  CHECK(got == expected);
}

TEST_CASE("Dos16 encoding holds only the delta") {
  const auto frame = make_frame(0.0, 0x316, 8, {1, 2, 3, 4, 5, 6, 7, 8});
  const BitVector vec = encode_frame(frame, 2500, BitMode::Dos16);
  REQUIRE(vec.size() == 16);
  std::string got;
  for (std::size_t i = 0; i < vec.size(); ++i) got.push_back(vec[i] ? '1' : '0');
  CHECK(got == "0000100111000100");
}

TEST_CASE("Full96 encoding refuses short payloads") {
  const auto frame = make_frame(0.0, 0x316, 2, {1, 2});
  CHECK_THROWS_AS(encode_frame(frame, 0, BitMode::Full96), ValidationError);
  CHECK_NOTHROW(encode_frame(frame, 0, BitMode::Dos16));
}

TEST_CASE("decode inverts encode for random frames in both modes") {
  SeededRng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto frame = random_standard_frame(rng, 0.0);
    const auto delta = static_cast<std::uint16_t>(rng.uniform_index(65536));

    const auto full = decode_frame(encode_frame(frame, delta, BitMode::Full96), 1'000'000);
    CHECK(full.delta_ticks == delta);
    CHECK(full.can_id == frame.can_id);
    CHECK(full.data == frame.data);
    CHECK(full.standard_id());
    CHECK(full.delta_seconds == Catch::Approx(delta * 1e-6).margin(1e-12));

    const auto dos = decode_frame(encode_frame(frame, delta, BitMode::Dos16), 1'000'000);
    CHECK(dos.delta_ticks == delta);
    CHECK(dos.can_id == 0);
    CHECK(dos.data == std::array<std::uint8_t, 8>{});
  }
}

TEST_CASE("decode_frame rejects a zero scale factor") {
  CHECK_THROWS_AS(decode_frame(BitVector(BitMode::Dos16), 0), ValidationError);
}

TEST_CASE("encode_dataset selects by label and renormalizes over the subsequence") {
  const std::vector<CanFrame> frames = {
      make_frame(10.000000, 0x43F, 8, {1, 2, 3, 4, 5, 6, 7, 8}, FrameLabel::Regular),
      make_frame(10.001000, 0x43F, 8, {1, 2, 3, 4, 5, 6, 7, 8}, FrameLabel::Injected),
      make_frame(10.002000, 0x220, 8, {0, 0, 0, 0, 0, 0, 0, 0}, FrameLabel::Regular),
      make_frame(10.002500, 0x220, 2, {9, 9}, FrameLabel::Injected),  // dropped: dlc
      make_frame(10.003500, 0x43F, 8, {1, 2, 3, 4, 5, 6, 7, 8}, FrameLabel::Injected),
  };

  SECTION("injected only") {
    const auto ds = encode_dataset(frames, AttackType::Gear, 1'000'000);
    REQUIRE(ds.vectors.size() == 2);
    CHECK(ds.mode() == BitMode::Full96);
    CHECK(decode_frame(ds.vectors[0], 1'000'000).delta_ticks == 0);
    // 10.003500 - 10.001000, differenced over the injected subsequence alone.
    CHECK(decode_frame(ds.vectors[1], 1'000'000).delta_ticks == 2500);
  }

  SECTION("all frames") {
    const auto ds = encode_dataset(frames, AttackType::Gear, 1'000'000, LabelFilter::All);
    REQUIRE(ds.vectors.size() == 4);
    CHECK(decode_frame(ds.vectors[1], 1'000'000).delta_ticks == 1000);
    CHECK(decode_frame(ds.vectors[2], 1'000'000).delta_ticks == 1000);
    CHECK(decode_frame(ds.vectors[3], 1'000'000).delta_ticks == 1500);
  }

  SECTION("dos keeps only deltas") {
    const auto ds = encode_dataset(frames, AttackType::Dos, 1'000'000, LabelFilter::All);
    REQUIRE(ds.vectors.size() == 4);
    CHECK(ds.mode() == BitMode::Dos16);
    CHECK(ds.vectors[0].size() == 16);
  }
}

TEST_CASE("dataset files round trip") {
  SeededRng rng(23);
  EncodedDataset ds;
  ds.attack_type = AttackType::Fuzzy;
  ds.scale_factor = 1'000'000;
  for (int i = 0; i < 50; ++i) {
    std::vector<std::uint8_t> bits(kFullFrameBits);
    for (auto& b : bits) b = rng.bernoulli(0.5) ? 1 : 0;
    ds.vectors.emplace_back(BitMode::Full96, std::move(bits));
  }

  std::ostringstream out;
  write_dataset(ds, out);
  std::istringstream in(out.str());
  const auto back = read_dataset(in);
  CHECK(back.attack_type == ds.attack_type);
  CHECK(back.scale_factor == ds.scale_factor);
  REQUIRE(back.vectors.size() == ds.vectors.size());
  for (std::size_t i = 0; i < ds.vectors.size(); ++i) CHECK(back.vectors[i] == ds.vectors[i]);
}

TEST_CASE("dataset reader rejects corrupted files") {
  SECTION("wrong version header") {
    std::istringstream in("CANRBM-DATASET v9\nfuzzy full96 1000000 0\n");
    CHECK_THROWS_AS(read_dataset(in), IoError);
  }
  SECTION("mode contradicting the attack type") {
    std::istringstream in("CANRBM-DATASET v1\nfuzzy dos16 1000000 0\n");
    CHECK_THROWS_AS(read_dataset(in), ValidationError);
  }
  SECTION("wrong vector length") {
    std::istringstream in("CANRBM-DATASET v1\ndos dos16 1000000 1\n0101\n");
    CHECK_THROWS_AS(read_dataset(in), DimensionError);
  }
  SECTION("invalid bit character") {
    std::istringstream in("CANRBM-DATASET v1\ndos dos16 1000000 1\n010101010101010x\n");
    CHECK_THROWS_AS(read_dataset(in), IoError);
  }
  SECTION("truncated vector block") {
    std::istringstream in("CANRBM-DATASET v1\ndos dos16 1000000 2\n0101010101010101\n");
    CHECK_THROWS_AS(read_dataset(in), IoError);
  }
  SECTION("zero scale factor") {
    std::istringstream in("CANRBM-DATASET v1\ndos dos16 0 0\n");
    CHECK_THROWS_AS(read_dataset(in), IoError);
  }
}
