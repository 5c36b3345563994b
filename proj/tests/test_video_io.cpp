#include <doctest.h>

#include "eafrs/error.hpp"
#include "eafrs/rational.hpp"
#include "eafrs/video_io.hpp"
#include "helpers.hpp"

using namespace eafrs;
using testutil::TempDir;

TEST_CASE("rational normalizes, orders and parses") {
  CHECK(Rational(240, 2) == Rational(120));
  CHECK(Rational(120000, 1001).to_string() == "120000/1001");
  CHECK(Rational(-6, -4).to_string() == "3/2");
  CHECK(Rational(60) < Rational(120000, 1001));
  CHECK(Rational::parse("30000:1001") == Rational(30000, 1001));
  CHECK(Rational::parse("29.97") == Rational(2997, 100));
  CHECK(Rational::parse("24") == Rational(24));
  CHECK_THROWS_AS(Rational(1, 0), PreconditionError);
  CHECK_THROWS(Rational::parse("abc"));
}

TEST_CASE("rational lcm of frame rates") {
  CHECK(lcm(Rational(120), Rational(100)) == Rational(600));
  CHECK(lcm(Rational(120), Rational(60)) == Rational(120));
  CHECK(lcm(Rational(30000, 1001), Rational(24000, 1001)) == Rational(120000, 1001));
  CHECK_THROWS_AS(lcm(Rational(0), Rational(1)), PreconditionError);
}

TEST_CASE("y4m write/read/write is byte-exact") {
  TempDir dir("y4m");
  SyntheticParams p;
  p.width = 20;
  p.height = 12;
  p.frames = 5;
  p.seed = 3;
  const auto seq = generate_synthetic(SyntheticKind::kLocalMotion, p);
  write_y4m(seq, dir / "a.y4m");
  const auto back = read_y4m(dir / "a.y4m");
  CHECK(back.frames() == seq.frames());
  CHECK(back.frame_rate() == Rational(120));
  write_y4m(back, dir / "b.y4m");
  CHECK(testutil::read_file(dir / "a.y4m") == testutil::read_file(dir / "b.y4m"));
}

TEST_CASE("y4m keeps unknown header tokens on rewrite") {
  TempDir dir("y4m-tags");
  std::string frame(6 * 4 + 2 * 3 * 2, '\x40');
  testutil::write_file(dir / "in.y4m", "YUV4MPEG2 W6 H4 F30000:1001 It A1:1 C420jpeg XYSCSS=420JPEG\nFRAME\n" + frame);
  const auto seq = read_y4m(dir / "in.y4m");
  CHECK(seq.frame_rate() == Rational(30000, 1001));
  CHECK(seq.width() == 6);
  write_y4m(seq, dir / "out.y4m");
  CHECK(testutil::read_file(dir / "out.y4m") == testutil::read_file(dir / "in.y4m"));
}

TEST_CASE("y4m 10-bit samples survive a round trip") {
  TempDir dir("y4m10");
  const PixelFormat fmt{ChromaSubsampling::k420, 10};
  const auto seq = testutil::make_sequence(8, 4, 2, Rational(60),
                                           [](int i, int x, int y) { return (i * 97 + x * 31 + y * 7) % 1024; },
                                           fmt);
  write_y4m(seq, dir / "t.y4m");
  const auto back = read_y4m(dir / "t.y4m");
  CHECK(back.format().bit_depth == 10);
  CHECK(back.frames() == seq.frames());
  const auto info = probe_y4m(dir / "t.y4m");
  CHECK(info.frame_count == 2);
  CHECK(info.frame_rate == Rational(60));
}

TEST_CASE("y4m error cases") {
  TempDir dir("y4m-bad");
  testutil::write_file(dir / "magic.y4m", "NOTY4M W2 H2 F1:1\n");
  CHECK_THROWS_AS(read_y4m(dir / "magic.y4m"), DataError);
  testutil::write_file(dir / "nof.y4m", "YUV4MPEG2 W2 H2 C444\nFRAME\n123456789012");
  CHECK_THROWS_AS(read_y4m(dir / "nof.y4m"), DataError);
  testutil::write_file(dir / "trunc.y4m", "YUV4MPEG2 W2 H2 F1:1 C444\nFRAME\n12345");
  CHECK_THROWS_AS(read_y4m(dir / "trunc.y4m"), DataError);
  testutil::write_file(dir / "empty.y4m", "YUV4MPEG2 W2 H2 F1:1 C444\n");
  CHECK_THROWS_AS(read_y4m(dir / "empty.y4m"), DataError);
  testutil::write_file(dir / "chroma.y4m", "YUV4MPEG2 W2 H2 F1:1 Cmono9\nFRAME\n1234");
  CHECK_THROWS_AS(read_y4m(dir / "chroma.y4m"), DataError);
  CHECK_THROWS(read_y4m(dir / "missing.y4m"));
}

TEST_CASE("raw yuv size must be a whole number of frames") {
  TempDir dir("raw");
  const PixelFormat fmt{ChromaSubsampling::k420, 8};
  testutil::write_file(dir / "ok.yuv", std::string(fmt.frame_bytes(4, 2) * 3, '\x10'));
  const auto seq = read_raw_yuv(dir / "ok.yuv", 4, 2, Rational(25), fmt);
  CHECK(seq.size() == 3);
  CHECK(seq.frame(2).luma.at(3, 1) == 0x10);
  testutil::write_file(dir / "bad.yuv", std::string(fmt.frame_bytes(4, 2) * 3 + 1, '\x10'));
  CHECK_THROWS_AS(read_raw_yuv(dir / "bad.yuv", 4, 2, Rational(25), fmt), DataError);
}

TEST_CASE("sequence invariants") {
  CHECK_THROWS_AS(VideoSequence("x", Rational(30), {}), DataError);
  const PixelFormat fmt{ChromaSubsampling::k420, 8};
  std::vector<Frame> mixed = {Frame::filled(4, 4, fmt, 0, 128), Frame::filled(6, 4, fmt, 0, 128)};
  CHECK_THROWS(VideoSequence("x", Rational(30), mixed));
  const auto seq = testutil::make_sequence(4, 4, 12, Rational(120), [](int, int, int) { return 1; });
  CHECK(seq.duration_seconds() == doctest::Approx(0.1));
  CHECK(seq.with_frame_rate(Rational(60)).duration_seconds() == doctest::Approx(0.2));
}

TEST_CASE("synthetic generators are deterministic and content-typed") {
  SyntheticParams p;
  p.width = 32;
  p.height = 32;
  p.frames = 4;
  p.seed = 11;
  for (auto kind : {SyntheticKind::kConstant, SyntheticKind::kGlobalTranslation,
                    SyntheticKind::kLocalMotion, SyntheticKind::kDynamicTexture}) {
    CHECK(generate_synthetic(kind, p).frames() == generate_synthetic(kind, p).frames());
  }
  const auto c = generate_synthetic(SyntheticKind::kConstant, p);
  CHECK(c.frame(0) == c.frame(3));
  p.motion = 0.0;
  const auto still = generate_synthetic(SyntheticKind::kGlobalTranslation, p);
  CHECK(still.frame(0) == still.frame(3));
  p.motion = 2.0;
  const auto moving = generate_synthetic(SyntheticKind::kGlobalTranslation, p);
  CHECK_FALSE(moving.frame(0) == moving.frame(1));
  CHECK(parse_synthetic_kind("local_motion") == SyntheticKind::kLocalMotion);
  CHECK_THROWS(parse_synthetic_kind("bogus"));
}
