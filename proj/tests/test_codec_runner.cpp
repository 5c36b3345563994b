#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "eafrs/codec_runner.hpp"
#include "eafrs/error.hpp"
#include "eafrs/quality.hpp"
#include "eafrs/video_io.hpp"
#include "helpers.hpp"

using namespace eafrs;

namespace {

const std::string kStub = EAFRS_STUB_CODEC;

CommandTemplate stub_encoder(const std::string& mode) {
  return CommandTemplate("'" + kStub + "' encode --mode " + mode +
                         " --crf {crf} --in {input} --out {output}");
}

CommandTemplate stub_decoder() {
  return CommandTemplate("'" + kStub + "' decode --in {input} --out {output}");
}

std::filesystem::path write_source(const testutil::TempDir& dir) {
  SyntheticParams p;
  p.width = 32;
  p.height = 32;
  p.frames = 6;
  const auto seq = generate_synthetic(SyntheticKind::kLocalMotion, p);
  const auto path = dir / "src.y4m";
  write_y4m(seq, path);
  return path;
}

}  // namespace

TEST_CASE("template substitution") {
  const CommandTemplate t("enc {input} -crf {crf}");
  CHECK(t.expand({{"input", "in.y4m"}, {"crf", "23"}}) == "enc in.y4m -crf 23");
  CHECK(CommandTemplate("a {{literal}} {fps}").expand({{"fps", "60"}}) == "a {literal} 60");
  CHECK_THROWS_AS(CommandTemplate("enc {bogus}"), PreconditionError);
  CHECK_THROWS_AS(CommandTemplate("enc {input"), PreconditionError);
  CHECK_THROWS_AS(t.expand({{"input", "x"}}), PreconditionError);
}

TEST_CASE("bitrate is bits over clip duration") {
  CHECK(bitrate_kbps(1'500'000, 300, Rational(30)) == 1200.0);
  CHECK(bitrate_kbps(1'500'000, 1200, Rational(120)) == 1200.0);
  CHECK(bitrate_kbps(1000, 1, Rational(1)) == 8.0);
  CHECK_THROWS_AS(bitrate_kbps(10, 0, Rational(30)), PreconditionError);
}

TEST_CASE("cost model") {
  const CostModel c;
  CHECK(c.encode_seconds(10.0, 51) == doctest::Approx(0.2));
  CHECK(c.encode_seconds(10.0, 0) == doctest::Approx(0.4));
  CHECK(c.decode_seconds(10.0) == doctest::Approx(0.04));
}

TEST_CASE("identity stub round trip is byte-exact") {
  testutil::TempDir dir("codec-id");
  const auto src = write_source(dir);
  MockMeter meter;
  SimulatedExecutor ex(meter);
  const EncodeResult e = run_encode(stub_encoder("identity"), src, 23, dir / "a.bin", ex);
  const auto size = std::filesystem::file_size(dir / "a.bin");
  CHECK(e.bitrate_kbps == bitrate_kbps(size, 6, Rational(120)));
  CHECK(e.bitrate_kbps > 0.0);
  CHECK(e.crf == 23);
  CHECK(e.frame_rate == Rational(120));

  std::ifstream side(dir / "a.bin.json");
  const auto j = nlohmann::json::parse(side);
  CHECK(j.at("crf") == 23);
  CHECK(j.at("fps") == "120");
  CHECK(j.at("bitrate_kbps").get<double>() == e.bitrate_kbps);
  CHECK(j.contains("wall_s"));

  const DecodeResult d = run_decode(stub_decoder(), dir / "a.bin", dir / "a.y4m", ex);
  CHECK(testutil::read_file(d.decoded_path) == testutil::read_file(src));
}

TEST_CASE("quantizing stub is lossless at CRF 0 and monotone in CRF") {
  testutil::TempDir dir("codec-q");
  const auto src = write_source(dir);
  const auto ref = read_y4m(src);
  MockMeter meter;
  SimulatedExecutor ex(meter);
  double prev_q = std::numeric_limits<double>::infinity();
  double prev_rate = std::numeric_limits<double>::infinity();
  for (int crf : {0, 18, 30, 42}) {
    const auto bin = dir / ("q" + std::to_string(crf) + ".bin");
    const auto out = dir / ("q" + std::to_string(crf) + ".y4m");
    const EncodeResult e = run_encode(stub_encoder("quantize"), src, crf, bin, ex);
    run_decode(stub_decoder(), bin, out, ex);
    const double q = mpsnr(ref, read_y4m(out)).value_db;
    if (crf == 0) {
      CHECK(std::isinf(q));
    } else {
      CHECK(q < prev_q);
    }
    CHECK(e.bitrate_kbps < prev_rate);
    prev_q = q;
    prev_rate = e.bitrate_kbps;
  }
}

TEST_CASE("codec failures") {
  testutil::TempDir dir("codec-bad");
  const auto src = write_source(dir);
  MockMeter meter;
  SimulatedExecutor ex(meter);
  CHECK_THROWS_AS(run_encode(stub_encoder("identity"), src, 52, dir / "x.bin", ex),
                  PreconditionError);
  try {
    run_encode(CommandTemplate("exit 4 # {input} {output}"), src, 10, dir / "x.bin", ex);
    FAIL("expected SubprocessError");
  } catch (const SubprocessError& e) {
    CHECK(e.exit_code() == 4);
  }
  CHECK_THROWS_AS(run_encode(CommandTemplate("true {input} {output}"), src, 10, dir / "x.bin", ex),
                  SubprocessError);
  CHECK_THROWS_AS(run_decode(stub_decoder(), dir / "missing.bin", dir / "o.y4m", ex), DataError);
}

TEST_CASE("encode workload models time from frames and CRF") {
  testutil::TempDir dir("codec-work");
  const auto src = write_source(dir);
  const Workload w = make_encode_workload(stub_encoder("identity"), src, dir / "o.bin", 51);
  CHECK(w.workload_class == "encode");
  CHECK(w.modeled_seconds == doctest::Approx(0.02 * 6 * 32 * 32 / 1e6));
  CHECK(w.label.find("--crf 51") != std::string::npos);
}
