#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "fovstream/traces.h"

using namespace fovstream;

TEST_CASE("fov trace formats") {
  FovTrace yp = ParseFovTraceText("timestamp_ms,yaw_deg,pitch_deg\n0,0,0\n33.3,30,10\n",
                                  FovFormat::kYawPitch);
  REQUIRE(yp.size() == 2);
  CHECK(yp.samples[0].dir.x == doctest::Approx(1.0));
  CHECK(std::abs(yp.samples[0].dir.y) < 1e-15);
  CHECK(std::abs(yp.samples[0].dir.z) < 1e-15);
  CHECK(YawDeg(yp.samples[1].dir) == doctest::Approx(30).epsilon(1e-12));
  CHECK(PitchDeg(yp.samples[1].dir) == doctest::Approx(10).epsilon(1e-12));

  FovTrace q = ParseFovTraceText("timestamp_ms,qw,qx,qy,qz\n0,1,0,0,0\n", FovFormat::kQuaternion);
  CHECK(q.samples[0].dir.x == doctest::Approx(1.0));
  // 90 degrees about z turns forward toward +y (left).
  Vec3 left = QuaternionForward(std::sqrt(0.5), 0, 0, std::sqrt(0.5));
  CHECK(left.y == doctest::Approx(1.0));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> yaw(-179, 179), pitch(-85, 85);
  for (int i = 0; i < 1000; ++i) {
    double y = yaw(rng), p = pitch(rng);
    Vec3 d = DirectionFromYawPitch(y, p);
    CHECK(std::abs(YawDeg(d) - y) < 1e-9);
    CHECK(std::abs(PitchDeg(d) - p) < 1e-9);
  }

  // Unity identity looks along +z, which maps to our forward axis.
  FovTrace ts = ParseFovTraceText(
      "PlaybackTime,UnitQuaternion.x,UnitQuaternion.y,UnitQuaternion.z,UnitQuaternion.w\n"
      "0.0,0,0,0,1\n0.5,0,0.7071067811865476,0,0.7071067811865476\n",
      FovFormat::kTsinghua);
  CHECK(ts.samples[0].dir.x == doctest::Approx(1.0));
  CHECK(ts.samples[1].t_ms == doctest::Approx(500));
  // Unity yaw +90 (about up) turns toward the right, i.e. -y here.
  CHECK(ts.samples[1].dir.y == doctest::Approx(-1.0));
}

TEST_CASE("strict and lenient parsing") {
  const std::string bad = "timestamp_ms,x,y,z\n0,1,0,0\n10,abc,0,0\n20,1,0,0\n15,0,1,0\n30,0,1,0\n";
  CHECK_THROWS_AS(ParseFovTraceText(bad, FovFormat::kXyz), InputError);
  std::vector<std::string> warnings;
  FovTrace t = ParseFovTraceText(bad, FovFormat::kXyz, {false, &warnings});
  CHECK(t.size() == 3);
  CHECK(warnings.size() == 2);
  CHECK_THROWS_AS(ParseFovTraceText("timestamp_ms,x,y\n0,1,0\n", FovFormat::kXyz), InputError);
}

TEST_CASE("write and read back") {
  auto dir = std::filesystem::temp_directory_path() / "fovstream_traces_test";
  std::filesystem::create_directories(dir);
  FovTrace t = SyntheticFovTrace("explore", 5, 30, 9);
  WriteFovTrace(t, (dir / "f.csv").string());
  FovTrace back = ParseFovTrace((dir / "f.csv").string(), FovFormat::kXyz);
  REQUIRE(back.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(back.samples[i].t_ms == t.samples[i].t_ms);
    CHECK(back.samples[i].dir == t.samples[i].dir);
  }
  BandwidthTrace bw = SyntheticBandwidthTrace(10, 5e7, 0.6, 4);
  WriteBandwidthTrace(bw, (dir / "b.csv").string());
  BandwidthTrace bb = ParseBandwidthTrace((dir / "b.csv").string(), BandwidthFormat::kRate);
  CHECK(bb.rates_bps() == bw.rates_bps());
  CHECK(bb.edges_ms() == bw.edges_ms());
}

TEST_CASE("resampling") {
  FovTrace t = ParseFovTraceText("timestamp_ms,yaw_deg,pitch_deg\n0,0,0\n100,10,0\n",
                                 FovFormat::kYawPitch);
  FovTrace r = ResampleFovTrace(t, 30);
  CHECK(r.size() == 4);
  CHECK(YawDeg(r.samples[1].dir) == doctest::Approx(10.0 / 3).epsilon(1e-9));
}

TEST_CASE("kalman smoothing") {
  FovTrace still;
  for (int i = 0; i < 60; ++i) still.samples.push_back({i * 33.3, DirectionFromYawPitch(40, 20)});
  FovTrace s = KalmanSmooth(still);
  for (const auto& x : s.samples) CHECK(AngleBetween(x.dir, still.samples[0].dir) < 1e-6);

  FovTrace imp = still;
  imp.samples[30].dir = DirectionFromYawPitch(50, 20);
  FovTrace si = KalmanSmooth(imp);
  double before = AngleBetween(imp.samples[30].dir, still.samples[0].dir);
  double after = AngleBetween(si.samples[30].dir, still.samples[0].dir);
  CHECK(after <= 0.5 * before);
  FovTrace noisy = SyntheticFovTrace("explore", 10, 30, 2);
  for (const auto& x : KalmanSmooth(noisy).samples) CHECK(std::abs(x.dir.Norm() - 1) < 1e-12);
}

TEST_CASE("flip extension") {
  FovTrace t = SyntheticFovTrace("smooth", 2, 30, 1);
  FovTrace same = FlipExtend(t, t.duration_ms());
  REQUIRE(same.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(same.samples[i].dir == t.samples[i].dir);
  FovTrace twice = FlipExtend(t, 2 * t.duration_ms());
  REQUIRE(twice.size() == 2 * t.size());
  const std::size_t n = t.size();
  for (std::size_t i = 0; i < n; ++i) CHECK(twice.samples[n + i].dir == t.samples[n - 1 - i].dir);
  double max_step = 0;
  for (std::size_t i = 1; i < n; ++i) {
    max_step = std::max(max_step, AngleBetween(t.samples[i].dir, t.samples[i - 1].dir));
  }
  FovTrace longer = FlipExtend(t, 5.5 * t.duration_ms());
  CHECK(longer.duration_ms() >= 5.5 * t.duration_ms());
  CHECK(longer.duration_ms() < 5.5 * t.duration_ms() + 1000 / t.fps);
  for (std::size_t i = 1; i < longer.size(); ++i) {
    CHECK(AngleBetween(longer.samples[i].dir, longer.samples[i - 1].dir) <= max_step + 1e-15);
    CHECK(longer.samples[i].t_ms > longer.samples[i - 1].t_ms);
  }
}

TEST_CASE("bandwidth trace formats and queries") {
  BandwidthTrace b = ParseBandwidthTraceText("timestamp_ms,bytes\n0,1000\n100,2000\n200,500\n",
                                             BandwidthFormat::kBytes);
  CHECK(b.rates_bps()[0] == doctest::Approx(80000));
  CHECK(b.rates_bps()[1] == doctest::Approx(160000));
  CHECK(b.end_ms() == 300);
  CHECK(b.CumulativeBits(300) == doctest::Approx(28000));
  CHECK(b.TimeToDeliver(0, 8000) == doctest::Approx(100));
  CHECK(b.TimeToDeliver(50, 8000) == doctest::Approx(125));
  CHECK(std::isinf(b.TimeToDeliver(0, 1e9)));

  BandwidthTrace r = ParseBandwidthTraceText("start_ms,end_ms,rate_bps\n0,10,5\n10,30,7\n",
                                             BandwidthFormat::kRate);
  CHECK(r.RateAt(15) == 7);
  CHECK_THROWS_AS(ParseBandwidthTraceText("start_ms,end_ms,rate_bps\n0,10,5\n12,30,7\n",
                                          BandwidthFormat::kRate),
                  InputError);
  BandwidthTrace p = ParseBandwidthTraceText("timestamp_ms,bytes\n0,100\n50,100\n150,100\n",
                                             BandwidthFormat::kPackets, {}, "<p>", 100);
  CHECK(p.rates_bps().size() == 2);
  CHECK(p.CumulativeBits(p.end_ms()) == doctest::Approx(2400));
}

TEST_CASE("bandwidth scaling") {
  BandwidthTrace c = BandwidthTrace::Constant(10e6, 1000);
  BandwidthTrace s = ScaleBandwidth(c, 200e6);
  CHECK(s.RateAt(500) == doctest::Approx(200e6));
  BandwidthTrace v = SyntheticBandwidthTrace(60, 4e7, 0.673, 12);
  BandwidthTrace vs = ScaleBandwidth(v, 200e6);
  CHECK(vs.MaxRate() == doctest::Approx(200e6));
  CHECK(vs.StdOverMean() == doctest::Approx(v.StdOverMean()).epsilon(1e-12));
  BandwidthTrace same = ScaleBandwidth(v, v.MaxRate());
  for (std::size_t i = 0; i < v.rates_bps().size(); ++i) {
    CHECK(same.rates_bps()[i] == doctest::Approx(v.rates_bps()[i]).epsilon(1e-15));
  }
  CHECK_THROWS_AS(ScaleBandwidth(BandwidthTrace::Constant(0, 100), 1), InputError);
}

TEST_CASE("throughput binning") {
  std::vector<std::pair<double, double>> steady;
  for (int i = 0; i < 100; ++i) steady.emplace_back(i * 10.0, 1000.0);
  auto bins = BinThroughput(steady, 0, 1000);
  CHECK(bins.size() == 5);
  for (double b : bins) CHECK(b == 20000.0);
  auto idle = BinThroughput({}, 0, 1000);
  for (double b : idle) CHECK(b == 0.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> t(0, 999.9), bits(1, 1e5);
  std::vector<std::pair<double, double>> random;
  double total = 0;
  for (int i = 0; i < 1000; ++i) {
    random.emplace_back(t(rng), std::floor(bits(rng)));
    total += random.back().second;
  }
  double sum = 0;
  for (double b : BinThroughput(random, 0, 1000)) sum += b;
  CHECK(sum == total);
  auto cap = BinCapacity(BandwidthTrace::Constant(1e6, 1000), 0, 1000);
  for (double b : cap) CHECK(b == doctest::Approx(2e5));
}

TEST_CASE("synthetic traces") {
  for (const char* k : {"static", "smooth", "pole", "explore"}) {
    FovTrace a = SyntheticFovTrace(k, 3, 30, 7);
    FovTrace b = SyntheticFovTrace(k, 3, 30, 7);
    CHECK(a.size() == 90);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.samples[i].dir == b.samples[i].dir);
  }
  FovTrace pole = SyntheticFovTrace("pole", 10, 30, 1);
  for (const auto& s : pole.samples) CHECK(PitchDeg(s.dir) > 75);
  BandwidthTrace bw = SyntheticBandwidthTrace(200, 5e7, 0.6, 3);
  CHECK(bw.MeanRate() == doctest::Approx(5e7).epsilon(0.3));
  BandwidthTrace drop = SyntheticBandwidthTrace(200, 5e7, 0.6, 3, 0.1);
  int zeros = 0;
  for (double r : drop.rates_bps()) zeros += r == 0.0;
  CHECK(zeros > 0);
  CHECK_THROWS_AS(SyntheticFovTrace("bogus", 1, 30, 1), ArgumentError);
}
