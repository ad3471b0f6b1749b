#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace evhand;

namespace {

EventStream random_stream(std::uint64_t seed, int n, TimeUs t_max, int w = 40, int h = 30) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<TimeUs> t(0, t_max);
  std::uniform_int_distribution<int> x(0, w - 1);
  std::uniform_int_distribution<int> y(0, h - 1);
  EventStream s;
  s.width = w;
  s.height = h;
  for (int i = 0; i < n; ++i) {
    s.events.push_back({t(rng), static_cast<std::int16_t>(x(rng)), static_cast<std::int16_t>(y(rng)),
                        static_cast<std::int8_t>(rng() % 2 ? 1 : -1)});
  }
  std::sort(s.events.begin(), s.events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  return s;
}

SubSegment segment_of(const std::vector<Event>& ev, TimeUs t0, TimeUs t1, int w = 40, int h = 30) {
  return {ev, t0, t1, w, h};
}

}  // namespace

TEST(Split, EmptyStream) {
  EventStream s;
  const auto segs = split(s, 0, 1000, 4);
  ASSERT_EQ(segs.size(), 4u);
  for (const auto& seg : segs) EXPECT_TRUE(seg.empty());
  EXPECT_EQ(segs.front().t_start, 0);
  EXPECT_EQ(segs.back().t_end, 1000);
}

TEST(Split, OneEventPerSegment) {
  EventStream s;
  for (int i = 0; i < 12; ++i) s.events.push_back({1000 * i + 500, 1, 1, 1});
  const auto segs = split(s, 0, 12000, 12);
  for (int k = 0; k < 12; ++k) {
    ASSERT_EQ(segs[k].events.size(), 1u);
    EXPECT_EQ(segs[k].t_end - segs[k].t_start, 1000);
  }
}

TEST(Split, PartitionMatchesDirectFilter) {
  const EventStream s = random_stream(3, 5000, 100000);
  for (int N : {1, 3, 7, 64}) {
    const TimeUs t0 = 1234, tN = 98765;
    std::vector<Event> oracle;
    for (const Event& e : s.events)
      if (e.t >= t0 && e.t < tN) oracle.push_back(e);
    std::vector<Event> joined;
    TimeUs prev_end = t0;
    for (const auto& seg : split(s, t0, tN, N)) {
      EXPECT_EQ(seg.t_start, prev_end);
      EXPECT_LT(seg.t_start, seg.t_end);
      prev_end = seg.t_end;
      for (const Event& e : seg.events) {
        EXPECT_GE(e.t, seg.t_start);
        EXPECT_LT(e.t, seg.t_end);
      }
      joined.insert(joined.end(), seg.events.begin(), seg.events.end());
    }
    EXPECT_EQ(prev_end, tN);
    EXPECT_EQ(joined, oracle);
  }
}

TEST(Split, EventAtEndBelongsToNext) {
  EventStream s;
  s.events.push_back({500, 0, 0, 1});
  const auto segs = split(s, 0, 1000, 2);
  EXPECT_TRUE(segs[0].empty());
  EXPECT_EQ(segs[1].events.size(), 1u);
}

TEST(Split, RejectsBadArguments) {
  EventStream s;
  EXPECT_THROW(split(s, 0, 100, 0), InvalidArgument);
  EXPECT_THROW(split(s, 100, 0, 2), InvalidArgument);
  EXPECT_THROW(split(s, 100, 100, 2), InvalidArgument);
}

TEST(Lnes, ExamplesAndRange) {
  std::vector<Event> none;
  const EventFrame empty = build_lnes(segment_of(none, 0, 100));
  for (double v : empty.grid.data()) EXPECT_EQ(v, 0.0);

  std::vector<Event> mid = {{50, 3, 4, 1}};
  const EventFrame f = build_lnes(segment_of(mid, 0, 100));
  EXPECT_DOUBLE_EQ(f.grid(3, 4, 0), 0.5);
  double total = 0;
  for (double v : f.grid.data()) total += v;
  EXPECT_DOUBLE_EQ(total, 0.5);

  std::vector<Event> two = {{20, 1, 1, 1}, {80, 1, 1, 1}};
  EXPECT_DOUBLE_EQ(build_lnes(segment_of(two, 0, 100)).grid(1, 1, 0), 0.8);

  const EventStream s = random_stream(5, 2000, 9999);
  const EventFrame dense = build_lnes(segment_of(s.events, 0, 10000));
  for (double v : dense.grid.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Lnes, MonotoneInRecency) {
  std::vector<Event> a = {{10, 0, 0, 1}, {30, 1, 0, 1}, {60, 2, 0, 1}};
  const EventFrame f = build_lnes(segment_of(a, 0, 100));
  EXPECT_LT(f.grid(0, 0, 0), f.grid(1, 0, 0));
  EXPECT_LT(f.grid(1, 0, 0), f.grid(2, 0, 0));
}

TEST(Eci, CountsAndConservation) {
  std::vector<Event> none;
  const EventFrame empty = build_eci(segment_of(none, 0, 100));
  for (double v : empty.grid.data()) EXPECT_EQ(v, 0.0);
  std::vector<Event> k(7, Event{5, 2, 2, -1});
  EXPECT_EQ(build_eci(segment_of(k, 0, 100)).grid(2, 2, 1), 7.0);
  const EventStream s = random_stream(6, 3000, 9999);
  double total = 0;
  const EventFrame counts = build_eci(segment_of(s.events, 0, 10000));
  for (double v : counts.grid.data()) total += v;
  EXPECT_EQ(total, 3000.0);
}

TEST(TimeSurface, Kernel) {
  std::vector<Event> ev = {{100, 0, 0, 1}, {70, 1, 0, -1}};
  const EventFrame f = build_time_surface(segment_of(ev, 0, 100), 30);
  EXPECT_DOUBLE_EQ(f.grid(0, 0, 0), 1.0);
  EXPECT_NEAR(f.grid(1, 0, 1), 0.36787944117144233, 1e-15);
  EXPECT_EQ(f.grid(2, 2, 0), 0.0);
  EXPECT_THROW(build_time_surface(segment_of(ev, 0, 100), 0), InvalidArgument);
}

TEST(Voxel, BilinearInTime) {
  // 5 bins over [0, 400): bin k centred at t = 100 k.
  std::vector<Event> at_centre = {{100, 0, 0, 1}};
  const EventVolume a = build_voxel(segment_of(at_centre, 0, 400));
  EXPECT_DOUBLE_EQ(a.grid(0, 0, 1), 1.0);
  for (int b : {0, 2, 3, 4}) EXPECT_EQ(a.grid(0, 0, b), 0.0);

  std::vector<Event> between = {{150, 0, 0, 1}};
  const EventVolume b = build_voxel(segment_of(between, 0, 400));
  EXPECT_DOUBLE_EQ(b.grid(0, 0, 1), 0.5);
  EXPECT_DOUBLE_EQ(b.grid(0, 0, 2), 0.5);
}

TEST(Voxel, SignedMassConservation) {
  const EventStream s = random_stream(7, 4000, 9999);
  const EventVolume v = build_voxel(segment_of(s.events, 0, 10000));
  double oracle = 0.0;
  for (const Event& e : s.events) oracle += e.p;
  double total = 0.0;
  for (double x : v.grid.data()) {
    ASSERT_TRUE(std::isfinite(x));
    total += x;
  }
  EXPECT_NEAR(total, oracle, 1e-9 * std::max(1.0, std::abs(oracle)));
}

TEST(EventIo, CsvRoundTrip) {
  const EventStream s = random_stream(9, 500, 1000000);
  std::stringstream ss;
  write_events_csv(ss, s);
  const EventStream r = read_events_csv(ss, s.width, s.height);
  EXPECT_EQ(r.events, s.events);
}

TEST(EventIo, Evh1RoundTripAndLayout) {
  const EventStream s = random_stream(10, 500, (1LL << 40));
  std::stringstream ss;
  write_events_evh1(ss, s);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 4 + 14 * s.events.size());
  EXPECT_EQ(bytes.substr(0, 4), "EVH1");
  // First record, little-endian t.
  std::uint64_t t = 0;
  for (int i = 7; i >= 0; --i) t = (t << 8) | static_cast<unsigned char>(bytes[4 + i]);
  EXPECT_EQ(static_cast<TimeUs>(t), s.events[0].t);
  const EventStream r = read_events_evh1(ss, s.width, s.height);
  EXPECT_EQ(r.events, s.events);
}

TEST(EventIo, RejectsBadInput) {
  {
    std::stringstream ss("t_us,x,y,p\n10,1,1,1\n5,1,1,1\n");
    EXPECT_THROW(read_events_csv(ss, 10, 10), Error);
  }
  {
    std::stringstream ss("t_us,x,y,p\n10,1,1,0\n");
    EXPECT_THROW(read_events_csv(ss, 10, 10), Error);
  }
  {
    std::stringstream ss("t,x,y,p\n");
    EXPECT_THROW(read_events_csv(ss, 10, 10), Error);
  }
  {
    std::stringstream ss("t_us,x,y,p\n10,11,1,1\n");
    EXPECT_THROW(read_events_csv(ss, 10, 10), Error);
  }
  {
    EventStream s;
    s.events = {{10, 0, 0, 1}, {5, 0, 0, 1}};
    std::stringstream ss;
    write_events_evh1(ss, s);
    EXPECT_THROW(read_events_evh1(ss, 10, 10), Error);
  }
  {
    std::stringstream ss("EVH2");
    EXPECT_THROW(read_events_evh1(ss, 10, 10), Error);
  }
  {
    std::stringstream ss(std::string("EVH1") + std::string(10, '\0'));
    EXPECT_THROW(read_events_evh1(ss, 10, 10), Error);
  }
}

TEST(PoseIo, RoundTripIsExact) {
  std::mt19937_64 rng(12);
  std::vector<HandParams> poses;
  for (int i = 0; i < 10; ++i) {
    HandParams p = scene::random_params(rng);
    p.timestamp = 0.0125 * i;
    poses.push_back(p);
  }
  std::stringstream ss;
  ss << "# comment\n";
  write_poses(ss, poses);
  const auto r = read_poses(ss);
  ASSERT_EQ(r.size(), poses.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(to_flat(r[i]), to_flat(poses[i]));
    EXPECT_EQ(r[i].pose.translation, poses[i].pose.translation);
    EXPECT_EQ(r[i].timestamp, poses[i].timestamp);
  }
}

TEST(PoseIo, TextSurvivesReadWrite) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<long> us(0, 100000000000L);
  std::uniform_real_distribution<double> secs(0.0, 1e4);
  auto cycle = [](const std::string& text) {
    std::stringstream in(text), out;
    write_poses(out, read_poses(in));
    return out.str();
  };
  // Integer microseconds, as files carry them: values and text both exact.
  std::vector<HandParams> whole;
  for (int i = 0; i < 1000; ++i) {
    HandParams p = scene::random_params(rng);
    p.timestamp = static_cast<double>(us(rng)) / 1e6;
    whole.push_back(p);
  }
  std::stringstream a;
  write_poses(a, whole);
  const auto r = read_poses(a);
  for (std::size_t i = 0; i < r.size(); ++i) ASSERT_EQ(r[i].timestamp, whole[i].timestamp) << i;
  EXPECT_EQ(cycle(a.str()), a.str());
  const std::string first = format_pose_record(whole[0]);
  EXPECT_EQ(first.substr(0, first.find(' ')).find_first_of(".e"), std::string::npos) << first;

  // Arbitrary seconds: some doubles are not reachable from any microsecond
  // decimal, so the first write may move the timestamp by an ulp. After that
  // the text is a fixed point.
  std::vector<HandParams> any;
  for (int i = 0; i < 1000; ++i) {
    HandParams p = scene::random_params(rng);
    p.timestamp = secs(rng);
    any.push_back(p);
  }
  std::stringstream b;
  write_poses(b, any);
  const auto ra = read_poses(b);
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double t = any[i].timestamp;
    ASSERT_LE(std::abs(ra[i].timestamp - t), std::nextafter(t, 2 * t) - t) << i;
    ASSERT_EQ(to_flat(ra[i]), to_flat(any[i]));
  }
  const std::string once = cycle(b.str());
  EXPECT_EQ(cycle(once), once);
}

TEST(PoseIo, RejectsShortRecord) {
  std::stringstream ss("0 1 1 1\n");
  EXPECT_THROW(read_poses(ss), Error);
}
