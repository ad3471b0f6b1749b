#pragma once

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "evhand/events.hpp"

namespace evhand {

// Event text format: header `t_us,x,y,p`, one event per line.
// Binary format: magic `EVH1`, then 14-byte little-endian records
// (u64 t_us, u16 x, u16 y, i8 p, i8 pad).

inline constexpr char kEvh1Magic[4] = {'E', 'V', 'H', '1'};
inline constexpr std::size_t kEvh1RecordSize = 14;

namespace detail {

template <typename T>
void put_le(std::array<unsigned char, kEvh1RecordSize>& buf, std::size_t off, T v) {
  using U = std::make_unsigned_t<T>;
  U u = static_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[off + i] = static_cast<unsigned char>((u >> (8 * i)) & 0xFF);
}

template <typename T>
T get_le(const std::array<unsigned char, kEvh1RecordSize>& buf, std::size_t off) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(buf[off + i]) << (8 * i));
  return static_cast<T>(u);
}

}  // namespace detail

inline void write_events_csv(std::ostream& out, const EventStream& stream) {
  out << "t_us,x,y,p\n";
  for (const Event& e : stream.events) out << e.t << ',' << e.x << ',' << e.y << ',' << int(e.p) << '\n';
}

inline void write_events_csv(const std::string& path, const EventStream& stream) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write events: " + path);
  write_events_csv(out, stream);
}

inline EventStream read_events_csv(std::istream& in, int width, int height) {
  EventStream s;
  s.width = width;
  s.height = height;
  std::string line;
  if (!std::getline(in, line)) throw Error("empty event CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t_us,x,y,p") throw Error("event CSV header must be t_us,x,y,p");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    long long t = 0;
    int x = 0, y = 0, p = 0;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ss >> t >> c1 >> x >> c2 >> y >> c3 >> p) || c1 != ',' || c2 != ',' || c3 != ',') {
      throw Error("malformed event CSV line " + std::to_string(lineno));
    }
    s.events.push_back({t, static_cast<std::int16_t>(x), static_cast<std::int16_t>(y), static_cast<std::int8_t>(p)});
  }
  s.validate();
  return s;
}

inline EventStream read_events_csv(const std::string& path, int width, int height) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open events: " + path);
  return read_events_csv(in, width, height);
}

inline void write_events_evh1(std::ostream& out, const EventStream& stream) {
  out.write(kEvh1Magic, 4);
  std::array<unsigned char, kEvh1RecordSize> buf{};
  for (const Event& e : stream.events) {
    detail::put_le<std::uint64_t>(buf, 0, static_cast<std::uint64_t>(e.t));
    detail::put_le<std::uint16_t>(buf, 8, static_cast<std::uint16_t>(e.x));
    detail::put_le<std::uint16_t>(buf, 10, static_cast<std::uint16_t>(e.y));
    detail::put_le<std::int8_t>(buf, 12, e.p);
    buf[13] = 0;
    out.write(reinterpret_cast<const char*>(buf.data()), buf.size());
  }
}

inline void write_events_evh1(const std::string& path, const EventStream& stream) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write events: " + path);
  write_events_evh1(out, stream);
}

inline EventStream read_events_evh1(std::istream& in, int width, int height) {
  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, kEvh1Magic, 4) != 0) throw Error("missing EVH1 magic");
  EventStream s;
  s.width = width;
  s.height = height;
  std::array<unsigned char, kEvh1RecordSize> buf{};
  while (in.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
    Event e;
    e.t = static_cast<TimeUs>(detail::get_le<std::uint64_t>(buf, 0));
    e.x = static_cast<std::int16_t>(detail::get_le<std::uint16_t>(buf, 8));
    e.y = static_cast<std::int16_t>(detail::get_le<std::uint16_t>(buf, 10));
    e.p = detail::get_le<std::int8_t>(buf, 12);
    s.events.push_back(e);
  }
  if (in.gcount() != 0) throw Error("truncated EVH1 record");
  s.validate();
  return s;
}

inline EventStream read_events_evh1(const std::string& path, int width, int height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open events: " + path);
  return read_events_evh1(in, width, height);
}

/// Picks the reader from the file extension (.csv or EVH1 otherwise).
inline EventStream read_events(const std::string& path, int width, int height) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return read_events_csv(path, width, height);
  return read_events_evh1(path, width, height);
}

}  // namespace evhand
