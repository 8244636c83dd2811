#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "tksk/bck_index.hpp"

// Snapshot layout: "BCKT" magic, u32 format version, then six sections in
// fixed order — stats, vocabulary, grid, component 1, component 2,
// trajectory geometry. Each section is (u32 id, u64 payload length, payload,
// u32 CRC-32 of the payload). Scalars inside payloads are little-endian;
// component keys keep their big-endian composite encoding; doubles travel as
// raw IEEE-754 bits. Geometry (with external names) rides along so a loaded
// snapshot can score candidates without the original corpus file.

namespace tksk {

namespace {

constexpr char kMagic[4] = {'B', 'C', 'K', 'T'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t crc32(const std::string& data) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) {
        c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      }
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = 0xffffffffu;
  for (const char ch : data) {
    c = table[(c ^ static_cast<std::uint8_t>(ch)) & 0xffu] ^ (c >> 8);
  }
  return c ^ 0xffffffffu;
}

class PayloadWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      buf_.push_back(static_cast<char>(v >> (8 * i)));
    }
  }
  void u64(std::uint64_t v) {
    u32(static_cast<std::uint32_t>(v));
    u32(static_cast<std::uint32_t>(v >> 32));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const void* data, std::size_t n) {
    buf_.append(static_cast<const char*>(data), n);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

class PayloadReader {
 public:
  explicit PayloadReader(std::string data) : buf_(std::move(data)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
      v = (v << 8) | static_cast<std::uint8_t>(buf_[pos_ + i]);
    }
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void bytes(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void finish() const {
    if (pos_ != buf_.size()) {
      throw std::runtime_error("snapshot section has trailing bytes");
    }
  }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) {
      throw std::runtime_error("snapshot section truncated");
    }
  }

  std::string buf_;
  std::size_t pos_ = 0;
};

void writeSection(std::ostream& out, std::uint32_t id,
                  const std::string& payload) {
  PayloadWriter head;
  head.u32(id);
  head.u64(payload.size());
  out.write(head.data().data(),
            static_cast<std::streamsize>(head.data().size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  PayloadWriter tail;
  tail.u32(crc32(payload));
  out.write(tail.data().data(),
            static_cast<std::streamsize>(tail.data().size()));
}

PayloadReader readSection(std::istream& in, std::uint32_t expectedId) {
  char head[12];
  in.read(head, sizeof head);
  if (in.gcount() != sizeof head) {
    throw std::runtime_error("snapshot truncated");
  }
  std::uint32_t id = 0;
  std::uint64_t len = 0;
  for (int i = 3; i >= 0; --i) {
    id = (id << 8) | static_cast<std::uint8_t>(head[i]);
  }
  for (int i = 11; i >= 4; --i) {
    len = (len << 8) | static_cast<std::uint8_t>(head[i]);
  }
  if (id != expectedId) {
    throw std::runtime_error("unexpected snapshot section");
  }
  std::string payload(len, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(len));
  if (static_cast<std::uint64_t>(in.gcount()) != len) {
    throw std::runtime_error("snapshot truncated");
  }
  char crcBytes[4];
  in.read(crcBytes, sizeof crcBytes);
  if (in.gcount() != sizeof crcBytes) {
    throw std::runtime_error("snapshot truncated");
  }
  std::uint32_t crc = 0;
  for (int i = 3; i >= 0; --i) {
    crc = (crc << 8) | static_cast<std::uint8_t>(crcBytes[i]);
  }
  if (crc != crc32(payload)) {
    throw std::runtime_error("snapshot checksum mismatch");
  }
  return PayloadReader(std::move(payload));
}

}  // namespace

struct SnapshotAccess {
  static void save(const BckIndex& ix, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open snapshot for writing");
    out.write(kMagic, sizeof kMagic);
    PayloadWriter ver;
    ver.u32(kVersion);
    out.write(ver.data().data(),
              static_cast<std::streamsize>(ver.data().size()));

    {
      PayloadWriter p;
      p.u32(ix.stats_.trajectoryCount);
      p.u64(ix.stats_.placeCount);
      p.u64(ix.stats_.keywordSlotCount);
      p.u32(ix.stats_.maxPlacesPerTrajectory);
      p.f64(ix.stats_.segmentLengthSum);
      p.u64(ix.stats_.segmentCount);
      p.u64(ix.stats_.splitCount);
      p.u32(static_cast<std::uint32_t>(ix.policy_));
      writeSection(out, 1, p.data());
    }
    {
      PayloadWriter p;
      p.u32(static_cast<std::uint32_t>(ix.vocab_.size()));
      for (WordId w = 0; w < ix.vocab_.size(); ++w) {
        p.str(ix.vocab_.word(w));
        p.u32(ix.vocab_.df(w));
        p.u64(ix.vocab_.placeOccurrences(w));
      }
      writeSection(out, 2, p.data());
    }
    {
      PayloadWriter p;
      const Grid& g = ix.grid_;
      p.f64(g.bounds().minX);
      p.f64(g.bounds().minY);
      p.f64(g.bounds().maxX);
      p.f64(g.bounds().maxY);
      p.u32(g.maxLevel());
      p.u32(g.segmentLimit());
      p.u64(g.leaves().size());
      for (const Grid::Leaf& l : g.leaves()) {
        p.u64(l.code);
        p.u32(l.level);
        p.u32(l.load);
      }
      writeSection(out, 3, p.data());
    }
    {
      PayloadWriter p;
      p.u64(ix.c1_.entries().size());
      for (const auto& [key, postings] : ix.c1_.entries()) {
        p.bytes(key.data(), key.size());
        p.u64(postings.size());
        for (TrajId t : postings) p.u32(t);
      }
      writeSection(out, 4, p.data());
    }
    {
      PayloadWriter p;
      p.u64(ix.c2_.entries().size());
      for (const auto& [key, places] : ix.c2_.entries()) {
        p.bytes(key.data(), key.size());
        p.u64(places.size());
        for (PlaceIndex i : places) p.u32(i);
      }
      writeSection(out, 5, p.data());
    }
    {
      PayloadWriter p;
      p.u32(static_cast<std::uint32_t>(ix.geometry_.size()));
      for (std::size_t t = 0; t < ix.geometry_.size(); ++t) {
        p.str(ix.externalIds_[t]);
        p.u32(static_cast<std::uint32_t>(ix.geometry_[t].size()));
        for (const Point& pt : ix.geometry_[t]) {
          p.f64(pt.x);
          p.f64(pt.y);
        }
      }
      writeSection(out, 6, p.data());
    }
    if (!out) throw std::runtime_error("snapshot write failed");
  }

  static BckIndex load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open snapshot for reading");
    char magic[4];
    in.read(magic, sizeof magic);
    if (in.gcount() != sizeof magic ||
        std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
      throw std::runtime_error("not a snapshot file");
    }
    char verBytes[4];
    in.read(verBytes, sizeof verBytes);
    if (in.gcount() != sizeof verBytes) {
      throw std::runtime_error("snapshot truncated");
    }
    std::uint32_t version = 0;
    for (int i = 3; i >= 0; --i) {
      version = (version << 8) | static_cast<std::uint8_t>(verBytes[i]);
    }
    if (version != kVersion) {
      throw std::runtime_error("unsupported snapshot version");
    }

    BckIndex ix;
    {
      PayloadReader p = readSection(in, 1);
      ix.stats_.trajectoryCount = p.u32();
      ix.stats_.placeCount = p.u64();
      ix.stats_.keywordSlotCount = p.u64();
      ix.stats_.maxPlacesPerTrajectory = p.u32();
      ix.stats_.segmentLengthSum = p.f64();
      ix.stats_.segmentCount = p.u64();
      ix.stats_.splitCount = p.u64();
      const std::uint32_t policy = p.u32();
      if (policy > 2) throw std::runtime_error("unknown word policy");
      ix.policy_ = static_cast<WordPolicy>(policy);
      p.finish();
    }
    {
      PayloadReader p = readSection(in, 2);
      const std::uint32_t n = p.u32();
      std::vector<std::string> words;
      std::vector<std::uint32_t> dfs;
      std::vector<std::uint64_t> occs;
      for (std::uint32_t i = 0; i < n; ++i) {
        words.push_back(p.str());
        dfs.push_back(p.u32());
        occs.push_back(p.u64());
      }
      p.finish();
      try {
        ix.vocab_ = Vocabulary::restore(std::move(words), std::move(dfs),
                                        std::move(occs));
      } catch (const std::invalid_argument& e) {
        throw std::runtime_error(e.what());
      }
    }
    {
      PayloadReader p = readSection(in, 3);
      BoundingBox b;
      b.minX = p.f64();
      b.minY = p.f64();
      b.maxX = p.f64();
      b.maxY = p.f64();
      const std::uint32_t maxLevel = p.u32();
      const std::uint32_t segmentLimit = p.u32();
      const std::uint64_t leafCount = p.u64();
      std::vector<Grid::Leaf> leaves;
      for (std::uint64_t i = 0; i < leafCount; ++i) {
        Grid::Leaf l;
        l.code = p.u64();
        l.level = p.u32();
        l.load = p.u32();
        leaves.push_back(l);
      }
      p.finish();
      try {
        ix.grid_ = Grid::restore(b, maxLevel, segmentLimit, std::move(leaves));
      } catch (const std::invalid_argument& e) {
        throw std::runtime_error(e.what());
      }
    }
    {
      PayloadReader p = readSection(in, 4);
      const std::uint64_t n = p.u64();
      std::vector<Component1::Entry> entries;
      C1Key prev{};
      for (std::uint64_t i = 0; i < n; ++i) {
        C1Key key;
        p.bytes(key.data(), key.size());
        if (i > 0 && !(prev < key)) {
          throw std::runtime_error("component 1 keys out of order");
        }
        prev = key;
        const std::uint64_t len = p.u64();
        std::vector<TrajId> postings;
        postings.reserve(len);
        for (std::uint64_t j = 0; j < len; ++j) postings.push_back(p.u32());
        entries.emplace_back(key, std::move(postings));
      }
      p.finish();
      ix.c1_ = Component1::fromSorted(std::move(entries));
    }
    {
      PayloadReader p = readSection(in, 5);
      const std::uint64_t n = p.u64();
      std::vector<Component2::Entry> entries;
      C2Key prev{};
      for (std::uint64_t i = 0; i < n; ++i) {
        C2Key key;
        p.bytes(key.data(), key.size());
        if (i > 0 && !(prev < key)) {
          throw std::runtime_error("component 2 keys out of order");
        }
        prev = key;
        const std::uint64_t len = p.u64();
        std::vector<PlaceIndex> places;
        places.reserve(len);
        for (std::uint64_t j = 0; j < len; ++j) places.push_back(p.u32());
        entries.emplace_back(key, std::move(places));
      }
      p.finish();
      ix.c2_ = Component2::fromSorted(std::move(entries));
    }
    {
      PayloadReader p = readSection(in, 6);
      const std::uint32_t n = p.u32();
      if (n != ix.stats_.trajectoryCount) {
        throw std::runtime_error("trajectory count mismatch");
      }
      for (std::uint32_t t = 0; t < n; ++t) {
        ix.externalIds_.push_back(p.str());
        const std::uint32_t m = p.u32();
        std::vector<Point> pts;
        pts.reserve(m);
        for (std::uint32_t i = 0; i < m; ++i) {
          const double x = p.f64();
          const double y = p.f64();
          pts.push_back(Point{x, y});
        }
        ix.geometry_.push_back(std::move(pts));
      }
      p.finish();
    }
    if (in.peek() != std::char_traits<char>::eof()) {
      throw std::runtime_error("snapshot has trailing bytes");
    }
    try {
      ix.rebuildLeafOccupancy();
    } catch (const std::out_of_range& e) {
      throw std::runtime_error(e.what());  // geometry outside grid bounds
    }
    return ix;
  }
};

void BckIndex::save(const std::string& path) const {
  SnapshotAccess::save(*this, path);
}

BckIndex BckIndex::load(const std::string& path) {
  return SnapshotAccess::load(path);
}

}  // namespace tksk
