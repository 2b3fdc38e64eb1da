#include "vadapt/weights_io.hpp"

#include <algorithm>
#include <fstream>

#include "vadapt/error.hpp"

namespace vadapt {

namespace {

void put_u32(std::vector<char>& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

struct Reader {
  const std::vector<char>& buf;
  std::size_t at = 0;

  void need(std::size_t n, const char* what) {
    if (buf.size() - at < n)
      throw IoError(std::string("truncated file while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + at);
    at += 4;
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(buf[at++]);
  }
};

}  // namespace

void write_weights_file(const std::string& path, std::vector<WeightsEntry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const WeightsEntry& a, const WeightsEntry& b) { return a.name < b.name; });
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (entries[i].name == entries[i - 1].name)
      throw IoError("duplicate entry name '" + entries[i].name + "'");
  std::vector<char> out;
  out.insert(out.end(), {'V', 'A', 'D', 'W'});
  put_u32(out, kWeightsVersion);
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    std::uint64_t elems = 1;
    for (auto d : e.dims) elems *= d;
    const std::uint64_t elem_size = e.dtype == 0 ? 4 : 8;
    if (e.payload.size() != elems * elem_size)
      throw IoError("payload length mismatch for entry '" + e.name + "'");
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    out.push_back(static_cast<char>(e.dtype));
    put_u32(out, static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims) put_u32(out, d);
    out.insert(out.end(), e.payload.begin(), e.payload.end());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for '" + path + "'");
}

std::vector<WeightsEntry> read_weights_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::vector<char> buf(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>{});
  Reader r{buf};
  r.need(4, "magic");
  if (std::string(buf.data(), 4) != "VADW") throw IoError("bad magic");
  r.at = 4;
  const auto version = r.u32("version");
  if (version != kWeightsVersion)
    throw IoError("unsupported version " + std::to_string(version));
  const auto count = r.u32("entry count");
  std::vector<WeightsEntry> entries;
  entries.reserve(count);
  std::string prev;
  for (std::uint32_t i = 0; i < count; ++i) {
    WeightsEntry e;
    const auto name_len = r.u32("name length");
    r.need(name_len, "name");
    e.name.assign(buf.data() + r.at, name_len);
    r.at += name_len;
    e.dtype = r.u8("dtype");
    if (e.dtype > 1) throw IoError("bad dtype tag for entry '" + e.name + "'");
    const auto rank = r.u32("rank");
    std::uint64_t elems = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      e.dims.push_back(r.u32("dims"));
      elems *= e.dims.back();
    }
    const std::uint64_t bytes = elems * (e.dtype == 0 ? 4 : 8);
    r.need(bytes, ("payload of '" + e.name + "'").c_str());
    e.payload.assign(buf.begin() + static_cast<std::ptrdiff_t>(r.at),
                     buf.begin() + static_cast<std::ptrdiff_t>(r.at + bytes));
    r.at += bytes;
    if (i > 0 && !(prev < e.name))
      throw IoError("entries not sorted: '" + e.name + "' after '" + prev + "'");
    prev = e.name;
    entries.push_back(std::move(e));
  }
  if (r.at != buf.size()) throw IoError("trailing bytes after last entry");
  return entries;
}

}  // namespace vadapt
