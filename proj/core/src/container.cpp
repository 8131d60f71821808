#include "icoseg/container.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace icoseg {
namespace {

constexpr char kMagic[8] = {'I', 'C', 'O', 'S', 'E', 'G', '1', '\n'};
constexpr std::uint32_t kFormatVersion = 1;

// All integers are serialized little-endian regardless of host order.
template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw DataError("container truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
  pos += sizeof(T);
  return static_cast<T>(v);
}

void put_str(std::string& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

std::string get_str(const std::string& buf, std::size_t& pos) {
  const auto n = get_le<std::uint32_t>(buf, pos);
  if (pos + n > buf.size()) throw DataError("container truncated");
  std::string s = buf.substr(pos, n);
  pos += n;
  return s;
}

char hex_digit(std::uint64_t v) {
  return static_cast<char>(v < 10 ? '0' + v : 'a' + (v - 10));
}

std::string hex64(std::uint64_t v) {
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = hex_digit(v & 0xf);
  return s;
}

}  // namespace

std::size_t section_type_size(SectionType t) {
  switch (t) {
    case SectionType::f64: return 8;
    case SectionType::i32: return 4;
    case SectionType::u8: return 1;
    case SectionType::i64: return 8;
  }
  throw DataError("unknown section type");
}

const char* section_type_name(SectionType t) {
  switch (t) {
    case SectionType::f64: return "f64";
    case SectionType::i32: return "i32";
    case SectionType::u8: return "u8";
    case SectionType::i64: return "i64";
  }
  return "?";
}

std::uint64_t Section::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return dims.empty() ? 0 : n;
}

void Section::check_payload() const {
  if (bytes.size() != element_count() * section_type_size(type))
    throw DataError("section '" + name + "': payload size does not match dims");
}

const Section* Container::find(const std::string& name) const {
  for (const auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

const Section& Container::require(const std::string& name) const {
  const Section* s = find(name);
  if (!s) throw DataError("container missing section '" + name + "'");
  return *s;
}

namespace {

template <typename T>
void add_typed(Container& c, SectionType t, const std::string& name,
               std::vector<std::uint64_t> dims, const T* data) {
  Section s;
  s.name = name;
  s.type = t;
  s.dims = std::move(dims);
  s.bytes.resize(s.element_count() * sizeof(T));
  if (!s.bytes.empty()) std::memcpy(s.bytes.data(), data, s.bytes.size());
  s.check_payload();
  c.sections.push_back(std::move(s));
}

template <typename T>
std::vector<T> get_typed(const Container& c, SectionType t,
                         const std::string& name) {
  const Section& s = c.require(name);
  if (s.type != t)
    throw DataError("section '" + name + "' has type " +
                    section_type_name(s.type) + ", expected " +
                    section_type_name(t));
  s.check_payload();
  std::vector<T> out(s.element_count());
  if (!out.empty()) std::memcpy(out.data(), s.bytes.data(), s.bytes.size());
  return out;
}

}  // namespace

void Container::add_f64(const std::string& name,
                        std::vector<std::uint64_t> dims, const double* data) {
  add_typed(*this, SectionType::f64, name, std::move(dims), data);
}
void Container::add_i32(const std::string& name,
                        std::vector<std::uint64_t> dims,
                        const std::int32_t* data) {
  add_typed(*this, SectionType::i32, name, std::move(dims), data);
}
void Container::add_i64(const std::string& name,
                        std::vector<std::uint64_t> dims,
                        const std::int64_t* data) {
  add_typed(*this, SectionType::i64, name, std::move(dims), data);
}
void Container::add_u8(const std::string& name,
                       std::vector<std::uint64_t> dims,
                       const std::uint8_t* data) {
  add_typed(*this, SectionType::u8, name, std::move(dims), data);
}
void Container::add_text(const std::string& name, const std::string& text) {
  add_u8(name, {static_cast<std::uint64_t>(text.size())},
         reinterpret_cast<const std::uint8_t*>(text.data()));
}

std::vector<double> Container::get_f64(const std::string& name) const {
  return get_typed<double>(*this, SectionType::f64, name);
}
std::vector<std::int32_t> Container::get_i32(const std::string& name) const {
  return get_typed<std::int32_t>(*this, SectionType::i32, name);
}
std::vector<std::int64_t> Container::get_i64(const std::string& name) const {
  return get_typed<std::int64_t>(*this, SectionType::i64, name);
}
std::vector<std::uint8_t> Container::get_u8(const std::string& name) const {
  return get_typed<std::uint8_t>(*this, SectionType::u8, name);
}
std::string Container::get_text(const std::string& name) const {
  auto bytes = get_u8(name);
  return std::string(bytes.begin(), bytes.end());
}

double Container::meta_f64(const std::string& key) const {
  return std::stod(meta_str(key));
}
std::int64_t Container::meta_i64(const std::string& key) const {
  return std::stoll(meta_str(key));
}
const std::string& Container::meta_str(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw DataError("container missing meta key '" + key + "'");
  return it->second;
}

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string f64_to_string(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_container(const std::string& path, const Container& c) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(buf, kFormatVersion);
  put_le<std::uint32_t>(buf, c.version);
  put_str(buf, c.kind);
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(c.meta.size()));
  for (const auto& [k, v] : c.meta) {
    put_str(buf, k);
    put_str(buf, v);
  }
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(c.sections.size()));
  for (const auto& s : c.sections) {
    s.check_payload();
    put_str(buf, s.name);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(s.type));
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(s.dims.size()));
    for (auto d : s.dims) put_le<std::uint64_t>(buf, d);
    put_le<std::uint64_t>(buf, s.bytes.size());
    buf.append(reinterpret_cast<const char*>(s.bytes.data()), s.bytes.size());
  }

  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) throw DataError("write failed for '" + path + "'");
  }

  nlohmann::json j;
  j["kind"] = c.kind;
  j["format_version"] = kFormatVersion;
  j["version"] = c.version;
  j["meta"] = c.meta;
  j["file_bytes"] = buf.size();
  j["file_fnv1a64"] =
      hex64(fnv1a64(reinterpret_cast<const std::uint8_t*>(buf.data()), buf.size()));
  nlohmann::json sects = nlohmann::json::array();
  for (const auto& s : c.sections) {
    nlohmann::json e;
    e["name"] = s.name;
    e["type"] = section_type_name(s.type);
    e["dims"] = s.dims;
    e["bytes"] = s.bytes.size();
    e["fnv1a64"] = hex64(fnv1a64(s.bytes.data(), s.bytes.size()));
    sects.push_back(e);
  }
  j["sections"] = sects;
  std::ofstream js(path + ".json", std::ios::trunc);
  if (!js) throw DataError("cannot open '" + path + ".json' for writing");
  js << j.dump(2) << "\n";
}

Container read_container(const std::string& path,
                         const std::string& expected_kind) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(is)),
                  std::istreambuf_iterator<char>());

  if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("'" + path + "' is not a container file (bad magic)");
  std::size_t pos = sizeof(kMagic);

  const auto fmt = get_le<std::uint32_t>(buf, pos);
  if (fmt != kFormatVersion)
    throw DataError("'" + path + "': unsupported format version");

  Container c;
  c.version = get_le<std::uint32_t>(buf, pos);
  c.kind = get_str(buf, pos);
  const auto nmeta = get_le<std::uint32_t>(buf, pos);
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = get_str(buf, pos);
    c.meta[k] = get_str(buf, pos);
  }
  const auto nsect = get_le<std::uint32_t>(buf, pos);
  for (std::uint32_t i = 0; i < nsect; ++i) {
    Section s;
    s.name = get_str(buf, pos);
    const auto t = get_le<std::uint32_t>(buf, pos);
    if (t > 3) throw DataError("section '" + s.name + "': unknown type tag");
    s.type = static_cast<SectionType>(t);
    const auto ndim = get_le<std::uint32_t>(buf, pos);
    for (std::uint32_t d = 0; d < ndim; ++d)
      s.dims.push_back(get_le<std::uint64_t>(buf, pos));
    const auto nbytes = get_le<std::uint64_t>(buf, pos);
    if (pos + nbytes > buf.size()) throw DataError("container truncated");
    s.bytes.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                   buf.begin() + static_cast<std::ptrdiff_t>(pos + nbytes));
    pos += nbytes;
    s.check_payload();
    c.sections.push_back(std::move(s));
  }
  if (pos != buf.size()) throw DataError("'" + path + "': trailing bytes");
  if (!expected_kind.empty() && c.kind != expected_kind)
    throw DataError("'" + path + "' holds kind '" + c.kind + "', expected '" +
                    expected_kind + "'");
  return c;
}

}  // namespace icoseg
