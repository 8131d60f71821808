#pragma once

// Versioned binary container used for every artifact the tools exchange:
// meshes, geometry tables, rotation maps, datasets, checkpoints. A container
// is a kind tag, a string->string meta block, and a list of named typed
// sections. write_container also emits a JSON sidecar (<path>.json) with the
// section inventory and FNV-1a content hashes so artifacts can be inspected
// and diffed without a binary reader.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "icoseg/common.hpp"

namespace icoseg {

enum class SectionType : std::uint32_t { f64 = 0, i32 = 1, u8 = 2, i64 = 3 };

std::size_t section_type_size(SectionType t);
const char* section_type_name(SectionType t);

struct Section {
  std::string name;
  SectionType type = SectionType::f64;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> bytes;

  std::uint64_t element_count() const;
  void check_payload() const;  // throws DataError when bytes/dims disagree
};

struct Container {
  std::string kind;
  std::uint32_t version = 1;
  std::map<std::string, std::string> meta;
  std::vector<Section> sections;

  const Section* find(const std::string& name) const;
  const Section& require(const std::string& name) const;

  void add_f64(const std::string& name, std::vector<std::uint64_t> dims,
               const double* data);
  void add_i32(const std::string& name, std::vector<std::uint64_t> dims,
               const std::int32_t* data);
  void add_i64(const std::string& name, std::vector<std::uint64_t> dims,
               const std::int64_t* data);
  void add_u8(const std::string& name, std::vector<std::uint64_t> dims,
              const std::uint8_t* data);
  void add_text(const std::string& name, const std::string& text);

  std::vector<double> get_f64(const std::string& name) const;
  std::vector<std::int32_t> get_i32(const std::string& name) const;
  std::vector<std::int64_t> get_i64(const std::string& name) const;
  std::vector<std::uint8_t> get_u8(const std::string& name) const;
  std::string get_text(const std::string& name) const;

  double meta_f64(const std::string& key) const;
  std::int64_t meta_i64(const std::string& key) const;
  const std::string& meta_str(const std::string& key) const;
};

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n);

// Decimal form with enough digits that parsing it recovers the identical
// double; use this for floating-point meta values.
std::string f64_to_string(double v);

// Writes <path> and sidecar <path>.json. Throws DataError on I/O failure.
void write_container(const std::string& path, const Container& c);

// Reads and validates a container written by write_container. Throws
// DataError on truncation, bad magic, or payload/dims mismatch. When
// expected_kind is non-empty the kind tag must match.
Container read_container(const std::string& path,
                         const std::string& expected_kind = "");

}  // namespace icoseg
