#pragma once

#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "vadapt/nn.hpp"

namespace vadapt {

// Container format: magic "VADW", version u32, entry count u32, then per
// entry (name length u32, name bytes, dtype u8 {0=f32,1=f64}, rank u32,
// dims u32 x rank, raw little-endian payload). Entries sorted by name,
// names unique.
struct WeightsEntry {
  std::string name;
  std::uint8_t dtype = 0;
  std::vector<std::uint32_t> dims;
  std::vector<char> payload;
};

inline constexpr std::uint32_t kWeightsVersion = 1;

void write_weights_file(const std::string& path, std::vector<WeightsEntry> entries);
std::vector<WeightsEntry> read_weights_file(const std::string& path);

template <class T>
constexpr std::uint8_t dtype_tag() {
  return sizeof(T) == 4 ? 0 : 1;
}

template <class T>
void save_params(const std::string& path, const ParamRefs<T>& params) {
  std::vector<WeightsEntry> entries;
  entries.reserve(params.size());
  for (const auto* p : params) {
    WeightsEntry e;
    e.name = p->name;
    e.dtype = dtype_tag<T>();
    for (auto d : p->value.dims()) e.dims.push_back(static_cast<std::uint32_t>(d));
    e.payload.resize(static_cast<std::size_t>(p->value.numel()) * sizeof(T));
    std::memcpy(e.payload.data(), p->value.ptr(), e.payload.size());
    entries.push_back(std::move(e));
  }
  write_weights_file(path, std::move(entries));
}

// Loads into an existing parameter set, validating name coverage, dtype and
// every shape.
template <class T>
void load_params(const std::string& path, ParamRefs<T>& params) {
  auto entries = read_weights_file(path);
  std::map<std::string, const WeightsEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  for (auto* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw IoError("missing entry '" + p->name + "'");
    const WeightsEntry& e = *it->second;
    if (e.dtype != dtype_tag<T>())
      throw IoError("dtype mismatch for entry '" + p->name + "'");
    Dims dims;
    for (auto d : e.dims) dims.push_back(static_cast<std::int64_t>(d));
    if (dims != p->value.dims())
      throw IoError("shape mismatch for entry '" + p->name + "': file has " +
                    dims_str(dims) + ", model expects " + dims_str(p->value.dims()));
    std::vector<T> data(static_cast<std::size_t>(p->value.numel()));
    std::memcpy(data.data(), e.payload.data(), e.payload.size());
    p->value = Tensor<T>::from_data(std::move(dims), std::move(data));
    by_name.erase(it);
  }
  if (!by_name.empty())
    throw IoError("unknown entry '" + by_name.begin()->first + "'");
}

}  // namespace vadapt
