#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgrl/error.hpp"
#include "kgrl/tensor.hpp"

namespace kgrl::nn {

struct Param {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
};

// Named learnable tensors with matching gradient slots. Iteration order is
// insertion order, which keeps optimizer updates and checkpoints deterministic.
class ParamStore {
 public:
  int add(const std::string& name, int rows, int cols) {
    if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
    index_[name] = static_cast<int>(params_.size());
    params_.push_back({name, Tensor2(rows, cols), Tensor2(rows, cols)});
    return static_cast<int>(params_.size()) - 1;
  }

  int add_uniform(const std::string& name, int rows, int cols, double bound,
                  std::mt19937_64& rng) {
    int id = add(name, rows, cols);
    params_[id].value = uniform_tensor(rows, cols, bound, rng);
    return id;
  }

  Param& at(int id) { return params_.at(id); }
  const Param& at(int id) const { return params_.at(id); }

  int id_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown name " + name);
    return it->second;
  }
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  Param& by_name(const std::string& name) { return params_[id_of(name)]; }
  const Param& by_name(const std::string& name) const { return params_[id_of(name)]; }

  size_t size() const { return params_.size(); }
  const std::vector<Param>& params() const { return params_; }
  std::vector<Param>& params() { return params_; }

  void zero_grads() {
    for (auto& p : params_) p.grad.fill(0.0);
  }

  size_t total_values() const {
    size_t n = 0;
    for (auto& p : params_) n += p.value.size();
    return n;
  }

  // Copies values into this store; shapes and names must mirror exactly.
  void copy_values_from(const ParamStore& other) {
    if (other.size() != size())
      throw std::invalid_argument("ParamStore: parameter count mismatch in copy");
    for (size_t i = 0; i < params_.size(); ++i) {
      const Param& src = other.params_[i];
      Param& dst = params_[i];
      if (src.name != dst.name || !src.value.same_shape(dst.value))
        throw std::invalid_argument("ParamStore: mismatched parameter " + dst.name);
      dst.value.data = src.value.data;
    }
  }

 private:
  std::vector<Param> params_;
  std::map<std::string, int> index_;
};

namespace detail {

inline void write_le_doubles(std::ostream& os, const std::vector<double>& v) {
  for (double d : v) {
    uint64_t bits = std::bit_cast<uint64_t>(d);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
  }
}

inline void read_le_doubles(std::istream& is, std::vector<double>& v) {
  for (double& d : v) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(buf[i]) << (8 * i);
    d = std::bit_cast<double>(bits);
  }
}

}  // namespace detail

// Checkpoint file layout: one JSON manifest line, then a flat payload of
// little-endian 64-bit floats. Manifest offsets are bytes from payload start.
inline void save_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, const ParamStore*>>& sections) {
  nlohmann::json entries = nlohmann::json::array();
  size_t offset = 0;
  for (const auto& [section, store] : sections) {
    for (const auto& p : store->params()) {
      entries.push_back({{"name", section + "/" + p.name},
                         {"rows", p.value.rows},
                         {"cols", p.value.cols},
                         {"offset", offset}});
      offset += p.value.size() * 8;
    }
  }
  nlohmann::json manifest = {{"format", "kgrl-params-v1"}, {"entries", entries}};

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path);
  os << manifest.dump() << "\n";
  for (const auto& [section, store] : sections)
    for (const auto& p : store->params()) detail::write_le_doubles(os, p.value.data);
  if (!os) throw DataError("checkpoint write failed: " + path);
}

// Loads a checkpoint into per-section stores (created on demand).
inline std::map<std::string, ParamStore> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(is, line)) throw DataError("checkpoint missing manifest: " + path);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint manifest parse error: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "kgrl-params-v1")
    throw DataError("unsupported checkpoint format in " + path);

  std::map<std::string, ParamStore> sections;
  const std::streampos payload_start = is.tellg();
  for (const auto& e : manifest.at("entries")) {
    std::string full = e.at("name").get<std::string>();
    auto slash = full.find('/');
    if (slash == std::string::npos) throw DataError("checkpoint entry without section: " + full);
    std::string section = full.substr(0, slash);
    std::string name = full.substr(slash + 1);
    int rows = e.at("rows").get<int>();
    int cols = e.at("cols").get<int>();
    size_t offset = e.at("offset").get<size_t>();

    ParamStore& store = sections[section];
    int id = store.add(name, rows, cols);
    is.seekg(payload_start + static_cast<std::streamoff>(offset));
    detail::read_le_doubles(is, store.at(id).value.data);
    if (!is) throw DataError("checkpoint payload truncated: " + path);
  }
  return sections;
}

}  // namespace kgrl::nn
