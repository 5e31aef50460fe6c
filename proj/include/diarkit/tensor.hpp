// include/diarkit/tensor.hpp
//
// Dense row-major arrays and the named parameter container that backs every
// network in the library.
//
// Weight file layout (all integers little-endian):
//   "NNW1"                          4-byte magic
//   u32 entry count
//   per entry, in ascending name order:
//     u32 name length, UTF-8 name bytes
//     u32 rank, rank x u32 extents
//     product(extents) x IEEE-754 binary32 values, row-major
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace diarkit {

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
  Tensor(std::vector<std::size_t> dims, std::vector<double> values);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& vector() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * dims_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * dims_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }

  // Same data, new extents; the element count must match.
  Tensor reshaped(std::vector<std::size_t> dims) const;
  bool all_finite() const;

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& dims);

// Parameters addressed by dot-separated paths, e.g. "embed.stage3.block2.conv1.kernel".
// Values are persisted as binary32; doubles that are not representable in
// float are rounded on save.
class WeightStore {
 public:
  void set(const std::string& name, Tensor t) { entries_[name] = std::move(t); }
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  // Like get(), and checks the extents.
  const Tensor& get(const std::string& name, const std::vector<std::size_t>& dims) const;
  Tensor& mutable_get(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::vector<std::string> names() const;
  std::size_t parameter_count() const;

  const std::map<std::string, Tensor>& entries() const { return entries_; }
  std::map<std::string, Tensor>& entries() { return entries_; }

  // Copies every entry under `from_prefix.` to the same suffix under `to_prefix.`.
  // Returns the number of copied entries.
  std::size_t copy_prefix(const std::string& from_prefix, const std::string& to_prefix);
  // Entries under `prefix.`, with the prefix stripped.
  WeightStore subtree(const std::string& prefix) const;
  // Inserts every entry of `other` with `prefix.` prepended.
  void merge(const WeightStore& other, const std::string& prefix);

  // Flattened view of all parameters in name order, and the inverse.
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> flat);

  bool operator==(const WeightStore&) const = default;

 private:
  std::map<std::string, Tensor> entries_;
};

std::vector<std::uint8_t> serialize_weights(const WeightStore& w);
WeightStore deserialize_weights(std::span<const std::uint8_t> bytes);
void save_weights(const WeightStore& w, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

}  // namespace diarkit
