// src/tensor.cpp
#include "diarkit/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>

#include "diarkit/error.hpp"

namespace diarkit {

namespace {

std::size_t product(const std::vector<std::size_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("weight file truncated");
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : dims_(std::move(dims)), data_(product(dims_), fill) {}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> values)
    : dims_(std::move(dims)), data_(std::move(values)) {
  if (product(dims_) != data_.size())
    throw ShapeError("tensor " + shape_string(dims_) + " given " + std::to_string(data_.size()) +
                     " values");
}

Tensor Tensor::reshaped(std::vector<std::size_t> dims) const {
  return Tensor(std::move(dims), data_);
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string shape_string(const std::vector<std::size_t>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

const Tensor& WeightStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw InputError("missing weight '" + name + "'");
  return it->second;
}

const Tensor& WeightStore::get(const std::string& name, const std::vector<std::size_t>& dims) const {
  const Tensor& t = get(name);
  if (t.dims() != dims)
    throw ShapeError("weight '" + name + "' has shape " + shape_string(t.dims()) + ", expected " +
                     shape_string(dims));
  return t;
}

Tensor& WeightStore::mutable_get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw InputError("missing weight '" + name + "'");
  return it->second;
}

std::vector<std::string> WeightStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::size_t WeightStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.size();
  return n;
}

std::size_t WeightStore::copy_prefix(const std::string& from_prefix, const std::string& to_prefix) {
  const std::string from = from_prefix + ".";
  std::vector<std::pair<std::string, Tensor>> copies;
  for (const auto& [name, t] : entries_)
    if (name.compare(0, from.size(), from) == 0)
      copies.emplace_back(to_prefix + "." + name.substr(from.size()), t);
  for (auto& [name, t] : copies) entries_[name] = std::move(t);
  return copies.size();
}

WeightStore WeightStore::subtree(const std::string& prefix) const {
  const std::string p = prefix + ".";
  WeightStore out;
  for (const auto& [name, t] : entries_)
    if (name.compare(0, p.size(), p) == 0) out.set(name.substr(p.size()), t);
  return out;
}

void WeightStore::merge(const WeightStore& other, const std::string& prefix) {
  for (const auto& [name, t] : other.entries_) entries_[prefix + "." + name] = t;
}

std::vector<double> WeightStore::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& [_, t] : entries_) flat.insert(flat.end(), t.values().begin(), t.values().end());
  return flat;
}

void WeightStore::assign_flat(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw ShapeError("flat parameter vector has wrong length");
  std::size_t pos = 0;
  for (auto& [_, t] : entries_) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
              flat.begin() + static_cast<std::ptrdiff_t>(pos + t.size()), t.values().begin());
    pos += t.size();
  }
}

std::vector<std::uint8_t> serialize_weights(const WeightStore& w) {
  std::vector<std::uint8_t> out{'N', 'N', 'W', '1'};
  put_u32(out, static_cast<std::uint32_t>(w.size()));
  for (const auto& [name, t] : w.entries()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

WeightStore deserialize_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "NNW1", 4) != 0)
    throw FormatError("bad weight file magic");
  Reader in(bytes.subspan(4));
  WeightStore w;
  const std::uint32_t count = in.u32();
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::string name = in.str(in.u32());
    if (w.contains(name)) throw FormatError("duplicate weight name '" + name + "'");
    const std::uint32_t rank = in.u32();
    std::vector<std::size_t> dims(rank);
    std::size_t n = 1;
    for (auto& d : dims) {
      d = in.u32();
      if (d != 0 && n > (std::size_t{1} << 40) / d) throw FormatError("implausible tensor size");
      n *= d;
    }
    in.need(n * 4);
    std::vector<double> values(n);
    for (auto& v : values) v = static_cast<double>(std::bit_cast<float>(in.u32()));
    w.set(name, Tensor(std::move(dims), std::move(values)));
  }
  if (!in.done()) throw FormatError("trailing bytes after weight entries");
  return w;
}

void save_weights(const WeightStore& w, const std::filesystem::path& path) {
  const auto bytes = serialize_weights(w);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

WeightStore load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_weights(bytes);
}

}  // namespace diarkit
