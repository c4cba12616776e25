#include "hazegan/tensor_store.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "hazegan/errors.hpp"

namespace hazegan {

namespace {

constexpr char kMagic[4] = {'H', 'Z', 'T', 'C'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IntegrityError("truncated file: " + path);
  return v;
}

void put_name(std::ostream& out, const std::string& name) {
  if (name.size() > 0xffff) throw InvalidParameterError("tensor name too long");
  put<uint16_t>(out, uint16_t(name.size()));
  out.write(name.data(), std::streamsize(name.size()));
}

std::string take_name(std::istream& in, const std::string& path) {
  const uint16_t len = take<uint16_t>(in, path);
  std::string name(len, '\0');
  in.read(name.data(), len);
  if (!in) throw IntegrityError("truncated file: " + path);
  return name;
}

}  // namespace

void TensorStore::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write: " + tmp);
    out.write(kMagic, 4);
    put<uint32_t>(out, kVersion);
    put<uint64_t>(out, fingerprint);
    put<uint32_t>(out, uint32_t(ints.size()));
    for (const auto& [name, value] : ints) {
      put_name(out, name);
      put<int64_t>(out, value);
    }
    put<uint32_t>(out, uint32_t(tensors.size()));
    for (const auto& [name, t] : tensors) {
      put_name(out, name);
      const Shape s = t.shape();
      put<uint32_t>(out, uint32_t(s.n));
      put<uint32_t>(out, uint32_t(s.c));
      put<uint32_t>(out, uint32_t(s.h));
      put<uint32_t>(out, uint32_t(s.w));
      out.write(reinterpret_cast<const char*>(t.data()),
                std::streamsize(t.numel() * int64_t(sizeof(float))));
    }
    if (!out) throw DataError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot finalize " + path + ": " + ec.message());
}

namespace {

void check_header(std::istream& in, const std::string& path, uint64_t* fingerprint) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw IntegrityError("bad magic header in " + path);
  }
  const uint32_t version = take<uint32_t>(in, path);
  if (version != TensorStore::kVersion) {
    throw VersionError("unsupported format version " + std::to_string(version) + " in " + path);
  }
  *fingerprint = take<uint64_t>(in, path);
}

}  // namespace

TensorStore TensorStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read: " + path);
  TensorStore store;
  check_header(in, path, &store.fingerprint);
  const uint32_t n_ints = take<uint32_t>(in, path);
  for (uint32_t i = 0; i < n_ints; ++i) {
    std::string name = take_name(in, path);
    store.ints[name] = take<int64_t>(in, path);
  }
  const uint32_t n_tensors = take<uint32_t>(in, path);
  for (uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = take_name(in, path);
    const int n = int(take<uint32_t>(in, path));
    const int c = int(take<uint32_t>(in, path));
    const int h = int(take<uint32_t>(in, path));
    const int w = int(take<uint32_t>(in, path));
    if (n < 1 || c < 1 || h < 1 || w < 1 || int64_t(n) * c * h * w > (int64_t(1) << 32)) {
      throw IntegrityError("implausible tensor dims in " + path);
    }
    Tensor t{Shape(n, c, h, w)};
    in.read(reinterpret_cast<char*>(t.data()),
            std::streamsize(t.numel() * int64_t(sizeof(float))));
    if (!in) throw IntegrityError("truncated tensor data in " + path);
    store.tensors.emplace(std::move(name), std::move(t));
  }
  return store;
}

uint64_t TensorStore::peek_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read: " + path);
  uint64_t fp = 0;
  check_header(in, path, &fp);
  return fp;
}

int64_t TensorStore::get_int(const std::string& name) const {
  auto it = ints.find(name);
  if (it == ints.end()) throw IntegrityError("missing field: " + name);
  return it->second;
}

const Tensor& TensorStore::get_tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw IntegrityError("missing tensor: " + name);
  return it->second;
}

}  // namespace hazegan
