#include "surgant/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "surgant/errors.hpp"

namespace surgant {

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes, 8);
}

bool get_u64(std::istream& in, std::uint64_t& v) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return true;
}

std::uint64_t require_u64(std::istream& in, const char* what) {
  std::uint64_t v = 0;
  if (!get_u64(in, v)) throw FormatError(std::string("checkpoint truncated while reading ") + what);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  out.write(kCheckpointMagic, 5);
  for (const auto& [name, t] : tensors) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, t.rank());
    for (std::size_t d : t.shape()) put_u64(out, d);
    for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw FormatError("failed writing checkpoint");
}

std::vector<NamedTensor> read_checkpoint(std::istream& in) {
  char magic[5];
  if (!in.read(magic, 5) || std::memcmp(magic, kCheckpointMagic, 5) != 0) {
    throw FormatError("not an ANTF1 checkpoint (bad magic)");
  }
  std::vector<NamedTensor> tensors;
  std::uint64_t name_len = 0;
  while (get_u64(in, name_len)) {
    if (name_len > (1u << 20)) throw FormatError("checkpoint name length implausible");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name_len))) throw FormatError("checkpoint truncated in name");
    const std::uint64_t rank = require_u64(in, "rank");
    if (rank == 0 || rank > 8) throw FormatError("checkpoint tensor '" + name + "' has invalid rank");
    Shape shape(rank);
    std::uint64_t numel = 1;
    for (auto& d : shape) {
      d = require_u64(in, "dims");
      numel *= d;
    }
    std::vector<double> data(numel);
    for (auto& v : data) v = std::bit_cast<double>(require_u64(in, "data"));
    tensors.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  if (!in.eof()) throw FormatError("checkpoint stream error");
  return tensors;
}

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open checkpoint for writing: " + path);
  write_checkpoint(out, tensors);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path);
  return read_checkpoint(in);
}

void assign_from_checkpoint(const std::vector<NamedTensor>& targets, const std::vector<NamedTensor>& source) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& nt : source) by_name[nt.name] = &nt.tensor;
  for (const auto& [name, target] : targets) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks tensor '" + name + "'");
    if (it->second->shape() != target.shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_to_string(it->second->shape()) +
                        ", expected " + shape_to_string(target.shape()));
    }
    Tensor alias = target;
    auto dst = alias.mutable_data();
    auto src = it->second->data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace surgant
