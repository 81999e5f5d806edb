#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "surgant/tensor.hpp"

namespace surgant {

inline constexpr char kCheckpointMagic[] = "ANTF1";

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Layout: "ANTF1", then records until end of stream, each
//   u64 name length | name bytes (UTF-8) | u64 rank | rank x u64 dims | f64 data
// with every integer and float little-endian.
void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

// Copies values from `source` into same-named, same-shaped tensors in `targets`.
// Throws FormatError when a target has no counterpart or shapes differ.
void assign_from_checkpoint(const std::vector<NamedTensor>& targets, const std::vector<NamedTensor>& source);

}  // namespace surgant
