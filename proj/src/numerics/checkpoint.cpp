#include "ascore/numerics/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "ascore/error.hpp"

namespace ascore::numerics {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b, 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  out.write(b, 8);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return true;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("checkpoint truncated in values");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParameterSet& params) {
  out.write(kCheckpointMagic, 5);
  for (const auto& p : params.items()) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : p.tensor.data()) put_f64(out, v);
  }
  if (!out) throw IoError("failed writing checkpoint");
}

std::vector<Parameter> read_checkpoint(std::istream& in) {
  char magic[5];
  if (!in.read(magic, 5) || std::memcmp(magic, kCheckpointMagic, 5) != 0)
    throw IoError("not an ASCR1 checkpoint (bad magic)");
  std::vector<Parameter> params;
  std::uint32_t name_len = 0;
  while (get_u32(in, name_len)) {
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw IoError("checkpoint truncated in name");
    std::uint32_t rank = 0;
    if (!get_u32(in, rank) || rank == 0) throw IoError("checkpoint: bad rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint32_t v = 0;
      if (!get_u32(in, v) || v == 0) throw IoError("checkpoint: bad dims for " + name);
      d = v;
    }
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = get_f64(in);
    params.push_back({std::move(name), Tensor::from_data(std::move(shape), std::move(values), true)});
  }
  if (!in.eof()) throw IoError("checkpoint: trailing garbage");
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  write_checkpoint(out, params);
}

std::vector<Parameter> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void load_checkpoint(const std::filesystem::path& path, ParameterSet& params) {
  const auto stored = read_checkpoint(path);
  for (const auto& p : params.items()) {
    auto it = std::find_if(stored.begin(), stored.end(),
                           [&](const Parameter& s) { return s.name == p.name; });
    if (it == stored.end()) throw IoError(path.string() + ": missing parameter " + p.name);
    if (it->tensor.shape() != p.tensor.shape())
      throw IoError(path.string() + ": shape mismatch for " + p.name);
    Tensor target = p.tensor;
    auto dst = target.mutable_data();
    const auto src = it->tensor.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace ascore::numerics
