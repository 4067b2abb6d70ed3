#include "mcpred/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "mcpred/errors.hpp"

namespace mcpred::nn {

namespace {

constexpr std::array<char, 8> kMagic = {'M', 'C', 'P', 'R', 'C', 'K', 'P', 'T'};

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw DataError("checkpoint truncated");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

std::string get_bytes(std::istream& in, std::uint64_t n) {
  if (n > (std::uint64_t{1} << 32)) throw DataError("checkpoint field length implausible");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("checkpoint truncated");
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const CheckpointData& data) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, data.metadata.size());
  out.write(data.metadata.data(), static_cast<std::streamsize>(data.metadata.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.tensors.size()));
  for (const auto& [name, value] : data.tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(value.rank()));
    for (std::size_t d : value.shape()) put_le<std::uint64_t>(out, d);
    for (double v : value.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
}

CheckpointData read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError("not a checkpoint file (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointData data;
  data.metadata = get_bytes(in, get_le<std::uint64_t>(in));
  const auto count = get_le<std::uint32_t>(in);
  for (std::uint32_t t = 0; t < count; ++t) {
    NamedTensor nt;
    nt.name = get_bytes(in, get_le<std::uint32_t>(in));
    const auto rank = get_le<std::uint32_t>(in);
    if (rank > 8) throw DataError("checkpoint tensor rank implausible");
    std::vector<std::size_t> shape(rank);
    std::uint64_t total = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(get_le<std::uint64_t>(in));
      total *= d;
    }
    if (total > (std::uint64_t{1} << 32)) throw DataError("checkpoint tensor too large");
    std::vector<double> values(total);
    for (double& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    nt.value = Tensor(std::move(shape), std::move(values));
    data.tensors.push_back(std::move(nt));
  }
  return data;
}

void save_checkpoint_file(const std::string& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_checkpoint(out, data);
  if (!out) throw DataError("failed writing '" + path + "'");
}

CheckpointData load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace mcpred::nn
