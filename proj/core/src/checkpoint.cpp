#include "sqpf/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "sqpf/encoder.hpp"
#include "sqpf/errors.hpp"

namespace sqpf {

namespace {

constexpr char kMagic[8] = {'S', 'Q', 'P', 'F', 'C', 'K', 'P', 'T'};

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::string read_string(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kCheckpointVersion);
  write_string(out, canonical_config_string(ckpt.config));
  write_u32(out, static_cast<std::uint32_t>(ckpt.epoch));
  out.put(ckpt.diverged ? 1 : 0);
  write_string(out, ckpt.rng_state);
  write_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, values] : ckpt.params) {
    write_string(out, name);
    write_u64(out, values.size());
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  }
  if (!out) throw DataError("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw DataError("not a checkpoint file: " + path.string());
  const std::uint32_t version = read_u32(in);
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version) +
                    " (expected " + std::to_string(kCheckpointVersion) + ") in " + path.string());
  Checkpoint ckpt;
  ckpt.config = parse_config_string(read_string(in));
  ckpt.epoch = static_cast<int>(read_u32(in));
  ckpt.diverged = in.get() != 0;
  ckpt.rng_state = read_string(in);
  const std::uint32_t count = read_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    const std::uint64_t n = read_u64(in);
    std::vector<double> values(n);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    ckpt.params.emplace_back(std::move(name), std::move(values));
  }
  if (!in) throw DataError("truncated checkpoint: " + path.string());
  return ckpt;
}

Encoder encoder_from_checkpoint(const Checkpoint& ckpt) {
  EncoderSpec spec = ckpt.config.encoder;
  spec.weights_source.clear();  // parameters come from the checkpoint itself
  Encoder enc(spec, ckpt.config.seed);
  enc.set_param_values(ckpt.params);
  return enc;
}

}  // namespace sqpf
