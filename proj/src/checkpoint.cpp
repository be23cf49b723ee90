#include "checkpoint.hpp"

#include <cstring>

namespace ttlab {
namespace ckpt_detail {

void write_bytes(std::ofstream& out, const void* p, std::size_t n,
                 const std::string& path) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!out) throw IoError("write failed for " + path);
}

void read_bytes(std::ifstream& in, void* p, std::size_t n,
                const std::string& path) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n))
    throw ParseError(path + ": truncated checkpoint");
}

// len_bytes selects the width of the length prefix: 1, 2 or 4.
void write_str(std::ofstream& out, const std::string& s, std::size_t len_bytes,
               const std::string& path) {
  std::uint64_t n = s.size();
  if (n >= (std::uint64_t{1} << (8 * len_bytes)))
    throw InvalidArgument("checkpoint string too long");
  write_bytes(out, &n, len_bytes, path);
  write_bytes(out, s.data(), s.size(), path);
}

std::string read_str(std::ifstream& in, std::size_t len_bytes,
                     const std::string& path) {
  std::uint64_t n = 0;
  read_bytes(in, &n, len_bytes, path);
  std::string s(n, '\0');
  if (n) read_bytes(in, s.data(), n, path);
  return s;
}

// Validates magic and version, fills the header fields, and leaves the
// stream positioned at the parameter count.
std::ifstream open_payload(const std::string& path, CheckpointInfo* info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[7];
  read_bytes(in, magic, 7, path);
  if (std::memcmp(magic, kMagic, 7) != 0)
    throw ParseError(path + ": not a checkpoint file");
  auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion)
    throw ParseError(path + ": unsupported checkpoint version " +
                     std::to_string(version));
  info->kind = read_str(in, 1, path);
  info->elem_size = read_pod<std::uint8_t>(in, path);
  if (info->elem_size != 4 && info->elem_size != 8)
    throw ParseError(path + ": bad element size");
  info->vocab_hash = read_pod<std::uint64_t>(in, path);
  info->config_json = read_str(in, 4, path);
  return in;
}

}  // namespace ckpt_detail

CheckpointInfo read_checkpoint_info(const std::string& path) {
  CheckpointInfo info;
  ckpt_detail::open_payload(path, &info);
  return info;
}

}  // namespace ttlab
