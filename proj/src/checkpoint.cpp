#include "zslforge/checkpoint.hpp"

#include <zlib.h>

#include <cstring>

namespace zslforge {

namespace {

void append_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& buf, std::string path) : buf_(buf), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[off_])) |
                      (static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[off_ + 1])) << 8) |
                      (static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[off_ + 2])) << 16) |
                      (static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[off_ + 3])) << 24);
    off_ += 4;
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(off_, n);
    off_ += n;
    return s;
  }

  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, buf_.data() + off_, n);
    off_ += n;
  }

  std::size_t offset() const { return off_; }
  std::size_t remaining() const { return buf_.size() - off_; }

 private:
  void need(std::size_t n) {
    if (off_ + n > buf_.size()) throw FormatError(path_ + ": truncated checkpoint");
  }
  const std::string& buf_;
  std::string path_;
  std::size_t off_ = 0;
};

}  // namespace

const Mat& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw DataError("checkpoint: missing tensor '" + name + "'");
}

bool Checkpoint::has_tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return true;
  }
  return false;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string body;  // everything covered by the CRC
  const std::string header = ckpt.header.dump();
  append_u32_le(body, static_cast<std::uint32_t>(header.size()));
  body += header;
  append_u32_le(body, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    append_u32_le(body, static_cast<std::uint32_t>(name.size()));
    body += name;
    append_u32_le(body, static_cast<std::uint32_t>(t.rows()));
    append_u32_le(body, static_cast<std::uint32_t>(t.cols()));
    const std::size_t off = body.size();
    const std::size_t nbytes = static_cast<std::size_t>(t.size()) * sizeof(double);
    body.resize(body.size() + nbytes);
    if (nbytes > 0) std::memcpy(body.data() + off, t.data(), nbytes);
  }
  std::string out = "ZSLC";
  append_u32_le(out, 1);
  out += body;
  append_u32_le(out, static_cast<std::uint32_t>(
                         ::crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                                 static_cast<uInt>(body.size()))));
  write_text_file(path, out);
}

Checkpoint read_checkpoint(const std::string& path) {
  const std::string buf = read_text_file(path);
  if (buf.size() < 12) throw FormatError(path + ": truncated checkpoint");
  if (buf.compare(0, 4, "ZSLC") != 0) throw FormatError(path + ": bad magic, expected 'ZSLC'");
  Reader r(buf, path);
  r.bytes(4);  // magic
  const std::uint32_t version = r.u32();
  if (version != 1) throw FormatError(path + ": unsupported checkpoint version");
  if (buf.size() < 12 + 4) throw FormatError(path + ": truncated checkpoint");
  const std::size_t body_off = r.offset();
  const std::size_t body_len = buf.size() - body_off - 4;
  const std::uint32_t actual =
      static_cast<std::uint32_t>(::crc32(0L, reinterpret_cast<const Bytef*>(buf.data() + body_off),
                                         static_cast<uInt>(body_len)));

  Checkpoint ckpt;
  const std::uint32_t header_len = r.u32();
  const std::string header = r.bytes(header_len);
  try {
    ckpt.header = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad checkpoint header: " + e.what());
  }
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    Mat t(rows, cols);
    r.raw(t.data(), static_cast<std::size_t>(rows) * cols * sizeof(double));
    ckpt.tensors.emplace_back(name, std::move(t));
  }
  if (r.remaining() != 4) throw FormatError(path + ": trailing bytes in checkpoint");
  const std::uint32_t stored = r.u32();
  if (stored != actual) throw FormatError(path + ": checkpoint CRC32 mismatch");
  return ckpt;
}

}  // namespace zslforge
