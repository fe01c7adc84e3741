#ifndef ZSLFORGE_CLI_HPP
#define ZSLFORGE_CLI_HPP

namespace zslforge {

// Exit codes, one error class per code:
//   0 success
//   2 usage error (unknown flags, bad arguments)
//   3 missing or unreadable file
//   4 file format corruption (bad magic, checksum, malformed line)
//   5 config schema violation (unknown keys, invalid values)
//   6 data inconsistency (unknown wnid, label out of range, ...)
//   7 internal error
enum ExitCode {
  kOk = 0,
  kUsage = 2,
  kIo = 3,
  kFormat = 4,
  kConfig = 5,
  kData = 6,
  kInternal = 7,
};

int run_cli(int argc, const char* const* argv);

}  // namespace zslforge

#endif  // ZSLFORGE_CLI_HPP
