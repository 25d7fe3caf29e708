#pragma once

#include <sys/types.h>

#include <filesystem>
#include <string>

namespace histolime::detail {

/// A child process whose stdin and stdout are one end of a socket pair.
/// Lines are exchanged synchronously; callers serialize access.
class LineProcess {
 public:
  LineProcess(const std::string& command, const std::filesystem::path& working_dir);
  ~LineProcess();
  LineProcess(const LineProcess&) = delete;
  LineProcess& operator=(const LineProcess&) = delete;

  /// Returns false when the peer has gone away.
  bool write_line(const std::string& line);
  /// Returns false on EOF, error, or timeout; `line` excludes the newline.
  bool read_line(std::string& line, double timeout_seconds);

 private:
  int fd_ = -1;
  pid_t pid_ = -1;
  std::string buffer_;
};

}  // namespace histolime::detail
