#include "test_support.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>

#include <atomic>
#include <fstream>
#include <sstream>

namespace histolime::testing {

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("histolime-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

Raster random_raster(SplitMix64& rng, int max_side) {
  const int w = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_side)));
  const int h = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_side)));
  std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h * 3);
  for (auto& v : data) v = static_cast<std::uint8_t>(rng.next() >> 56);
  return Raster(w, h, std::move(data));
}

Raster uniform_raster(int w, int h, Rgb color) { return Raster(w, h, color); }

Raster two_halves(int w, int h, Rgb left, Rgb right) {
  Raster r(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) r.set(x, y, x < w / 2 ? left : right);
  }
  return r;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::filesystem::path source_dir() { return HISTOLIME_SOURCE_DIR; }

namespace {

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  return out + "'";
}

}  // namespace

CommandResult run_command(const std::vector<std::string>& argv) {
  TempDir scratch;
  const auto err_path = scratch / "stderr.txt";
  std::string cmd;
  for (const auto& a : argv) cmd += quote(a) + ' ';
  cmd += "2> " + quote(err_path.string());

  CommandResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = read_text(err_path);
  return r;
}

std::filesystem::path cli_path() { return HISTOLIME_CLI_PATH; }

CommandResult run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> argv{cli_path().string()};
  argv.insert(argv.end(), args.begin(), args.end());
  return run_command(argv);
}

}  // namespace histolime::testing
