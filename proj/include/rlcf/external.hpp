#ifndef RLCF_EXTERNAL_HPP
#define RLCF_EXTERNAL_HPP

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <thread>

#include <fcntl.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "rlcf/minilang.hpp"

namespace rlcf::check {

/// Misconfigured backend, as opposed to a failing program.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Backend {
  enum class Kind { Minilang, External } kind = Kind::Minilang;
  std::string command_template;  // External only
};

struct CheckReport {
  std::string backend;
  bool passed = false;
  std::string diagnostic;
};

inline Backend parse_backend(const std::string& spec) {
  if (spec == "minilang") return {};
  const std::string prefix = "external:";
  if (spec.rfind(prefix, 0) == 0) {
    Backend b{Backend::Kind::External, spec.substr(prefix.size())};
    if (b.command_template.find_first_not_of(" \t") == std::string::npos)
      throw BackendError("external backend needs a command template");
    return b;
  }
  throw BackendError("unknown backend '" + spec + "' (expected minilang or external:<command>)");
}

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

/// Replaces every "{}" with the quoted path; without a placeholder the
/// path is appended as the last argument.
inline std::string substitute(const std::string& tmpl, const std::string& path) {
  const std::string q = shell_quote(path);
  std::string out;
  bool replaced = false;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl.compare(i, 2, "{}") == 0) {
      out += q;
      replaced = true;
      ++i;
    } else {
      out += tmpl[i];
    }
  }
  return replaced ? out : out + " " + q;
}

/// True when the first word of the command resolves to an executable.
inline bool command_exists(const std::string& command) {
  const auto b = command.find_first_not_of(" \t");
  if (b == std::string::npos) return false;
  const std::string word = command.substr(b, command.find_first_of(" \t", b) - b);
  if (word.find('/') != std::string::npos) return ::access(word.c_str(), X_OK) == 0;
  const char* path = std::getenv("PATH");
  std::string dirs = path ? path : "/usr/bin:/bin";
  std::size_t start = 0;
  while (start <= dirs.size()) {
    const auto end = std::min(dirs.find(':', start), dirs.size());
    const std::string dir = end > start ? dirs.substr(start, end - start) : ".";
    if (::access((dir + "/" + word).c_str(), X_OK) == 0) return true;
    start = end + 1;
  }
  // Shell builtins such as `true`, `false` and `exit`.
  const std::string probe = "command -v " + shell_quote(word) + " >/dev/null 2>&1";
  return std::system(probe.c_str()) == 0;
}

struct ProcessResult {
  bool timed_out = false;
  int exit_code = -1;
  std::string output;  // combined stdout and stderr, truncated
};

inline ProcessResult run_shell(const std::string& command, std::chrono::milliseconds timeout) {
  int fds[2];
  if (::pipe(fds) != 0) throw std::runtime_error("pipe failed");
  const pid_t pid = ::fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(fds[1], STDOUT_FILENO);
    ::dup2(fds[1], STDERR_FILENO);
    ::close(fds[0]);
    ::close(fds[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(fds[1]);
  ::fcntl(fds[0], F_SETFL, ::fcntl(fds[0], F_GETFL) | O_NONBLOCK);

  constexpr std::size_t kMaxOutput = 4096;
  ProcessResult r;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  auto drain = [&] {
    char buf[512];
    for (ssize_t n; (n = ::read(fds[0], buf, sizeof buf)) > 0;)
      if (r.output.size() < kMaxOutput) r.output.append(buf, static_cast<std::size_t>(n));
  };
  int status = 0;
  for (;;) {
    drain();
    const pid_t w = ::waitpid(pid, &status, WNOHANG);
    if (w == pid) break;
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      r.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  drain();
  ::close(fds[0]);
  if (!r.timed_out) r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  if (r.output.size() > kMaxOutput) r.output.resize(kMaxOutput);
  return r;
}

inline CheckReport check_minilang(const std::string& source) {
  CheckReport rep{"minilang", false, ""};
  try {
    const auto res = lang::compile(tokenize(source));
    rep.passed = res.tree.has_value();
    rep.diagnostic = rep.passed ? "ok" : res.report.message;
  } catch (const UnknownLexeme& e) {
    rep.diagnostic = e.what();
  }
  return rep;
}

/// Compile check of the file at `path`. External commands map exit code 0
/// to pass and anything else to fail; exceeding `timeout` is a fail with a
/// "timeout" diagnostic. A command that cannot be found throws BackendError.
inline CheckReport check_file(const std::string& path, const Backend& backend,
                              std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
  if (backend.kind == Backend::Kind::Minilang) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return check_minilang(ss.str());
  }
  if (!command_exists(backend.command_template))
    throw BackendError("external command not found: " + backend.command_template);
  const auto r = run_shell(substitute(backend.command_template, path), timeout);
  CheckReport rep{"external:" + backend.command_template, false, ""};
  if (r.timed_out) {
    rep.diagnostic = "timeout";
  } else if (r.exit_code == 127) {
    throw BackendError("external command could not be executed: " + backend.command_template);
  } else {
    rep.passed = r.exit_code == 0;
    rep.diagnostic = r.output.empty() ? "exit code " + std::to_string(r.exit_code) : r.output;
  }
  return rep;
}

}  // namespace rlcf::check

#endif  // RLCF_EXTERNAL_HPP
