// Copyright 2026 The Sparseflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sparseflow/evaluator.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <set>

#include "json.hpp"
#include "sparseflow/error.hpp"

namespace sparseflow {
namespace {

// Writing to a child that never reads stdin must not kill the caller.
class IgnoreSigpipe {
 public:
  IgnoreSigpipe() {
    struct sigaction ignore {};
    ignore.sa_handler = SIG_IGN;
    sigemptyset(&ignore.sa_mask);
    sigaction(SIGPIPE, &ignore, &saved_);
  }
  ~IgnoreSigpipe() { sigaction(SIGPIPE, &saved_, nullptr); }
  IgnoreSigpipe(const IgnoreSigpipe&) = delete;
  IgnoreSigpipe& operator=(const IgnoreSigpipe&) = delete;

 private:
  struct sigaction saved_ {};
};

class SurrogateEvaluator final : public AccuracyEvaluator {
 public:
  SurrogateEvaluator(double a, double b) : a_(a), b_(b) {}
  double evaluate(const ThresholdAssignment&, double s) override { return a_ - b_ * s * s; }
  std::string describe() const override {
    return "surrogate " + std::to_string(a_) + " - " + std::to_string(b_) + " * s^2";
  }

 private:
  double a_;
  double b_;
};

class LookupEvaluator final : public AccuracyEvaluator {
 public:
  explicit LookupEvaluator(std::vector<LookupEntry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) fail(ErrorKind::kValidation, "lookup table is empty");
    for (const LookupEntry& e : entries_) {
      for (const auto& [id, t] : e.thresholds.layers) keys_.insert(id);
    }
  }

  double evaluate(const ThresholdAssignment& query, double) override {
    double best = std::numeric_limits<double>::infinity();
    double accuracy = 0.0;
    for (const LookupEntry& e : entries_) {
      double d2 = 0.0;
      for (const std::string& id : keys_) {
        const ThresholdPair a = lookup(query, id);
        const ThresholdPair b = lookup(e.thresholds, id);
        d2 += (a.tau_w - b.tau_w) * (a.tau_w - b.tau_w) +
              (a.tau_a - b.tau_a) * (a.tau_a - b.tau_a);
      }
      if (d2 < best) {
        best = d2;
        accuracy = e.accuracy;
      }
    }
    return accuracy;
  }

  std::string describe() const override {
    return "lookup table (" + std::to_string(entries_.size()) + " entries)";
  }

 private:
  static ThresholdPair lookup(const ThresholdAssignment& t, const std::string& id) {
    auto it = t.layers.find(id);
    return it == t.layers.end() ? ThresholdPair{} : it->second;
  }

  std::vector<LookupEntry> entries_;
  std::set<std::string> keys_;
};

class CommandEvaluator final : public AccuracyEvaluator {
 public:
  CommandEvaluator(std::string command, std::chrono::milliseconds timeout)
      : command_(std::move(command)), timeout_(timeout) {
    if (command_.empty()) fail(ErrorKind::kValidation, "evaluator command is empty");
  }

  double evaluate(const ThresholdAssignment& thresholds, double) override {
    const std::string request = serialize_thresholds(thresholds);
    IgnoreSigpipe guard;
    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0) fail(ErrorKind::kEvaluator, std::string("pipe: ") + std::strerror(errno));
    if (pipe(out_pipe) != 0) {
      close(in_pipe[0]);
      close(in_pipe[1]);
      fail(ErrorKind::kEvaluator, std::string("pipe: ") + std::strerror(errno));
    }
    const pid_t pid = fork();
    if (pid < 0) {
      for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
      fail(ErrorKind::kEvaluator, std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
      // Own process group, so a timeout also reaches the command's children.
      setpgid(0, 0);
      dup2(in_pipe[0], STDIN_FILENO);
      dup2(out_pipe[1], STDOUT_FILENO);
      for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
      execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    setpgid(pid, pid);
    close(in_pipe[0]);
    close(out_pipe[1]);
    fcntl(in_pipe[1], F_SETFL, O_NONBLOCK);
    fcntl(out_pipe[0], F_SETFL, O_NONBLOCK);

    std::size_t written = 0;
    int to_child = in_pipe[1];
    if (request.empty()) {
      close(to_child);
      to_child = -1;
    }
    std::string response;
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    bool open_out = true;
    bool timed_out = false;
    while (open_out) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        timed_out = true;
        break;
      }
      pollfd fds[2];
      nfds_t nfds = 0;
      fds[nfds++] = {out_pipe[0], POLLIN, 0};
      if (to_child >= 0) fds[nfds++] = {to_child, POLLOUT, 0};
      const int ready = poll(fds, nfds, static_cast<int>(std::min<int64_t>(left.count(), 1000)));
      if (ready < 0 && errno != EINTR) break;
      if (to_child >= 0 && nfds > 1 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
        const ssize_t n = write(to_child, request.data() + written, request.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        if (n < 0 && errno != EAGAIN) written = request.size();
        if (written >= request.size()) {
          close(to_child);
          to_child = -1;
        }
      }
      if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
        char buf[4096];
        const ssize_t n = read(out_pipe[0], buf, sizeof(buf));
        if (n > 0) {
          response.append(buf, static_cast<std::size_t>(n));
        } else if (n == 0 || errno != EAGAIN) {
          open_out = false;
        }
      }
    }
    if (to_child >= 0) close(to_child);
    close(out_pipe[0]);
    if (timed_out) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
    }
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (timed_out) {
      fail(ErrorKind::kEvaluator, "evaluator timed out after " +
                                      std::to_string(timeout_.count()) + " ms");
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      fail(ErrorKind::kEvaluator, "evaluator exited with status " +
                                      std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
    }
    return parse_response(response);
  }

  std::string describe() const override { return "command '" + command_ + "'"; }

 private:
  static double parse_response(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    const auto last = text.find_last_not_of(" \t\r\n");
    if (first == std::string::npos) fail(ErrorKind::kEvaluator, "evaluator printed nothing");
    const std::string token = text.substr(first, last - first + 1);
    char* end = nullptr;
    const double value = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size() || !std::isfinite(value)) {
      fail(ErrorKind::kEvaluator, "evaluator output is not a single number: '" + token + "'");
    }
    return value;
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
};

}  // namespace

std::string_view to_string(EvaluatorKind kind) {
  switch (kind) {
    case EvaluatorKind::kSurrogate:
      return "surrogate";
    case EvaluatorKind::kLookupTable:
      return "lookup-table";
    case EvaluatorKind::kExternalCommand:
      return "external-command";
  }
  return "unknown";
}

EvaluatorKind parse_evaluator_kind(std::string_view text) {
  if (text == "surrogate") return EvaluatorKind::kSurrogate;
  if (text == "lookup-table") return EvaluatorKind::kLookupTable;
  if (text == "external-command") return EvaluatorKind::kExternalCommand;
  fail(ErrorKind::kParse, "unknown evaluator kind '" + std::string(text) + "'");
}

std::unique_ptr<AccuracyEvaluator> make_surrogate_evaluator(double a, double b) {
  return std::make_unique<SurrogateEvaluator>(a, b);
}

std::unique_ptr<AccuracyEvaluator> make_lookup_evaluator(std::vector<LookupEntry> entries) {
  return std::make_unique<LookupEvaluator>(std::move(entries));
}

std::unique_ptr<AccuracyEvaluator> make_command_evaluator(std::string command,
                                                          std::chrono::milliseconds timeout) {
  return std::make_unique<CommandEvaluator>(std::move(command), timeout);
}

std::vector<LookupEntry> parse_lookup_table(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kParse, std::string("lookup table: ") + e.what());
  }
  std::vector<LookupEntry> entries;
  try {
    const nlohmann::json& items = doc.is_array() ? doc : doc.at("entries");
    for (const auto& item : items) {
      LookupEntry e;
      e.thresholds = parse_thresholds(item.at("thresholds").dump());
      e.accuracy = item.at("accuracy").get<double>();
      entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("lookup table: ") + e.what());
  }
  return entries;
}

std::unique_ptr<AccuracyEvaluator> make_evaluator(const EvaluatorSpec& spec) {
  switch (spec.kind) {
    case EvaluatorKind::kSurrogate:
      return make_surrogate_evaluator(spec.surrogate_a, spec.surrogate_b);
    case EvaluatorKind::kLookupTable:
      return make_lookup_evaluator(parse_lookup_table(read_text_file(spec.table)));
    case EvaluatorKind::kExternalCommand:
      return make_command_evaluator(spec.command, spec.timeout);
  }
  fail(ErrorKind::kValidation, "unknown evaluator kind");
}

}  // namespace sparseflow
