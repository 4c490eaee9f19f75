#pragma once

/**
 * Simulation models: in-process function handles and an external process
 * speaking a line protocol over its standard streams.
 *
 * Line protocol (one request at a time):
 *   - the driver starts the command with `/bin/sh -c <command>`;
 *   - there is no greeting: the first request is written right away;
 *   - request:  the components of x as comma-separated decimals, one line;
 *   - response: one line holding a single decimal m(x); lines starting with
 *     '#' are skipped so a simulator may log on stdout;
 *   - termination: the driver closes the simulator's stdin and waits for
 *     the process to exit.
 * A response that is missing or does not parse as a finite number raises
 * SimulatorProtocolError.
 */

#include "error.hpp"
#include "types.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <memory>
#include <mutex>
#include <span>
#include <sstream>
#include <string>
#include <utility>

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace updens {

//! Evaluable map x -> m(x).
class SimulationModel
{
public:
  using Function = std::function<double(std::span<const double>)>;

  SimulationModel(std::string name, Function fn) : name_(std::move(name)), fn_(std::move(fn)) {}

  const std::string& name() const noexcept { return name_; }

  double operator()(std::span<const double> x) const
  {
    const double y = fn_(x);
    if (!std::isfinite(y)) throw Error(ErrorCode::NonFiniteData, "simulator " + name_ + " returned a non-finite value");
    return y;
  }

  double operator()(const Vector& x) const
  {
    return (*this)(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }

  Vector evaluate(const Matrix& points) const
  {
    Vector out(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      out(i) = (*this)(std::span<const double>(points.row(i).data(), static_cast<std::size_t>(points.cols())));
    }
    return out;
  }

private:
  std::string name_;
  Function fn_;
};

/**
 * Child process bound to the line protocol. Calls are serialized; the
 * process is terminated when the last copy of the handle goes away.
 */
class ProcessSimulator
{
public:
  explicit ProcessSimulator(const std::string& command)
  {
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
      throw Error(ErrorCode::IoError, "pipe() failed for simulator '" + command + "'");
    }
    // a simulator that dies early must surface as a protocol error, not SIGPIPE
    ::signal(SIGPIPE, SIG_IGN);
    pid_ = ::fork();
    if (pid_ < 0) throw Error(ErrorCode::IoError, "fork() failed for simulator '" + command + "'");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    in_ = ::fdopen(to_child[1], "w");
    out_ = ::fdopen(from_child[0], "r");
    command_ = command;
  }

  ProcessSimulator(const ProcessSimulator&) = delete;
  ProcessSimulator& operator=(const ProcessSimulator&) = delete;

  ~ProcessSimulator()
  {
    if (in_) std::fclose(in_);
    if (out_) std::fclose(out_);
    if (pid_ > 0) {
      int status = 0;
      ::waitpid(pid_, &status, 0);
    }
  }

  double operator()(std::span<const double> x)
  {
    std::lock_guard lock(mutex_);
    std::ostringstream req;
    req << std::setprecision(17);
    for (std::size_t i = 0; i < x.size(); ++i) req << (i ? "," : "") << x[i];
    req << '\n';
    const auto text = req.str();
    if (std::fwrite(text.data(), 1, text.size(), in_) != text.size() || std::fflush(in_) != 0) {
      throw Error(ErrorCode::SimulatorProtocolError, "cannot write request to '" + command_ + "'");
    }
    std::string line;
    do {
      line.clear();
      if (!read_line(line)) {
        throw Error(ErrorCode::SimulatorProtocolError, "no response from '" + command_ + "'");
      }
    } while (!line.empty() && line[0] == '#');
    return parse_response(line);
  }

  static double parse_response(const std::string& line)
  {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(line, &used);
    } catch (const std::exception&) {
      throw Error(ErrorCode::SimulatorProtocolError, "non-numeric response '" + line + "'");
    }
    while (used < line.size() && std::isspace(static_cast<unsigned char>(line[used]))) ++used;
    if (used != line.size() || !std::isfinite(v)) {
      throw Error(ErrorCode::SimulatorProtocolError, "non-numeric response '" + line + "'");
    }
    return v;
  }

private:
  bool read_line(std::string& line)
  {
    int c;
    bool any = false;
    while ((c = std::fgetc(out_)) != EOF) {
      any = true;
      if (c == '\n') return true;
      if (c != '\r') line.push_back(static_cast<char>(c));
    }
    return any;
  }

  pid_t pid_ = -1;
  std::FILE* in_ = nullptr;
  std::FILE* out_ = nullptr;
  std::string command_;
  std::mutex mutex_;
};

inline SimulationModel make_process_simulator(const std::string& command)
{
  auto proc = std::make_shared<ProcessSimulator>(command);
  return SimulationModel("exec:" + command, [proc](std::span<const double> x) { return (*proc)(x); });
}

} // namespace updens
