#include "eafrs/energy.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "eafrs/error.hpp"

namespace eafrs {
namespace {

double read_uj_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  unsigned long long value = 0;
  if (!(in >> value)) throw MeterError("cannot read " + path.string());
  return static_cast<double>(value) * 1e-6;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

int run_shell(const std::string& command) {
  const int status = std::system(command.c_str());
  if (status == -1) return 127;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128;
}

}  // namespace

RaplMeter::RaplMeter(std::filesystem::path zone) : zone_(std::move(zone)) {
  if (!std::filesystem::exists(zone_ / "energy_uj")) {
    throw MeterError("RAPL zone unavailable: " + zone_.string());
  }
  max_range_j_ = read_uj_file(zone_ / "max_energy_range_uj");
  const auto power = zone_ / "constraint_0_max_power_uw";
  max_power_w_ = std::filesystem::exists(power) ? read_uj_file(power) : 0.0;
}

double RaplMeter::read_joules() { return read_uj_file(zone_ / "energy_uj"); }

double RaplMeter::max_window_seconds() const {
  // Without a published power limit assume a generous 250 W package.
  const double watts = max_power_w_ > 0.0 ? max_power_w_ : 250.0;
  return max_range_j_ / watts;
}

void RaplMeter::idle_for(double seconds) {
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

MockMeter::MockMeter(MockMeterConfig config)
    : config_(std::move(config)), counter_(config_.initial_joules) {
  if (config_.max_range_joules <= 0.0) {
    throw PreconditionError("mock meter range must be positive");
  }
}

void MockMeter::charge(double joules) {
  counter_ += joules;
  while (counter_ >= config_.max_range_joules) counter_ -= config_.max_range_joules;
}

void MockMeter::idle_for(double seconds) {
  clock_s_ += seconds;
  charge(config_.idle_watts * seconds);
}

double MockMeter::active_watts(const std::string& workload_class) const {
  const auto it = config_.active_watts.find(workload_class);
  return it == config_.active_watts.end() ? config_.default_active_watts : it->second;
}

void MockMeter::run_active(const std::string& workload_class, double seconds) {
  clock_s_ += seconds;
  charge(active_watts(workload_class) * seconds);
}

Workload shell_workload(std::string command, std::string workload_class,
                        double modeled_seconds) {
  Workload w;
  w.label = command;
  w.workload_class = std::move(workload_class);
  w.modeled_seconds = modeled_seconds;
  w.action = [cmd = std::move(command)] { return run_shell(cmd); };
  return w;
}

RunOutcome RealExecutor::run(const Workload& w) {
  const auto start = std::chrono::steady_clock::now();
  const int code = w.action ? w.action() : 0;
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  return {code, elapsed.count()};
}

RunOutcome SimulatedExecutor::run(const Workload& w) {
  const int code = (run_actions_ && w.action) ? w.action() : 0;
  meter_.run_active(w.workload_class, w.modeled_seconds);
  return {code, w.modeled_seconds};
}

double read_energy_delta(const EnergyMeter& meter, double t0_joules,
                         double t1_joules) {
  const double range = meter.max_range_joules();
  if (t0_joules < 0.0 || t1_joules < 0.0 || t0_joules > range || t1_joules > range) {
    throw MeterError("energy reading outside the counter range");
  }
  if (t1_joules >= t0_joules) return t1_joules - t0_joules;
  return t1_joules + range - t0_joules;
}

double measure_idle_baseline(EnergyMeter& meter, double seconds) {
  if (!(seconds > 0.0)) throw PreconditionError("idle window must be > 0 s");
  if (seconds > meter.max_window_seconds()) {
    throw MeterError("idle window longer than the meter's unambiguous range");
  }
  const double t0 = meter.read_joules();
  meter.idle_for(seconds);
  const double t1 = meter.read_joules();
  return read_energy_delta(meter, t0, t1);
}

double ci_half_width(const std::vector<double>& samples, double alpha) {
  if (samples.size() < 2) throw PreconditionError("CI test needs >= 2 samples");
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("alpha must be in (0,1)");
  const double m = static_cast<double>(samples.size());
  const double mean = mean_of(samples);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double s = std::sqrt(ss / (m - 1.0));
  if (s == 0.0) return 0.0;
  const boost::math::students_t dist(m - 1.0);
  const double t = boost::math::quantile(dist, 1.0 - (1.0 - alpha) / 2.0);
  return s * t / std::sqrt(m);
}

bool ci_test(const std::vector<double>& samples, double alpha, double beta) {
  if (!(beta > 0.0)) throw PreconditionError("beta must be > 0");
  const double half = ci_half_width(samples, alpha);
  const double mean = mean_of(samples);
  if (!(mean > 0.0)) throw PreconditionError("CI test needs a positive mean");
  return half <= beta * mean;
}

double IdleBaselineCache::idle_joules(EnergyMeter& meter, double seconds) {
  if (!(seconds > 0.0)) throw PreconditionError("idle window must be > 0 s");
  // Buckets are powers of two in duration; the bucket is measured over the
  // requested window the first time it is seen.
  const int bucket = static_cast<int>(std::ceil(std::log2(seconds)));
  const auto now = std::chrono::steady_clock::now();
  auto it = entries_.find(bucket);
  if (it == entries_.end() || now - it->second.taken > ttl_) {
    const double joules = measure_idle_baseline(meter, seconds);
    ++measurements_;
    entries_[bucket] = Entry{joules / seconds, now};
    return joules;
  }
  return it->second.watts * seconds;
}

EnergyMeasurement measure_command(EnergyMeter& meter, Executor& executor,
                                  const Workload& workload,
                                  const MeasureOptions& options) {
  const CiPolicy& ci = options.ci;
  if (ci.min_reps < 2 || ci.max_reps < ci.min_reps) {
    throw PreconditionError("CI policy needs 2 <= min_reps <= max_reps");
  }
  std::optional<MeasurementLock> lock;
  if (!options.lock_path.empty()) lock.emplace(options.lock_path);

  std::vector<double> totals, idles, durations, nets;
  EnergyMeasurement out;
  for (int rep = 0; rep < ci.max_reps; ++rep) {
    const double t0 = meter.read_joules();
    const RunOutcome run = executor.run(workload);
    const double t1 = meter.read_joules();
    if (run.exit_code != 0) {
      throw SubprocessError("'" + workload.label + "' exited with status " +
                                std::to_string(run.exit_code),
                            run.exit_code);
    }
    if (!(run.seconds > 0.0)) {
      throw MeterError("'" + workload.label + "' reported a zero-length run");
    }
    if (run.seconds > meter.max_window_seconds()) {
      throw MeterError("'" + workload.label +
                       "' ran longer than the meter can measure unambiguously");
    }
    const double total = read_energy_delta(meter, t0, t1);
    const double idle = options.idle_cache
                            ? options.idle_cache->idle_joules(meter, run.seconds)
                            : measure_idle_baseline(meter, run.seconds);
    totals.push_back(total);
    idles.push_back(idle);
    durations.push_back(run.seconds);
    nets.push_back(total - idle);

    if (static_cast<int>(nets.size()) >= ci.min_reps) {
      const double mean_net = mean_of(nets);
      if (mean_net > 0.0 && ci_test(nets, ci.alpha, ci.beta)) {
        out.passed_ci = true;
        break;
      }
    }
  }
  out.e_total = mean_of(totals);
  out.e_idle = mean_of(idles);
  out.e_net = out.e_total - out.e_idle;
  out.duration_s = mean_of(durations);
  out.n_repetitions = static_cast<int>(nets.size());
  out.net_samples = std::move(nets);
  if (out.e_net < 0.0) {
    std::cerr << "warning: negative net energy for '" << workload.label
              << "' (" << out.e_net << " J); reported unclamped\n";
  }
  return out;
}

MeasurementLock::MeasurementLock(const std::filesystem::path& path) {
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw MeterError("cannot open lock file " + path.string());
  if (::flock(fd_, LOCK_EX) != 0) {
    ::close(fd_);
    throw MeterError("cannot lock " + path.string());
  }
}

MeasurementLock::~MeasurementLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace eafrs
