#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace eafrs {

/// Cumulative energy counter (RAPL-style): monotone modulo wraparound.
class EnergyMeter {
 public:
  virtual ~EnergyMeter() = default;
  virtual double read_joules() = 0;
  virtual double resolution_joules() const = 0;
  virtual double max_range_joules() const = 0;
  /// Longest window whose delta is still unambiguous (one wrap at most).
  virtual double max_window_seconds() const {
    return std::numeric_limits<double>::infinity();
  }
  /// Leave the machine idle for `seconds` (real sleep or simulated time).
  virtual void idle_for(double seconds) = 0;
  virtual std::string name() const = 0;
};

/// Reads `energy_uj` / `max_energy_range_uj` from a powercap zone such as
/// /sys/class/powercap/intel-rapl:0.
class RaplMeter final : public EnergyMeter {
 public:
  explicit RaplMeter(std::filesystem::path zone =
                         "/sys/class/powercap/intel-rapl:0");
  double read_joules() override;
  double resolution_joules() const override { return 1e-6; }
  double max_range_joules() const override { return max_range_j_; }
  double max_window_seconds() const override;
  void idle_for(double seconds) override;
  std::string name() const override { return "rapl:" + zone_.filename().string(); }

 private:
  std::filesystem::path zone_;
  double max_range_j_ = 0.0;
  double max_power_w_ = 0.0;
};

struct MockMeterConfig {
  double idle_watts = 5.0;
  double default_active_watts = 30.0;
  /// Active power per workload class ("encode", "decode", "features", ...).
  std::map<std::string, double> active_watts;
  double max_range_joules = 262144.0;
  double initial_joules = 0.0;
};

/// Deterministic simulated machine: energy is integrated over simulated
/// time at the configured wattages, so measurements repeat to the last bit.
class MockMeter final : public EnergyMeter {
 public:
  explicit MockMeter(MockMeterConfig config = {});
  double read_joules() override { return counter_; }
  double resolution_joules() const override { return 0.0; }
  double max_range_joules() const override { return config_.max_range_joules; }
  void idle_for(double seconds) override;
  std::string name() const override { return "mock"; }

  /// Advance simulated time at the active power of `workload_class`.
  void run_active(const std::string& workload_class, double seconds);
  double active_watts(const std::string& workload_class) const;
  double simulated_seconds() const { return clock_s_; }
  const MockMeterConfig& config() const { return config_; }

 private:
  void charge(double joules);

  MockMeterConfig config_;
  double counter_;
  double clock_s_ = 0.0;
};

/// Something to run under measurement.
struct Workload {
  std::string label;
  std::string workload_class;
  /// Returns an exit status; 0 means success.
  std::function<int()> action;
  /// Duration used by simulated executors, in seconds.
  double modeled_seconds = 0.0;
};

/// Wraps a shell command line as a workload action (via /bin/sh -c).
Workload shell_workload(std::string command, std::string workload_class,
                        double modeled_seconds = 0.0);

struct RunOutcome {
  int exit_code = 0;
  double seconds = 0.0;
};

class Executor {
 public:
  virtual ~Executor() = default;
  virtual RunOutcome run(const Workload& w) = 0;
};

/// Runs the action and measures wall-clock time.
class RealExecutor final : public Executor {
 public:
  RunOutcome run(const Workload& w) override;
};

/// Runs the action for its side effects (optional) and charges the mock
/// meter `modeled_seconds` at the workload class's active power.
class SimulatedExecutor final : public Executor {
 public:
  explicit SimulatedExecutor(MockMeter& meter, bool run_actions = true)
      : meter_(meter), run_actions_(run_actions) {}
  RunOutcome run(const Workload& w) override;

 private:
  MockMeter& meter_;
  bool run_actions_;
};

/// t1 - t0 corrected by +max_range when the counter wrapped.
double read_energy_delta(const EnergyMeter& meter, double t0_joules,
                         double t1_joules);

double measure_idle_baseline(EnergyMeter& meter, double seconds);

/// Two-sided Student-t interval half-width s * t / sqrt(m) <= beta * mean.
bool ci_test(const std::vector<double>& samples, double alpha, double beta);

/// Half-width of the interval used by ci_test.
double ci_half_width(const std::vector<double>& samples, double alpha);

struct CiPolicy {
  double alpha = 0.99;
  double beta = 0.02;
  int min_reps = 2;
  int max_reps = 20;
};

/// Idle energy per (T bucket) with a time-to-live; stores idle power.
class IdleBaselineCache {
 public:
  explicit IdleBaselineCache(std::chrono::seconds ttl = std::chrono::seconds(600))
      : ttl_(ttl) {}
  /// Idle joules for a window of `seconds`; measures when missing or stale.
  double idle_joules(EnergyMeter& meter, double seconds);
  void clear() { entries_.clear(); }
  std::size_t measurements() const { return measurements_; }

 private:
  struct Entry {
    double watts;
    std::chrono::steady_clock::time_point taken;
  };
  std::chrono::seconds ttl_;
  std::map<int, Entry> entries_;
  std::size_t measurements_ = 0;
};

struct EnergyMeasurement {
  double e_total = 0.0;
  double e_idle = 0.0;
  double e_net = 0.0;
  double duration_s = 0.0;
  int n_repetitions = 0;
  bool passed_ci = false;
  std::vector<double> net_samples;
};

struct MeasureOptions {
  CiPolicy ci{};
  /// Shared idle cache; nullptr measures idle after every run.
  IdleBaselineCache* idle_cache = nullptr;
  /// Process-level lock file taken for the whole measurement; empty = none.
  std::filesystem::path lock_path;
};

/// Repeats the workload until the CI criterion on net energies passes or
/// max_reps is reached. Values are means over the repetitions.
EnergyMeasurement measure_command(EnergyMeter& meter, Executor& executor,
                                  const Workload& workload,
                                  const MeasureOptions& options = {});

/// Exclusive advisory lock (flock) held for the object's lifetime.
class MeasurementLock {
 public:
  explicit MeasurementLock(const std::filesystem::path& path);
  ~MeasurementLock();
  MeasurementLock(const MeasurementLock&) = delete;
  MeasurementLock& operator=(const MeasurementLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace eafrs
