#ifndef ORBITGUARD_CLI_HPP
#define ORBITGUARD_CLI_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "orbitguard/engine.hpp"

namespace orbitguard::cli {

inline constexpr int kSchemaVersion = 1;

enum class ExitCode : int { none = 0, error = 1, witness = 2 };

enum class Command { detect, bench, gen, partition_stats };

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  Command command = Command::detect;
  std::string input;
  std::vector<Algorithm> algorithms{Algorithm::aabb_4d};
  double horizon_s = 10.0;
  double step_s = 1e-3;
  std::optional<double> radius_m;  // unset: 1 m for TLE input, file radii otherwise
  std::vector<std::size_t> partitions{1};
  std::size_t workers = 0;  // 0: ORBITGUARD_WORKERS or hardware threads
  std::uint64_t seed = 1;
  std::vector<std::size_t> n_values;  // detect/gen: at most one; bench: the sweep
  bool verify = false;
  bool dedupe = true;
  std::string out;            // report (detect), catalog (gen), CSV (bench, partition-stats)
  std::string plot_out;       // bench: long-form log-log data
  std::string bands_out;      // partition-stats: per-band counts at partitions[0]
  std::string telemetry_out;  // detect: one JSON line per main-loop iteration
  std::vector<std::size_t> sweep{1, 2, 4, 6, 8, 12, 16, 24, 32};

  /// Throws UsageError: T not a multiple of the step, p = 0, a missing
  /// input or output, or a list with the wrong arity for the command.
  void validate() const;
};

/// Each returns the process exit status; the witness line or CSV goes to
/// `out` unless an output path is configured.
int cmd_detect(const RunConfig& cfg, std::ostream& out);
int cmd_bench(const RunConfig& cfg, std::ostream& out);
int cmd_gen(const RunConfig& cfg, std::ostream& out);
int cmd_partition_stats(const RunConfig& cfg, std::ostream& out);

/// Parses arguments (without the program name) and dispatches. Errors are
/// reported on `err` with exit status 1.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace orbitguard::cli

#endif  // ORBITGUARD_CLI_HPP
