#ifndef ORBITGUARD_INGEST_HPP
#define ORBITGUARD_INGEST_HPP

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "orbitguard/dynamics.hpp"
#include "orbitguard/engine.hpp"

namespace orbitguard {

// ---------------------------------------------------------------------------
// Errors

/// Base for record-level TLE problems; `line()` is 1-based in the input.
class TleError : public std::runtime_error {
 public:
  TleError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ChecksumMismatch : public TleError {
 public:
  using TleError::TleError;
};

class FieldOutOfRange : public TleError {
 public:
  using TleError::TleError;
};

class MalformedLine : public TleError {
 public:
  using TleError::TleError;
};

class NewtonNonconvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptySource : public std::invalid_argument {
 public:
  EmptySource() : std::invalid_argument("cannot scale an empty catalog") {}
};

// ---------------------------------------------------------------------------
// TLE text

struct TleRecord {
  std::string name;  // empty for the 2-line format
  std::string line1;
  std::string line2;
  std::size_t source_line = 0;  // input line number of line1

  std::uint32_t catalog_number = 0;
  int epoch_year = 0;  // four digits
  double epoch_day = 0.0;
  double inclination_deg = 0.0;
  double raan_deg = 0.0;
  double eccentricity = 0.0;
  double arg_perigee_deg = 0.0;
  double mean_anomaly_deg = 0.0;
  double mean_motion_rev_day = 0.0;
};

/// Modulo-10 sum over the first 68 columns: digits count their value, '-'
/// counts 1, everything else 0.
int tle_checksum(std::string_view line);

/// Parses one record. `line1_number` is used in error messages.
/// Throws ChecksumMismatch, FieldOutOfRange or MalformedLine.
TleRecord parse_tle_record(std::string_view name, std::string_view line1,
                           std::string_view line2, std::size_t line1_number);

struct TleDiagnostic {
  std::size_t line = 0;
  std::string message;
};

struct TleParseResult {
  std::vector<TleRecord> records;
  std::vector<TleDiagnostic> diagnostics;  // skipped records (lenient mode)
};

enum class ParseMode { lenient, strict };

/// Parses 2-line and 3-line records, mixed freely. Lenient mode skips bad
/// records and reports them; strict mode throws the first error.
TleParseResult parse_tle(std::string_view text, ParseMode mode = ParseMode::lenient);

/// Mean-element fields carried by a TLE, in TLE units.
struct TleFields {
  double inclination_deg = 0.0;
  double raan_deg = 0.0;
  double eccentricity = 0.0;
  double arg_perigee_deg = 0.0;
  double mean_anomaly_deg = 0.0;
  double mean_motion_rev_day = 0.0;
};

TleFields fields_of(const TleRecord& rec);

/// Builds a record whose two lines are valid 69-column TLE text with
/// checksums. Fields are rounded to the format's precision.
TleRecord format_tle(std::uint32_t catalog_number, std::string_view name,
                     const TleFields& fields, int epoch_year = 2024,
                     double epoch_day = 1.0);

// ---------------------------------------------------------------------------
// Elements

struct KeplerSolution {
  double eccentric_anomaly = 0.0;
  int iterations = 0;
  double residual = 0.0;  // |E - e sin E - M|
};

/// Newton iteration on M = E - e sin E to 1e-12, at most 50 iterations.
KeplerSolution solve_kepler(double mean_anomaly, double e);

double true_from_eccentric(double eccentric_anomaly, double e);
double eccentric_from_true(double true_anomaly, double e);

/// Throws NewtonNonconvergence, or std::invalid_argument for fields that do
/// not describe an elliptical orbit.
OrbitalElements tle_to_elements(const TleRecord& rec, GravParam mu = {});
OrbitalElements fields_to_elements(const TleFields& fields, GravParam mu = {});

/// Inverse of fields_to_elements; angles land in [0, 360).
TleFields elements_to_fields(const OrbitalElements& el, GravParam mu = {});

// ---------------------------------------------------------------------------
// Catalogs

struct CatalogEntry {
  ObjectId id = 0;
  OrbitalElements elements;
  double radius = 0.0;
};

struct DedupeResult {
  std::vector<CatalogEntry> kept;
  /// (removed id, id of the entry it duplicates), in input order.
  std::vector<std::pair<ObjectId, ObjectId>> removed;
};

/// Keeps the first of every group whose six elements agree within `tol`
/// (relative for a, absolute for e and angles).
DedupeResult dedupe(const std::vector<CatalogEntry>& entries, double tol = 1e-12);

/// Truncates to n_target, or appends synthetic entries whose elements (and
/// radius) are drawn independently from the source's empirical values.
/// Synthetic ids continue after the largest source id. Deterministic in
/// `seed` on every platform. Throws EmptySource.
std::vector<CatalogEntry> scale_catalog(const std::vector<CatalogEntry>& source,
                                        std::size_t n_target, std::uint64_t seed);

std::vector<CatalogEntry> catalog_from_tle(const std::vector<TleRecord>& records,
                                           double radius, GravParam mu = {});

/// Canonical text format: '#' comment lines, then one object per line:
/// id a e i raan argp nu0 r (meters, radians).
void write_catalog(std::ostream& out, const std::vector<CatalogEntry>& entries);
std::vector<CatalogEntry> read_catalog(std::istream& in);

struct LoadedCatalog {
  std::vector<CatalogEntry> entries;
  std::vector<TleDiagnostic> diagnostics;
  bool from_tle = false;
};

/// Reads a TLE or canonical catalog, detected from the content. TLE radii
/// are set to `tle_radius`. Throws std::runtime_error if unreadable.
LoadedCatalog load_catalog(const std::string& path, double tle_radius,
                           ParseMode mode = ParseMode::lenient, GravParam mu = {});

ProblemInstance make_instance(const std::vector<CatalogEntry>& entries, double horizon_s,
                              double step_s, GravParam mu = {});

}  // namespace orbitguard

#endif  // ORBITGUARD_INGEST_HPP
