#include "orbitguard/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace orbitguard {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kDeg = kPi / 180.0;
constexpr double kSecondsPerDay = 86400.0;
constexpr std::size_t kTleWidth = 69;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

// Columns are 1-based and inclusive, as in the published format.
std::string_view columns(std::string_view line, std::size_t first, std::size_t last) {
  return line.substr(first - 1, last - first + 1);
}

double parse_number(std::string_view line, std::size_t first, std::size_t last,
                    const char* what, std::size_t line_no) {
  std::string_view field = trim(columns(line, first, last));
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || end != field.data() + field.size()) {
    throw MalformedLine(std::string("unreadable ") + what + " field '" +
                            std::string(columns(line, first, last)) + "'",
                        line_no);
  }
  return value;
}

// Five-character catalog number, including the alpha-5 extension where a
// leading letter (I and O skipped) stands for 10..33.
std::uint32_t parse_catalog_number(std::string_view line, std::size_t line_no) {
  std::string_view field = trim(columns(line, 3, 7));
  if (field.empty()) throw MalformedLine("missing catalog number", line_no);
  std::uint32_t prefix = 0;
  if (field.front() >= 'A' && field.front() <= 'Z') {
    const char c = field.front();
    if (c == 'I' || c == 'O') throw MalformedLine("invalid alpha-5 catalog number", line_no);
    prefix = static_cast<std::uint32_t>(c - 'A' + 10 - (c > 'I') - (c > 'O'));
    field.remove_prefix(1);
    if (field.size() != 4) throw MalformedLine("invalid alpha-5 catalog number", line_no);
  }
  std::uint32_t value = 0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw MalformedLine("unreadable catalog number", line_no);
  }
  return prefix * 10000 + value;
}

std::string_view checked_line(std::string_view raw, char tag, std::size_t line_no) {
  std::string_view line = raw;
  while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.remove_suffix(1);
  if (line.size() != kTleWidth) {
    throw MalformedLine("expected " + std::to_string(kTleWidth) + " columns, found " +
                            std::to_string(line.size()),
                        line_no);
  }
  if (line[0] != tag || line[1] != ' ') {
    throw MalformedLine(std::string("line must start with '") + tag + " '", line_no);
  }
  const char digit = line[kTleWidth - 1];
  if (digit < '0' || digit > '9') throw MalformedLine("checksum column is not a digit", line_no);
  const int expected = tle_checksum(line);
  if (digit - '0' != expected) {
    throw ChecksumMismatch("checksum " + std::string(1, digit) + " does not match computed " +
                               std::to_string(expected),
                           line_no);
  }
  return line;
}

void require_range(double value, double lo, double hi, bool hi_inclusive, const char* what,
                   std::size_t line_no) {
  const bool ok = value >= lo && (hi_inclusive ? value <= hi : value < hi);
  if (!ok) {
    std::ostringstream msg;
    msg << what << ' ' << value << " outside [" << lo << ", " << hi << (hi_inclusive ? "]" : ")");
    throw FieldOutOfRange(msg.str(), line_no);
  }
}

bool starts_tle_line(std::string_view line, char tag) {
  return line.size() >= 2 && line[0] == tag && line[1] == ' ';
}

double wrap_two_pi(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r >= kTwoPi ? 0.0 : r;
}

double wrap_degrees(double x) {
  double r = std::fmod(x, 360.0);
  if (r < 0.0) r += 360.0;
  return r >= 360.0 ? 0.0 : r;
}

// SplitMix64: fixed output on every platform, unlike std distributions.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n) by rejection.
  std::size_t below(std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

 private:
  std::uint64_t state_;
};

bool close(double x, double y, double tol) { return std::abs(x - y) <= tol; }

bool same_elements(const OrbitalElements& x, const OrbitalElements& y, double tol) {
  return close(x.a, y.a, tol * std::max(x.a, y.a)) && close(x.e, y.e, tol) &&
         close(x.i, y.i, tol) && close(x.raan, y.raan, tol) &&
         close(x.arg_perigee, y.arg_perigee, tol) && close(x.nu0, y.nu0, tol);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

bool parse_canonical_line(std::string_view line, CatalogEntry& entry) {
  std::istringstream in{std::string(line)};
  OrbitalElements& el = entry.elements;
  if (!(in >> entry.id >> el.a >> el.e >> el.i >> el.raan >> el.arg_perigee >> el.nu0 >>
        entry.radius)) {
    return false;
  }
  std::string rest;
  return !(in >> rest);
}

}  // namespace

// ---------------------------------------------------------------------------
// TLE text

int tle_checksum(std::string_view line) {
  int sum = 0;
  const std::size_t n = std::min<std::size_t>(line.size(), kTleWidth - 1);
  for (std::size_t k = 0; k < n; ++k) {
    const char c = line[k];
    if (c >= '0' && c <= '9') {
      sum += c - '0';
    } else if (c == '-') {
      sum += 1;
    }
  }
  return sum % 10;
}

TleRecord parse_tle_record(std::string_view name, std::string_view raw1, std::string_view raw2,
                           std::size_t line1_number) {
  const std::size_t n1 = line1_number;
  const std::size_t n2 = line1_number + 1;
  const std::string_view l1 = checked_line(raw1, '1', n1);
  const std::string_view l2 = checked_line(raw2, '2', n2);

  TleRecord rec;
  rec.name = std::string(trim(name));
  if (rec.name.size() >= 2 && rec.name[0] == '0' && rec.name[1] == ' ') {
    rec.name = std::string(trim(std::string_view(rec.name).substr(2)));
  }
  rec.line1 = std::string(l1);
  rec.line2 = std::string(l2);
  rec.source_line = line1_number;

  rec.catalog_number = parse_catalog_number(l1, n1);
  if (parse_catalog_number(l2, n2) != rec.catalog_number) {
    throw MalformedLine("catalog number differs from line 1", n2);
  }
  const int yy = static_cast<int>(parse_number(l1, 19, 20, "epoch year", n1));
  rec.epoch_year = yy < 57 ? 2000 + yy : 1900 + yy;
  rec.epoch_day = parse_number(l1, 21, 32, "epoch day", n1);
  require_range(rec.epoch_day, 1.0, 367.0, false, "epoch day", n1);

  rec.inclination_deg = parse_number(l2, 9, 16, "inclination", n2);
  rec.raan_deg = parse_number(l2, 18, 25, "RAAN", n2);
  const std::string_view ecc = columns(l2, 27, 33);
  if (!std::all_of(ecc.begin(), ecc.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw MalformedLine("eccentricity must be seven digits with an implied decimal point", n2);
  }
  rec.eccentricity = parse_number(l2, 27, 33, "eccentricity", n2) * 1e-7;
  rec.arg_perigee_deg = parse_number(l2, 35, 42, "argument of perigee", n2);
  rec.mean_anomaly_deg = parse_number(l2, 44, 51, "mean anomaly", n2);
  rec.mean_motion_rev_day = parse_number(l2, 53, 63, "mean motion", n2);

  require_range(rec.inclination_deg, 0.0, 180.0, true, "inclination", n2);
  require_range(rec.raan_deg, 0.0, 360.0, false, "RAAN", n2);
  require_range(rec.eccentricity, 0.0, 1.0, false, "eccentricity", n2);
  require_range(rec.arg_perigee_deg, 0.0, 360.0, false, "argument of perigee", n2);
  require_range(rec.mean_anomaly_deg, 0.0, 360.0, false, "mean anomaly", n2);
  if (!(rec.mean_motion_rev_day > 0.0)) {
    throw FieldOutOfRange("mean motion must be positive", n2);
  }
  return rec;
}

TleParseResult parse_tle(std::string_view text, ParseMode mode) {
  TleParseResult result;
  const std::vector<std::string_view> lines = split_lines(text);
  auto blank = [](std::string_view s) { return trim(s).empty(); };

  std::size_t k = 0;
  while (k < lines.size()) {
    if (blank(lines[k])) {
      ++k;
      continue;
    }
    std::string_view name;
    std::size_t first = k;
    if (!(starts_tle_line(lines[k], '1') && k + 1 < lines.size() &&
          starts_tle_line(lines[k + 1], '2'))) {
      name = lines[k];
      first = k + 1;
    }
    const bool complete = first + 1 < lines.size() && starts_tle_line(lines[first], '1') &&
                          starts_tle_line(lines[first + 1], '2');
    if (!complete) {
      MalformedLine err("not part of a two- or three-line element set", k + 1);
      if (mode == ParseMode::strict) throw err;
      result.diagnostics.push_back({k + 1, err.what()});
      ++k;
      continue;
    }
    try {
      result.records.push_back(
          parse_tle_record(name, lines[first], lines[first + 1], first + 1));
    } catch (const TleError& err) {
      if (mode == ParseMode::strict) throw;
      result.diagnostics.push_back({err.line(), err.what()});
    }
    k = first + 2;
  }
  return result;
}

TleFields fields_of(const TleRecord& rec) {
  return {rec.inclination_deg, rec.raan_deg,         rec.eccentricity,
          rec.arg_perigee_deg, rec.mean_anomaly_deg, rec.mean_motion_rev_day};
}

TleRecord format_tle(std::uint32_t catalog_number, std::string_view name,
                     const TleFields& f, int epoch_year, double epoch_day) {
  if (catalog_number > 99999) throw std::invalid_argument("catalog number exceeds five digits");
  char buf[96];
  std::snprintf(buf, sizeof buf, "1 %05uU %02d%03uA   %02d%012.8f  .00000000  00000-0  00000-0 0  999",
                catalog_number, epoch_year % 100, 1 + catalog_number % 999, epoch_year % 100,
                epoch_day);
  std::string l1(buf);

  auto angle = [](double deg) {
    // Round first so that 359.99999 does not print as 360.0000.
    const double r = std::round(wrap_degrees(deg) * 1e4) / 1e4;
    return r >= 360.0 ? 0.0 : r;
  };
  const long ecc = std::lround(std::clamp(f.eccentricity, 0.0, 0.9999999) * 1e7);
  std::snprintf(buf, sizeof buf, "2 %05u %8.4f %8.4f %07ld %8.4f %8.4f %11.8f%5d", catalog_number,
                std::clamp(f.inclination_deg, 0.0, 180.0), angle(f.raan_deg), ecc,
                angle(f.arg_perigee_deg), angle(f.mean_anomaly_deg), f.mean_motion_rev_day, 1);
  std::string l2(buf);
  if (l1.size() != kTleWidth - 1 || l2.size() != kTleWidth - 1) {
    throw std::invalid_argument("fields do not fit the TLE columns");
  }
  l1 += static_cast<char>('0' + tle_checksum(l1));
  l2 += static_cast<char>('0' + tle_checksum(l2));
  return parse_tle_record(name, l1, l2, 1);
}

// ---------------------------------------------------------------------------
// Elements

KeplerSolution solve_kepler(double mean_anomaly, double e) {
  if (!(e >= 0.0 && e < 1.0)) throw std::invalid_argument("eccentricity must lie in [0, 1)");
  KeplerSolution sol;
  const double m = mean_anomaly;
  double ecc_anom = e < 0.8 ? m : kPi;
  auto residual = [&](double x) { return x - e * std::sin(x) - m; };
  for (sol.iterations = 0; sol.iterations < 50; ++sol.iterations) {
    const double f = residual(ecc_anom);
    const double next = ecc_anom - f / (1.0 - e * std::cos(ecc_anom));
    if (std::abs(f) < 1e-12) {
      // One polishing step, kept only if it lowers the residual.
      if (std::abs(residual(next)) < std::abs(f)) {
        ecc_anom = next;
        ++sol.iterations;
      }
      break;
    }
    ecc_anom = next;
  }
  sol.eccentric_anomaly = ecc_anom;
  sol.residual = std::abs(residual(ecc_anom));
  if (!(sol.residual < 1e-12)) {
    throw NewtonNonconvergence("Kepler's equation did not converge for M = " +
                               std::to_string(mean_anomaly) + ", e = " + std::to_string(e));
  }
  return sol;
}

double true_from_eccentric(double eccentric_anomaly, double e) {
  return 2.0 * std::atan2(std::sqrt(1.0 + e) * std::sin(0.5 * eccentric_anomaly),
                          std::sqrt(1.0 - e) * std::cos(0.5 * eccentric_anomaly));
}

double eccentric_from_true(double true_anomaly, double e) {
  return 2.0 * std::atan2(std::sqrt(1.0 - e) * std::sin(0.5 * true_anomaly),
                          std::sqrt(1.0 + e) * std::cos(0.5 * true_anomaly));
}

OrbitalElements fields_to_elements(const TleFields& f, GravParam mu) {
  if (!(f.mean_motion_rev_day > 0.0)) throw std::invalid_argument("mean motion must be positive");
  if (!(f.eccentricity >= 0.0 && f.eccentricity < 1.0)) {
    throw std::invalid_argument("eccentricity must lie in [0, 1)");
  }
  const double n = f.mean_motion_rev_day * kTwoPi / kSecondsPerDay;
  OrbitalElements el;
  el.a = std::cbrt(mu.mu / (n * n));
  el.e = f.eccentricity;
  el.i = f.inclination_deg * kDeg;
  el.raan = f.raan_deg * kDeg;
  el.arg_perigee = f.arg_perigee_deg * kDeg;
  const double m = f.mean_anomaly_deg * kDeg;
  if (el.e == 0.0) {
    el.nu0 = m;
  } else {
    const KeplerSolution sol = solve_kepler(m, el.e);
    el.nu0 = wrap_two_pi(true_from_eccentric(sol.eccentric_anomaly, el.e));
  }
  el.validate();
  return el;
}

OrbitalElements tle_to_elements(const TleRecord& rec, GravParam mu) {
  return fields_to_elements(fields_of(rec), mu);
}

TleFields elements_to_fields(const OrbitalElements& el, GravParam mu) {
  el.validate();
  TleFields f;
  const double n = std::sqrt(mu.mu / (el.a * el.a * el.a));
  f.mean_motion_rev_day = n * kSecondsPerDay / kTwoPi;
  f.eccentricity = el.e;
  f.inclination_deg = el.i / kDeg;
  f.raan_deg = wrap_degrees(el.raan / kDeg);
  f.arg_perigee_deg = wrap_degrees(el.arg_perigee / kDeg);
  double m = el.nu0;
  if (el.e != 0.0) {
    const double ecc_anom = eccentric_from_true(el.nu0, el.e);
    m = ecc_anom - el.e * std::sin(ecc_anom);
  }
  f.mean_anomaly_deg = wrap_degrees(m / kDeg);
  return f;
}

// ---------------------------------------------------------------------------
// Catalogs

DedupeResult dedupe(const std::vector<CatalogEntry>& entries, double tol) {
  const std::size_t n = entries.size();
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const double ax = entries[x].elements.a, ay = entries[y].elements.a;
    return ax != ay ? ax < ay : x < y;
  });

  // keeper[k] == k for kept entries, else the index of the kept duplicate.
  std::vector<std::size_t> keeper(n);
  for (std::size_t k = 0; k < n; ++k) keeper[k] = k;
  std::vector<bool> grouped(n, false);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t i = order[p];
    if (grouped[i]) continue;
    std::vector<std::size_t> group{i};
    const double a = entries[i].elements.a;
    for (std::size_t q = p + 1; q < n; ++q) {
      const std::size_t j = order[q];
      if (entries[j].elements.a - a > tol * std::max(a, entries[j].elements.a)) break;
      if (!grouped[j] && same_elements(entries[i].elements, entries[j].elements, tol)) {
        group.push_back(j);
      }
    }
    const std::size_t first = *std::min_element(group.begin(), group.end());
    for (std::size_t j : group) {
      grouped[j] = true;
      keeper[j] = first;
    }
  }

  DedupeResult result;
  for (std::size_t k = 0; k < n; ++k) {
    if (keeper[k] == k) {
      result.kept.push_back(entries[k]);
    } else {
      result.removed.emplace_back(entries[k].id, entries[keeper[k]].id);
    }
  }
  return result;
}

std::vector<CatalogEntry> scale_catalog(const std::vector<CatalogEntry>& source,
                                        std::size_t n_target, std::uint64_t seed) {
  if (source.empty()) throw EmptySource();
  if (n_target <= source.size()) {
    return {source.begin(), source.begin() + static_cast<std::ptrdiff_t>(n_target)};
  }
  std::vector<CatalogEntry> out = source;
  out.reserve(n_target);
  ObjectId next_id = 0;
  for (const CatalogEntry& e : source) next_id = std::max(next_id, e.id);
  SplitMix64 rng(seed);
  const std::size_t n = source.size();
  while (out.size() < n_target) {
    CatalogEntry e;
    e.id = ++next_id;
    e.elements.a = source[rng.below(n)].elements.a;
    e.elements.e = source[rng.below(n)].elements.e;
    e.elements.i = source[rng.below(n)].elements.i;
    e.elements.raan = source[rng.below(n)].elements.raan;
    e.elements.arg_perigee = source[rng.below(n)].elements.arg_perigee;
    e.elements.nu0 = source[rng.below(n)].elements.nu0;
    e.radius = source[rng.below(n)].radius;
    out.push_back(e);
  }
  return out;
}

std::vector<CatalogEntry> catalog_from_tle(const std::vector<TleRecord>& records, double radius,
                                           GravParam mu) {
  std::vector<CatalogEntry> out;
  out.reserve(records.size());
  for (const TleRecord& rec : records) {
    out.push_back({rec.catalog_number, tle_to_elements(rec, mu), radius});
  }
  return out;
}

void write_catalog(std::ostream& out, const std::vector<CatalogEntry>& entries) {
  out << "# orbitguard catalog v1\n"
         "# id a_m e i_rad raan_rad argp_rad nu0_rad radius_m\n";
  char buf[256];
  for (const CatalogEntry& c : entries) {
    const OrbitalElements& el = c.elements;
    std::snprintf(buf, sizeof buf, "%llu %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  static_cast<unsigned long long>(c.id), el.a, el.e, el.i, el.raan,
                  el.arg_perigee, el.nu0, c.radius);
    out << buf;
  }
}

std::vector<CatalogEntry> read_catalog(std::istream& in) {
  std::vector<CatalogEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    CatalogEntry entry;
    if (!parse_canonical_line(t, entry)) {
      throw std::runtime_error("catalog line " + std::to_string(line_no) +
                               ": expected 'id a e i raan argp nu0 r'");
    }
    try {
      entry.elements.validate();
      if (!(entry.radius >= 0.0)) throw std::invalid_argument("radius must be non-negative");
    } catch (const std::invalid_argument& err) {
      throw std::runtime_error("catalog line " + std::to_string(line_no) + ": " + err.what());
    }
    out.push_back(entry);
  }
  return out;
}

LoadedCatalog load_catalog(const std::string& path, double tle_radius, ParseMode mode,
                           GravParam mu) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open catalog '" + path + "'");
  std::ostringstream buffer;
  buffer << file.rdbuf();
  const std::string text = buffer.str();

  bool canonical = false;
  for (std::string_view line : split_lines(text)) {
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    CatalogEntry probe;
    canonical = parse_canonical_line(t, probe);
    break;
  }

  LoadedCatalog out;
  if (canonical) {
    std::istringstream in(text);
    out.entries = read_catalog(in);
    return out;
  }
  out.from_tle = true;
  TleParseResult parsed = parse_tle(text, mode);
  out.diagnostics = std::move(parsed.diagnostics);
  out.entries.reserve(parsed.records.size());
  for (const TleRecord& rec : parsed.records) {
    try {
      out.entries.push_back({rec.catalog_number, tle_to_elements(rec, mu), tle_radius});
    } catch (const std::exception& err) {
      if (mode == ParseMode::strict) throw;
      out.diagnostics.push_back({rec.source_line, err.what()});
    }
  }
  return out;
}

ProblemInstance make_instance(const std::vector<CatalogEntry>& entries, double horizon_s,
                              double step_s, GravParam mu) {
  ProblemInstance p;
  p.horizon_s = horizon_s;
  p.step_s = step_s;
  p.objects.reserve(entries.size());
  for (const CatalogEntry& c : entries) {
    p.objects.push_back({c.id, std::make_shared<KeplerModel>(c.elements, mu), c.radius});
  }
  return p;
}

}  // namespace orbitguard
