// Writes the bundled synthetic TLE snapshot: a fixed-seed population shaped
// like the public catalog (dense LEO shells and debris, GNSS, GEO, GTO and
// Molniya), plus the ISS record and two copies sharing its elements.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "orbitguard/dynamics.hpp"
#include "orbitguard/ingest.hpp"

namespace og = orbitguard;

namespace {

constexpr double kEarthRadius = 6378137.0;
constexpr std::size_t kUnique = 16838;
constexpr double kPi = 3.14159265358979323846;

// Portable draws: the standard engines are fully specified, the
// distributions are not.
struct Rng {
  std::mt19937_64 eng;
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(eng() >> 11) * 0x1.0p-53;
  }
  double exponential(double mean) { return -mean * std::log1p(-uniform(0.0, 1.0)); }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform(0.0, static_cast<double>(v.size())))];
  }
};

struct Orbit {
  double a;
  double e;
  double inc_deg;
};

double mean_motion_rev_day(double a) {
  return std::sqrt(og::GravParam{}.mu / (a * a * a)) * 86400.0 / (2.0 * kPi);
}

// Keeps perigee at least 160 km up.
double cap_e(double a, double e) {
  const double e_max = 1.0 - (kEarthRadius + 160e3) / a;
  return std::clamp(e, 0.0, std::max(0.0, e_max));
}

Orbit leo(Rng& r, double alt_lo_km, double alt_hi_km, bool satellite) {
  const double a = kEarthRadius + 1e3 * r.uniform(alt_lo_km, alt_hi_km);
  const double e = satellite ? r.uniform(0.0, 0.002) : std::min(0.08, r.exponential(0.006));
  static const std::vector<double> incs{51.6, 53.0, 65.0, 74.0, 82.0, 86.4, 97.5, 98.2, 99.0};
  const double inc = r.pick(incs) + r.uniform(-0.5, 0.5);
  return {a, cap_e(a, e), inc};
}

Orbit apsides(double perigee_alt_m, double apogee_alt_m, double inc) {
  const double rp = kEarthRadius + perigee_alt_m;
  const double ra = kEarthRadius + apogee_alt_m;
  return {0.5 * (rp + ra), (ra - rp) / (ra + rp), inc};
}

std::vector<Orbit> population(Rng& r, std::size_t n) {
  struct Shell {
    double lo_km;
    double hi_km;
    std::size_t count;
    double sat_fraction;
  };
  const std::vector<Shell> shells{
      {340, 360, 300, 0.9},   {540, 570, 3000, 0.9},  {400, 500, 1200, 0.3},
      {700, 900, 3000, 0.2},  {900, 1100, 1100, 0.2}, {1100, 1300, 700, 0.6},
      {1300, 1500, 500, 0.5}, {1500, 2000, 300, 0.2},
  };
  std::vector<Orbit> out;
  auto emit_shell = [&](const Shell& s, std::size_t count) {
    for (std::size_t k = 0; k < count; ++k) {
      out.push_back(leo(r, s.lo_km, s.hi_km, r.uniform(0, 1) < s.sat_fraction));
    }
  };
  for (const Shell& s : shells) emit_shell(s, s.count);

  for (int k = 0; k < 500; ++k) {  // between LEO and MEO
    const double a = kEarthRadius + r.uniform(2.0e6, 2.0e7);
    out.push_back({a, cap_e(a, std::min(0.3, r.exponential(0.05))), r.uniform(0, 110)});
  }
  static const std::vector<double> gnss{2.5508e7, 2.6560e7, 2.7906e7, 2.9600e7};
  for (int k = 0; k < 700; ++k) {
    out.push_back({r.pick(gnss) + r.uniform(-2e5, 2e5), r.uniform(0, 0.02),
                   r.uniform(50, 66)});
  }
  for (int k = 0; k < 1000; ++k) {
    out.push_back({42164e3 + r.uniform(-3e5, 3e5), r.uniform(0, 0.003), r.uniform(0, 15)});
  }
  for (int k = 0; k < 1300; ++k) {
    out.push_back(apsides(r.uniform(1.8e5, 7e5), r.uniform(3.0e7, 3.65e7), r.uniform(0, 30)));
  }
  for (int k = 0; k < 200; ++k) {
    out.push_back({2.656e7 + r.uniform(-1e5, 1e5), r.uniform(0.70, 0.74), 63.4 + r.uniform(-1, 1)});
  }
  for (int k = 0; k < 260; ++k) {
    out.push_back(apsides(r.uniform(3e5, 2e6), r.uniform(2e6, 4e7), r.uniform(0, 100)));
  }
  // The 500-700 km band absorbs the remainder.
  const Shell fill{500, 700, 0, 0.5};
  if (out.size() < n) emit_shell(fill, n - out.size());
  out.resize(n);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_snapshot OUT.tle\n";
    return 1;
  }
  Rng rng{std::mt19937_64{20240101}};
  const std::vector<Orbit> orbits = population(rng, kUnique - 1);

  const og::TleRecord iss = og::parse_tle_record(
      "ISS (ZARYA)",
      "1 25544U 98067A   08264.51782528 -.00002182  00000-0 -11606-4 0  2927",
      "2 25544  51.6416 247.4627 0006703 130.5360 325.0288 15.72125391563537", 1);

  std::vector<og::TleRecord> records;
  records.reserve(kUnique + 2);
  records.push_back(iss);
  for (std::uint32_t copy : {49044u, 49045u}) {
    records.push_back(og::format_tle(copy, copy == 49044u ? "ISS OBJECT A" : "ISS OBJECT B",
                                     og::fields_of(iss), iss.epoch_year, iss.epoch_day));
  }

  std::uint32_t number = 0;
  char name[32];
  for (const Orbit& o : orbits) {
    do {
      number += 1 + static_cast<std::uint32_t>(rng.exponential(3.0));
    } while (number == 25544 || number == 49044 || number == 49045);
    og::TleFields f;
    f.inclination_deg = o.inc_deg;
    f.raan_deg = rng.uniform(0, 360);
    f.eccentricity = o.e;
    f.arg_perigee_deg = rng.uniform(0, 360);
    f.mean_anomaly_deg = rng.uniform(0, 360);
    f.mean_motion_rev_day = mean_motion_rev_day(o.a);
    std::snprintf(name, sizeof name, "OBJECT %05u", number);
    records.push_back(og::format_tle(number, name, f, 2024, rng.uniform(1.0, 2.0)));
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const og::TleRecord& x, const og::TleRecord& y) {
                     return x.catalog_number < y.catalog_number;
                   });

  std::ofstream out(argv[1], std::ios::binary);
  for (const og::TleRecord& rec : records) {
    out << rec.name << '\n' << rec.line1 << '\n' << rec.line2 << '\n';
  }
  if (!out) {
    std::cerr << "make_snapshot: cannot write " << argv[1] << '\n';
    return 1;
  }
  std::cerr << "wrote " << records.size() << " records\n";
  return 0;
}
