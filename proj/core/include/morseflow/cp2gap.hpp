#pragma once

#include <iosfwd>
#include <vector>

#include "morseflow/flow.hpp"

namespace morseflow {

/// Closed-form flow left the chart {sum v_i^2 < 4}.
class ChartExitError : public DomainError {
 public:
  ChartExitError(const std::string& what, double t) : DomainError(what), exit_time(t) {}
  double exit_time;
};

/// The requested connection passes through the middle critical point.
class BrokenLineError : public Error {
 public:
  using Error::Error;
};

/// Chart around the index-2 point r of a Morse function on CP^2 with
/// f = (-v1^2 - v2^2 + v3^2 + v4^2) / 2 and metric diag(1, 1/2, 1/4, 1/4).
struct Cp2LocalModel {
  static constexpr double metric[4] = {1.0, 0.5, 0.25, 0.25};
  static constexpr double exponents[4] = {1.0, 2.0, -4.0, -4.0};
  static constexpr double chart_radius_sq = 4.0;
  static double value(const Vec& v);
};

/// Time-t flow (e^t v1, e^{2t} v2, e^{-4t} v3, e^{-4t} v4). Throws
/// ChartExitError (with the first exit time) if the path leaves the chart.
Vec cp2_flow(const Vec& v, double t);

/// d(v1, v2) = v1^2/2 + sqrt(v1^4 + 4 v2^2)/2; d(t v1, t^2 v2) = t^2 d(v1, v2).
double cp2_d(double v1, double v2);

/// Follow the flow from the cylinder {v3^2 + v4^2 = 1} to {v1^2 + v2^2 = 1}:
/// (d^{-1/2} v1, d^{-1} v2, d^2 v3, d^2 v4). BrokenLineError when (v1, v2) = 0.
Vec cp2_connect_cylinders(const Vec& v);

/// Level f = 1/2 to level f = -1/2 along the unbroken flow line, via the
/// cylinder connection. BrokenLineError when (v1, v2) = 0.
Vec cp2_connect_levels(const Vec& v);

/// Integrator counterparts of the two connections on the cp2-chart system.
Vec cp2_connect_cylinders_numeric(const MorseSystem& sys, const Vec& v, const IntegratorOptions& opts = {});
Vec cp2_connect_levels_numeric(const MorseSystem& sys, const Vec& v, const IntegratorOptions& opts = {});

struct BlowupScanRow {
  double s = 0.0;
  double a = 0.0, b = 0.0;
  /// (a s, b s^2, cos phi, sin phi) on the upper cylinder.
  Vec upper;
  /// Its image on the lower cylinder; lower[0] is v5.
  Vec lower;
  double d = 0.0;
  double v5 = 0.0;
  /// a (a^2/2 + sqrt(a^4 + 4 b^2)/2)^{-1/2}.
  double limit = 0.0;
};

double blowup_limit(double a, double b);

/// Log-spaced grid s_max, s_max/10, ... down to s_min (inclusive when hit).
std::vector<double> blowup_grid(double s_min, double s_max = 0.1);

/// Rows along v1 = a s, v2 = b s^2. Requires a != 0 and a strictly
/// decreasing positive grid; phi places (v3, v4) on the unit circle.
std::vector<BlowupScanRow> c1_blowup_scan(double a, double b, const std::vector<double>& s_grid, double phi = 0.0);

/// Columns s,a,b,v1..v8,d,L.
void write_blowup_csv(std::ostream& os, const std::vector<BlowupScanRow>& rows);

}  // namespace morseflow
