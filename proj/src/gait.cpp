#include "rmpc/gait.hpp"

#include <cmath>

namespace rmpc {

namespace {
inline double wrap01(double x) {
  const double w = std::fmod(x, 1.0);
  return w < 0.0 ? w + 1.0 : w;
}
}  // namespace

double GaitState::contact_phase(int c) const { return wrap01(phase + offsets[c]); }

bool GaitState::in_stance(int c) const { return contact_phase(c) < phase_switch; }

double GaitState::swing_time(int c) const {
  const double ph = contact_phase(c);
  if (ph < phase_switch || phase_switch >= 1.0) return 0.0;
  return (ph - phase_switch) / (1.0 - phase_switch);
}

GaitState GaitState::standing(double period) {
  GaitState g;
  g.period = period;
  g.phase_switch = 1.0;  // every contact in stance
  return g;
}

GaitState advance_phase(const GaitState& gait, double dt) {
  GaitState out = gait;
  out.phase = wrap01(gait.phase + dt / gait.period);
  return out;
}

std::vector<std::array<bool, kNumContacts>> horizon_contact_flags(
    const GaitState& gait, const std::vector<double>& dt_schedule) {
  std::vector<std::array<bool, kNumContacts>> flags(dt_schedule.size());
  double shift = 0.0;
  for (size_t i = 0; i < dt_schedule.size(); ++i) {
    for (int c = 0; c < kNumContacts; ++c)
      flags[i][c] = wrap01(gait.phase + shift + gait.offsets[c]) < gait.phase_switch;
    shift += dt_schedule[i] / gait.period;
  }
  return flags;
}

std::vector<std::array<double, kNumContacts>> horizon_swing_times(
    const GaitState& gait, const std::vector<double>& dt_schedule) {
  std::vector<std::array<double, kNumContacts>> times(dt_schedule.size());
  double shift = 0.0;
  for (size_t i = 0; i < dt_schedule.size(); ++i) {
    for (int c = 0; c < kNumContacts; ++c) {
      const double ph = wrap01(gait.phase + shift + gait.offsets[c]);
      times[i][c] = (ph >= gait.phase_switch && gait.phase_switch < 1.0)
                        ? (ph - gait.phase_switch) / (1.0 - gait.phase_switch)
                        : 0.0;
    }
    shift += dt_schedule[i] / gait.period;
  }
  return times;
}

BezierPoint bezier_swing(double t_sw, double z_swing, double v_to, double v_td) {
  const double t = std::min(1.0, std::max(0.0, t_sw));
  // Control points: P0 = P5 = 0 pins the endpoints, P1/P4 set the endpoint
  // slopes, and P2 = P3 solves B(1/2) = z_swing in closed form.
  const double p0 = 0.0;
  const double p1 = v_to / 5.0;
  const double p4 = -v_td / 5.0;
  const double p5 = 0.0;
  const double p2 = (32.0 * z_swing - 5.0 * (p1 + p4)) / 20.0;
  const double p3 = p2;

  const double s = 1.0 - t;
  const double b0 = s * s * s * s * s;
  const double b1 = 5.0 * s * s * s * s * t;
  const double b2 = 10.0 * s * s * s * t * t;
  const double b3 = 10.0 * s * s * t * t * t;
  const double b4 = 5.0 * s * t * t * t * t;
  const double b5 = t * t * t * t * t;

  BezierPoint out;
  out.height = b0 * p0 + b1 * p1 + b2 * p2 + b3 * p3 + b4 * p4 + b5 * p5;
  // Derivative is a 4th-order Bezier over the control-point differences.
  const double d0 = 5.0 * (p1 - p0);
  const double d1 = 5.0 * (p2 - p1);
  const double d2 = 5.0 * (p3 - p2);
  const double d3 = 5.0 * (p4 - p3);
  const double d4 = 5.0 * (p5 - p4);
  const double c0 = s * s * s * s;
  const double c1 = 4.0 * s * s * s * t;
  const double c2 = 6.0 * s * s * t * t;
  const double c3 = 4.0 * s * t * t * t;
  const double c4 = t * t * t * t;
  out.velocity = c0 * d0 + c1 * d1 + c2 * d2 + c3 * d3 + c4 * d4;
  return out;
}

}  // namespace rmpc
