#pragma once

#include <array>
#include <vector>

#include "rmpc/robot.hpp"
#include "rmpc/types.hpp"

namespace rmpc {

/// Periodic contact schedule. Each contact point carries phase
/// (global + offset) mod 1 and is in stance while that phase is below the
/// switch value. Toe and heel of a foot share an offset (flat-footed gait);
/// switch = 1 pins every point in stance (standing), > 0.5 yields double
/// stance, < 0.5 a flight phase.
struct GaitState {
  double phase = 0.0;  // global phase in [0, 1)
  double period = 0.8;
  double phase_switch = 0.5;
  // Offsets in contact order (R toe, R heel, L toe, L heel).
  std::array<double, kNumContacts> offsets = {0.5, 0.5, 0.0, 0.0};

  double contact_phase(int c) const;
  bool in_stance(int c) const;
  /// Swing progress in [0, 1); only meaningful while in swing.
  double swing_time(int c) const;

  static GaitState standing(double period = 0.8);
};

/// phase' = (phase + dt / period) mod 1.
GaitState advance_phase(const GaitState& gait, double dt);

/// Stance flags over a prediction horizon; node i uses the phase advanced by
/// the cumulative dt of nodes 0..i-1.
std::vector<std::array<bool, kNumContacts>> horizon_contact_flags(
    const GaitState& gait, const std::vector<double>& dt_schedule);

/// Per-contact swing progress at each horizon node (value in [0,1); stance
/// nodes carry 0).
std::vector<std::array<double, kNumContacts>> horizon_swing_times(
    const GaitState& gait, const std::vector<double>& dt_schedule);

/// Quintic Bezier swing-height profile through (0, z_swing, 0) with endpoint
/// slopes v_to and v_td; the two free interior control points are set equal,
/// which makes the curve unique. Returns height and slope at normalized swing
/// time t_sw (clamped to [0, 1]).
struct BezierPoint {
  double height;
  double velocity;
};
BezierPoint bezier_swing(double t_sw, double z_swing, double v_to, double v_td);

}  // namespace rmpc
