#pragma once

#include <string>

#include "geomvd/render.hpp"
#include "geomvd/tensor.hpp"

namespace geomvd {

/// Geometric attention strength schedule over diffusion steps. t counts the
/// noise level: t = T is the noisiest state at the start of sampling, so the
/// geometry weight is largest early in the reverse loop and decays toward
/// lambda_min at t = T/2, below which it is 0.
///
/// lambda_max == 0 is an explicit off switch (schedule identically zero);
/// otherwise 0 < lambda_min < lambda_max <= 1 must hold.
struct ScheduleParams {
    int total_steps_T = 1000;
    double lambda_max = 0.3;
    double lambda_min = 1e-5;
    bool clamp_negative_cos = true;

    void validate() const;
};

/// Angle in [0, pi] between the target-to-camera directions of the two
/// poses: arccos(clamp(d_t . d_i, -1, 1)).
double view_deviation(const CameraPose& target, const CameraPose& input_view);

/// Scale used by apply_geo_mask: cos(delta_theta), clamped below at 0 when
/// clamp_negative_cos is set (a back view attenuates to nothing rather than
/// sign-flipping the features).
double geo_mask_scale(double delta_theta, const ScheduleParams& p);

/// Scales every feature entry by geo_mask_scale(delta_theta).
FeatureTensor apply_geo_mask(const FeatureTensor& f_geo, double delta_theta,
                             const ScheduleParams& p);

/// Piecewise schedule on t in [0, T]:
///   0                                              for t <  T/2
///   lambda_min * (lambda_max/lambda_min)^((t - T/2)/(T/2))  for t >= T/2
/// t may be fractional; values outside [0, T] are a range error.
double lambda_geo(double t, const ScheduleParams& p);

/// CSV dump with header `t,lambda_geo`, one row per integer t in [0, T],
/// 12 significant digits.
void dump_schedule(const ScheduleParams& p, const std::string& path);

} // namespace geomvd
