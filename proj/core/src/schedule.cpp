#include "geomvd/schedule.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>

#include "geomvd/errors.hpp"

namespace geomvd {

void ScheduleParams::validate() const {
    if (total_steps_T < 2 || total_steps_T % 2 != 0)
        throw ValidationError("total_steps_T must be even and >= 2");
    if (lambda_max == 0.0) return; // schedule disabled
    if (!(lambda_min > 0.0 && lambda_min < lambda_max && lambda_max <= 1.0))
        throw ValidationError("require 0 < lambda_min < lambda_max <= 1");
}

double view_deviation(const CameraPose& target, const CameraPose& input_view) {
    target.validate();
    input_view.validate();

    auto direction = [](const CameraPose& pose) {
        const Vec3 eye = orbit_eye(pose);
        const double dx = eye[0] - pose.target[0];
        const double dy = eye[1] - pose.target[1];
        const double dz = eye[2] - pose.target[2];
        const double n = std::sqrt(dx * dx + dy * dy + dz * dz);
        return Vec3{dx / n, dy / n, dz / n};
    };

    const Vec3 dt = direction(target);
    const Vec3 di = direction(input_view);
    double d = dt[0] * di[0] + dt[1] * di[1] + dt[2] * di[2];
    d = d < -1.0 ? -1.0 : (d > 1.0 ? 1.0 : d);
    return std::acos(d);
}

double geo_mask_scale(double delta_theta, const ScheduleParams& p) {
    if (!(delta_theta >= 0.0 && delta_theta <= std::numbers::pi))
        throw ValidationError("delta_theta must lie in [0, pi]");
    const double s = std::cos(delta_theta);
    if (p.clamp_negative_cos && s < 0.0) return 0.0;
    return s;
}

FeatureTensor apply_geo_mask(const FeatureTensor& f_geo, double delta_theta,
                             const ScheduleParams& p) {
    const double s = geo_mask_scale(delta_theta, p);
    if (s == 0.0) return FeatureTensor(f_geo.batch, f_geo.tokens, f_geo.channels); // +0 fill
    FeatureTensor out = f_geo;
    for (double& v : out.data) v *= s;
    return out;
}

double lambda_geo(double t, const ScheduleParams& p) {
    p.validate();
    const double T = static_cast<double>(p.total_steps_T);
    if (!(t >= 0.0 && t <= T))
        throw ValidationError("step index outside [0, T]");
    if (p.lambda_max == 0.0) return 0.0;
    const double half = T / 2.0;
    if (t < half) return 0.0;
    return p.lambda_min * std::pow(p.lambda_max / p.lambda_min, (t - half) / half);
}

void dump_schedule(const ScheduleParams& p, const std::string& path) {
    p.validate();
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write schedule CSV: " + path);
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> guard(f, &std::fclose);

    std::fprintf(f, "t,lambda_geo\n");
    for (int t = 0; t <= p.total_steps_T; ++t)
        std::fprintf(f, "%d,%.12g\n", t, lambda_geo(static_cast<double>(t), p));
}

} // namespace geomvd
