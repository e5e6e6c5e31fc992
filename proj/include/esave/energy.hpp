#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "esave/power_model.hpp"

namespace esave {

struct TraceSample {
    double timestamp_s = 0.0;
    double util_pct = 0.0;  // clamped to [0,100]
};

struct UtilizationTrace {
    std::vector<TraceSample> samples;  // timestamps strictly increasing
    std::size_t clamped_count = 0;     // raw values outside [0,100]
};

struct EnergyEstimate {
    double energy_wh = 0.0;
    double duration_s = 0.0;
    double average_power_w = 0.0;
    std::vector<std::string> warnings;
    std::size_t large_gap_count = 0;  // gaps > 10x median; not serialized

    std::string to_json(std::optional<double> carbon_g = std::nullopt) const;
};

struct VmSpec {
    int vcpu_count = 0;
    int host_thread_count = 0;

    void validate() const;  // throws UsageError unless 1 <= vcpu <= threads
};

// Piecewise-linear interpolation between the 11 grid points; exact at
// multiples of 10, utilization clamped to [0,100].
double interpolate_power(const PowerCurve& curve, double util_pct);

// Trapezoidal rule on instantaneous power p_i = interpolate_power(curve, u_i):
// energy_J = sum (p_i + p_{i+1})/2 * (t_{i+1} - t_i). Warns when any
// inter-sample gap exceeds 10x the median gap.
EnergyEstimate integrate_energy(const PowerCurve& curve, const UtilizationTrace& trace);

EnergyEstimate estimate_from_average(const PowerCurve& curve, double avg_util_pct,
                                     double duration_s);

// Proportional host-energy apportioning: share = vcpu_count / host_thread_count.
EnergyEstimate apportion_vm(const EnergyEstimate& host, const VmSpec& vm);

double carbon_equivalent(double energy_kwh, double intensity_g_per_kwh);

// trace.csv: header `timestamp_s,util_pct`, one sample per row. Out-of-range
// utilizations are clamped and counted; unordered timestamps are a data error.
UtilizationTrace parse_trace(const std::string& csv_text);

}  // namespace esave
