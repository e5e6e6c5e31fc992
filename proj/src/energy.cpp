#include "esave/energy.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "csv.hpp"
#include "esave/errors.hpp"

namespace esave {

using nlohmann::json;

void VmSpec::validate() const {
    if (vcpu_count < 1) throw UsageError("vcpu_count must be >= 1");
    if (host_thread_count < 1) throw UsageError("host_thread_count must be >= 1");
    if (vcpu_count > host_thread_count) {
        throw UsageError("vcpu_count " + std::to_string(vcpu_count) +
                         " exceeds host_thread_count " + std::to_string(host_thread_count));
    }
}

double interpolate_power(const PowerCurve& curve, double util_pct) {
    double util = std::clamp(util_pct, 0.0, 100.0);
    auto lower = static_cast<std::size_t>(util / 10.0);
    if (lower >= kLoadLevelCount - 1) return curve.watts_at[kLoadLevelCount - 1];
    double t = (util - static_cast<double>(lower) * 10.0) / 10.0;
    return curve.watts_at[lower] * (1.0 - t) + curve.watts_at[lower + 1] * t;
}

EnergyEstimate integrate_energy(const PowerCurve& curve, const UtilizationTrace& trace) {
    const auto& samples = trace.samples;
    if (samples.size() < 2) {
        throw DataError("trace needs at least 2 samples to integrate, got " +
                        std::to_string(samples.size()));
    }

    std::vector<double> gaps(samples.size() - 1);
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
        gaps[i] = samples[i + 1].timestamp_s - samples[i].timestamp_s;
        if (!(gaps[i] > 0.0)) {
            throw DataError("timestamps must be strictly increasing (sample " +
                            std::to_string(i + 2) + ")");
        }
    }

    double energy_j = 0.0;
    double prev_power = interpolate_power(curve, samples[0].util_pct);
    for (std::size_t i = 1; i < samples.size(); ++i) {
        double power = interpolate_power(curve, samples[i].util_pct);
        energy_j += 0.5 * (prev_power + power) * gaps[i - 1];
        prev_power = power;
    }

    EnergyEstimate estimate;
    estimate.duration_s = samples.back().timestamp_s - samples.front().timestamp_s;
    estimate.energy_wh = energy_j / 3600.0;
    estimate.average_power_w = estimate.energy_wh * 3600.0 / estimate.duration_s;

    std::vector<double> sorted_gaps = gaps;
    std::sort(sorted_gaps.begin(), sorted_gaps.end());
    std::size_t m = sorted_gaps.size();
    double median_gap = (m % 2 == 1) ? sorted_gaps[m / 2]
                                     : 0.5 * (sorted_gaps[m / 2 - 1] + sorted_gaps[m / 2]);
    auto large_gaps = static_cast<std::size_t>(
        std::count_if(gaps.begin(), gaps.end(), [&](double g) { return g > 10.0 * median_gap; }));
    estimate.large_gap_count = large_gaps;
    if (large_gaps > 0) {
        estimate.warnings.push_back(std::to_string(large_gaps) +
                                    " inter-sample gap(s) exceed 10x the median gap (" +
                                    std::to_string(median_gap) + " s)");
    }
    if (trace.clamped_count > 0) {
        estimate.warnings.push_back(std::to_string(trace.clamped_count) +
                                    " utilization sample(s) clamped to [0,100]");
    }
    return estimate;
}

EnergyEstimate estimate_from_average(const PowerCurve& curve, double avg_util_pct,
                                     double duration_s) {
    if (!(duration_s > 0.0)) throw UsageError("duration must be > 0 seconds");
    EnergyEstimate estimate;
    estimate.duration_s = duration_s;
    double power = interpolate_power(curve, avg_util_pct);
    estimate.energy_wh = power * duration_s / 3600.0;
    estimate.average_power_w = estimate.energy_wh * 3600.0 / duration_s;
    return estimate;
}

EnergyEstimate apportion_vm(const EnergyEstimate& host, const VmSpec& vm) {
    vm.validate();
    double share = static_cast<double>(vm.vcpu_count) / static_cast<double>(vm.host_thread_count);
    EnergyEstimate out = host;
    out.energy_wh = host.energy_wh * share;
    out.average_power_w = host.average_power_w * share;
    return out;
}

double carbon_equivalent(double energy_kwh, double intensity_g_per_kwh) {
    if (intensity_g_per_kwh < 0.0) throw UsageError("carbon intensity must be >= 0");
    return energy_kwh * intensity_g_per_kwh;
}

UtilizationTrace parse_trace(const std::string& csv_text) {
    auto lines = csv::split_lines(csv_text);
    if (lines.empty()) throw DataError("empty trace: header row required");
    auto header = csv::split_line(lines[0]);
    if (header.size() != 2 || header[0] != "timestamp_s" || header[1] != "util_pct") {
        throw DataError("trace header must be exactly 'timestamp_s,util_pct'");
    }

    UtilizationTrace trace;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto fields = csv::split_line(lines[i]);
        if (fields.size() != 2) {
            throw ParseError("expected 2 fields, got " + std::to_string(fields.size()), i + 1);
        }
        auto timestamp = csv::parse_numeric_cell(fields[0], "timestamp_s", i + 1);
        auto util = csv::parse_numeric_cell(fields[1], "util_pct", i + 1);
        if (!timestamp || !util) {
            throw ParseError("blank cell in trace row", i + 1);
        }
        if (!trace.samples.empty() && *timestamp <= trace.samples.back().timestamp_s) {
            throw DataError("timestamps must be strictly increasing (row " +
                            std::to_string(i + 1) + ")");
        }
        double clamped = std::clamp(*util, 0.0, 100.0);
        if (clamped != *util) ++trace.clamped_count;
        trace.samples.push_back(TraceSample{*timestamp, clamped});
    }
    return trace;
}

std::string EnergyEstimate::to_json(std::optional<double> carbon_g) const {
    json doc = {
        {"energy_wh", energy_wh},
        {"duration_s", duration_s},
        {"average_power_w", average_power_w},
        {"warnings", warnings},
    };
    if (carbon_g) doc["carbon_g"] = *carbon_g;
    return doc.dump(2) + "\n";
}

}  // namespace esave
