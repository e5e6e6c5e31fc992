#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "esave/dataset.hpp"
#include "esave/gbdt.hpp"

namespace esave {

struct CvReport {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    SchemaId schema_id = SchemaId::reduced;
    std::array<double, kLoadLevelCount> per_level_mape{};
    double average_mape = 0.0;
    std::size_t n_records = 0;

    std::string to_json() const;
};

struct ComparisonEntry {
    std::string name;
    double estimated_wh = 0.0;
    double measured_wh = 0.0;
    double deviation_pct = 0.0;
};

struct ComparisonReport {
    std::vector<ComparisonEntry> per_workload;
    double average_deviation_pct = 0.0;

    std::string to_json() const;
};

struct WorkloadEnergy {
    std::string name;
    double wh = 0.0;
};

// Mean absolute percentage error, (100/n) * sum |a_i - p_i| / |a_i|.
// Entries with actual == 0 are excluded from the sum and tallied in
// excluded_count; all entries excluded is a data error.
double mape(std::span<const double> actual, std::span<const double> predicted,
            std::size_t* excluded_count = nullptr);

// Leakage-free k-fold CV over the model bank: per fold, medians and the 11
// models are fit on the other k-1 folds only; per-level MAPE is pooled over
// all held-out predictions.
CvReport cross_validate(const Dataset& dataset, const FeatureSchema& schema,
                        const TrainingParams& params, std::size_t k, std::uint64_t seed);

// Per-workload deviation_pct = 100 * |estimated - measured| / measured and
// their mean. Name sets must match exactly; measured values must be > 0.
ComparisonReport compare_estimates(std::span<const WorkloadEnergy> estimates,
                                   std::span<const WorkloadEnergy> measured);

// measured.csv: header `name,measured_wh`, one workload per row.
std::vector<WorkloadEnergy> parse_measured_csv(const std::string& csv_text);

}  // namespace esave
