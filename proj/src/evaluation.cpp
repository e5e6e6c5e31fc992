#include "esave/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"

#include "csv.hpp"
#include "esave/errors.hpp"
#include "esave/power_model.hpp"

namespace esave {

using nlohmann::json;

double mape(std::span<const double> actual, std::span<const double> predicted,
            std::size_t* excluded_count) {
    if (actual.size() != predicted.size()) {
        throw UsageError("actual and predicted lengths differ (" + std::to_string(actual.size()) +
                         " vs " + std::to_string(predicted.size()) + ")");
    }
    if (actual.empty()) throw UsageError("MAPE needs at least one entry");

    double sum = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (actual[i] == 0.0) {
            ++excluded;
            continue;
        }
        sum += std::abs(actual[i] - predicted[i]) / std::abs(actual[i]);
        ++used;
    }
    if (excluded_count) *excluded_count = excluded;
    if (used == 0) throw DataError("MAPE undefined: every actual value is zero");
    return 100.0 * sum / static_cast<double>(used);
}

CvReport cross_validate(const Dataset& dataset, const FeatureSchema& schema,
                        const TrainingParams& params, std::size_t k, std::uint64_t seed) {
    FoldAssignment assignment = assign_folds(dataset, k, seed);

    std::array<std::vector<double>, kLoadLevelCount> actual;
    std::array<std::vector<double>, kLoadLevelCount> predicted;
    for (auto& v : actual) v.reserve(dataset.size());
    for (auto& v : predicted) v.reserve(dataset.size());

    for (std::size_t fold = 0; fold < k; ++fold) {
        Dataset train;
        train.provenance = dataset.provenance;
        std::vector<const ServerRecord*> held_out;
        for (const auto& rec : dataset.records) {
            if (assignment.fold_of_record.at(rec.record_id) == fold) {
                held_out.push_back(&rec);
            } else {
                train.records.push_back(rec);
            }
        }
        ModelBank bank = train_bank(train, schema, params, /*monotone_flag=*/false);
        for (const ServerRecord* rec : held_out) {
            PowerCurve curve = predict_curve(bank, *rec);
            for (std::size_t l = 0; l < kLoadLevelCount; ++l) {
                actual[l].push_back(*rec->power_watts[l]);
                predicted[l].push_back(curve.watts_at[l]);
            }
        }
    }

    CvReport report;
    report.k = k;
    report.seed = seed;
    report.schema_id = schema.id;
    report.n_records = dataset.size();
    double total = 0.0;
    for (std::size_t l = 0; l < kLoadLevelCount; ++l) {
        report.per_level_mape[l] = mape(actual[l], predicted[l]);
        total += report.per_level_mape[l];
    }
    report.average_mape = total / static_cast<double>(kLoadLevelCount);
    return report;
}

ComparisonReport compare_estimates(std::span<const WorkloadEnergy> estimates,
                                   std::span<const WorkloadEnergy> measured) {
    std::map<std::string, double> measured_by_name;
    for (const auto& m : measured) {
        if (!measured_by_name.emplace(m.name, m.wh).second) {
            throw UsageError("duplicate workload '" + m.name + "' in measured values");
        }
    }

    ComparisonReport report;
    for (const auto& est : estimates) {
        auto it = measured_by_name.find(est.name);
        if (it == measured_by_name.end()) {
            throw UsageError("workload '" + est.name + "' has no measured value");
        }
        double meas = it->second;
        if (!(meas > 0.0)) {
            throw DataError("measured energy for '" + est.name + "' must be positive");
        }
        ComparisonEntry entry;
        entry.name = est.name;
        entry.estimated_wh = est.wh;
        entry.measured_wh = meas;
        entry.deviation_pct = 100.0 * std::abs(est.wh - meas) / meas;
        report.per_workload.push_back(std::move(entry));
        measured_by_name.erase(it);
    }
    if (!measured_by_name.empty()) {
        throw UsageError("workload '" + measured_by_name.begin()->first +
                         "' has no estimated value");
    }
    if (report.per_workload.empty()) throw UsageError("no workloads to compare");

    double total = 0.0;
    for (const auto& entry : report.per_workload) total += entry.deviation_pct;
    report.average_deviation_pct = total / static_cast<double>(report.per_workload.size());
    return report;
}

std::vector<WorkloadEnergy> parse_measured_csv(const std::string& csv_text) {
    auto lines = csv::split_lines(csv_text);
    if (lines.empty()) throw DataError("empty document: header row required");
    auto header = csv::split_line(lines[0]);
    if (header.size() != 2 || header[0] != "name" || header[1] != "measured_wh") {
        throw DataError("measured header must be exactly 'name,measured_wh'");
    }
    std::vector<WorkloadEnergy> measured;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto fields = csv::split_line(lines[i]);
        if (fields.size() != 2) {
            throw ParseError("expected 2 fields, got " + std::to_string(fields.size()), i + 1);
        }
        auto wh = csv::parse_numeric_cell(fields[1], "measured_wh", i + 1);
        if (!wh) throw ParseError("blank measured_wh", i + 1);
        measured.push_back(WorkloadEnergy{fields[0], *wh});
    }
    return measured;
}

std::string CvReport::to_json() const {
    json levels = json::object();
    for (std::size_t l = 0; l < kLoadLevelCount; ++l) {
        levels[std::to_string(load_level_percent(l))] = per_level_mape[l];
    }
    json doc = {
        {"k", k},
        {"seed", seed},
        {"schema_id", schema_id_name(schema_id)},
        {"per_level_mape", std::move(levels)},
        {"average_mape", average_mape},
        {"n_records", n_records},
    };
    return doc.dump(2) + "\n";
}

std::string ComparisonReport::to_json() const {
    json workloads = json::array();
    for (const auto& entry : per_workload) {
        workloads.push_back({{"name", entry.name},
                             {"estimated_wh", entry.estimated_wh},
                             {"measured_wh", entry.measured_wh},
                             {"deviation_pct", entry.deviation_pct}});
    }
    json doc = {
        {"per_workload", std::move(workloads)},
        {"average_deviation_pct", average_deviation_pct},
    };
    return doc.dump(2) + "\n";
}

}  // namespace esave
