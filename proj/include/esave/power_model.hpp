#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "esave/dataset.hpp"
#include "esave/gbdt.hpp"

namespace esave {

inline constexpr int kModelBankFormatVersion = 1;

// A server's power at the 11 load levels, watts, indexed 0 = idle .. 10 = 100%.
struct PowerCurve {
    std::array<double, kLoadLevelCount> watts_at{};

    double at_percent(int percent) const { return watts_at[static_cast<std::size_t>(percent / 10)]; }
};

// The 11 per-level ensembles plus everything needed to apply them:
// schema, imputation medians, hyperparameters, format version.
struct ModelBank {
    int format_version = kModelBankFormatVersion;
    FeatureSchema schema = FeatureSchema::reduced();
    std::vector<double> imputation_medians;  // schema order
    TrainingParams params;
    bool monotone_flag = false;
    std::array<GradientBoostedEnsemble, kLoadLevelCount> models;
    Provenance provenance;
};

// Fits one ensemble per load level against that level's measured watts.
// Imputation medians are computed once on the full input and stored.
// The 11 levels may be trained concurrently; results match sequential
// training exactly.
ModelBank train_bank(const Dataset& dataset, const FeatureSchema& schema,
                     const TrainingParams& params, bool monotone_flag = false);

// Encodes the record with the bank's schema and medians, predicts the 11
// levels, clamps at >= 0, and applies isotonic_project when the bank's
// monotone flag is set.
PowerCurve predict_curve(const ModelBank& bank, const ServerRecord& record);

// L2 pool-adjacent-violators projection onto non-decreasing curves.
// Idempotent and sum-preserving.
PowerCurve isotonic_project(const PowerCurve& curve);

// PAV core over an arbitrary-length sequence (uniform weights).
std::vector<double> pav_non_decreasing(std::vector<double> values);

std::string bank_to_json(const ModelBank& bank);
ModelBank bank_from_json(const std::string& text);

void save_bank(const ModelBank& bank, const std::filesystem::path& path);
ModelBank load_bank(const std::filesystem::path& path);

}  // namespace esave
