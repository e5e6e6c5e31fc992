#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace esave {

// The 11 benchmark load levels: 0%, 10%, ..., 100%.
inline constexpr std::size_t kLoadLevelCount = 11;

inline constexpr int load_level_percent(std::size_t index) {
    return static_cast<int>(index) * 10;
}

// Numeric hardware attributes, in the column order of servers.csv.
// The first 8 (CPU attributes) form the "reduced" feature schema,
// all 15 form the "all" schema.
enum class HardwareField : std::size_t {
    chip_count = 0,
    cores_per_chip,
    total_cores,
    total_threads,
    base_clock_mhz,
    l2_cache_kb,
    l3_cache_kb,
    cpu_launch_year,
    memory_gb,
    dimm_count,
    memory_clock_mhz,
    storage_device_count,
    storage_capacity_gb,
    ssd_fraction,
    node_count,
};

inline constexpr std::size_t kHardwareFieldCount = 15;
inline constexpr std::size_t kReducedFieldCount = 8;

const std::string& hardware_field_name(HardwareField field);

// One benchmarked server: identity strings, numeric hardware attributes
// (absent cells stay disengaged) and measured power at the 11 load levels.
struct ServerRecord {
    std::string record_id;
    std::string manufacturer;
    std::string cpu_name;
    std::array<std::optional<double>, kHardwareFieldCount> hardware{};
    std::array<std::optional<double>, kLoadLevelCount> power_watts{};

    bool has_field(HardwareField f) const {
        return hardware[static_cast<std::size_t>(f)].has_value();
    }
    std::optional<double> field(HardwareField f) const {
        return hardware[static_cast<std::size_t>(f)];
    }
    bool has_complete_power() const;
    bool has_negative_power() const;
};

enum class SchemaId { reduced, all };

std::string schema_id_name(SchemaId id);
SchemaId schema_id_from_name(const std::string& name);

// Named, ordered feature set: reduced = 8 CPU fields, all = reduced + 7
// memory/storage/node fields. reduced is a prefix of all.
struct FeatureSchema {
    SchemaId id;

    static FeatureSchema reduced() { return FeatureSchema{SchemaId::reduced}; }
    static FeatureSchema all() { return FeatureSchema{SchemaId::all}; }
    static FeatureSchema from_id(SchemaId id) { return FeatureSchema{id}; }

    std::size_t size() const {
        return id == SchemaId::reduced ? kReducedFieldCount : kHardwareFieldCount;
    }
    HardwareField field_at(std::size_t i) const { return static_cast<HardwareField>(i); }
    const std::string& feature_name(std::size_t i) const {
        return hardware_field_name(field_at(i));
    }
    std::vector<std::string> feature_names() const;
};

// Encoded record under a schema. values[i] is the attribute value or the
// training median when the source cell was missing (imputed[i] = true).
struct FeatureVector {
    SchemaId schema_id;
    std::vector<double> values;
    std::vector<bool> imputed;
};

struct Provenance {
    std::string source;
    std::size_t rows_before = 0;
    std::size_t rows_after = 0;
};

// Cleaned record set: every record carries all 11 non-negative power
// targets and record_ids are unique.
struct Dataset {
    std::vector<ServerRecord> records;
    Provenance provenance;

    std::size_t size() const { return records.size(); }
};

struct FoldAssignment {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::map<std::string, std::size_t> fold_of_record;
};

// servers.csv column names, in order.
const std::vector<std::string>& server_csv_columns();

std::vector<ServerRecord> parse_records(const std::string& csv_text);

// server.csv for prediction: the servers.csv columns without the power_*
// columns. A full servers.csv header is also accepted.
std::vector<ServerRecord> parse_server_csv(const std::string& csv_text);

// Inverse of parse_records for complete rows; used for round-trip checks
// and for writing cleaned exports.
std::string records_to_csv(std::span<const ServerRecord> records);

Dataset clean_dataset(std::vector<ServerRecord> records, const std::string& source = "");

// Per-feature medians over present values of the given records, in schema
// order. A feature absent from every record is a model error.
std::vector<double> compute_medians(std::span<const ServerRecord> records,
                                    const FeatureSchema& schema);

FeatureVector build_features(const ServerRecord& record, const FeatureSchema& schema,
                             std::span<const double> medians);

// Seeded uniform shuffle followed by round-robin fold labels. Fold sizes
// differ by at most one; deterministic for fixed (record order, k, seed).
FoldAssignment assign_folds(const Dataset& dataset, std::size_t k, std::uint64_t seed);

}  // namespace esave
