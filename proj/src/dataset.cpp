#include "esave/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <unordered_set>

#include "csv.hpp"
#include "esave/errors.hpp"

namespace esave {

namespace {

const std::array<std::string, kHardwareFieldCount> kHardwareFieldNames = {
    "chip_count",
    "cores_per_chip",
    "total_cores",
    "total_threads",
    "base_clock_mhz",
    "l2_cache_kb",
    "l3_cache_kb",
    "cpu_launch_year",
    "memory_gb",
    "dimm_count",
    "memory_clock_mhz",
    "storage_device_count",
    "storage_capacity_gb",
    "ssd_fraction",
    "node_count",
};

std::string power_column_name(std::size_t level_index) {
    int percent = load_level_percent(level_index);
    std::string digits = std::to_string(percent);
    return "power_" + std::string(3 - digits.size(), '0') + digits;
}

std::string format_double(double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

ServerRecord parse_row(const std::vector<std::string>& fields, std::size_t row,
                       bool with_power) {
    ServerRecord rec;
    rec.record_id = fields[0];
    rec.manufacturer = fields[1];
    rec.cpu_name = fields[2];
    for (std::size_t f = 0; f < kHardwareFieldCount; ++f) {
        rec.hardware[f] = csv::parse_numeric_cell(fields[3 + f], kHardwareFieldNames[f], row);
    }
    if (with_power) {
        for (std::size_t l = 0; l < kLoadLevelCount; ++l) {
            rec.power_watts[l] = csv::parse_numeric_cell(fields[3 + kHardwareFieldCount + l],
                                                         power_column_name(l), row);
        }
    }
    return rec;
}

void check_header(const std::vector<std::string>& header,
                  const std::vector<std::string>& expected) {
    for (const auto& name : expected) {
        if (std::find(header.begin(), header.end(), name) == header.end()) {
            throw DataError("column '" + name + "' missing from header");
        }
    }
    if (header.size() != expected.size()) {
        for (const auto& name : header) {
            if (std::find(expected.begin(), expected.end(), name) == expected.end()) {
                throw DataError("unexpected column '" + name + "' in header");
            }
        }
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (header[i] != expected[i]) {
            throw DataError("column '" + expected[i] + "' out of order in header (found '" +
                            header[i] + "' at position " + std::to_string(i + 1) + ")");
        }
    }
}

std::vector<ServerRecord> parse_records_impl(const std::string& csv_text, bool with_power) {
    auto lines = csv::split_lines(csv_text);
    if (lines.empty()) {
        throw DataError("empty document: header row required");
    }
    std::vector<std::string> expected(server_csv_columns().begin(), server_csv_columns().end());
    if (!with_power) expected.resize(3 + kHardwareFieldCount);
    check_header(csv::split_line(lines[0]), expected);

    std::vector<ServerRecord> records;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto fields = csv::split_line(lines[i]);
        if (fields.size() != expected.size()) {
            throw ParseError("expected " + std::to_string(expected.size()) + " fields, got " +
                                 std::to_string(fields.size()),
                             i + 1);
        }
        records.push_back(parse_row(fields, i + 1, with_power));
    }
    return records;
}

}  // namespace

const std::string& hardware_field_name(HardwareField field) {
    return kHardwareFieldNames[static_cast<std::size_t>(field)];
}

bool ServerRecord::has_complete_power() const {
    return std::all_of(power_watts.begin(), power_watts.end(),
                       [](const auto& w) { return w.has_value(); });
}

bool ServerRecord::has_negative_power() const {
    return std::any_of(power_watts.begin(), power_watts.end(),
                       [](const auto& w) { return w.has_value() && *w < 0.0; });
}

std::string schema_id_name(SchemaId id) {
    return id == SchemaId::reduced ? "reduced" : "all";
}

SchemaId schema_id_from_name(const std::string& name) {
    if (name == "reduced") return SchemaId::reduced;
    if (name == "all") return SchemaId::all;
    throw UsageError("unknown schema '" + name + "' (expected 'all' or 'reduced')");
}

std::vector<std::string> FeatureSchema::feature_names() const {
    std::vector<std::string> names;
    names.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) names.push_back(feature_name(i));
    return names;
}

const std::vector<std::string>& server_csv_columns() {
    static const std::vector<std::string> columns = [] {
        std::vector<std::string> cols = {"record_id", "manufacturer", "cpu_name"};
        for (const auto& name : kHardwareFieldNames) cols.push_back(name);
        for (std::size_t l = 0; l < kLoadLevelCount; ++l) cols.push_back(power_column_name(l));
        return cols;
    }();
    return columns;
}

std::vector<ServerRecord> parse_records(const std::string& csv_text) {
    return parse_records_impl(csv_text, true);
}

std::vector<ServerRecord> parse_server_csv(const std::string& csv_text) {
    auto lines = csv::split_lines(csv_text);
    bool with_power =
        !lines.empty() && csv::split_line(lines[0]).size() > 3 + kHardwareFieldCount;
    return parse_records_impl(csv_text, with_power);
}

std::string records_to_csv(std::span<const ServerRecord> records) {
    std::string out;
    const auto& columns = server_csv_columns();
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) out.push_back(',');
        out += columns[i];
    }
    out.push_back('\n');
    for (const auto& rec : records) {
        out += csv::escape_field(rec.record_id);
        out.push_back(',');
        out += csv::escape_field(rec.manufacturer);
        out.push_back(',');
        out += csv::escape_field(rec.cpu_name);
        for (const auto& value : rec.hardware) {
            out.push_back(',');
            if (value) out += format_double(*value);
        }
        for (const auto& value : rec.power_watts) {
            out.push_back(',');
            if (value) out += format_double(*value);
        }
        out.push_back('\n');
    }
    return out;
}

Dataset clean_dataset(std::vector<ServerRecord> records, const std::string& source) {
    Dataset dataset;
    dataset.provenance.source = source;
    dataset.provenance.rows_before = records.size();

    std::unordered_set<std::string> seen_ids;
    for (auto& rec : records) {
        if (!rec.has_complete_power() || rec.has_negative_power()) continue;
        if (!seen_ids.insert(rec.record_id).second) continue;
        dataset.records.push_back(std::move(rec));
    }
    dataset.provenance.rows_after = dataset.records.size();
    if (dataset.records.empty()) {
        throw DataError("no usable records after cleaning (" +
                        std::to_string(dataset.provenance.rows_before) + " rows in)");
    }
    return dataset;
}

std::vector<double> compute_medians(std::span<const ServerRecord> records,
                                    const FeatureSchema& schema) {
    std::vector<double> medians(schema.size());
    std::vector<double> present;
    for (std::size_t i = 0; i < schema.size(); ++i) {
        present.clear();
        for (const auto& rec : records) {
            if (auto v = rec.field(schema.field_at(i))) present.push_back(*v);
        }
        if (present.empty()) {
            throw ModelError("feature '" + schema.feature_name(i) +
                             "' is missing from every training record");
        }
        std::sort(present.begin(), present.end());
        std::size_t n = present.size();
        medians[i] = (n % 2 == 1) ? present[n / 2]
                                  : 0.5 * (present[n / 2 - 1] + present[n / 2]);
    }
    return medians;
}

FeatureVector build_features(const ServerRecord& record, const FeatureSchema& schema,
                             std::span<const double> medians) {
    if (medians.size() != schema.size()) {
        throw ModelError("median table size " + std::to_string(medians.size()) +
                         " does not match schema '" + schema_id_name(schema.id) + "' (" +
                         std::to_string(schema.size()) + " features)");
    }
    FeatureVector fv;
    fv.schema_id = schema.id;
    fv.values.resize(schema.size());
    fv.imputed.resize(schema.size());
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (auto v = record.field(schema.field_at(i))) {
            fv.values[i] = *v;
            fv.imputed[i] = false;
        } else {
            fv.values[i] = medians[i];
            fv.imputed[i] = true;
        }
    }
    return fv;
}

FoldAssignment assign_folds(const Dataset& dataset, std::size_t k, std::uint64_t seed) {
    std::size_t n = dataset.size();
    if (k < 2 || k > n) {
        throw UsageError("fold count k=" + std::to_string(k) + " must satisfy 2 <= k <= " +
                         std::to_string(n));
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    // Fisher-Yates with an explicit draw so the shuffle is identical across
    // standard libraries.
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(perm[i], perm[j]);
    }

    FoldAssignment assignment;
    assignment.k = k;
    assignment.seed = seed;
    for (std::size_t i = 0; i < n; ++i) {
        assignment.fold_of_record[dataset.records[perm[i]].record_id] = i % k;
    }
    return assignment;
}

}  // namespace esave
