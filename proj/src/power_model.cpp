#include "esave/power_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "esave/errors.hpp"

namespace esave {

using nlohmann::json;

namespace {

std::string level_key(std::size_t level_index) {
    return std::to_string(load_level_percent(level_index));
}

Matrix encode_dataset(const Dataset& dataset, const FeatureSchema& schema,
                      std::span<const double> medians) {
    Matrix features(dataset.size(), schema.size());
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        FeatureVector fv = build_features(dataset.records[r], schema, medians);
        std::copy(fv.values.begin(), fv.values.end(), features.data.begin() + r * schema.size());
    }
    return features;
}

json tree_to_json(const RegressionTree& tree) {
    json nodes = json::array();
    for (const auto& node : tree.nodes) {
        nodes.push_back({{"feature_index", node.feature_index},
                         {"threshold", node.threshold},
                         {"left", node.left},
                         {"right", node.right},
                         {"leaf_value", node.leaf_value}});
    }
    return nodes;
}

int recompute_depth(const std::vector<TreeNode>& nodes) {
    std::vector<int> depth(nodes.size(), 0);
    for (std::size_t i = nodes.size(); i-- > 0;) {
        if (!nodes[i].is_leaf()) {
            depth[i] = 1 + std::max(depth[static_cast<std::size_t>(nodes[i].left)],
                                    depth[static_cast<std::size_t>(nodes[i].right)]);
        }
    }
    return nodes.empty() ? 0 : depth[0];
}

RegressionTree tree_from_json(const json& doc, std::size_t feature_count,
                              const std::string& where) {
    if (!doc.is_array() || doc.empty()) {
        throw ModelError("malformed bank file: " + where + " must be a non-empty node array");
    }
    RegressionTree tree;
    tree.nodes.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& n = doc[i];
        TreeNode node;
        node.feature_index = n.at("feature_index").get<int>();
        node.threshold = n.at("threshold").get<double>();
        node.left = n.at("left").get<int>();
        node.right = n.at("right").get<int>();
        node.leaf_value = n.at("leaf_value").get<double>();
        bool leaf = node.left < 0 && node.right < 0;
        bool internal = node.left > static_cast<int>(i) && node.right > static_cast<int>(i) &&
                        node.left < static_cast<int>(doc.size()) &&
                        node.right < static_cast<int>(doc.size()) && node.feature_index >= 0 &&
                        node.feature_index < static_cast<int>(feature_count);
        if (!leaf && !internal) {
            throw ModelError("malformed bank file: invalid node " + std::to_string(i) + " in " +
                             where);
        }
        tree.nodes.push_back(node);
    }
    tree.depth = recompute_depth(tree.nodes);
    return tree;
}

json ensemble_to_json(const GradientBoostedEnsemble& ensemble) {
    json trees = json::array();
    for (const auto& tree : ensemble.trees) trees.push_back(tree_to_json(tree));
    return {{"base_score", ensemble.base_score},
            {"learning_rate", ensemble.learning_rate},
            {"trees", std::move(trees)}};
}

GradientBoostedEnsemble ensemble_from_json(const json& doc, std::size_t feature_count,
                                           const std::string& where) {
    GradientBoostedEnsemble ensemble;
    ensemble.base_score = doc.at("base_score").get<double>();
    ensemble.learning_rate = doc.at("learning_rate").get<double>();
    const json& trees = doc.at("trees");
    if (!trees.is_array()) {
        throw ModelError("malformed bank file: " + where + ".trees must be an array");
    }
    std::size_t index = 0;
    for (const auto& tree : trees) {
        ensemble.trees.push_back(
            tree_from_json(tree, feature_count, where + ".trees[" + std::to_string(index) + "]"));
        ++index;
    }
    return ensemble;
}

}  // namespace

ModelBank train_bank(const Dataset& dataset, const FeatureSchema& schema,
                     const TrainingParams& params, bool monotone_flag) {
    params.validate();
    if (dataset.records.empty()) throw DataError("cannot train on an empty dataset");

    ModelBank bank;
    bank.schema = schema;
    bank.params = params;
    bank.monotone_flag = monotone_flag;
    bank.provenance = dataset.provenance;
    bank.imputation_medians = compute_medians(dataset.records, schema);

    Matrix features = encode_dataset(dataset, schema, bank.imputation_medians);
    auto sorted = detail::presort_features(features);

    std::array<std::vector<double>, kLoadLevelCount> targets;
    for (std::size_t l = 0; l < kLoadLevelCount; ++l) {
        targets[l].resize(dataset.size());
        for (std::size_t r = 0; r < dataset.size(); ++r) {
            const auto& watts = dataset.records[r].power_watts[l];
            if (!watts) {
                throw DataError("record '" + dataset.records[r].record_id +
                                "' is missing a power target; clean the dataset first");
            }
            targets[l][r] = *watts;
        }
    }

    auto fit_level = [&](std::size_t l) {
        return detail::fit_ensemble_presorted(features, sorted, targets[l], params);
    };

    // Levels share only read-only inputs, so concurrent training matches
    // sequential training exactly.
    if (std::thread::hardware_concurrency() > 1) {
        std::array<std::future<GradientBoostedEnsemble>, kLoadLevelCount> futures;
        for (std::size_t l = 0; l < kLoadLevelCount; ++l) {
            futures[l] = std::async(std::launch::async, fit_level, l);
        }
        for (std::size_t l = 0; l < kLoadLevelCount; ++l) bank.models[l] = futures[l].get();
    } else {
        for (std::size_t l = 0; l < kLoadLevelCount; ++l) bank.models[l] = fit_level(l);
    }
    return bank;
}

PowerCurve predict_curve(const ModelBank& bank, const ServerRecord& record) {
    FeatureVector fv = build_features(record, bank.schema, bank.imputation_medians);
    PowerCurve curve;
    for (std::size_t l = 0; l < kLoadLevelCount; ++l) {
        curve.watts_at[l] = std::max(0.0, bank.models[l].predict(fv.values));
    }
    return bank.monotone_flag ? isotonic_project(curve) : curve;
}

std::vector<double> pav_non_decreasing(std::vector<double> values) {
    std::size_t n = values.size();
    if (n <= 1) return values;

    std::vector<double> block_value;
    std::vector<std::size_t> block_count;
    block_value.reserve(n);
    block_count.reserve(n);
    for (double v : values) {
        block_value.push_back(v);
        block_count.push_back(1);
        while (block_value.size() >= 2 &&
               block_value[block_value.size() - 2] > block_value.back()) {
            std::size_t last = block_value.size() - 1;
            double merged = (block_value[last - 1] * static_cast<double>(block_count[last - 1]) +
                             block_value[last] * static_cast<double>(block_count[last])) /
                            static_cast<double>(block_count[last - 1] + block_count[last]);
            block_count[last - 1] += block_count[last];
            block_value[last - 1] = merged;
            block_value.pop_back();
            block_count.pop_back();
        }
    }

    std::vector<double> out;
    out.reserve(n);
    for (std::size_t b = 0; b < block_value.size(); ++b) {
        out.insert(out.end(), block_count[b], block_value[b]);
    }
    return out;
}

PowerCurve isotonic_project(const PowerCurve& curve) {
    std::vector<double> projected =
        pav_non_decreasing(std::vector<double>(curve.watts_at.begin(), curve.watts_at.end()));
    PowerCurve out;
    std::copy(projected.begin(), projected.end(), out.watts_at.begin());
    return out;
}

std::string bank_to_json(const ModelBank& bank) {
    json medians = json::object();
    for (std::size_t i = 0; i < bank.schema.size(); ++i) {
        medians[bank.schema.feature_name(i)] = bank.imputation_medians[i];
    }
    json models = json::object();
    for (std::size_t l = 0; l < kLoadLevelCount; ++l) {
        models[level_key(l)] = ensemble_to_json(bank.models[l]);
    }
    json doc = {
        {"format_version", bank.format_version},
        {"schema_id", schema_id_name(bank.schema.id)},
        {"feature_names", bank.schema.feature_names()},
        {"imputation_medians", std::move(medians)},
        {"params",
         {{"n_trees", bank.params.n_trees},
          {"max_depth", bank.params.max_depth},
          {"learning_rate", bank.params.learning_rate},
          {"min_samples_leaf", bank.params.min_samples_leaf},
          {"lambda", bank.params.lambda},
          {"seed", bank.params.seed}}},
        {"monotone_flag", bank.monotone_flag},
        {"models", std::move(models)},
        {"provenance",
         {{"source", bank.provenance.source},
          {"rows_before", bank.provenance.rows_before},
          {"rows_after", bank.provenance.rows_after}}},
    };
    return doc.dump(2) + "\n";
}

ModelBank bank_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ModelError(std::string("malformed bank file: ") + e.what());
    }
    try {
        int version = doc.at("format_version").get<int>();
        if (version != kModelBankFormatVersion) {
            throw ModelError("unsupported format_version " + std::to_string(version) +
                             " (expected " + std::to_string(kModelBankFormatVersion) + ")");
        }
        ModelBank bank;
        bank.format_version = version;
        bank.schema = FeatureSchema::from_id(
            schema_id_from_name(doc.at("schema_id").get<std::string>()));
        auto names = doc.at("feature_names").get<std::vector<std::string>>();
        if (names != bank.schema.feature_names()) {
            throw ModelError("bank feature names do not match schema '" +
                             schema_id_name(bank.schema.id) + "'");
        }
        const json& medians = doc.at("imputation_medians");
        bank.imputation_medians.resize(bank.schema.size());
        for (std::size_t i = 0; i < bank.schema.size(); ++i) {
            bank.imputation_medians[i] = medians.at(bank.schema.feature_name(i)).get<double>();
        }
        const json& params = doc.at("params");
        bank.params.n_trees = params.at("n_trees").get<int>();
        bank.params.max_depth = params.at("max_depth").get<int>();
        bank.params.learning_rate = params.at("learning_rate").get<double>();
        bank.params.min_samples_leaf = params.at("min_samples_leaf").get<int>();
        bank.params.lambda = params.at("lambda").get<double>();
        bank.params.seed = params.at("seed").get<std::uint64_t>();
        try {
            bank.params.validate();
        } catch (const UsageError& e) {
            throw ModelError(std::string("invalid params in bank file: ") + e.what());
        }
        bank.monotone_flag = doc.at("monotone_flag").get<bool>();
        const json& models = doc.at("models");
        if (!models.is_object() || models.size() != kLoadLevelCount) {
            throw ModelError("bank must contain exactly " + std::to_string(kLoadLevelCount) +
                             " models");
        }
        for (std::size_t l = 0; l < kLoadLevelCount; ++l) {
            bank.models[l] = ensemble_from_json(models.at(level_key(l)), bank.schema.size(),
                                                "models." + level_key(l));
        }
        if (doc.contains("provenance")) {
            const json& prov = doc.at("provenance");
            bank.provenance.source = prov.value("source", "");
            bank.provenance.rows_before = prov.value("rows_before", std::size_t{0});
            bank.provenance.rows_after = prov.value("rows_after", std::size_t{0});
        }
        return bank;
    } catch (const json::exception& e) {
        throw ModelError(std::string("malformed bank file: ") + e.what());
    }
}

void save_bank(const ModelBank& bank, const std::filesystem::path& path) {
    std::string text = bank_to_json(bank);
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw DataError("failed writing '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw DataError("cannot move bank into place at '" + path.string() + "'");
    }
}

ModelBank load_bank(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("cannot open bank file '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return bank_from_json(buffer.str());
}

}  // namespace esave
