#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "esave/dataset.hpp"
#include "esave/energy.hpp"
#include "esave/errors.hpp"
#include "esave/evaluation.hpp"
#include "esave/gbdt.hpp"
#include "esave/power_model.hpp"

namespace {

using namespace esave;
using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// All artifact writes go through here, after the computation succeeded, so
// nothing is left behind on a nonzero exit.
void write_file(const std::string& path, const std::string& text) {
    std::filesystem::path tmp = std::filesystem::path(path);
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
        throw DataError("cannot move output into place at '" + path + "'");
    }
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_file(out_path, text);
    }
}

std::uint64_t default_seed() {
    const char* env = std::getenv("ESAVE_SEED");
    if (!env || !*env) return 42;
    std::uint64_t value = 0;
    const char* end = env + std::string_view(env).size();
    auto [ptr, ec] = std::from_chars(env, end, value);
    if (ec != std::errc() || ptr != end) {
        throw UsageError("ESAVE_SEED must be a non-negative integer, got '" + std::string(env) +
                         "'");
    }
    return value;
}

Dataset load_dataset(const std::string& path) {
    return clean_dataset(parse_records(read_file(path)), path);
}

ServerRecord load_single_server(const std::string& path) {
    auto records = parse_server_csv(read_file(path));
    if (records.size() != 1) {
        throw UsageError("exactly one server expected in '" + path + "', got " +
                         std::to_string(records.size()));
    }
    return records[0];
}

struct TrainArgs {
    std::string data;
    std::string schema = "reduced";
    std::string out;
    TrainingParams params;
    bool monotone = false;
};

struct CvArgs {
    std::string data;
    std::string schema = "reduced";
    std::size_t k = 10;
    std::string out;
    TrainingParams params;
};

struct PredictArgs {
    std::string bank;
    std::string server;
    std::string out;
};

struct EstimateArgs {
    std::string bank;
    std::string server;
    std::string trace;
    double avg_util = 0.0;
    double duration_s = 0.0;
    int vcpus = 0;
    int host_threads = 0;
    double carbon_intensity = -1.0;
    bool strict = false;
    std::string out;
    bool has_trace = false;
    bool has_avg = false;
    bool has_vm = false;
    bool has_carbon = false;
};

struct CompareArgs {
    std::string estimates;
    std::string measured;
    std::string out;
};

void add_training_options(CLI::App* cmd, TrainingParams& params) {
    cmd->add_option("--trees", params.n_trees, "Boosting rounds per model");
    cmd->add_option("--depth", params.max_depth, "Maximum tree depth");
    cmd->add_option("--lr", params.learning_rate, "Learning rate in (0,1]");
    cmd->add_option("--lambda", params.lambda, "L2 leaf regularizer");
    cmd->add_option("--min-leaf", params.min_samples_leaf, "Minimum rows per leaf");
    cmd->add_option("--seed", params.seed, "Random seed");
}

std::string params_summary(const TrainingParams& p) {
    std::ostringstream os;
    os << "trees=" << p.n_trees << " depth=" << p.max_depth << " lr=" << p.learning_rate
       << " lambda=" << p.lambda << " min_leaf=" << p.min_samples_leaf << " seed=" << p.seed;
    return os.str();
}

int run_train(const TrainArgs& args) {
    FeatureSchema schema = FeatureSchema::from_id(schema_id_from_name(args.schema));
    args.params.validate();
    Dataset dataset = load_dataset(args.data);
    ModelBank bank = train_bank(dataset, schema, args.params, args.monotone);
    save_bank(bank, args.out);
    std::cerr << "trained 11 models on " << dataset.size() << " rows (schema="
              << schema_id_name(schema.id) << " " << params_summary(args.params)
              << (args.monotone ? " monotone" : "") << ") -> " << args.out << "\n";
    return 0;
}

int run_cv(const CvArgs& args) {
    if (args.k < 2) throw UsageError("--k must be >= 2");
    FeatureSchema schema = FeatureSchema::from_id(schema_id_from_name(args.schema));
    args.params.validate();
    Dataset dataset = load_dataset(args.data);
    CvReport report = cross_validate(dataset, schema, args.params, args.k, args.params.seed);
    emit(args.out, report.to_json());
    std::cerr << "average MAPE " << report.average_mape << "% (k=" << report.k
              << " schema=" << schema_id_name(report.schema_id) << " n=" << report.n_records
              << ")\n";
    return 0;
}

int run_predict(const PredictArgs& args) {
    ModelBank bank = load_bank(args.bank);
    ServerRecord record = load_single_server(args.server);
    PowerCurve curve = predict_curve(bank, record);
    json doc = json::object();
    for (std::size_t l = 0; l < kLoadLevelCount; ++l) {
        doc[std::to_string(load_level_percent(l))] = curve.watts_at[l];
    }
    emit(args.out, doc.dump(2) + "\n");
    return 0;
}

int run_estimate(const EstimateArgs& args) {
    if (!args.has_trace && !args.has_avg) {
        throw UsageError("one of --trace or --avg-util is required");
    }
    if (args.has_avg && args.duration_s <= 0.0) {
        throw UsageError("--avg-util requires --duration > 0");
    }

    ModelBank bank = load_bank(args.bank);
    ServerRecord record = load_single_server(args.server);
    PowerCurve curve = predict_curve(bank, record);

    EnergyEstimate estimate;
    if (args.has_trace) {
        UtilizationTrace trace = parse_trace(read_file(args.trace));
        estimate = integrate_energy(curve, trace);
        if (args.strict && estimate.large_gap_count > 0) {
            throw DataError("strict mode: " + std::to_string(estimate.large_gap_count) +
                            " inter-sample gap(s) exceed 10x the median gap");
        }
    } else {
        estimate = estimate_from_average(curve, args.avg_util, args.duration_s);
    }
    if (args.has_vm) {
        estimate = apportion_vm(estimate, VmSpec{args.vcpus, args.host_threads});
    }
    std::optional<double> carbon_g;
    if (args.has_carbon) {
        carbon_g = carbon_equivalent(estimate.energy_wh / 1000.0, args.carbon_intensity);
    }
    emit(args.out, estimate.to_json(carbon_g));
    std::cerr << "energy " << estimate.energy_wh << " Wh over " << estimate.duration_s
              << " s (avg " << estimate.average_power_w << " W)\n";
    return 0;
}

std::vector<WorkloadEnergy> parse_estimates_json(const std::string& text,
                                                 const std::string& path) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError("malformed estimates file '" + path + "': " + e.what());
    }
    if (!doc.is_array()) {
        throw DataError("estimates file '" + path +
                        "' must be a JSON array of {name, estimated_wh}");
    }
    std::vector<WorkloadEnergy> estimates;
    try {
        for (const auto& item : doc) {
            estimates.push_back(WorkloadEnergy{item.at("name").get<std::string>(),
                                               item.at("estimated_wh").get<double>()});
        }
    } catch (const json::exception& e) {
        throw DataError("malformed estimates file '" + path + "': " + e.what());
    }
    return estimates;
}

int run_compare(const CompareArgs& args) {
    auto estimates = parse_estimates_json(read_file(args.estimates), args.estimates);
    auto measured = parse_measured_csv(read_file(args.measured));
    ComparisonReport report = compare_estimates(estimates, measured);
    emit(args.out, report.to_json());
    std::cerr << "average deviation " << report.average_deviation_pct << "% over "
              << report.per_workload.size() << " workload(s)\n";
    return 0;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"ESAVE: learn server power curves from benchmark data and estimate "
                 "software energy from CPU-utilization traces"};
    app.require_subcommand(1);

    std::uint64_t seed = default_seed();

    TrainArgs train_args;
    train_args.params.seed = seed;
    auto* train = app.add_subcommand("train", "Train the 11-level model bank");
    train->add_option("--data", train_args.data, "servers.csv input")->required();
    train->add_option("--schema", train_args.schema, "Feature schema: all|reduced");
    train->add_option("--out", train_args.out, "Output bank.json path")->required();
    add_training_options(train, train_args.params);
    train->add_flag("--monotone", train_args.monotone,
                    "Store curves with isotonic (non-decreasing) repair enabled");

    CvArgs cv_args;
    cv_args.params.seed = seed;
    auto* cv = app.add_subcommand("cv", "K-fold cross-validation with per-level MAPE");
    cv->add_option("--data", cv_args.data, "servers.csv input")->required();
    cv->add_option("--schema", cv_args.schema, "Feature schema: all|reduced");
    cv->add_option("--k", cv_args.k, "Fold count");
    cv->add_option("--out", cv_args.out, "Write the report here instead of stdout");
    add_training_options(cv, cv_args.params);

    PredictArgs predict_args;
    auto* predict = app.add_subcommand("predict", "Predict a server's 11-point power curve");
    predict->add_option("--bank", predict_args.bank, "Trained bank.json")->required();
    predict->add_option("--server", predict_args.server, "One-row server.csv")->required();
    predict->add_option("--out", predict_args.out, "Write the curve here instead of stdout");

    EstimateArgs est_args;
    auto* estimate = app.add_subcommand("estimate", "Estimate energy for a software run");
    estimate->add_option("--bank", est_args.bank, "Trained bank.json")->required();
    estimate->add_option("--server", est_args.server, "One-row server.csv")->required();
    auto* opt_trace =
        estimate->add_option("--trace", est_args.trace, "trace.csv with per-sample utilization");
    auto* opt_avg =
        estimate->add_option("--avg-util", est_args.avg_util, "Average CPU utilization in %");
    auto* opt_duration =
        estimate->add_option("--duration", est_args.duration_s, "Run duration in seconds");
    auto* opt_vcpus = estimate->add_option("--vcpus", est_args.vcpus, "VM vCPU count");
    auto* opt_threads =
        estimate->add_option("--host-threads", est_args.host_threads, "Host logical threads");
    auto* opt_carbon = estimate->add_option("--carbon-intensity", est_args.carbon_intensity,
                                            "Grid intensity in gCO2e/kWh");
    estimate->add_flag("--strict", est_args.strict, "Fail on large inter-sample gaps");
    estimate->add_option("--out", est_args.out, "Write the estimate here instead of stdout");
    opt_trace->excludes(opt_avg);
    opt_trace->excludes(opt_duration);
    opt_avg->needs(opt_duration);
    opt_vcpus->needs(opt_threads);
    opt_threads->needs(opt_vcpus);

    CompareArgs compare_args;
    auto* compare = app.add_subcommand("compare", "Compare estimates against measurements");
    compare->add_option("--estimates", compare_args.estimates,
                        "JSON array of {name, estimated_wh}")
        ->required();
    compare->add_option("--measured", compare_args.measured, "CSV with header name,measured_wh")
        ->required();
    compare->add_option("--out", compare_args.out, "Write the report here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        auto parsed = app.get_subcommands();
        std::cerr << (parsed.empty() ? app.help() : parsed.front()->help());
        return 1;
    }

    est_args.has_trace = opt_trace->count() > 0;
    est_args.has_avg = opt_avg->count() > 0;
    est_args.has_vm = opt_vcpus->count() > 0;
    est_args.has_carbon = opt_carbon->count() > 0;

    if (*train) return run_train(train_args);
    if (*cv) return run_cv(cv_args);
    if (*predict) return run_predict(predict_args);
    if (*estimate) return run_estimate(est_args);
    if (*compare) return run_compare(compare_args);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const esave::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
