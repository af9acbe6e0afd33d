#include <mpslam/output.hpp>
#include <mpslam/errors.hpp>

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace mpslam {

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string estimates_csv(const RunRecord& record) {
    std::string s = "run,step,mt,true_x,true_y,est_x,est_y,err\n";
    for (std::size_t n = 0; n < record.truth.size(); ++n) {
        for (std::size_t i = 0; i < record.truth[n].size(); ++i) {
            const Vec2& t = record.truth[n][i];
            const Vec2& e = record.estimate[n][i];
            s += std::to_string(record.run) + ',' + std::to_string(n + 1) + ',' + std::to_string(i) + ',' +
                 format_double(t.x()) + ',' + format_double(t.y()) + ',' + format_double(e.x()) + ',' +
                 format_double(e.y()) + ',' + format_double((e - t).norm()) + '\n';
        }
    }
    return s;
}

std::string vas_csv(const RunRecord& record) {
    std::string s = "run,step,bs,va_id,est_x,est_y,r_hat\n";
    for (const VaRecord& v : record.vas) {
        s += std::to_string(record.run) + ',' + std::to_string(v.step) + ',' + std::to_string(v.bs) + ',' +
             std::to_string(v.id) + ',' + format_double(v.position.x()) + ',' + format_double(v.position.y()) + ',' +
             format_double(v.existence) + '\n';
    }
    return s;
}

std::string metrics_csv(const AggregateMetrics& metrics) {
    std::string s = "step,mospa,rmse,card_err\n";
    for (std::size_t n = 0; n < metrics.mospa.size(); ++n) {
        s += std::to_string(n + 1) + ',' + format_double(metrics.mospa[n]) + ',' + format_double(metrics.rmse[n]) +
             ',' + format_double(metrics.cardinality[n]) + '\n';
    }
    return s;
}

std::string cdf_csv(const AggregateMetrics& metrics) {
    std::string s = "threshold_m,cum_freq\n";
    for (const auto& [t, f] : metrics.cdf) s += format_double(t) + ',' + format_double(f) + '\n';
    return s;
}

std::string metadata_json(const ScenarioConfig& config, const ExperimentInfo& info,
                          const std::vector<RunRecord>& records) {
    nlohmann::ordered_json doc;
    doc["experiment"] = info.experiment;
    doc["seed"] = info.seed;
    doc["runs"] = info.runs;
    doc["toggles"] = {{"mimo", config.toggles.mimo},
                      {"coop", config.toggles.coop},
                      {"imu", config.toggles.imu},
                      {"pva_fusion", config.toggles.pva_fusion}};
    doc["scenario"] = nlohmann::ordered_json::parse(serialize_scenario(config));
    auto& runs = doc["run_diagnostics"] = nlohmann::ordered_json::array();
    for (const RunRecord& r : records) {
        runs.push_back({{"run", r.run},
                        {"divergence_flags", r.divergence_count()},
                        {"da_nonconverged", r.da_nonconverged},
                        {"final_quarter_rmse", r.final_quarter_rmse()},
                        {"mean_ospa", r.mean_ospa()}});
    }
    return doc.dump(2) + '\n';
}

void write_experiment(const std::filesystem::path& dir, const ScenarioConfig& config, const ExperimentInfo& info,
                      const std::vector<RunRecord>& records) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (const RunRecord& r : records) {
        write_file(dir / ("estimates_run" + std::to_string(r.run) + ".csv"), estimates_csv(r));
        write_file(dir / ("vas_run" + std::to_string(r.run) + ".csv"), vas_csv(r));
    }
    const AggregateMetrics agg = aggregate(records);
    write_file(dir / "metrics.csv", metrics_csv(agg));
    write_file(dir / "cdf.csv", cdf_csv(agg));
    write_file(dir / "metadata.json", metadata_json(config, info, records));
}

}  // namespace mpslam
