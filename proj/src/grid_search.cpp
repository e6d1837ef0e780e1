#include "oodkit/error.hpp"
#include "oodkit/pipeline.hpp"
#include "oodkit/manifest.hpp"
#include "oodkit/util.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

namespace oodkit::pipeline {

Aggregate aggregate(std::span<const double> values) {
    Aggregate out;
    if (values.empty()) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return out;
}

GridResult grid_search(const GridConfig& config, const PipelineData& data) {
    if (config.seeds.empty()) throw Error(ErrorCode::BadConfig, "grid search needs at least one seed");
    const std::size_t n = config.experiments.size();
    std::vector<std::optional<GridRow>> rows(n);
    std::vector<std::vector<GridFailure>> failures(n);

    const RunOptions options{config.rule, 1};
    parallel_for(n, config.threads, [&](std::size_t e) {
        const auto& spec = config.experiments[e];
        GridRow row;
        row.experiment = spec.name();
        for (std::int64_t seed : config.seeds) {
            try {
                const auto run = run_experiment(data, spec, seed, options);
                row.seeds.push_back({seed, run.report.auroc, run.report.auprc, run.report.fpr90, run.report.seconds});
            } catch (const std::exception& ex) {
                failures[e].push_back({row.experiment, seed, ex.what()});
            }
        }
        if (row.seeds.empty()) return;
        std::vector<double> a, p, f, s;
        for (const auto& o : row.seeds) {
            a.push_back(o.auroc);
            p.push_back(o.auprc);
            f.push_back(o.fpr90);
            s.push_back(o.seconds);
        }
        row.auroc = aggregate(a);
        row.auprc = aggregate(p);
        row.fpr90 = aggregate(f);
        row.seconds = aggregate(s);
        rows[e] = std::move(row);
    });

    GridResult result;
    for (std::size_t e = 0; e < n; ++e) {
        if (rows[e]) result.rows.push_back(std::move(*rows[e]));
        for (auto& f : failures[e]) result.failures.push_back(std::move(f));
    }
    std::stable_sort(result.rows.begin(), result.rows.end(), [](const GridRow& x, const GridRow& y) {
        if (x.auroc.mean != y.auroc.mean) return x.auroc.mean > y.auroc.mean;
        if (x.seconds.mean != y.seconds.mean) return x.seconds.mean < y.seconds.mean;
        return x.experiment < y.experiment;
    });
    return result;
}

std::string format_grid_csv(const GridResult& result) {
    std::ostringstream out;
    out << "experiment,auroc_mean,auroc_std,auprc_mean,auprc_std,fpr90_mean,fpr90_std,seconds_mean,seconds_std\n";
    for (const auto& row : result.rows) {
        out << '"' << row.experiment << '"';
        for (const Aggregate* a : {&row.auroc, &row.auprc, &row.fpr90, &row.seconds}) {
            out << ',' << format_double(a->mean) << ',' << format_double(a->std);
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace oodkit::pipeline
