#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vldg/metrics.hpp"
#include "vldg/protocol.hpp"
#include "vldg/serialize.hpp"

namespace vldg {

/// One parsed run file. Multi-source rows carry a single target block;
/// single-source rows carry one block per evaluated target.
struct LoadedRun {
    std::string mode;
    std::string strategy;
    std::string config_hash;
    Json config;
    int k = 0;
    std::string target;
    std::string source;
    std::uint64_t seed = 0;
    int selected_step = 0;
    std::map<std::string, double> macro_f1;  // target -> value
    std::map<std::string, double> accuracy;
};

inline LoadedRun parse_run_json(const Json& j, const std::string& origin) {
    if (j.value("format", "") != "vldg-run-v1")
        throw DataError(origin + ": not a vldg-run-v1 file");
    LoadedRun r;
    r.mode = j.at("mode").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config = j.at("config");
    r.k = j.at("k").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.selected_step = j.at("selected_step").get<int>();
    if (r.mode == "multi_source") {
        r.target = j.at("target").get<std::string>();
        r.macro_f1[r.target] = j.at("metrics").at("macro_f1").get<double>();
        r.accuracy[r.target] = j.at("metrics").at("accuracy").get<double>();
    } else if (r.mode == "single_source") {
        r.source = j.at("source").get<std::string>();
        const Json& targets = j.at("targets");
        for (auto it = targets.begin(); it != targets.end(); ++it) {
            r.macro_f1[it.key()] = it.value().at("macro_f1").get<double>();
            r.accuracy[it.key()] = it.value().at("accuracy").get<double>();
        }
    } else {
        throw DataError(origin + ": unknown run mode \"" + r.mode + "\"");
    }
    return r;
}

inline std::vector<LoadedRun> load_runs(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<LoadedRun> runs;
    if (fs::is_directory(dir)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir)) {
            const std::string name = e.path().filename().string();
            if (name.rfind("run-", 0) == 0 && e.path().extension() == ".json")
                files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const fs::path& p : files)
            runs.push_back(parse_run_json(read_json_file(p.string()), p.string()));
    }
    if (runs.empty()) throw DataError("no runs found in " + dir);
    int k = runs.front().k;
    for (const LoadedRun& r : runs)
        if (r.k != k)
            throw DataError("inconsistent class count across runs: " + std::to_string(k) +
                            " vs " + std::to_string(r.k));
    return runs;
}

struct TableCell {
    MeanStd ms;
    bool present = false;
};

/// A rendered table: one row per strategy (multi-source) or per training
/// source (single-source), one column per target domain plus Avg.
struct ReportTable {
    std::string mode;
    std::vector<std::string> row_names;
    std::vector<std::string> col_names;  // targets then "Avg"
    std::vector<std::vector<TableCell>> cells;
    std::map<std::string, std::string> column_maxima;  // column -> row name
};

namespace detail {

inline std::vector<std::string> sorted_domains(const std::vector<LoadedRun>& runs) {
    std::set<std::string> names;
    for (const LoadedRun& r : runs) {
        if (!r.target.empty()) names.insert(r.target);
        if (!r.source.empty()) names.insert(r.source);
        for (const auto& [t, v] : r.macro_f1) names.insert(t);
    }
    return {names.begin(), names.end()};
}

}  // namespace detail

inline ReportTable build_table(const std::vector<LoadedRun>& runs) {
    const std::string mode = runs.front().mode;
    for (const LoadedRun& r : runs)
        if (r.mode != mode) throw DataError("mixed run modes in one report");

    ReportTable table;
    table.mode = mode;
    const std::vector<std::string> domains = detail::sorted_domains(runs);

    if (mode == "multi_source") {
        std::set<std::string> strategies;
        for (const LoadedRun& r : runs) strategies.insert(r.strategy);
        table.col_names = domains;
        table.col_names.push_back("Avg");
        for (const std::string& strat : strategies) {
            table.row_names.push_back(strat);
            // target -> seed -> macro_f1
            std::map<std::string, std::map<std::uint64_t, double>> by_target;
            for (const LoadedRun& r : runs)
                if (r.strategy == strat) by_target[r.target][r.seed] = r.macro_f1.at(r.target);
            std::vector<TableCell> row;
            for (const std::string& d : domains) {
                TableCell c;
                auto it = by_target.find(d);
                if (it != by_target.end() && !it->second.empty()) {
                    std::vector<double> vals;
                    for (const auto& [seed, v] : it->second) vals.push_back(v);
                    c.ms = mean_std(vals);
                    c.present = true;
                }
                row.push_back(c);
            }
            // Per-seed cross-target averages over seeds every target has.
            std::set<std::uint64_t> common;
            bool first = true;
            for (const std::string& d : domains) {
                auto it = by_target.find(d);
                if (it == by_target.end()) continue;
                std::set<std::uint64_t> seeds;
                for (const auto& [seed, v] : it->second) seeds.insert(seed);
                if (first) {
                    common = seeds;
                    first = false;
                } else {
                    std::set<std::uint64_t> inter;
                    std::set_intersection(common.begin(), common.end(), seeds.begin(),
                                          seeds.end(), std::inserter(inter, inter.begin()));
                    common = inter;
                }
            }
            TableCell avg;
            if (!common.empty() && !by_target.empty()) {
                std::vector<double> per_seed;
                for (std::uint64_t s : common) {
                    double sum = 0.0;
                    size_t n = 0;
                    for (const auto& [d, seeds] : by_target) {
                        sum += seeds.at(s);
                        ++n;
                    }
                    per_seed.push_back(sum / static_cast<double>(n));
                }
                avg.ms = mean_std(per_seed);
                avg.present = true;
            }
            row.push_back(avg);
            table.cells.push_back(std::move(row));
        }
    } else {
        std::set<std::string> strategies;
        for (const LoadedRun& r : runs) strategies.insert(r.strategy);
        if (strategies.size() != 1)
            throw DataError("single-source report requires a single strategy, found " +
                            std::to_string(strategies.size()));
        table.col_names = domains;
        table.col_names.push_back("Avg");
        for (const std::string& src : domains) {
            table.row_names.push_back(src);
            // target -> seed -> value, restricted to runs trained on src
            std::map<std::string, std::map<std::uint64_t, double>> by_target;
            for (const LoadedRun& r : runs)
                if (r.source == src)
                    for (const auto& [t, v] : r.macro_f1) by_target[t][r.seed] = v;
            std::vector<TableCell> row;
            for (const std::string& d : domains) {
                TableCell c;
                auto it = by_target.find(d);
                if (d != src && it != by_target.end() && !it->second.empty()) {
                    std::vector<double> vals;
                    for (const auto& [seed, v] : it->second) vals.push_back(v);
                    c.ms = mean_std(vals);
                    c.present = true;
                }
                row.push_back(c);
            }
            TableCell avg;
            std::set<std::uint64_t> seeds_seen;
            for (const auto& [t, seeds] : by_target)
                for (const auto& [s, v] : seeds) seeds_seen.insert(s);
            if (!by_target.empty() && !seeds_seen.empty()) {
                std::vector<double> per_seed;
                for (std::uint64_t s : seeds_seen) {
                    double sum = 0.0;
                    size_t n = 0;
                    for (const auto& [t, seeds] : by_target) {
                        auto sv = seeds.find(s);
                        if (sv != seeds.end()) {
                            sum += sv->second;
                            ++n;
                        }
                    }
                    if (n > 0) per_seed.push_back(sum / static_cast<double>(n));
                }
                if (!per_seed.empty()) {
                    avg.ms = mean_std(per_seed);
                    avg.present = true;
                }
            }
            row.push_back(avg);
            table.cells.push_back(std::move(row));
        }
    }

    for (size_t c = 0; c < table.col_names.size(); ++c) {
        double best = -1.0;
        std::string who;
        for (size_t r = 0; r < table.row_names.size(); ++r) {
            const TableCell& cell = table.cells[r][c];
            if (cell.present && cell.ms.mean > best) {
                best = cell.ms.mean;
                who = table.row_names[r];
            }
        }
        if (!who.empty()) table.column_maxima[table.col_names[c]] = who;
    }
    return table;
}

inline std::string render_csv(const ReportTable& table) {
    std::string csv = table.mode == "multi_source" ? "strategy" : "source";
    for (const std::string& c : table.col_names) csv += "," + c;
    csv += "\n";
    for (size_t r = 0; r < table.row_names.size(); ++r) {
        csv += table.row_names[r];
        for (size_t c = 0; c < table.col_names.size(); ++c) {
            const TableCell& cell = table.cells[r][c];
            csv += ",";
            csv += cell.present ? format_mean_std_percent(cell.ms) : "-";
        }
        csv += "\n";
    }
    return csv;
}

inline Json report_json(const std::vector<LoadedRun>& runs, const ReportTable& table) {
    Json strategies = Json::object();
    for (const LoadedRun& r : runs) {
        Json& s = strategies[r.strategy];
        if (s.is_null()) s = Json{{"config_hash", r.config_hash}, {"config", r.config}};
    }
    Json rows = Json::array();
    for (size_t r = 0; r < table.row_names.size(); ++r) {
        Json cells = Json::object();
        for (size_t c = 0; c < table.col_names.size(); ++c) {
            const TableCell& cell = table.cells[r][c];
            if (cell.present)
                cells[table.col_names[c]] =
                    Json{{"mean", cell.ms.mean}, {"std", cell.ms.std}};
        }
        rows.push_back(Json{{"name", table.row_names[r]}, {"cells", cells}});
    }
    Json runs_json = Json::array();
    for (const LoadedRun& r : runs) {
        Json rj{{"mode", r.mode},
                {"strategy", r.strategy},
                {"seed", r.seed},
                {"selected_step", r.selected_step}};
        if (!r.target.empty()) rj["target"] = r.target;
        if (!r.source.empty()) rj["source"] = r.source;
        Json mf = Json::object();
        for (const auto& [t, v] : r.macro_f1) mf[t] = v;
        rj["macro_f1"] = mf;
        runs_json.push_back(rj);
    }
    return Json{{"format", "vldg-report-v1"},
                {"mode", table.mode},
                {"k", runs.front().k},
                {"strategies", strategies},
                {"rows", rows},
                {"runs", runs_json}};
}

inline Json report_meta_json(const ReportTable& table) {
    Json maxima = Json::object();
    for (const auto& [col, row] : table.column_maxima) maxima[col] = row;
    return Json{{"column_maxima", maxima}};
}

/// Reads run files from dir and writes report.json, report.csv, and
/// report_meta.json next to them.
inline ReportTable assemble_report(const std::string& run_dir, const std::string& out_dir) {
    std::vector<LoadedRun> runs = load_runs(run_dir);
    ReportTable table = build_table(runs);
    write_json_file_atomic(out_dir + "/report.json", report_json(runs, table));
    write_json_file_atomic(out_dir + "/report_meta.json", report_meta_json(table));
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string tmp = out_dir + "/report.csv.tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw Error("cannot write " + tmp);
        out << render_csv(table);
    }
    fs::rename(tmp, out_dir + "/report.csv");
    return table;
}

}  // namespace vldg
