#pragma once

#include <fstream>
#include <string>

#include "kfcs/config.hpp"
#include "kfcs/harness.hpp"

namespace kfcs {

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

/// Long-format trace: one row per (algorithm, time).
inline std::string mse_csv(const MseTrace& trace) {
    std::string out = "time,algorithm,mse_mean,mse_stderr,support_err_mean\n";
    for (Algorithm a : trace.algorithms) {
        for (int t = 1; t <= trace.horizon; ++t) {
            out += std::to_string(t);
            out += ',';
            out += algorithm_name(a);
            out += ',';
            out += format_double(trace.mse_mean(a, t));
            out += ',';
            out += format_double(trace.mse_stderr(a, t));
            out += ',';
            out += format_double(trace.support_err_mean(a, t));
            out += '\n';
        }
    }
    return out;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string out = "algorithm,peak_mse,peak_time,final_window_mean_mse,mean_support_err\n";
    for (const auto& r : rows) {
        out += r.algorithm;
        out += ',';
        out += format_double(r.peak_mse);
        out += ',';
        out += std::to_string(r.peak_time);
        out += ',';
        out += format_double(r.final_window_mean_mse);
        out += ',';
        out += format_double(r.mean_support_err);
        out += '\n';
    }
    return out;
}

/// Companion plotting script for the emitted CSV.
inline std::string plot_script() {
    return R"(#!/usr/bin/env python3
"""Plot mse.csv produced by the run subcommand."""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "mse.csv"
series = defaultdict(lambda: ([], []))
with open(path) as fh:
    for row in csv.DictReader(fh):
        ts, ms = series[row["algorithm"]]
        ts.append(int(row["time"]))
        ms.append(float(row["mse_mean"]))

for name, (ts, ms) in sorted(series.items()):
    plt.plot(ts, ms, label=name)
plt.xlabel("t")
plt.ylabel("MSE")
plt.yscale("log")
plt.legend()
plt.tight_layout()
plt.savefig("mse.png", dpi=150)
print("wrote mse.png")
)";
}

} // namespace kfcs
