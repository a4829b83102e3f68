#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dagpo/training.hpp"

namespace dagpo {

// Multi-seed run data feeding the plot-ready exports.
struct ReportInputs {
    std::vector<std::uint64_t> seeds;       // one per history, same order
    std::vector<TrainHistory> histories;
    std::vector<std::string> pareto_metrics;  // >= 2 ids enable pareto.csv rows
};

// Writes deterministic, byte-stable files into out_dir:
//   dynamics.csv          seed,epoch,mean_acc,max_acc,mean_reward (evaluated epochs)
//   distribution_ep{N}.csv  seed,sample,acc,reward per evaluated epoch N
//   crossing.csv          seed,epoch,crossing_rate (when thresholds were configured)
//   pareto.csv            seed,epoch + one column per objective; front of each
//                         seed's final sample set
//   summary.json          versioned schema; per-epoch mean and population std
//                         across seeds
// Accuracy columns report the metric named by acc_dataset. Empty inputs give
// header-only files. Throws IoError when the directory cannot be written,
// DimensionMismatch when seeds and histories disagree in length.
void export_report(const ReportInputs& inputs, const std::string& acc_dataset,
                   const std::string& out_dir);

} // namespace dagpo
