#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dagpo/dag.hpp"
#include "dagpo/rng.hpp"

namespace dagpo {

// One generated architecture with its per-dataset measurements and the scalar
// reward it earned.
struct Sample {
    Dag graph;
    std::map<std::string, double> metrics;
    double reward = 0.0;
};

// A batch of samples drawn at one point in training.
struct SampleSet {
    std::vector<Sample> samples;
    int epoch = 0;
    std::uint64_t seed = 0;

    std::size_t size() const { return samples.size(); }
};

// Fraction of samples whose `dataset_id` metric is >= threshold. Samples
// missing the metric count as below it. Empty set -> 0.
double crossing_rate(const SampleSet& s, double threshold, const std::string& dataset_id);

enum class ExtremeMode { max, min };

// Mean over `resamples` bootstrap rounds of the extreme of `batch` draws with
// replacement from the pool. Throws EmptyPool on an empty pool, RangeError
// when batch or resamples is < 1.
double bootstrap_extreme(std::span<const double> pool, int batch, int resamples,
                         ExtremeMode mode, RngStream& rng);

// Relative enrichment of threshold-crossing samples among the top
// `top_fraction` of the set ranked by the metric:
//   P(metric >= threshold | top group) / P(metric >= threshold) - 1.
// By convention 0 when no sample crosses at all or the set is empty. Throws
// RangeError unless top_fraction is in (0, 1].
double ood_lift(const SampleSet& s, double threshold, const std::string& dataset_id,
                double top_fraction = 0.1);

// Objective vectors under maximization; every point must weakly dominate the
// reference point.
struct ParetoFront {
    std::vector<std::vector<double>> points;
    std::vector<double> reference;
};

// Lebesgue measure of the union of boxes [reference, point]. Dominated and
// duplicate points are ignored. Supports 1 to 3 objectives; throws
// DimensionUnsupported above that, DimensionMismatch on ragged input,
// RangeError when a point falls below the reference.
double hypervolume(const ParetoFront& front);

// Maximal non-dominated subset of the samples projected onto the given
// metrics (componentwise >= with at least one strict). Samples missing any
// requested metric are skipped; throws EmptyPool when none qualify. The
// reference point is the origin (metrics are assumed normalized to [0,1]).
ParetoFront pareto_extract(const SampleSet& s, const std::vector<std::string>& dataset_ids);

} // namespace dagpo
