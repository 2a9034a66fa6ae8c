#ifndef MCAF_GRADING_HPP
#define MCAF_GRADING_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mcaf/tensor.hpp"

// Haze-density grading: one-dimensional k-means threshold discovery, the
// shipped thin/moderate/thick classification rule, and stratified
// train/test/validation splitting.

namespace mcaf {

// Shipped classification constants on the 0-255 mean-dark-channel scale.
// They describe the source dataset's density distribution and are defaults,
// not re-derived at runtime.
inline constexpr std::pair<double, double> kDefaultHazeThresholds{110.58, 159.31};

enum class HazeClass { thin = 0, moderate = 1, thick = 2 };

const char* to_string(HazeClass c);
HazeClass haze_class_from_string(const std::string& s);

// density < t1 -> thin; t1 <= density <= t2 -> moderate (both ends
// inclusive); density > t2 -> thick.
HazeClass classify_haze(double density, std::pair<double, double> thresholds = kDefaultHazeThresholds);

struct KmeansResult {
    std::vector<double> centroids;  // sorted ascending
    std::vector<double> thresholds; // k-1 midpoints between adjacent centroids
    int iterations = 0;
};

// Lloyd's algorithm with deterministic quantile initialization at
// (2i+1)/(2k); converges when the largest centroid shift drops below 1e-6 or
// after 100 iterations. The result is a pure function of the input values.
KmeansResult kmeans_thresholds(std::vector<double> values, int k, uint64_t seed = 0);

struct SplitCounts {
    int64_t train = 0, test = 0, val = 0;
};

// train = floor(0.8 n), test = floor(0.1 n), validation = remainder.
SplitCounts split_counts(int64_t n, double train_ratio = 0.8, double test_ratio = 0.1);

enum class Split { train = 0, test = 1, val = 2 };

const char* to_string(Split s);

// Assigns one split per record, stratified by class label: within each class
// the record indices are shuffled by a label-split stream of the seed and cut
// into contiguous train/test/validation slices.
std::vector<Split> stratified_split(const std::vector<int>& class_of, uint64_t seed,
                                    double train_ratio = 0.8, double test_ratio = 0.1);

} // namespace mcaf

#endif
