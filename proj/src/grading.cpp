#include "mcaf/grading.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mcaf/rng.hpp"

namespace mcaf {

const char* to_string(HazeClass c) {
    switch (c) {
        case HazeClass::thin: return "thin";
        case HazeClass::moderate: return "moderate";
        default: return "thick";
    }
}

HazeClass haze_class_from_string(const std::string& s) {
    if (s == "thin") return HazeClass::thin;
    if (s == "moderate") return HazeClass::moderate;
    if (s == "thick") return HazeClass::thick;
    throw RangeError("unknown haze class: " + s);
}

HazeClass classify_haze(double density, std::pair<double, double> thresholds) {
    if (thresholds.first > thresholds.second) throw RangeError("thresholds must be sorted");
    if (density < thresholds.first) return HazeClass::thin;
    if (density <= thresholds.second) return HazeClass::moderate;
    return HazeClass::thick;
}

KmeansResult kmeans_thresholds(std::vector<double> values, int k, uint64_t /*seed*/) {
    if (k < 1) throw RangeError("kmeans: k must be >= 1");
    if (static_cast<int>(values.size()) < k) throw RangeError("kmeans: fewer values than clusters");
    std::sort(values.begin(), values.end());
    {
        int distinct = 1;
        for (size_t i = 1; i < values.size(); ++i)
            if (values[i] != values[i - 1]) ++distinct;
        if (distinct < k) throw RangeError("kmeans: fewer distinct values than clusters");
    }

    const size_t n = values.size();
    KmeansResult res;
    res.centroids.resize(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        // quantile (2i+1)/(2k) of the sorted sample
        const double q = static_cast<double>(2 * i + 1) / static_cast<double>(2 * k);
        size_t idx = static_cast<size_t>(q * static_cast<double>(n));
        idx = std::min(idx, n - 1);
        res.centroids[static_cast<size_t>(i)] = values[idx];
    }

    std::vector<double> sums(static_cast<size_t>(k));
    std::vector<int64_t> counts(static_cast<size_t>(k));
    for (res.iterations = 0; res.iterations < 100; ++res.iterations) {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (double v : values) {
            int best = 0;
            double bd = std::abs(v - res.centroids[0]);
            for (int c = 1; c < k; ++c) {
                const double d = std::abs(v - res.centroids[static_cast<size_t>(c)]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            sums[static_cast<size_t>(best)] += v;
            counts[static_cast<size_t>(best)] += 1;
        }
        double shift = 0;
        for (int c = 0; c < k; ++c)
            if (counts[static_cast<size_t>(c)] > 0) {
                const double next = sums[static_cast<size_t>(c)] / static_cast<double>(counts[static_cast<size_t>(c)]);
                shift = std::max(shift, std::abs(next - res.centroids[static_cast<size_t>(c)]));
                res.centroids[static_cast<size_t>(c)] = next;
            }
        if (shift < 1e-6) break;
    }

    std::sort(res.centroids.begin(), res.centroids.end());
    for (int c = 0; c + 1 < k; ++c)
        res.thresholds.push_back(0.5 * (res.centroids[static_cast<size_t>(c)] +
                                        res.centroids[static_cast<size_t>(c) + 1]));
    return res;
}

SplitCounts split_counts(int64_t n, double train_ratio, double test_ratio) {
    if (n < 0) throw RangeError("split: negative count");
    SplitCounts s;
    s.train = static_cast<int64_t>(std::floor(train_ratio * static_cast<double>(n)));
    s.test = static_cast<int64_t>(std::floor(test_ratio * static_cast<double>(n)));
    s.val = n - s.train - s.test;
    return s;
}

const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::test: return "test";
        default: return "val";
    }
}

std::vector<Split> stratified_split(const std::vector<int>& class_of, uint64_t seed,
                                    double train_ratio, double test_ratio) {
    std::map<int, std::vector<size_t>> members;
    for (size_t i = 0; i < class_of.size(); ++i) members[class_of[i]].push_back(i);

    std::vector<Split> out(class_of.size(), Split::val);
    Rng base(seed);
    for (auto& [label, idx] : members) {
        Rng rng = base.split("stratified-class-" + std::to_string(label));
        rng.shuffle(idx.begin(), idx.end());
        const SplitCounts c = split_counts(static_cast<int64_t>(idx.size()), train_ratio, test_ratio);
        for (size_t i = 0; i < idx.size(); ++i) {
            Split s = Split::val;
            if (static_cast<int64_t>(i) < c.train)
                s = Split::train;
            else if (static_cast<int64_t>(i) < c.train + c.test)
                s = Split::test;
            out[idx[i]] = s;
        }
    }
    return out;
}

} // namespace mcaf
