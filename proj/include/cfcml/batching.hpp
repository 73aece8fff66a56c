#pragma once
#include <algorithm>
#include <numeric>
#include <set>
#include <vector>

#include "cfcml/errors.hpp"
#include "cfcml/rng.hpp"

namespace cfcml::dataio {

struct Batch {
    std::vector<int> indices;
};

// Deterministic epoch batching. Every sample appears exactly once; order is a
// function of (labels, batch_size, shuffle_seed) only.
//
// With `require_multiclass` the samples are dealt proportionally across the
// epoch (each class spread evenly) so that every chunk mixes classes; if any
// resulting batch still holds a single class the contract is unsatisfiable
// for this (labels, batch_size) and SingleClassBatch is thrown.
inline std::vector<Batch> make_batches(const std::vector<int>& labels, int batch_size,
                                       std::uint64_t shuffle_seed, bool require_multiclass) {
    if (batch_size < 1) throw InvalidDims("batch_size must be >= 1");
    const int n = static_cast<int>(labels.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    RngStream rng(mix_seed(shuffle_seed, 0xba7c4));
    // Fisher-Yates
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
        std::swap(order[i], order[j]);
    }

    if (require_multiclass) {
        // proportional interleave: position each sample at (rank+phase)/count
        // within its class, then sort by position
        int n_classes = 0;
        for (int l : labels) n_classes = std::max(n_classes, l + 1);
        std::vector<int> counts(n_classes, 0), rank(n, 0);
        for (int idx : order) rank[idx] = counts[labels[idx]]++;
        std::vector<std::pair<double, int>> keyed;
        keyed.reserve(n);
        for (int idx : order) {
            double key = (rank[idx] + 0.5) / counts[labels[idx]];
            keyed.emplace_back(key, idx);
        }
        std::stable_sort(keyed.begin(), keyed.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (int i = 0; i < n; ++i) order[i] = keyed[i].second;
    }

    std::vector<Batch> batches;
    for (int start = 0; start < n; start += batch_size) {
        Batch b;
        for (int i = start; i < std::min(n, start + batch_size); ++i)
            b.indices.push_back(order[i]);
        batches.push_back(std::move(b));
    }

    if (require_multiclass) {
        for (const auto& b : batches) {
            std::set<int> cls;
            for (int idx : b.indices) cls.insert(labels[idx]);
            if (cls.size() < 2)
                throw SingleClassBatch(
                    "cannot form batches with >= 2 classes each (batch_size " +
                    std::to_string(batch_size) + ", " + std::to_string(n) + " samples)");
        }
    }
    return batches;
}

}  // namespace cfcml::dataio
